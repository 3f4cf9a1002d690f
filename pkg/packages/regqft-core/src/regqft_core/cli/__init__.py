from .app import app
from .scenario import ScenarioConfig
from .verify import VerifyRow, run_verify

__all__ = ["ScenarioConfig", "VerifyRow", "app", "run_verify"]
