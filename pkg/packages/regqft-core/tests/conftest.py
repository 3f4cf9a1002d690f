import pytest

from regqft_core.configs import EngineSettings, QuadratureSettings
from regqft_core.data import CutoffSpec, ModelParams, SpacetimeTestFunction
from regqft_core.kernels import PropagatorEvaluator


@pytest.fixture(scope="session")
def settings() -> EngineSettings:
    """Engine settings with a desk-scale quadrature budget"""
    return EngineSettings(
        threads=1,
        quadrature=QuadratureSettings(target_rel_tol=1e-6, max_evals=400_000),
    )


@pytest.fixture(scope="session")
def ev2(settings: EngineSettings) -> PropagatorEvaluator:
    """d = 2, m = 1, Lambda = 1"""
    return PropagatorEvaluator(ModelParams(dimension=2, mass=1.0, Lambda=1.0), CutoffSpec(), settings)


@pytest.fixture(scope="session")
def ev3(settings: EngineSettings) -> PropagatorEvaluator:
    """d = 3, m = 1, Lambda = 0.5"""
    return PropagatorEvaluator(ModelParams(dimension=3, mass=1.0, Lambda=0.5), CutoffSpec(), settings)


@pytest.fixture
def g2() -> SpacetimeTestFunction:
    """Unit-mass bump on a small 2-D box"""
    return SpacetimeTestFunction.unit(center=[0.0, 0.0], halfwidth=[0.3, 0.3])


@pytest.fixture
def g3() -> SpacetimeTestFunction:
    """Unit-mass bump on a small 3-D box"""
    return SpacetimeTestFunction.unit(center=[0.0, 0.0, 0.0], halfwidth=[0.25, 0.25, 0.25])
