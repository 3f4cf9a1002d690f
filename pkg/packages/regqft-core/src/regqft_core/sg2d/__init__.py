from .bounds import (
    Calibration,
    ConditioningReport,
    HoelderReport,
    SG2DParams,
    SnBoundReport,
    SnBoundRow,
    calibrate_constant,
    check_supports,
    conditioning_step_report,
    hoelder_step_report,
    k_constant,
    lq_norm,
    sn_bound,
    verify_sn_bound,
    ws_2d,
    ws_log_split,
)

__all__ = [
    "Calibration",
    "ConditioningReport",
    "HoelderReport",
    "SG2DParams",
    "SnBoundReport",
    "SnBoundRow",
    "calibrate_constant",
    "check_supports",
    "conditioning_step_report",
    "hoelder_step_report",
    "k_constant",
    "lq_norm",
    "sn_bound",
    "verify_sn_bound",
    "ws_2d",
    "ws_log_split",
]
