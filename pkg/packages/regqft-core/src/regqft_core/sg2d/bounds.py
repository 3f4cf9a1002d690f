import math
from itertools import combinations
from typing import Sequence

import logfire
import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field
from qft_tables import ComplexValue
from scipy.special import k0, y0

from ..configs import EngineSettings
from ..data import ChargeProfile, SpacetimeTestFunction, VertexFactor
from ..errors import (
    BudgetExceededError,
    CalibrationFailureError,
    ExponentViolationError,
    LightconeSingularityError,
    OutOfRangeError,
)
from ..kernels import FieldConfiguration, PropagatorEvaluator
from ..kernels.propagators import LIGHTCONE_TOL
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..smatrix import InteractionLagrangian, smatrix_order
from ..utils import FloatArray, parallel_map
from ..vertex import ProductKind, nfold_product

MAX_BOUND_ORDER = 3
CALIBRATION_FLOOR = 1e-12


class SG2DParams(BaseModel):
    """
    Parameters of the two-dimensional bound: smearing supported in the double
    cone D_mu = {|t + x| < mu, |t - x| < mu}, charges in [-a_max, a_max] and
    Hoelder exponents 1/p + 1/q = 1.
    """

    mass: float = Field(default=1.0, gt=0)
    mu: float = Field(default=1.0, gt=0)
    a_max: float = Field(default=1.0, gt=0)
    p: float = Field(default=2.0, ge=1)
    C_cal: float = Field(default=1.0, gt=0)

    @property
    def q(self) -> float:
        if self.p == 1:
            return math.inf
        return self.p / (self.p - 1.0)

    @property
    def p_limit(self) -> float:
        return 4.0 * math.pi / (self.a_max * self.mu**2)

    def check_exponents(self) -> None:
        if self.a_max**2 >= 4.0 * math.pi:
            raise ExponentViolationError(
                f"a_max^2 = {self.a_max**2:.6g} is not below 4 pi; the bound needs the finite regime"
            )
        if not 1.0 <= self.p < self.p_limit:
            raise ExponentViolationError(
                f"p = {self.p} is outside [1, {self.p_limit:.6g}) for a_max={self.a_max}, mu={self.mu}"
            )


def _interval(t: npt.ArrayLike, x: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    interval = x * x - t * t
    if np.any(np.abs(interval) < LIGHTCONE_TOL):
        raise LightconeSingularityError("w_s is singular on the light cone, including the origin")
    return interval, np.sqrt(np.abs(interval))


def ws_2d(t: npt.ArrayLike, x: npt.ArrayLike, m: float) -> FloatArray:
    """
    w_s = Re K0(m sqrt(x^2 - t^2)) / (2 pi): K0 / (2 pi) at spacelike
    separation, its timelike continuation -Y0 / 4 otherwise
    """
    interval, s = _interval(t, x)
    spacelike = interval > 0
    safe = np.where(spacelike, m * s, 1.0)
    timelike = np.where(spacelike, 1.0, m * s)
    return np.where(spacelike, k0(safe) / (2.0 * math.pi), -y0(timelike) / 4.0)


def _log_part(interval: FloatArray, mu: float) -> FloatArray:
    return -np.log(np.abs(interval) / (4.0 * mu * mu)) / (4.0 * math.pi)


def ws_log_split(
    t: npt.ArrayLike, x: npt.ArrayLike, m: float, mu: float
) -> tuple[FloatArray, FloatArray]:
    """(w_s0, r) with w_s0 = -(1 / 4 pi) log(|x^2 - t^2| / 4 mu^2) and r = w_s - w_s0"""
    interval, _ = _interval(t, x)
    singular = _log_part(interval, mu)
    return singular, ws_2d(t, x, m) - singular


def k_constant(m: float, mu: float) -> float:
    """K = lim (w_s - w_s0) at the tip of the cone = -(1 / 4 pi)(2 gamma + log(m^2 mu^2))"""
    if m <= 0 or mu <= 0:
        raise ValueError(f"k_constant needs m, mu > 0, got m={m}, mu={mu}")
    return -(2.0 * np.euler_gamma + math.log(m * m * mu * mu)) / (4.0 * math.pi)


def lq_norm(g: SpacetimeTestFunction, q: float, settings: EngineSettings | None = None) -> float:
    """|g|_q by quadrature over supp g; q = inf is the sup, attained at the center"""
    if q < 1:
        raise ValueError(f"L^q norms need q >= 1, got {q}")
    if math.isinf(q):
        return g.lq_norm(q)
    settings = settings or EngineSettings()

    def integrand(x: FloatArray) -> FloatArray:
        return np.abs(g(x)) ** q

    req = IntegrationRequest.from_settings(
        integrand, g.box, settings.quadrature, label=f"|g|_{q:g}^{q:g}"
    )
    return integrate(req).value.real ** (1.0 / q)


def check_supports(params: SG2DParams, f: ChargeProfile, g: SpacetimeTestFunction) -> None:
    low, high = f.support_interval()
    if low < -params.a_max or high > params.a_max:
        raise OutOfRangeError(
            f"charge support [{low}, {high}] leaves [-{params.a_max}, {params.a_max}]"
        )
    if g.dimension != 2:
        raise OutOfRangeError(f"the bound lives in d = 2, got a {g.dimension}-dimensional smearing")
    (t0, t1), (x0, x1) = g.box
    reach = max(abs(t0 + x0), abs(t1 + x1), abs(t0 - x1), abs(t1 - x0))
    if reach > params.mu:
        raise OutOfRangeError(f"supp g reaches |t +- x| = {reach:.6g} beyond mu = {params.mu}")


def sn_bound(
    n: int,
    params: SG2DParams,
    f: ChargeProfile,
    g: SpacetimeTestFunction,
    settings: EngineSettings | None = None,
) -> float:
    """
    |f|_1^n / n! * exp(n K a^2 / 2) * (2 mu)^(n a^2 / 4 pi) * |g|_q^n * (C^n n!)^(1/p)

    with a = a_max throughout and C = C_cal.
    """
    if n < 0:
        raise ValueError(f"order must be >= 0, got {n}")
    params.check_exponents()
    check_supports(params, f, g)
    if n == 0:
        return 1.0
    a2 = params.a_max**2
    K = k_constant(params.mass, params.mu)
    log_bound = (
        n * math.log(f.l1_norm)
        - math.lgamma(n + 1)
        + n * K * a2 / 2.0
        + n * a2 / (4.0 * math.pi) * math.log(2.0 * params.mu)
        + n * math.log(lq_norm(g, params.q, settings))
        + (n * math.log(params.C_cal) + math.lgamma(n + 1)) / params.p
    )
    return math.exp(log_bound)


def _check_evaluator(ev: PropagatorEvaluator) -> None:
    if ev.params.dimension != 2:
        raise ValueError(f"the sine-Gordon bounds live in d = 2, got d = {ev.params.dimension}")
    if not ev.regularized:
        raise ValueError("the bound is checked at a small Lambda > 0")


class SnBoundRow(BaseModel):
    n: int
    value: ComplexValue
    abs_value: float = Field(ge=0)
    quad_error: float = Field(ge=0)
    bound: float = Field(ge=0)
    ratio: float = Field(ge=0)


class SnBoundReport(BaseModel):
    Lambda: float
    C_cal: float
    rows: list[SnBoundRow]

    @property
    def max_ratio(self) -> float:
        return max((row.ratio for row in self.rows), default=0.0)


def verify_sn_bound(
    n_values: Sequence[int],
    params: SG2DParams,
    f: ChargeProfile,
    g: SpacetimeTestFunction,
    phi: FieldConfiguration,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
    threads: int | None = None,
) -> SnBoundReport:
    """
    |S_n| by quadrature against sn_bound with the shipped calibration. A
    ratio above one raises CalibrationFailureError carrying the report.
    """
    _check_evaluator(ev)
    settings = settings or ev.settings
    too_high = [n for n in n_values if n > MAX_BOUND_ORDER]
    if too_high:
        raise BudgetExceededError(f"bound checks stop at order {MAX_BOUND_ORDER}, got {too_high}")
    L = InteractionLagrangian.from_profile(1.0, f, g)

    def row(n: int) -> SnBoundRow:
        result = smatrix_order(n, L, ev, phi, settings)
        bound = sn_bound(n, params, f, g, settings)
        size = abs(result.value)
        return SnBoundRow(
            n=n,
            value=result.value,
            abs_value=size,
            quad_error=result.error_estimate,
            bound=bound,
            ratio=size / bound,
        )

    with logfire.span(f"sine-Gordon bound at Lambda={ev.params.Lambda}"):
        rows = parallel_map(row, list(n_values), settings.resolve_threads(threads))
    report = SnBoundReport(Lambda=ev.params.Lambda, C_cal=params.C_cal, rows=rows)
    failed = [r.n for r in rows if r.ratio > 1.0]
    if failed:
        logfire.warning(f"|S_n| exceeds the bound at orders {failed}, max ratio {report.max_ratio:.4g}")
        raise CalibrationFailureError(
            f"C_cal = {params.C_cal} is too small: |S_n| exceeds the bound at orders {failed}",
            report,
        )
    return report


class Calibration(BaseModel):
    C_cal: float = Field(gt=0)
    s2_abs: float = Field(ge=0)
    s2_error: float = Field(ge=0)
    bound_at_unit_constant: float = Field(gt=0)


def calibrate_constant(
    params: SG2DParams,
    f: ChargeProfile,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
    phi: FieldConfiguration | None = None,
) -> Calibration:
    """
    Smallest C for which the n = 2 bound dominates |S_2|; the bound scales as
    C^(2/p), so C = (|S_2| / bound(C = 1))^(p/2).
    """
    _check_evaluator(ev)
    settings = settings or ev.settings
    phi = phi or FieldConfiguration.zero()
    L = InteractionLagrangian.from_profile(1.0, f, g)
    s2 = smatrix_order(2, L, ev, phi, settings)
    unit = sn_bound(2, params.model_copy(update={"C_cal": 1.0}), f, g, settings)
    C = max((abs(s2.value) / unit) ** (params.p / 2.0), CALIBRATION_FLOOR)
    logfire.info(f"calibrated C = {C:.6g} from |S_2| = {abs(s2.value):.6g}")
    return Calibration(
        C_cal=C, s2_abs=abs(s2.value), s2_error=s2.error_estimate, bound_at_unit_constant=unit
    )


class HoelderReport(BaseModel):
    charges: list[float]
    mixed: float = Field(ge=0)
    equal_charge: list[float]
    lhs: float = Field(ge=0)
    rhs: float = Field(ge=0)
    margin: float = Field(ge=0)
    holds: bool


def hoelder_step_report(
    charges: Sequence[float],
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
) -> HoelderReport:
    """
    |<V_a1 ... V_an>_0|^n against prod_j <V_aj ... V_aj>_0 for the commutative
    product built on w_s, at the vacuum field.
    """
    _check_evaluator(ev)
    settings = settings or ev.settings
    n = len(charges)
    if n < 2:
        raise ValueError(f"the Hoelder step needs at least two charges, got {n}")
    phi = FieldConfiguration.zero()

    def product(values: Sequence[float]) -> IntegrationResult:
        factors = [VertexFactor(charge=a, smearing=g) for a in values]
        return nfold_product(factors, ProductKind.COMMUTATIVE, ev, phi, settings)

    mixed = product(charges)
    equal = [product([a] * n) for a in charges]
    m = abs(mixed.value)
    lhs = m**n
    rhs = math.prod(abs(e.value) for e in equal)
    margin = n * m ** (n - 1) * mixed.error_estimate + rhs * sum(
        e.error_estimate / max(abs(e.value), 1e-300) for e in equal
    )
    return HoelderReport(
        charges=list(charges),
        mixed=m,
        equal_charge=[abs(e.value) for e in equal],
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        holds=lhs <= rhs + margin,
    )


class ConditioningReport(BaseModel):
    a: float
    n: int
    K: float
    full_kernel: float = Field(ge=0)
    log_kernel: float = Field(ge=0)
    factor: float = Field(gt=0)
    margin: float = Field(ge=0)
    holds: bool


def conditioning_step_report(
    a: float,
    n: int,
    params: SG2DParams,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
) -> ConditioningReport:
    """
    |<V_a ... V_a>_0| on w_s against exp(n a^2 K / 2) times the same product on
    the pure log kernel w_s0, for which exp(-a^2 w_s0) = (|x^2 - t^2| / 4 mu^2)^(a^2 / 4 pi).
    """
    _check_evaluator(ev)
    settings = settings or ev.settings
    if not 2 <= n <= MAX_BOUND_ORDER:
        raise ValueError(f"the conditioning step runs for 2 <= n <= {MAX_BOUND_ORDER}, got {n}")
    full = nfold_product(
        [VertexFactor(charge=a, smearing=g)] * n,
        ProductKind.COMMUTATIVE,
        ev,
        FieldConfiguration.zero(),
        settings,
    )
    power = a * a / (4.0 * math.pi)
    scale = 4.0 * params.mu**2

    def integrand(points: FloatArray) -> FloatArray:
        xs = [points[:, 2 * i : 2 * i + 2] for i in range(n)]
        values = np.ones(points.shape[0])
        for x in xs:
            values = values * g(x)
        for i, j in combinations(range(n), 2):
            dt = xs[i][:, 0] - xs[j][:, 0]
            dx = xs[i][:, 1] - xs[j][:, 1]
            values = values * (np.abs(dx * dx - dt * dt) / scale) ** power
        return values

    log_kernel = integrate(
        IntegrationRequest.from_settings(
            integrand, g.box * n, settings.quadrature, label=f"log-kernel product n={n}"
        )
    )
    K = k_constant(params.mass, params.mu)
    factor = math.exp(n * a * a * K / 2.0)
    margin = full.error_estimate + factor * log_kernel.error_estimate
    lhs = abs(full.value)
    rhs = factor * abs(log_kernel.value)
    return ConditioningReport(
        a=a,
        n=n,
        K=K,
        full_kernel=lhs,
        log_kernel=abs(log_kernel.value),
        factor=factor,
        margin=margin,
        holds=lhs <= rhs + margin,
    )
