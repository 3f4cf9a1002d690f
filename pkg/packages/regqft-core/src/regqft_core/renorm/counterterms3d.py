import threading
from itertools import pairwise
from typing import Callable

import logfire
import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field
from qft_tables import ComplexValue

from ..configs import EngineSettings, QuadratureScheme
from ..data import SpacetimeTestFunction
from ..errors import BudgetExceededError
from ..kernels import FieldConfiguration, PairKernel, PropagatorEvaluator
from ..quadrature import IntegrationRequest, IntegrationResult, integrate, tensor_points
from ..utils import ComplexArray, FloatArray, parallel_map
from ..vertex import correlation, correlation_box

MASS_PREFACTOR = -6j
SUNSET_PREFACTOR = 0.75
TRIANGLE_PREFACTOR = 4.5
KERNEL_BLOCK = 1 << 20
INNER_BLOCK = 1 << 18


def _validate(ev: PropagatorEvaluator, Lambda2: float) -> None:
    if Lambda2 <= 0:
        raise ValueError(f"the counterterms need Lambda2 > 0, got {Lambda2}")
    if ev.params.dimension != 3:
        raise ValueError(f"the phi^4_3 counterterms live in d = 3, got d = {ev.params.dimension}")


def _evaluator_at(ev: PropagatorEvaluator, Lambda2: float) -> PropagatorEvaluator:
    _validate(ev, Lambda2)
    if ev.params.Lambda == Lambda2:
        return ev
    return ev.with_lambda(Lambda2)


def _feynman(ev: PropagatorEvaluator, x: FloatArray, y: FloatArray) -> ComplexArray:
    dt = x[:, 0] - y[:, 0]
    r = np.linalg.norm(x[:, 1:] - y[:, 1:], axis=1)
    return ev.kernel_values(PairKernel.FEYNMAN, dt, r)


class MassCounterterm:
    """
    x -> -6i int Delta_F(x - y)^3 g(y) dy per unit lambda^2, on a fixed tensor
    rule over supp g. Values are memoized per point: tensor quadratures revisit
    the same vertex positions many times.
    """

    def __init__(self, g: SpacetimeTestFunction, ev: PropagatorEvaluator, nodes: int = 16) -> None:
        self.g = g
        self.ev = ev
        points, weights = tensor_points(g.box, nodes)
        weights = weights * g(points)
        keep = weights != 0.0
        self._y = points[keep]
        self._w = weights[keep]
        self._cache: dict[tuple[float, ...], complex] = {}
        self._lock = threading.Lock()

    def _compute(self, x: FloatArray) -> ComplexArray:
        out = np.empty(x.shape[0], dtype=np.complex128)
        step = max(1, KERNEL_BLOCK // self._y.shape[0])
        for start in range(0, x.shape[0], step):
            chunk = x[start : start + step]
            diff = chunk[:, None, :] - self._y[None, :, :]
            dt = diff[..., 0].ravel()
            r = np.linalg.norm(diff[..., 1:], axis=-1).ravel()
            kernel = self.ev.kernel_values(PairKernel.FEYNMAN, dt, r).reshape(chunk.shape[0], -1)
            out[start : start + step] = MASS_PREFACTOR * (kernel**3 @ self._w)
        return out

    def __call__(self, x: npt.ArrayLike) -> ComplexArray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        unique, inverse = np.unique(x, axis=0, return_inverse=True)
        keys = [tuple(row) for row in unique]
        missing = [i for i, key in enumerate(keys) if key not in self._cache]
        if missing:
            values = self._compute(unique[missing])
            with self._lock:
                for i, value in zip(missing, values):
                    self._cache[keys[i]] = complex(value)
        return np.array([self._cache[key] for key in keys], dtype=np.complex128)[inverse.ravel()]


def delta_m(
    x: npt.ArrayLike,
    lambda_: float,
    Lambda2: float,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """delta m(x) = -6i lambda^2 int Delta_F(x - y)^3 g(y) dy"""
    ev2 = _evaluator_at(ev, Lambda2)
    settings = settings or ev.settings
    if lambda_ == 0:
        return IntegrationResult.exact(0.0)
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)

    def integrand(y: FloatArray) -> ComplexArray:
        return g(y) * _feynman(ev2, np.broadcast_to(point, y.shape), y) ** 3

    req = IntegrationRequest.from_settings(integrand, g.box, settings.quadrature, label="delta m")
    return integrate(req).scaled(MASS_PREFACTOR * lambda_**2)


def sunset_integral(
    Lambda2: float,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """(3/4) int int Delta_F(x - y)^4 g(x) g(y), reduced to int dz Delta_F(z)^4 (g x g)(z)"""
    ev2 = _evaluator_at(ev, Lambda2)
    settings = settings or ev.settings

    def integrand(z: FloatArray) -> ComplexArray:
        r = np.linalg.norm(z[:, 1:], axis=1)
        return correlation(g, g, z) * ev2.kernel_values(PairKernel.FEYNMAN, z[:, 0], r) ** 4

    req = IntegrationRequest.from_settings(
        integrand, correlation_box(g, g), settings.quadrature, label="c, lambda^2 term"
    )
    return integrate(req).scaled(SUNSET_PREFACTOR)


def triangle_integral(
    Lambda2: float,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """
    (9/2) int Delta_F(x - y)^2 Delta_F(y - z)^2 Delta_F(z - x)^2 g(x) g(y) g(z)
    over nine dimensions, by quasi-random quadrature only
    """
    ev2 = _evaluator_at(ev, Lambda2)
    settings = settings or ev.settings
    if settings.quadrature.scheme is QuadratureScheme.TENSOR_GAUSS:
        raise BudgetExceededError(
            "the lambda^3 term of c is a 9-dimensional integral; tensor quadrature is refused"
        )
    d = g.dimension

    def integrand(points: FloatArray) -> ComplexArray:
        x, y, z = points[:, :d], points[:, d : 2 * d], points[:, 2 * d :]
        weight = g(x) * g(y) * g(z)
        return weight * (_feynman(ev2, x, y) * _feynman(ev2, y, z) * _feynman(ev2, z, x)) ** 2

    req = IntegrationRequest.from_settings(
        integrand,
        g.box * 3,
        settings.quadrature,
        scheme=QuadratureScheme.QUASI_RANDOM,
        label="c, lambda^3 term",
    )
    return integrate(req).scaled(TRIANGLE_PREFACTOR)


def c_constant(
    lambda_: float,
    Lambda2: float,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """c = lambda^2 c_2 + lambda^3 c_3"""
    if lambda_ == 0:
        _validate(ev, Lambda2)
        return IntegrationResult.exact(0.0)
    c2 = sunset_integral(Lambda2, g, ev, settings)
    c3 = triangle_integral(Lambda2, g, ev, settings)
    return c2.scaled(lambda_**2).plus(c3.scaled(lambda_**3))


class CountertermSet3D(BaseModel):
    """
    delta m and c at one Lambda2. The constants are stored per power of the
    coupling: c = lambda^2 c2 + lambda^3 c3 and delta m(x) = lambda^2 mass(x).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lambda_: float
    Lambda2: float = Field(gt=0)
    c2: IntegrationResult
    c3: IntegrationResult
    mass: MassCounterterm = Field(exclude=True)

    @property
    def c(self) -> complex:
        return self.lambda_**2 * self.c2.value + self.lambda_**3 * self.c3.value

    @property
    def c_error(self) -> float:
        return (
            self.lambda_**2 * self.c2.error_estimate
            + abs(self.lambda_) ** 3 * self.c3.error_estimate
        )

    def delta_m(self, x: npt.ArrayLike) -> ComplexArray:
        return self.lambda_**2 * self.mass(x)

    def with_coupling(self, lambda_: float) -> "CountertermSet3D":
        return self.model_copy(update={"lambda_": lambda_})


def compute_counterterms_3d(
    lambda_: float,
    Lambda2: float,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
    threads: int | None = None,
    mass_nodes: int = 16,
) -> CountertermSet3D:
    ev2 = _evaluator_at(ev, Lambda2)
    settings = settings or ev.settings
    with logfire.span(f"phi^4_3 counterterms at Lambda2={Lambda2}"):
        c2, c3 = parallel_map(
            lambda job: job(Lambda2, g, ev2, settings),
            [sunset_integral, triangle_integral],
            settings.resolve_threads(threads),
        )
        logfire.info(
            f"counterterms at Lambda2={Lambda2}: c2={c2.value:.6e} +- {c2.error_estimate:.1e}, "
            f"c3={c3.value:.6e} +- {c3.error_estimate:.1e}"
        )
    return CountertermSet3D(
        lambda_=lambda_,
        Lambda2=Lambda2,
        c2=c2,
        c3=c3,
        mass=MassCounterterm(g, ev2, mass_nodes),
    )


class TwoLegRow(BaseModel):
    Lambda2: float
    unsubtracted: ComplexValue
    unsubtracted_error: float = Field(ge=0)
    subtracted: ComplexValue
    subtracted_error: float = Field(ge=0)


class TwoLegReport(BaseModel):
    rows: list[TwoLegRow]
    increments: list[float]
    unsubtracted_growing: bool
    increments_decreasing: bool


def _subtracted_weight(
    g: SpacetimeTestFunction, phi: FieldConfiguration, nodes: int
) -> Callable[[FloatArray], FloatArray]:
    """
    H(z) = int g(y + z) g(y) phi(y + z) (phi(y + z) - phi(y)) dy on a tensor rule
    over the per-axis overlap of the two supports
    """
    base, base_w = tensor_points([(-1.0, 1.0)] * g.dimension, nodes)
    lows = np.array([lo for lo, _ in g.box])
    highs = np.array([hi for _, hi in g.box])

    def weight(z: FloatArray) -> FloatArray:
        out = np.empty(z.shape[0])
        step = max(1, INNER_BLOCK // base.shape[0])
        for start in range(0, z.shape[0], step):
            zc = z[start : start + step]
            low = np.maximum(lows, lows - zc)
            high = np.minimum(highs, highs - zc)
            half = np.clip(0.5 * (high - low), 0.0, None)
            mid = 0.5 * (high + low)
            y = mid[:, None, :] + half[:, None, :] * base[None, :, :]
            shifted = y + zc[:, None, :]
            flat_y = y.reshape(-1, g.dimension)
            flat_s = shifted.reshape(-1, g.dimension)
            phi_s = phi(flat_s)
            values = (g(flat_s) * g(flat_y) * phi_s * (phi_s - phi(flat_y))).reshape(zc.shape[0], -1)
            out[start : start + step] = np.prod(half, axis=1) * (values @ base_w)
        return out

    return weight


def two_leg_stabilization(
    lambda_: float,
    Lambda2_sequence: list[float],
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
    inner_nodes: int = 12,
) -> TwoLegReport:
    """
    Along a decreasing Lambda2 sequence: the bare two-leg integral
    int int Delta_F^3 g g, which diverges, against the delta m subtracted
    combination 3 lambda^2 int int Delta_F(x - y)^3 g(x) g(y) phi(x) (phi(x) - phi(y)),
    which settles.
    """
    settings = settings or ev.settings
    H = _subtracted_weight(g, phi, inner_nodes)
    box = correlation_box(g, g)
    rows = []
    with logfire.span("two-leg stabilization"):
        for Lambda2 in Lambda2_sequence:
            ev2 = _evaluator_at(ev, Lambda2)

            def cubed(z: FloatArray, ev2: PropagatorEvaluator = ev2) -> ComplexArray:
                r = np.linalg.norm(z[:, 1:], axis=1)
                return ev2.kernel_values(PairKernel.FEYNMAN, z[:, 0], r) ** 3

            bare = integrate(
                IntegrationRequest.from_settings(
                    lambda z, cubed=cubed: cubed(z) * correlation(g, g, z),
                    box,
                    settings.quadrature,
                    scheme=QuadratureScheme.ADAPTIVE,
                    label=f"bare two-leg Lambda2={Lambda2}",
                )
            )
            subtracted = integrate(
                IntegrationRequest.from_settings(
                    lambda z, cubed=cubed: cubed(z) * H(z),
                    box,
                    settings.quadrature,
                    scheme=QuadratureScheme.ADAPTIVE,
                    label=f"subtracted two-leg Lambda2={Lambda2}",
                )
            ).scaled(3.0 * lambda_**2)
            rows.append(
                TwoLegRow(
                    Lambda2=Lambda2,
                    unsubtracted=bare.value,
                    unsubtracted_error=bare.error_estimate,
                    subtracted=subtracted.value,
                    subtracted_error=subtracted.error_estimate,
                )
            )
    increments = [abs(b.subtracted - a.subtracted) for a, b in pairwise(rows)]
    growing = all(abs(b.unsubtracted) > abs(a.unsubtracted) for a, b in pairwise(rows))
    settling = all(later < earlier for earlier, later in pairwise(increments))
    if not (growing and settling):
        logfire.warning(
            f"two-leg stabilization: bare growth {growing}, shrinking increments {settling}"
        )
    return TwoLegReport(
        rows=rows,
        increments=increments,
        unsubtracted_growing=growing,
        increments_decreasing=settling,
    )
