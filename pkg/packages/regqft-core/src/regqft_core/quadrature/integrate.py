import heapq
import math
from typing import Callable, Literal, Sequence

import logfire
import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field
from qft_tables import ComplexValue
from scipy.stats import qmc

from ..configs import QuadratureScheme, QuadratureSettings
from ..errors import BadBoxError, NonConvergenceError
from ..utils import ComplexArray, FloatArray, leggauss

Integrand = Callable[[FloatArray], npt.ArrayLike]

FLOOR = 1e-300
ROUNDOFF = 1e-14
CHUNK = 1 << 15

Acceptance = Literal["exact", "relative", "absolute", "roundoff"]
# weakest last; a sum is only as well accepted as its weakest part
ACCEPTANCE_ORDER: tuple[Acceptance, ...] = ("exact", "relative", "absolute", "roundoff")


class IntegrationRequest(BaseModel):
    """
    A vectorized integrand over a compact box: the integrand maps an (N, n)
    array of nodes to N complex values.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    integrand: Integrand
    box: list[tuple[float, float]]
    scheme: QuadratureScheme = QuadratureScheme.AUTO
    target_rel_tol: float = Field(default=1e-6, gt=0)
    abs_tol: float = Field(default=0.0, ge=0)
    max_evals: int = Field(default=2_000_000, ge=1)
    seed: int = Field(default=0, ge=0)
    tensor_max_dim: int = Field(default=6, ge=1)
    scrambles: int = Field(default=16, ge=2)
    min_nodes: int = Field(default=4, ge=1)
    strict: bool = False
    label: str = "integral"

    @classmethod
    def from_settings(
        cls,
        integrand: Integrand,
        box: Sequence[tuple[float, float]],
        settings: QuadratureSettings,
        **overrides: object,
    ) -> "IntegrationRequest":
        fields = settings.model_dump()
        fields.update(overrides)
        return cls(integrand=integrand, box=list(box), **fields)

    @property
    def dimension(self) -> int:
        return len(self.box)


class IntegrationResult(BaseModel):
    value: ComplexValue
    error_estimate: float = Field(ge=0)
    evals_used: int = Field(ge=0)
    converged: bool
    scheme: QuadratureScheme
    nodes_per_axis: int | None = None
    magnitude: float = Field(default=0.0, ge=0)
    accepted_by: Acceptance | None = None

    def scaled(self, factor: complex) -> "IntegrationResult":
        return self.model_copy(
            update={
                "value": self.value * factor,
                "error_estimate": self.error_estimate * abs(factor),
                "magnitude": self.magnitude * abs(factor),
            }
        )

    def plus(self, other: "IntegrationResult") -> "IntegrationResult":
        """Sum of two independent estimates; errors add"""
        return self.model_copy(
            update={
                "value": self.value + other.value,
                "error_estimate": self.error_estimate + other.error_estimate,
                "evals_used": self.evals_used + other.evals_used,
                "converged": self.converged and other.converged,
                "magnitude": self.magnitude + other.magnitude,
                "accepted_by": _weakest(self.accepted_by, other.accepted_by),
            }
        )

    @classmethod
    def exact(cls, value: complex) -> "IntegrationResult":
        return cls(
            value=value,
            error_estimate=0.0,
            evals_used=0,
            converged=True,
            scheme=QuadratureScheme.AUTO,
            magnitude=abs(value),
            accepted_by="exact",
        )


def _weakest(a: Acceptance | None, b: Acceptance | None) -> Acceptance | None:
    if a is None or b is None:
        return None
    return max(a, b, key=ACCEPTANCE_ORDER.index)


def acceptance_criterion(
    req: IntegrationRequest, value: complex, error: float, magnitude: float
) -> Acceptance | None:
    """
    The first of rel * max(|value|, FLOOR), abs_tol and ROUNDOFF * magnitude
    that the error meets, or None. "roundoff" means only the cancellation
    floor let the estimate through.
    """
    if error <= req.target_rel_tol * max(abs(value), FLOOR):
        return "relative"
    if error <= req.abs_tol:
        return "absolute"
    if error <= ROUNDOFF * magnitude:
        return "roundoff"
    return None


def _check_box(box: Sequence[tuple[float, float]]) -> tuple[FloatArray, FloatArray]:
    for axis, (low, high) in enumerate(box):
        if not (math.isfinite(low) and math.isfinite(high)):
            raise BadBoxError(f"axis {axis} has an infinite interval ({low}, {high})")
        if not high > low:
            raise BadBoxError(f"axis {axis} has an empty interval ({low}, {high})")
    lows = np.array([b[0] for b in box], dtype=np.float64)
    highs = np.array([b[1] for b in box], dtype=np.float64)
    return lows, highs


def _evaluate(integrand: Integrand, points: FloatArray) -> ComplexArray:
    values = np.asarray(integrand(points), dtype=np.complex128).reshape(points.shape[0])
    if not np.all(np.isfinite(values)):
        raise ValueError("integrand returned non-finite values on the box")
    return values


def tensor_rule(
    lows: FloatArray, highs: FloatArray, k: int
) -> tuple[FloatArray, FloatArray]:
    """Per-axis Gauss-Legendre nodes (k, n) and weights (k, n) mapped to the box"""
    x, w = leggauss(k)
    half = 0.5 * (highs - lows)
    mid = 0.5 * (highs + lows)
    return mid[None, :] + half[None, :] * x[:, None], half[None, :] * w[:, None]


def tensor_points(
    box: Sequence[tuple[float, float]], k: int
) -> tuple[FloatArray, FloatArray]:
    """Full tensor grid (k^n, n) with product weights, for fixed inner rules"""
    lows, highs = _check_box(box)
    nodes, weights = tensor_rule(lows, highs, k)
    dim = len(box)
    multi = np.indices((k,) * dim).reshape(dim, -1)
    points = np.stack([nodes[multi[j], j] for j in range(dim)], axis=1)
    wts = np.prod(np.stack([weights[multi[j], j] for j in range(dim)], axis=1), axis=1)
    return points, wts


def _tensor_estimate(
    integrand: Integrand, lows: FloatArray, highs: FloatArray, k: int
) -> tuple[complex, float, int]:
    nodes, weights = tensor_rule(lows, highs, k)
    dim = lows.shape[0]
    total = k**dim
    sums: list[complex] = []
    mags: list[float] = []
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(start + CHUNK, total))
        multi = np.unravel_index(flat, (k,) * dim)
        points = np.stack([nodes[m, j] for j, m in enumerate(multi)], axis=1)
        wts = np.prod(np.stack([weights[m, j] for j, m in enumerate(multi)], axis=1), axis=1)
        values = _evaluate(integrand, points)
        sums.append(complex(np.sum(wts * values)))
        mags.append(float(np.sum(wts * np.abs(values))))
    return complex(np.sum(np.array(sums))), float(np.sum(np.array(mags))), total


def _next_nodes(k: int) -> int:
    return k + max(2, k // 2)


def _tensor_gauss(
    req: IntegrationRequest, lows: FloatArray, highs: FloatArray
) -> IntegrationResult:
    dim = lows.shape[0]
    k = req.min_nodes
    if k**dim > req.max_evals:
        k = max(1, int(req.max_evals ** (1.0 / dim)))
    value, magnitude, evals = _tensor_estimate(req.integrand, lows, highs, k)
    error = magnitude
    while True:
        k_next = _next_nodes(k)
        if evals + k_next**dim > req.max_evals:
            break
        refined, refined_mag, used = _tensor_estimate(req.integrand, lows, highs, k_next)
        evals += used
        error = abs(refined - value)
        value, magnitude, k = refined, refined_mag, k_next
        criterion = acceptance_criterion(req, value, error, magnitude)
        if criterion is not None:
            return IntegrationResult(
                value=value,
                error_estimate=error,
                evals_used=evals,
                converged=True,
                scheme=QuadratureScheme.TENSOR_GAUSS,
                nodes_per_axis=k,
                magnitude=magnitude,
                accepted_by=criterion,
            )
    return IntegrationResult(
        value=value,
        error_estimate=error,
        evals_used=evals,
        converged=False,
        scheme=QuadratureScheme.TENSOR_GAUSS,
        nodes_per_axis=k,
        magnitude=magnitude,
    )


def _quasi_random(
    req: IntegrationRequest, lows: FloatArray, highs: FloatArray
) -> IntegrationResult:
    dim = lows.shape[0]
    scrambles = req.scrambles
    volume = float(np.prod(highs - lows))
    children = np.random.SeedSequence(req.seed).spawn(scrambles)
    engines = [
        qmc.Sobol(d=dim, scramble=True, rng=np.random.default_rng(child)) for child in children
    ]
    sums = np.zeros(scrambles, dtype=np.complex128)
    mags = np.zeros(scrambles, dtype=np.float64)
    count = 0
    batch = 256
    while batch * scrambles > req.max_evals and batch > 2:
        batch //= 2
    value, error, magnitude = 0j, math.inf, 0.0
    while (count + batch) * scrambles <= req.max_evals:
        for s, engine in enumerate(engines):
            unit = engine.random(batch)
            for start in range(0, batch, CHUNK):
                points = lows + (highs - lows) * unit[start : start + CHUNK]
                values = _evaluate(req.integrand, points)
                sums[s] += np.sum(values)
                mags[s] += float(np.sum(np.abs(values)))
        count += batch
        batch = count
        means = volume * sums / count
        value = complex(np.mean(means))
        error = float(np.std(means, ddof=1) / math.sqrt(scrambles))
        magnitude = float(volume * np.mean(mags) / count)
        criterion = acceptance_criterion(req, value, error, magnitude)
        if criterion is not None:
            return IntegrationResult(
                value=value,
                error_estimate=error,
                evals_used=count * scrambles,
                converged=True,
                scheme=QuadratureScheme.QUASI_RANDOM,
                magnitude=magnitude,
                accepted_by=criterion,
            )
    return IntegrationResult(
        value=value,
        error_estimate=error if math.isfinite(error) else magnitude,
        evals_used=count * scrambles,
        converged=False,
        scheme=QuadratureScheme.QUASI_RANDOM,
        magnitude=magnitude,
    )


def _region_estimate(
    integrand: Integrand, lows: FloatArray, highs: FloatArray
) -> tuple[complex, float, float, int]:
    fine, magnitude, n_fine = _tensor_estimate(integrand, lows, highs, 7)
    coarse, _, n_coarse = _tensor_estimate(integrand, lows, highs, 5)
    return fine, abs(fine - coarse), magnitude, n_fine + n_coarse


def _adaptive(
    req: IntegrationRequest, lows: FloatArray, highs: FloatArray
) -> IntegrationResult:
    value, error, magnitude, evals = _region_estimate(req.integrand, lows, highs)
    # entries: (-error, insertion order, lows, highs, value, magnitude)
    regions: list[tuple[float, int, FloatArray, FloatArray, complex, float]] = [
        (-error, 0, lows, highs, value, magnitude)
    ]
    counter = 1
    cost = 2 * (7 ** lows.shape[0] + 5 ** lows.shape[0])
    while True:
        ordered = sorted(regions, key=lambda r: r[1])
        value = complex(np.sum(np.array([r[4] for r in ordered])))
        error = float(np.sum(np.array([-r[0] for r in ordered])))
        magnitude = float(np.sum(np.array([r[5] for r in ordered])))
        criterion = acceptance_criterion(req, value, error, magnitude)
        if criterion is not None:
            converged = True
            break
        if evals + cost > req.max_evals:
            converged = False
            break
        _, _, lo, hi, _, _ = heapq.heappop(regions)
        axis = int(np.argmax(hi - lo))
        middle = 0.5 * (lo[axis] + hi[axis])
        left_hi = hi.copy()
        left_hi[axis] = middle
        right_lo = lo.copy()
        right_lo[axis] = middle
        for sub_lo, sub_hi in ((lo, left_hi), (right_lo, hi)):
            v, e, m, n = _region_estimate(req.integrand, sub_lo, sub_hi)
            evals += n
            heapq.heappush(regions, (-e, counter, sub_lo, sub_hi, v, m))
            counter += 1
    return IntegrationResult(
        value=value,
        error_estimate=error,
        evals_used=evals,
        converged=converged,
        scheme=QuadratureScheme.ADAPTIVE,
        magnitude=magnitude,
        accepted_by=criterion,
    )


def resolve_scheme(scheme: QuadratureScheme, dimension: int, tensor_max_dim: int) -> QuadratureScheme:
    if scheme is not QuadratureScheme.AUTO:
        return scheme
    if dimension <= tensor_max_dim:
        return QuadratureScheme.TENSOR_GAUSS
    return QuadratureScheme.QUASI_RANDOM


def integrate(req: IntegrationRequest) -> IntegrationResult:
    """Integrate a vectorized integrand over a compact box"""
    lows, highs = _check_box(req.box)
    dimension = req.dimension
    if dimension == 0:
        point = complex(_evaluate(req.integrand, np.zeros((1, 0)))[0])
        return IntegrationResult.exact(point)

    scheme = resolve_scheme(req.scheme, dimension, req.tensor_max_dim)
    if scheme is QuadratureScheme.TENSOR_GAUSS:
        result = _tensor_gauss(req, lows, highs)
    elif scheme is QuadratureScheme.QUASI_RANDOM:
        result = _quasi_random(req, lows, highs)
    else:
        result = _adaptive(req, lows, highs)

    if not result.converged:
        message = (
            f"{req.label}: {scheme.value} did not converge in dimension {dimension} "
            f"after {result.evals_used} evaluations (error {result.error_estimate:.3e}, "
            f"value {result.value:.6e})"
        )
        logfire.warning(message)
        if req.strict:
            raise NonConvergenceError(message, result)
    elif result.accepted_by == "roundoff":
        logfire.info(
            f"{req.label}: accepted on the roundoff floor (error {result.error_estimate:.3e}, "
            f"magnitude {result.magnitude:.3e})"
        )
    return result
