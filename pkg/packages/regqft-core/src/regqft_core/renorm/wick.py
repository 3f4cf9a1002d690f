import math
from collections import Counter
from functools import lru_cache
from itertools import combinations, product
from typing import Callable, Sequence, Union

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field
from qft_tables import ComplexValue

from ..configs import EngineSettings
from ..data import SpacetimeTestFunction
from ..errors import BudgetExceededError
from ..kernels import FieldConfiguration, PairKernel, PropagatorEvaluator
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..utils import ComplexArray, FloatArray

MAX_LEGS = 12
MAX_VERTICES = 3

# line multiplicities m_ij for i < j in combinations order
Pattern = tuple[int, ...]


class VertexSpec(BaseModel):
    """coefficient * weight(x) * phi(x)^degree smeared with g"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    degree: int = Field(ge=0, le=4)
    smearing: SpacetimeTestFunction
    coefficient: ComplexValue = 1.0
    weight: Callable[[FloatArray], npt.ArrayLike] | None = None

    def prefactor(self, x: FloatArray) -> ComplexArray:
        values = self.coefficient * self.smearing(x).astype(np.complex128)
        if self.weight is not None:
            values = values * np.asarray(self.weight(x), dtype=np.complex128)
        return values


@lru_cache(maxsize=256)
def contraction_patterns(degrees: tuple[int, ...]) -> dict[Pattern, int]:
    """
    Every partial matching of legs on distinct vertices, counted by its line
    multiplicities. Same-vertex contractions (tadpoles) never appear.
    """
    if sum(degrees) > MAX_LEGS:
        raise BudgetExceededError(f"{sum(degrees)} legs exceed the cap of {MAX_LEGS}")
    legs = [v for v, k in enumerate(degrees) for _ in range(k)]
    pairs = list(combinations(range(len(degrees)), 2))
    index = {pair: slot for slot, pair in enumerate(pairs)}
    counts: Counter[Pattern] = Counter()

    def extend(remaining: tuple[int, ...], lines: tuple[int, ...]) -> None:
        if not remaining:
            counts[lines] += 1
            return
        first, rest = remaining[0], remaining[1:]
        extend(rest, lines)
        for pos, other in enumerate(rest):
            if legs[other] == legs[first]:
                continue
            slot = index[(legs[first], legs[other])]
            bumped = lines[:slot] + (lines[slot] + 1,) + lines[slot + 1 :]
            extend(rest[:pos] + rest[pos + 1 :], bumped)

    extend(tuple(range(len(legs))), (0,) * len(pairs))
    return dict(counts)


def pattern_multiplicity(degrees: Sequence[int], lines: Pattern) -> int:
    """prod_i k_i! / (k_i - l_i)! / prod_{i<j} m_ij!, l_i the lines at vertex i"""
    n = len(degrees)
    used = [0] * n
    for (i, j), m in zip(combinations(range(n), 2), lines):
        used[i] += m
        used[j] += m
    if any(u > k for u, k in zip(used, degrees)):
        return 0
    numerator = math.prod(math.perm(k, u) for k, u in zip(degrees, used))
    return numerator // math.prod(math.factorial(m) for m in lines)


Vertex = Union[VertexSpec, Sequence[VertexSpec]]


class WickIntegrand:
    """
    The time-ordered product of polynomial vertices after contraction: each
    position carries a sum of monomials, every choice of monomials
    contributes sum over patterns of
        count * prod_{i<j} Delta_F(x_i - x_j)^{m_ij} * prod_i phi(x_i)^{k_i - l_i}.
    """

    def __init__(
        self, vertices: Sequence[Vertex], ev: PropagatorEvaluator, phi: FieldConfiguration
    ) -> None:
        self.positions: list[list[VertexSpec]] = [
            [v] if isinstance(v, VertexSpec) else list(v) for v in vertices
        ]
        if not self.positions:
            raise ValueError("the oracle needs at least one vertex")
        if len(self.positions) > MAX_VERTICES:
            raise BudgetExceededError(
                f"{len(self.positions)} vertices exceed the oracle cap of {MAX_VERTICES}"
            )
        for k, alternatives in enumerate(self.positions):
            if not alternatives:
                raise ValueError(f"vertex {k} has no monomials")
            if any(spec.smearing != alternatives[0].smearing for spec in alternatives):
                raise ValueError(f"monomials at vertex {k} must share one smearing function")
        legs = sum(max(spec.degree for spec in alternatives) for alternatives in self.positions)
        if legs > MAX_LEGS:
            raise BudgetExceededError(f"{legs} legs exceed the oracle cap of {MAX_LEGS}")
        self.ev = ev
        self.phi = phi
        self.n = len(self.positions)
        self.dim = self.positions[0][0].smearing.dimension

    @property
    def box(self) -> list[tuple[float, float]]:
        return [axis for alternatives in self.positions for axis in alternatives[0].smearing.box]

    def __call__(self, points: FloatArray) -> ComplexArray:
        count = points.shape[0]
        d = self.dim
        xs = [points[:, i * d : (i + 1) * d] for i in range(self.n)]
        field = [self.phi(x) for x in xs]
        kernels = []
        for i, j in combinations(range(self.n), 2):
            dt = xs[i][:, 0] - xs[j][:, 0]
            r = np.linalg.norm(xs[i][:, 1:] - xs[j][:, 1:], axis=1)
            kernels.append(self.ev.kernel_values(PairKernel.FEYNMAN, dt, r))
        prefactors = [
            [spec.prefactor(xs[i]) for spec in alts] for i, alts in enumerate(self.positions)
        ]
        total = np.zeros(count, dtype=np.complex128)
        for choice in product(*(range(len(alts)) for alts in self.positions)):
            degrees = tuple(self.positions[i][c].degree for i, c in enumerate(choice))
            weight = np.ones(count, dtype=np.complex128)
            for i, c in enumerate(choice):
                weight = weight * prefactors[i][c]
            contracted = np.zeros(count, dtype=np.complex128)
            for lines, multiplicity in contraction_patterns(degrees).items():
                used = [0] * self.n
                for (i, j), m in zip(combinations(range(self.n), 2), lines):
                    used[i] += m
                    used[j] += m
                if self.phi.is_zero and used != list(degrees):
                    continue
                term = np.full(count, float(multiplicity), dtype=np.complex128)
                for kernel, m in zip(kernels, lines):
                    if m:
                        term = term * kernel**m
                for i, (k, u) in enumerate(zip(degrees, used)):
                    if k > u:
                        term = term * field[i] ** (k - u)
                contracted += term
            total += weight * contracted
        return total


def polynomial_tproduct_oracle(
    vertex_specs: Sequence[Vertex],
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """
    T(V_1 ... V_n)(phi) for polynomial vertices, by exhaustive Wick contraction
    followed by quadrature over the vertex positions.
    """
    settings = settings or ev.settings
    integrand = WickIntegrand(vertex_specs, ev, phi)
    req = IntegrationRequest.from_settings(
        integrand,
        integrand.box,
        settings.quadrature,
        tensor_max_dim=settings.product_tensor_max_dim,
        label=f"Wick oracle, {integrand.n} vertices",
    )
    return integrate(req)
