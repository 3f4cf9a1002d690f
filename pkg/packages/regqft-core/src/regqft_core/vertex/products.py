import math
from enum import Enum
from itertools import combinations
from typing import Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from typing_extensions import Self

from ..configs import EngineSettings
from ..data import ChargeDensity, SpacetimeTestFunction, VertexFactor
from ..errors import BudgetExceededError, NegativeSmearingError
from ..kernels import FieldConfiguration, PairKernel, PropagatorEvaluator
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..utils import ComplexArray, FloatArray


class ProductKind(str, Enum):
    STAR = "star"
    TIME_ORDERED = "time-ordered"
    COMMUTATIVE = "commutative-ws"


KIND_KERNEL = {
    ProductKind.STAR: PairKernel.WIGHTMAN_PLUS,
    ProductKind.TIME_ORDERED: PairKernel.FEYNMAN,
    ProductKind.COMMUTATIVE: PairKernel.SYMMETRIC,
}


class PairChoice(BaseModel):
    i: int = Field(ge=0)
    j: int = Field(ge=0)
    kernel: PairKernel


class PairKernelAssignment(BaseModel):
    """A kernel for every unordered pair i < j of n factors"""

    n: int = Field(ge=1)
    pairs: list[PairChoice] = Field(default_factory=list)

    @model_validator(mode="after")
    def _complete(self) -> Self:
        seen = set()
        for choice in self.pairs:
            if not 0 <= choice.i < choice.j < self.n:
                raise ValueError(f"pair ({choice.i}, {choice.j}) is not ordered within {self.n} factors")
            if (choice.i, choice.j) in seen:
                raise ValueError(f"pair ({choice.i}, {choice.j}) assigned twice")
            seen.add((choice.i, choice.j))
        missing = [pair for pair in combinations(range(self.n), 2) if pair not in seen]
        if missing:
            raise ValueError(f"assignment is missing pairs {missing}")
        return self

    @classmethod
    def uniform(cls, n: int, kernel: PairKernel) -> "PairKernelAssignment":
        return cls(
            n=n,
            pairs=[PairChoice(i=i, j=j, kernel=kernel) for i, j in combinations(range(n), 2)],
        )

    @classmethod
    def blocks(cls, left: int, right: int) -> "PairKernelAssignment":
        """
        Conjugated block of `left` factors followed by `right` factors:
        anti-Feynman inside the left block, Feynman inside the right one,
        Wightman-plus from left to right.
        """
        pairs = []
        for i, j in combinations(range(left + right), 2):
            if j < left:
                kernel = PairKernel.ANTI_FEYNMAN
            elif i >= left:
                kernel = PairKernel.FEYNMAN
            else:
                kernel = PairKernel.WIGHTMAN_PLUS
            pairs.append(PairChoice(i=i, j=j, kernel=kernel))
        return cls(n=left + right, pairs=pairs)

    def kernel(self, i: int, j: int) -> PairKernel:
        for choice in self.pairs:
            if (choice.i, choice.j) == (i, j):
                return choice.kernel
        raise KeyError((i, j))


Charge = Union[float, ChargeDensity]

INNER_BLOCK = 1 << 18


class ProductIntegrand:
    """
    The fused integrand over n spacetime points and the charges of the
    factors that carry a density:

        prod_i g_i(x_i) f_i(a_i, x_i) e^{i a_i phi(x_i)} * sum_t c_t exp(-sum_{i<j} a_i a_j K^t_ij)

    where each term t has its own pair-kernel assignment. Densities without a
    charge rule add their charge as an outer integration variable; densities
    with one are summed over their fixed nodes inside every call.
    """

    def __init__(
        self,
        charges: Sequence[Charge],
        smearings: Sequence[SpacetimeTestFunction],
        terms: Sequence[tuple[complex, PairKernelAssignment]],
        ev: PropagatorEvaluator,
        phi: FieldConfiguration,
    ) -> None:
        if len(charges) != len(smearings):
            raise ValueError(f"{len(charges)} charges for {len(smearings)} smearing functions")
        for _, assignment in terms:
            if assignment.n != len(smearings):
                raise ValueError(f"assignment covers {assignment.n} factors, not {len(smearings)}")
        self.charges = list(charges)
        self.smearings = list(smearings)
        self.terms = list(terms)
        self.ev = ev
        self.phi = phi
        self.n = len(smearings)
        self.dim = smearings[0].dimension
        self.slots: list[int] = []
        inner: dict[int, tuple[FloatArray, FloatArray]] = {}
        for i, c in enumerate(self.charges):
            if isinstance(c, (int, float)):
                continue
            rule = c.charge_rule()
            if rule is None:
                self.slots.append(i)
            else:
                inner[i] = rule
        self.inner_slots = list(inner)
        if inner:
            grids = np.meshgrid(*(inner[i][0] for i in self.inner_slots), indexing="ij")
            wgrid = np.meshgrid(*(inner[i][1] for i in self.inner_slots), indexing="ij")
            self.inner_nodes = np.stack([grid.ravel() for grid in grids])
            self.inner_weights = np.prod(np.stack([w.ravel() for w in wgrid]), axis=0)
        else:
            self.inner_nodes = np.empty((0, 1))
            self.inner_weights = np.ones(1)

    @property
    def inner_size(self) -> int:
        return int(self.inner_weights.size)

    @property
    def box(self) -> list[tuple[float, float]]:
        box = [axis for g in self.smearings for axis in g.box]
        for i in self.slots:
            density = self.charges[i]
            assert not isinstance(density, (int, float))
            box.append(density.support_interval())
        return box

    def extents(self) -> tuple[float, float]:
        """Largest |t_i - t_j| and |x_i - x_j| over the smearing boxes"""
        t_ext, r2 = 0.0, 0.0
        for g, h in combinations(self.smearings, 2):
            gb, hb = g.box, h.box
            t_ext = max(t_ext, gb[0][1] - hb[0][0], hb[0][1] - gb[0][0])
            r2 = max(
                r2,
                sum(max(ga[1] - ha[0], ha[1] - ga[0]) ** 2 for ga, ha in zip(gb[1:], hb[1:])),
            )
        return t_ext, math.sqrt(r2)

    def __call__(self, points: FloatArray) -> ComplexArray:
        block = max(1, INNER_BLOCK // self.inner_size)
        if points.shape[0] <= block:
            return self._evaluate(points)
        return np.concatenate(
            [self._evaluate(points[start : start + block]) for start in range(0, points.shape[0], block)]
        )

    def _evaluate(self, points: FloatArray) -> ComplexArray:
        count = points.shape[0]
        M = self.inner_size
        d = self.dim
        xs = [points[:, i * d : (i + 1) * d] for i in range(self.n)]
        a = np.empty((self.n, count, M))
        base = np.ones((count, M), dtype=np.complex128)
        offset = self.n * d
        for i, charge in enumerate(self.charges):
            if isinstance(charge, (int, float)):
                a[i] = charge
            elif i in self.inner_slots:
                a[i] = self.inner_nodes[self.inner_slots.index(i)][None, :]
                base *= charge.evaluate(a[i], xs[i])
            else:
                outer = points[:, offset]
                offset += 1
                a[i] = outer[:, None]
                base *= charge.evaluate(outer, xs[i])[:, None]
            base *= self.smearings[i](xs[i])[:, None]
        if not self.phi.is_zero:
            phase = np.zeros((count, M))
            for i in range(self.n):
                phase += a[i] * self.phi(xs[i])[:, None]
            base *= np.exp(1j * phase)
        if self.n == 1:
            return (base @ self.inner_weights) * sum(c for c, _ in self.terms)

        geometry = {}
        for i, j in combinations(range(self.n), 2):
            dt = xs[i][:, 0] - xs[j][:, 0]
            r = np.linalg.norm(xs[i][:, 1:] - xs[j][:, 1:], axis=1)
            geometry[(i, j)] = (dt, r, a[i] * a[j])
        cache: dict[tuple[int, int, PairKernel], ComplexArray] = {}
        total = np.zeros((count, M), dtype=np.complex128)
        for coefficient, assignment in self.terms:
            exponent = np.zeros((count, M), dtype=np.complex128)
            for choice in assignment.pairs:
                key = (choice.i, choice.j, choice.kernel)
                if key not in cache:
                    dt, r, _ = geometry[(choice.i, choice.j)]
                    cache[key] = self.ev.kernel_values(choice.kernel, dt, r)
                exponent += geometry[(choice.i, choice.j)][2] * cache[key][:, None]
            total += coefficient * np.exp(-exponent)
        return (base * total) @ self.inner_weights


def _check_factor_count(n: int, settings: EngineSettings) -> None:
    if n < 1:
        raise ValueError("a product needs at least one factor")
    if n > settings.max_factors:
        raise BudgetExceededError(f"{n} factors exceed the cap of {settings.max_factors}")


def run_product(
    integrand: ProductIntegrand, settings: EngineSettings, label: str, **overrides: object
) -> IntegrationResult:
    _check_factor_count(integrand.n, settings)
    if integrand.ev.regularized and integrand.ev.settings.use_kernel_table and integrand.n > 1:
        integrand.ev.pair_kernel(*integrand.extents())
    options: dict[str, object] = {
        "tensor_max_dim": settings.product_tensor_max_dim,
        "label": label,
    }
    options.update(overrides)
    req = IntegrationRequest.from_settings(
        integrand, integrand.box, settings.quadrature, **options
    )
    return integrate(req)


def vertex_eval(
    v: VertexFactor, phi: FieldConfiguration, settings: EngineSettings | None = None
) -> IntegrationResult:
    """V_a(g)(phi) = int e^{i a phi(x)} g(x) dx"""
    settings = settings or EngineSettings()
    g = v.smearing

    def integrand(x: FloatArray) -> ComplexArray:
        return g(x) * np.exp(1j * v.charge * phi(x))

    req = IntegrationRequest.from_settings(integrand, g.box, settings.quadrature, label="vertex")
    return integrate(req)


def nfold_mixed_product(
    factors: Sequence[VertexFactor],
    assignment: PairKernelAssignment,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    settings = settings or ev.settings
    _check_factor_count(len(factors), settings)
    integrand = ProductIntegrand(
        [v.charge for v in factors], [v.smearing for v in factors], [(1.0, assignment)], ev, phi
    )
    return run_product(integrand, settings, f"{len(factors)}-fold product")


def nfold_product(
    factors: Sequence[VertexFactor],
    kind: ProductKind,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """
    Star, time-ordered or commutative product of vertex operators; the pair
    (i, j) carries exp(-a_i a_j K(x_i - x_j)).
    """
    assignment = PairKernelAssignment.uniform(len(factors), KIND_KERNEL[kind])
    return nfold_mixed_product(factors, assignment, ev, phi, settings)


def charge_integrated_product(
    densities: Sequence[ChargeDensity],
    smearings: Sequence[SpacetimeTestFunction],
    assignment: PairKernelAssignment,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
    coefficient: complex = 1.0,
) -> IntegrationResult:
    """Product with every charge integrated against its own density, in one quadrature"""
    settings = settings or ev.settings
    integrand = ProductIntegrand(
        list(densities), list(smearings), [(coefficient, assignment)], ev, phi
    )
    return run_product(integrand, settings, f"charge-integrated {len(densities)}-fold product")


def product_bound(factors: Sequence[VertexFactor], ev: PropagatorEvaluator) -> float:
    """exp(sum_i a_i^2 W / 2) * prod_i |g_i|_1, uniform in the field"""
    for k, v in enumerate(factors):
        if not v.smearing.nonnegative:
            raise NegativeSmearingError(f"smearing function of factor {k} is not nonnegative")
    exponent = sum(v.charge**2 for v in factors) * ev.W / 2.0
    return math.exp(exponent) * math.prod(v.smearing.l1_norm for v in factors)
