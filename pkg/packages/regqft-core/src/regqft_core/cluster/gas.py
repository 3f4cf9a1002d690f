import math
from itertools import combinations
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Self

from ..configs import EngineSettings
from ..data import ChargeProfile, SpacetimeTestFunction
from ..errors import NegativeSmearingError
from ..kernels import PairKernel, PropagatorEvaluator
from ..smatrix import InteractionLagrangian
from ..utils import FloatArray


@runtime_checkable
class PairPotential(Protocol):
    """The real two-body potential w_s of the dominating gas"""

    @property
    def coincidence(self) -> float: ...

    def __call__(self, dt: FloatArray, r: FloatArray) -> FloatArray: ...


class PropagatorPotential:
    """w_s = Re Delta_F,Lambda from a regularized evaluator"""

    def __init__(self, ev: PropagatorEvaluator) -> None:
        if not ev.regularized:
            raise ValueError("the dominating gas needs Lambda > 0")
        self.ev = ev

    @property
    def coincidence(self) -> float:
        return self.ev.W

    def __call__(self, dt: FloatArray, r: FloatArray) -> FloatArray:
        return self.ev.kernel_values(PairKernel.SYMMETRIC, dt, r).real


class ConstantPotential:
    """w_s identically equal to `value`; zero decouples the gas"""

    def __init__(self, value: float = 0.0) -> None:
        self.value = value

    @property
    def coincidence(self) -> float:
        return self.value

    def __call__(self, dt: FloatArray, r: FloatArray) -> FloatArray:
        return np.full(np.shape(dt), self.value, dtype=np.float64)


class ClusterConfig(BaseModel):
    """
    A dominating gas: particles at spacetime points x with charges a,
    distributed by g(x)|f(a)| and interacting through w_s.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    profile: ChargeProfile
    smearing: SpacetimeTestFunction
    potential: PairPotential
    coupling: float = 1.0
    settings: EngineSettings = Field(default_factory=EngineSettings)

    @model_validator(mode="after")
    def _nonnegative_smearing(self) -> Self:
        if not self.smearing.nonnegative:
            raise NegativeSmearingError("the gas density needs g >= 0")
        return self

    @classmethod
    def from_evaluator(
        cls,
        profile: ChargeProfile,
        smearing: SpacetimeTestFunction,
        ev: PropagatorEvaluator,
        coupling: float = 1.0,
        settings: EngineSettings | None = None,
    ) -> "ClusterConfig":
        return cls(
            profile=profile,
            smearing=smearing,
            potential=PropagatorPotential(ev),
            coupling=coupling,
            settings=settings or ev.settings,
        )

    @classmethod
    def from_lagrangian(
        cls, L: InteractionLagrangian, ev: PropagatorEvaluator, settings: EngineSettings | None = None
    ) -> "ClusterConfig":
        profile = L.components.get(1)
        if L.graded or not isinstance(profile, ChargeProfile):
            raise ValueError("the dominating gas is built from an ungraded ChargeProfile Lagrangian")
        return cls.from_evaluator(profile, L.smearing, ev, L.coupling, settings)

    @property
    def A(self) -> float:
        return self.profile.support

    @property
    def dimension(self) -> int:
        return self.smearing.dimension

    @property
    def g_norm(self) -> float:
        return self.smearing.l1_norm

    @property
    def f_norm(self) -> float:
        return self.profile.l1_norm

    @property
    def normalization(self) -> float:
        """|g|_1 |f|_1, the total mass of one particle"""
        return self.g_norm * self.f_norm

    def particle_box(self, m: int) -> list[tuple[float, float]]:
        """m positions followed by m charges"""
        return [*self.smearing.box * m, *[(-self.A, self.A)] * m]

    def with_smearing(self, smearing: SpacetimeTestFunction) -> "ClusterConfig":
        return self.model_copy(update={"smearing": smearing})


class Particles:
    """
    A batch of N configurations of m particles unpacked from quadrature
    nodes laid out as [x_1, ..., x_m, a_1, ..., a_m]. Pair potentials and
    edge factors are computed once per pair.
    """

    def __init__(self, config: ClusterConfig, xs: Sequence[FloatArray], a: Sequence[FloatArray]) -> None:
        self.config = config
        self.xs = list(xs)
        self.a = list(a)
        self.m = len(self.xs)
        self.size = self.xs[0].shape[0] if self.xs else 0
        self._w: dict[tuple[int, int], FloatArray] = {}

    @classmethod
    def from_points(cls, config: ClusterConfig, points: FloatArray, m: int) -> "Particles":
        d = config.dimension
        xs = [points[:, i * d : (i + 1) * d] for i in range(m)]
        a = [points[:, m * d + i] for i in range(m)]
        return cls(config, xs, a)

    @classmethod
    def from_pairs(
        cls, config: ClusterConfig, points: Sequence[tuple[Sequence[float], float]]
    ) -> "Particles":
        xs = [np.asarray([x], dtype=np.float64) for x, _ in points]
        a = [np.asarray([charge], dtype=np.float64) for _, charge in points]
        return cls(config, xs, a)

    def joined(self, other: "Particles") -> "Particles":
        """Fixed particles broadcast against a batch of integrated ones"""
        size = max(self.size, other.size)
        xs = [np.broadcast_to(x, (size, x.shape[1])) for x in self.xs + other.xs]
        a = [np.broadcast_to(c, (size,)) for c in self.a + other.a]
        return Particles(self.config, xs, a)

    def w(self, i: int, j: int) -> FloatArray:
        key = (min(i, j), max(i, j))
        if key not in self._w:
            xi, xj = self.xs[key[0]], self.xs[key[1]]
            dt = xi[:, 0] - xj[:, 0]
            r = np.linalg.norm(xi[:, 1:] - xj[:, 1:], axis=1)
            self._w[key] = np.asarray(self.config.potential(dt, r), dtype=np.float64)
        return self._w[key]

    def coupling_energy(self, i: int, j: int) -> FloatArray:
        return self.a[i] * self.a[j] * self.w(i, j)

    def edge(self, i: int, j: int) -> FloatArray:
        """e^{-a_i a_j w_s(x_i, x_j)} - 1"""
        return np.expm1(-self.coupling_energy(i, j))

    def energy(self, labels: Sequence[int]) -> FloatArray:
        """U over the given particles"""
        total = np.zeros(self.size)
        for i, j in combinations(labels, 2):
            total = total + self.coupling_energy(i, j)
        return total

    def weight(self, labels: Sequence[int] | None = None) -> FloatArray:
        """prod g(x_k) |f(a_k)|"""
        labels = range(self.m) if labels is None else labels
        value = np.ones(self.size)
        for k in labels:
            value = value * self.config.smearing(self.xs[k]) * np.abs(self.config.profile(self.a[k]))
        return value


def normalized_order(n: int, config: ClusterConfig) -> float:
    """n! |g|_1 |f|_1, the divisor turning B(n) into the Mayer coefficient"""
    if config.normalization <= 0:
        raise ValueError("the gas has zero total mass: f vanishes")
    return math.factorial(n) * config.normalization
