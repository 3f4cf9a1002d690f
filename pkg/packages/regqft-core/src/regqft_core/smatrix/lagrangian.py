import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from typing_extensions import Self

from ..configs import EngineSettings
from ..data import ChargeDensity, ChargeProfile, SpacetimeTestFunction
from ..kernels import FieldConfiguration, PropagatorEvaluator
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..utils import ComplexArray, FloatArray


class CombinedDensity:
    """
    sum_k w_k f_k(a, x), each component cut to its own support interval.
    """

    def __init__(self, parts: list[tuple[complex, ChargeDensity]]) -> None:
        self.parts = [(w, f) for w, f in parts if w != 0 and not f.is_zero]
        self.position_dependent = any(f.position_dependent for _, f in self.parts)
        self._rule = self._shared_rule()

    def _shared_rule(self) -> tuple[FloatArray, FloatArray] | None:
        rules = [f.charge_rule() for _, f in self.parts]
        if not rules or all(rule is None for rule in rules):
            return None
        first = rules[0]
        for rule in rules[1:]:
            if rule is None or first is None or not (
                np.array_equal(rule[0], first[0]) and np.array_equal(rule[1], first[1])
            ):
                raise ValueError("components of a combined density must share one charge rule")
        return first

    @property
    def is_zero(self) -> bool:
        return not self.parts

    def support_interval(self) -> tuple[float, float]:
        if not self.parts:
            return (-1.0, 1.0)
        intervals = [f.support_interval() for _, f in self.parts]
        return min(lo for lo, _ in intervals), max(hi for _, hi in intervals)

    def charge_rule(self) -> tuple[FloatArray, FloatArray] | None:
        return self._rule

    def evaluate(self, a: FloatArray, x: FloatArray | None = None) -> ComplexArray:
        a = np.asarray(a, dtype=np.float64)
        out = np.zeros(a.shape, dtype=np.complex128)
        for weight, density in self.parts:
            lo, hi = density.support_interval()
            inside = (a >= lo) & (a <= hi)
            out += np.where(inside, weight * density.evaluate(a, x), 0.0)
        return out


class InteractionLagrangian(BaseModel):
    """
    L(phi) = sum_k lambda^k int int e^{i a phi(x)} f_k(a, x) g(x) da dx.

    A plain Lagrangian has the single grade {1: f}; renormalized ones carry
    grades 1, 2 and 3.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    coupling: float
    smearing: SpacetimeTestFunction
    components: dict[int, ChargeDensity]

    @model_validator(mode="after")
    def _valid_grades(self) -> Self:
        if not self.components:
            raise ValueError("a Lagrangian needs at least one graded component")
        bad = [k for k in self.components if k < 1]
        if bad:
            raise ValueError(f"grades must be >= 1, got {bad}")
        return self

    @classmethod
    def from_profile(
        cls, coupling: float, profile: ChargeProfile, smearing: SpacetimeTestFunction
    ) -> "InteractionLagrangian":
        return cls(coupling=coupling, smearing=smearing, components={1: profile})

    @property
    def graded(self) -> bool:
        return set(self.components) != {1}

    @property
    def grades(self) -> list[int]:
        return sorted(self.components)

    def with_coupling(self, coupling: float) -> "InteractionLagrangian":
        return self.model_copy(update={"coupling": coupling})

    def effective_density(self) -> CombinedDensity:
        """f_eff(a, x) = sum_k lambda^k f_k(a, x)"""
        return CombinedDensity(
            [(self.coupling**k, density) for k, density in sorted(self.components.items())]
        )

    def component_density(self, grade: int) -> CombinedDensity:
        return CombinedDensity([(1.0, self.components[grade])])


def _charge_box(density: CombinedDensity, g: SpacetimeTestFunction) -> list[tuple[float, float]]:
    return [*g.box, density.support_interval()]


def density_integral(
    density: CombinedDensity,
    g: SpacetimeTestFunction,
    phi: FieldConfiguration,
    settings: EngineSettings,
    label: str,
) -> IntegrationResult:
    """int int e^{i a phi(x)} f(a, x) g(x) da dx in one (d + 1)-dimensional quadrature"""
    if density.is_zero:
        return IntegrationResult.exact(0.0)
    d = g.dimension
    rule = density.charge_rule()
    if rule is not None:
        nodes, weights = rule

        def with_rule(x: FloatArray) -> ComplexArray:
            a = np.broadcast_to(nodes, (x.shape[0], nodes.size))
            values = density.evaluate(a, x)
            if not phi.is_zero:
                values = values * np.exp(1j * a * phi(x)[:, None])
            return g(x) * (values @ weights)

        req = IntegrationRequest.from_settings(with_rule, g.box, settings.quadrature, label=label)
        return integrate(req)

    def integrand(points: FloatArray) -> ComplexArray:
        x, a = points[:, :d], points[:, d]
        values = g(x) * density.evaluate(a, x)
        if phi.is_zero:
            return values
        return values * np.exp(1j * a * phi(x))

    req = IntegrationRequest.from_settings(
        integrand, _charge_box(density, g), settings.quadrature, label=label
    )
    return integrate(req)


def lagrangian_eval(
    L: InteractionLagrangian, phi: FieldConfiguration, settings: EngineSettings | None = None
) -> IntegrationResult:
    settings = settings or EngineSettings()
    return density_integral(L.effective_density(), L.smearing, phi, settings, "L_I(phi)")


def amplitude_bound(
    L: InteractionLagrangian, ev: PropagatorEvaluator, settings: EngineSettings | None = None
) -> float:
    """
    A = (1 / |g|_1) int int g(x) |f_eff(a, x)| e^{a^2 W / 2} da dx, which for a
    position-independent profile is int |f_eff(a)| e^{a^2 W / 2} da.
    """
    if not ev.regularized:
        raise ValueError("the amplitude bound needs Lambda > 0")
    settings = settings or ev.settings
    density = L.effective_density()
    if density.is_zero:
        return 0.0
    g = L.smearing
    W = ev.W
    d = g.dimension
    if not density.position_dependent:

        def charge_only(points: FloatArray) -> FloatArray:
            a = points[:, 0]
            return np.abs(density.evaluate(a)) * np.exp(0.5 * a * a * W)

        req = IntegrationRequest.from_settings(
            charge_only, [density.support_interval()], settings.quadrature, label="A"
        )
        return integrate(req).value.real

    def integrand(points: FloatArray) -> FloatArray:
        x, a = points[:, :d], points[:, d]
        return np.abs(g(x)) * np.abs(density.evaluate(a, x)) * np.exp(0.5 * a * a * W)

    req = IntegrationRequest.from_settings(
        integrand, _charge_box(density, g), settings.quadrature, label="A |g|_1"
    )
    return integrate(req).value.real / g.l1_norm
