import math
from itertools import pairwise
from typing import Sequence

import logfire
from pydantic import BaseModel, Field
from qft_tables import ComplexValue

from ..configs import EngineSettings
from ..data import SpacetimeTestFunction
from ..errors import BudgetExceededError
from ..kernels import FieldConfiguration, PairKernel, PropagatorEvaluator
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..smatrix import InteractionLagrangian, order_coefficient
from ..utils import ComplexArray, FloatArray
from ..vertex import PairKernelAssignment, ProductIntegrand
from .counterterms3d import CountertermSet3D, _evaluator_at, compute_counterterms_3d
from .regulator import GaussianRegulator, potential_profile
from .wick import VertexSpec, WickIntegrand, polynomial_tproduct_oracle

MAX_LIMIT_ORDER = 2
ROUNDOFF = 1e-12


def build_renormalized_lagrangian(
    lambda_: float,
    Lambda1: float,
    Lambda2: float,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings | None = None,
    counterterms: CountertermSet3D | None = None,
    rule_nodes: int = 20,
) -> InteractionLagrangian:
    """
    The renormalized phi^4_3 interaction with the Gaussian large-field regulator:

        f_x(a) = (1/4) r''''(a) - (delta m(x) / 2) r''(a) + c r(a),

    graded as lambda L_1 (quartic) + lambda^2 L_2 (mass counterterm and the
    lambda^2 part of c) + lambda^3 L_3 (the lambda^3 part of c).
    """
    if Lambda1 <= 0:
        raise ValueError(f"the regulator needs Lambda1 > 0, got {Lambda1}")
    ev2 = _evaluator_at(ev, Lambda2)
    if counterterms is None:
        counterterms = compute_counterterms_3d(lambda_, Lambda2, g, ev2, settings)
    elif counterterms.Lambda2 != Lambda2:
        raise ValueError(
            f"counterterms were computed at Lambda2={counterterms.Lambda2}, not {Lambda2}"
        )
    reg = GaussianRegulator(Lambda1=Lambda1, rule_nodes=rule_nodes)
    return InteractionLagrangian(
        coupling=lambda_,
        smearing=g,
        components={
            1: potential_profile(reg, 1.0, 0.0, 0.0),
            2: potential_profile(reg, 0.0, counterterms.mass, counterterms.c2.value),
            3: potential_profile(reg, 0.0, 0.0, counterterms.c3.value),
        },
    )


def limit_vertices(
    lambda_: float, g: SpacetimeTestFunction, counterterms: CountertermSet3D
) -> list[VertexSpec]:
    """The vanishing-regulator vertex lambda phi^4 / 4 + delta m phi^2 / 2 + c as monomials"""
    lam2 = lambda_**2
    return [
        VertexSpec(degree=4, smearing=g, coefficient=0.25 * lambda_),
        VertexSpec(degree=2, smearing=g, coefficient=0.5 * lam2, weight=counterterms.mass),
        VertexSpec(
            degree=0,
            smearing=g,
            coefficient=lam2 * counterterms.c2.value + lambda_**3 * counterterms.c3.value,
        ),
    ]


def limit_lagrangian_eval(
    lambda_: float,
    g: SpacetimeTestFunction,
    counterterms: CountertermSet3D,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """int (lambda phi^4 / 4 + delta m phi^2 / 2 + c) g dx"""
    settings = settings or EngineSettings()
    return polynomial_tproduct_oracle(
        [limit_vertices(lambda_, g, counterterms)], counterterms.mass.ev, phi, settings
    )


class RegulatedMinusPolynomial:
    """
    (i^n / n!) times the difference of the regulated time-ordered product and
    its polynomial limit, fused on one set of vertex positions
    """

    def __init__(
        self,
        n: int,
        L: InteractionLagrangian,
        vertices: list[VertexSpec],
        ev: PropagatorEvaluator,
        phi: FieldConfiguration,
    ) -> None:
        density = L.effective_density()
        if density.charge_rule() is None:
            raise ValueError("the fused limit difference needs a charge rule on every factor")
        self.coefficient = order_coefficient(n)
        self.regulated = ProductIntegrand(
            [density] * n,
            [L.smearing] * n,
            [(self.coefficient, PairKernelAssignment.uniform(n, PairKernel.FEYNMAN))],
            ev,
            phi,
        )
        self.polynomial = WickIntegrand([vertices] * n, ev, phi)

    @property
    def box(self) -> list[tuple[float, float]]:
        return self.regulated.box

    def __call__(self, points: FloatArray) -> ComplexArray:
        return self.regulated(points) - self.coefficient * self.polynomial(points)


def limit_deviation(
    n: int,
    L: InteractionLagrangian,
    vertices: list[VertexSpec],
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings,
    label: str,
) -> IntegrationResult:
    """S_n of the regulated Lagrangian minus S_n of its polynomial limit"""
    if n == 0:
        return IntegrationResult.exact(0.0)
    if L.effective_density().is_zero:
        integrand = WickIntegrand([vertices] * n, ev, phi)
        req = IntegrationRequest.from_settings(
            integrand,
            integrand.box,
            settings.quadrature,
            tensor_max_dim=settings.product_tensor_max_dim,
            label=label,
        )
        return integrate(req).scaled(-order_coefficient(n))
    fused = RegulatedMinusPolynomial(n, L, vertices, ev, phi)
    req = IntegrationRequest.from_settings(
        fused,
        fused.box,
        settings.quadrature,
        tensor_max_dim=settings.product_tensor_max_dim,
        label=label,
    )
    return integrate(req)


class LimitPoint(BaseModel):
    Lambda1: float
    Lambda2: float
    value: ComplexValue
    target: ComplexValue
    deviation: float = Field(ge=0)
    quad_error: float = Field(ge=0)


class LimitCheckReport(BaseModel):
    n: int
    lambda_: float
    Lambda2: float
    target: ComplexValue
    target_error: float = Field(ge=0)
    points: list[LimitPoint]
    decreasing: bool
    corollary_points: list[LimitPoint] = Field(default_factory=list)
    corollary_decreasing: bool | None = None

    @property
    def deviations(self) -> list[float]:
        return [p.deviation for p in self.points]


def _is_decreasing(points: list[LimitPoint]) -> bool:
    """Strictly shrinking deviations, ignoring steps already at roundoff level"""
    return all(
        later.deviation < earlier.deviation
        or earlier.deviation <= ROUNDOFF * max(abs(earlier.target), 1.0)
        for earlier, later in pairwise(points)
    )


def _target(
    n: int,
    vertices: list[VertexSpec],
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings,
) -> IntegrationResult:
    if n == 0:
        return IntegrationResult.exact(1.0)
    oracle = polynomial_tproduct_oracle([vertices] * n, ev, phi, settings)
    return oracle.scaled(order_coefficient(n))


def _limit_point(
    n: int,
    lambda_: float,
    Lambda1: float,
    counterterms: CountertermSet3D,
    g: SpacetimeTestFunction,
    ev2: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings,
    target: IntegrationResult,
    rule_nodes: int,
) -> LimitPoint:
    L = build_renormalized_lagrangian(
        lambda_, Lambda1, counterterms.Lambda2, g, ev2, settings, counterterms, rule_nodes
    )
    vertices = limit_vertices(lambda_, g, counterterms)
    deviation = limit_deviation(
        n, L, vertices, ev2, phi, settings, f"S_{n} limit difference Lambda1={Lambda1}"
    )
    return LimitPoint(
        Lambda1=Lambda1,
        Lambda2=counterterms.Lambda2,
        value=target.value + deviation.value,
        target=target.value,
        deviation=abs(deviation.value),
        quad_error=deviation.error_estimate,
    )


def corollary_path(Lambda: float) -> tuple[float, float]:
    """(Lambda1, Lambda2) = (Lambda, 1 / (-log Lambda)) for 0 < Lambda < 1"""
    if not 0 < Lambda < 1:
        raise ValueError(f"the joint cutoff path needs 0 < Lambda < 1, got {Lambda}")
    return Lambda, 1.0 / -math.log(Lambda)


def limit_check_order_n(
    n: int,
    lambda_: float,
    Lambda2: float,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    Lambda1_sequence: Sequence[float],
    settings: EngineSettings | None = None,
    counterterms: CountertermSet3D | None = None,
    corollary: bool = True,
    rule_nodes: int = 20,
) -> LimitCheckReport:
    """
    S_n of the regulated Lagrangian along a shrinking Lambda1 at fixed Lambda2,
    measured against S_n of its polynomial limit; with `corollary`, also along
    the joint path (Lambda, 1 / (-log Lambda)) for Lambda in the same sequence.
    """
    if not 0 <= n <= MAX_LIMIT_ORDER:
        if n < 0:
            raise ValueError(f"order must be >= 0, got {n}")
        raise BudgetExceededError(f"limit checks stop at order {MAX_LIMIT_ORDER}, got {n}")
    settings = settings or ev.settings
    ev2 = _evaluator_at(ev, Lambda2)
    with logfire.span(f"limit check order {n} at Lambda2={Lambda2}"):
        if counterterms is None:
            counterterms = compute_counterterms_3d(lambda_, Lambda2, g, ev2, settings)
        vertices = limit_vertices(lambda_, g, counterterms)
        target = _target(n, vertices, ev2, phi, settings)
        points = [
            _limit_point(n, lambda_, L1, counterterms, g, ev2, phi, settings, target, rule_nodes)
            for L1 in Lambda1_sequence
        ]
        decreasing = _is_decreasing(points)
        if not decreasing:
            logfire.warning(
                f"S_{n} deviations do not shrink along Lambda1: {[p.deviation for p in points]}"
            )
        corollary_points: list[LimitPoint] = []
        corollary_decreasing = None
        if corollary:
            for Lambda in Lambda1_sequence:
                L1, L2 = corollary_path(Lambda)
                ev_path = _evaluator_at(ev, L2)
                path_counterterms = compute_counterterms_3d(lambda_, L2, g, ev_path, settings)
                path_target = _target(
                    n, limit_vertices(lambda_, g, path_counterterms), ev_path, phi, settings
                )
                point = _limit_point(
                    n, lambda_, L1, path_counterterms, g, ev_path, phi, settings, path_target, rule_nodes
                )
                corollary_points.append(point)
            corollary_decreasing = _is_decreasing(corollary_points)
            if not corollary_decreasing:
                logfire.warning(f"S_{n} deviations do not shrink along the joint cutoff path")
    return LimitCheckReport(
        n=n,
        lambda_=lambda_,
        Lambda2=Lambda2,
        target=target.value,
        target_error=target.error_estimate,
        points=points,
        decreasing=decreasing,
        corollary_points=corollary_points,
        corollary_decreasing=corollary_decreasing,
    )
