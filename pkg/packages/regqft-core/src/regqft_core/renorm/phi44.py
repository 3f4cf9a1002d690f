import math
from typing import Sequence

import logfire
from pydantic import BaseModel, Field
from qft_tables import ComplexValue, CountertermTable

from ..configs import EngineSettings
from ..data import SpacetimeTestFunction
from ..errors import OutOfRangeError, SingularWavefunctionError
from ..kernels import FieldConfiguration, PropagatorEvaluator
from ..smatrix import InteractionLagrangian, order_coefficient
from .phi43 import limit_deviation
from .regulator import GaussianRegulator, potential_profile
from .wick import VertexSpec, polynomial_tproduct_oracle

SINGULAR_TOL = 1e-14


class TruncatedCounterterms(BaseModel):
    """Partial sums through order N of each counterterm column at one Lambda2"""

    N: int = Field(ge=1)
    Lambda2: float = Field(gt=0)
    dZ: float
    dM: float
    dLambda: float
    dC: float


def truncate_table(table: CountertermTable, N: int, Lambda2: float) -> TruncatedCounterterms:
    if not 1 <= N <= table.max_order:
        raise OutOfRangeError(f"order N={N} is outside the table's orders 1..{table.max_order}")
    if Lambda2 <= 0 or not table.in_validity_range(Lambda2):
        raise OutOfRangeError(
            f"Lambda2={Lambda2} is outside the validity range {table.metadata.validity}"
        )
    rows = table.rows[:N]
    return TruncatedCounterterms(
        N=N,
        Lambda2=Lambda2,
        dZ=math.fsum(row.dZ.evaluate(Lambda2) for row in rows),
        dM=math.fsum(row.dM.evaluate(Lambda2) for row in rows),
        dLambda=math.fsum(row.dLambda.evaluate(Lambda2) for row in rows),
        dC=math.fsum(row.dC.evaluate(Lambda2) for row in rows),
    )


class TildeConstants(BaseModel):
    """
    Couplings of the Lagrangian rewritten in the rescaled field
    phi_0 = sqrt(1 + dZ) phi
    """

    N: int
    Lambda2: float
    mass: float
    coupling: float
    M_tilde: float
    lambda_tilde: float
    C_tilde: float
    # None when 1 + dZ < 0 and the rescaled field is not real
    field_scale: float | None


def tilde_constants(trunc: TruncatedCounterterms, m: float, lambda_: float) -> TildeConstants:
    """
    M~ = (m^2 + dM) / (1 + dZ) - m^2, lambda~ = (lambda + dLambda) / (1 + dZ),
    C~ = dC / (1 + dZ)
    """
    denominator = 1.0 + trunc.dZ
    if abs(denominator) < SINGULAR_TOL:
        raise SingularWavefunctionError(
            f"1 + dZ = {denominator} at N={trunc.N}, Lambda2={trunc.Lambda2}"
        )
    m2 = m * m
    return TildeConstants(
        N=trunc.N,
        Lambda2=trunc.Lambda2,
        mass=m,
        coupling=lambda_,
        M_tilde=(m2 + trunc.dM) / denominator - m2,
        lambda_tilde=(lambda_ + trunc.dLambda) / denominator,
        C_tilde=trunc.dC / denominator,
        field_scale=math.sqrt(denominator) if denominator > 0 else None,
    )


def rescaled_field(phi: FieldConfiguration, tilde: TildeConstants) -> FieldConfiguration:
    if tilde.field_scale is None:
        raise SingularWavefunctionError("1 + dZ < 0 leaves no real rescaled field")
    return phi.scaled(tilde.field_scale)


def _check_4d(ev: PropagatorEvaluator) -> None:
    if ev.params.dimension != 4:
        raise ValueError(f"the phi^4_4 Lagrangian lives in d = 4, got d = {ev.params.dimension}")


def build_lagrangian_4d(
    N: int,
    Lambda1: float,
    Lambda2: float,
    g: SpacetimeTestFunction,
    table: CountertermTable,
    m: float,
    lambda_: float,
    ev: PropagatorEvaluator,
    rule_nodes: int = 20,
) -> InteractionLagrangian:
    """
    The order-N Lagrangian in the rescaled field, one ungraded component

        f(a) = (lambda~ / 4) r''''(a) - (M~ / 2) r''(a) + C~ r(a)
    """
    _check_4d(ev)
    if Lambda1 <= 0:
        raise ValueError(f"the regulator needs Lambda1 > 0, got {Lambda1}")
    tilde = tilde_constants(truncate_table(table, N, Lambda2), m, lambda_)
    reg = GaussianRegulator(Lambda1=Lambda1, rule_nodes=rule_nodes)
    profile = potential_profile(reg, tilde.lambda_tilde, tilde.M_tilde, tilde.C_tilde)
    return InteractionLagrangian(coupling=1.0, smearing=g, components={1: profile})


def polynomial_vertex_4d(tilde: TildeConstants, g: SpacetimeTestFunction) -> list[VertexSpec]:
    """lambda~ phi^4 / 4 + M~ phi^2 / 2 + C~, the vanishing-regulator vertex"""
    return [
        VertexSpec(degree=4, smearing=g, coefficient=0.25 * tilde.lambda_tilde),
        VertexSpec(degree=2, smearing=g, coefficient=0.5 * tilde.M_tilde),
        VertexSpec(degree=0, smearing=g, coefficient=tilde.C_tilde),
    ]


class ScheduleElement(BaseModel):
    k: int = Field(ge=1)
    Lambda1: float = Field(gt=0)
    Lambda2: float = Field(gt=0)
    N: int = Field(ge=1)


def scheduled_sequence(k: int, base: tuple[float, float]) -> ScheduleElement:
    """(Lambda1 / k, Lambda2 / log(k + 1), N = k)"""
    if k < 1:
        raise ValueError(f"the schedule starts at k = 1, got {k}")
    Lambda1, Lambda2 = base
    return ScheduleElement(k=k, Lambda1=Lambda1 / k, Lambda2=Lambda2 / math.log(k + 1), N=k)


def requires_counterterm(external_legs: int) -> bool:
    """Superficial degree of divergence 4 - E >= 0 with E even"""
    if external_legs < 0:
        raise ValueError(f"external leg count must be >= 0, got {external_legs}")
    return external_legs % 2 == 0 and 4 - external_legs >= 0


class ScheduleRow(BaseModel):
    k: int
    Lambda1: float
    Lambda2: float
    N: int
    effective_order: int
    tilde: TildeConstants
    value: ComplexValue
    target: ComplexValue
    deviation: float = Field(ge=0)
    quad_error: float = Field(ge=0)


class ScheduleReport(BaseModel):
    n: int
    rows: list[ScheduleRow]
    clamped: bool


def schedule_report(
    k_values: Sequence[int],
    base: tuple[float, float],
    table: CountertermTable,
    m: float,
    lambda_: float,
    g: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
    n: int = 1,
    rule_nodes: int = 20,
) -> ScheduleReport:
    """
    S_n along the scheduled sequence, evaluated at the rescaled field, next to
    the same order of the vanishing-regulator polynomial Lagrangian. Orders
    beyond the last table row are clamped to it.
    """
    _check_4d(ev)
    settings = settings or ev.settings
    cap = settings.order_cap(4)
    if not 0 <= n <= cap:
        raise ValueError(f"schedule order must lie in 0..{cap}, got {n}")
    rows = []
    clamped = False
    with logfire.span(f"scheduled sequence, order {n}"):
        for k in k_values:
            element = scheduled_sequence(k, base)
            order = min(element.N, table.max_order)
            if order < element.N:
                clamped = True
                logfire.warning(
                    f"schedule k={k} asks for order {element.N}; the table stops at {table.max_order}"
                )
            tilde = tilde_constants(truncate_table(table, order, element.Lambda2), m, lambda_)
            phi0 = rescaled_field(phi, tilde)
            ev_k = ev.with_lambda(element.Lambda2)
            L = build_lagrangian_4d(
                order, element.Lambda1, element.Lambda2, g, table, m, lambda_, ev_k, rule_nodes
            )
            vertices = polynomial_vertex_4d(tilde, g)
            if n == 0:
                target = 1.0 + 0j
            else:
                oracle = polynomial_tproduct_oracle([vertices] * n, ev_k, phi0, settings)
                target = oracle.value * order_coefficient(n)
            deviation = limit_deviation(
                n, L, vertices, ev_k, phi0, settings, f"schedule k={k} S_{n} difference"
            )
            rows.append(
                ScheduleRow(
                    k=k,
                    Lambda1=element.Lambda1,
                    Lambda2=element.Lambda2,
                    N=element.N,
                    effective_order=order,
                    tilde=tilde,
                    value=target + deviation.value,
                    target=target,
                    deviation=abs(deviation.value),
                    quad_error=deviation.error_estimate,
                )
            )
    return ScheduleReport(n=n, rows=rows, clamped=clamped)
