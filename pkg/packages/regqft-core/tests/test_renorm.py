import math
from itertools import combinations

import numpy as np
import pytest
from pydantic import ValidationError
from qft_tables import (
    BasisCoefficients,
    CountertermEntry,
    CountertermRow,
    CountertermTable,
    TableMetadata,
)

from regqft_core.configs import EngineSettings, QuadratureScheme, QuadratureSettings
from regqft_core.data import CutoffSpec, ModelParams, SpacetimeTestFunction
from regqft_core.errors import BudgetExceededError, OutOfRangeError, SingularWavefunctionError
from regqft_core.kernels import FieldConfiguration, PairKernel, PropagatorEvaluator
from regqft_core.quadrature import IntegrationRequest, integrate, tensor_points
from regqft_core.renorm import (
    CountertermSet3D,
    GaussianRegulator,
    MassCounterterm,
    RegulatedProfile,
    VertexSpec,
    WickIntegrand,
    build_lagrangian_4d,
    build_renormalized_lagrangian,
    c_constant,
    compute_counterterms_3d,
    contraction_patterns,
    corollary_path,
    delta_m,
    gaussian_density,
    gaussian_fourier,
    limit_check_order_n,
    limit_lagrangian_eval,
    pattern_multiplicity,
    polynomial_tproduct_oracle,
    potential_profile,
    regulated_transform,
    requires_counterterm,
    rescaled_field,
    schedule_report,
    scheduled_sequence,
    sunset_integral,
    tilde_constants,
    triangle_integral,
    truncate_table,
)
from regqft_core.smatrix import InteractionLagrangian, lagrangian_eval, smatrix_order
from regqft_core.vertex import PairKernelAssignment, ProductIntegrand

LAMBDA = 0.5
LAMBDA2 = 0.5


@pytest.fixture(scope="module")
def renorm_settings() -> EngineSettings:
    return EngineSettings(
        threads=1,
        quadrature=QuadratureSettings(target_rel_tol=1e-4, max_evals=30_000),
    )


@pytest.fixture(scope="module")
def ev3r(renorm_settings: EngineSettings) -> PropagatorEvaluator:
    return PropagatorEvaluator(
        ModelParams(dimension=3, mass=1.0, Lambda=LAMBDA2), CutoffSpec(), renorm_settings
    )


@pytest.fixture(scope="module")
def g3r() -> SpacetimeTestFunction:
    return SpacetimeTestFunction.unit(center=[0.0, 0.0, 0.0], halfwidth=[0.25, 0.25, 0.25])


@pytest.fixture(scope="module")
def counterterms(
    g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator, renorm_settings: EngineSettings
) -> CountertermSet3D:
    return compute_counterterms_3d(LAMBDA, LAMBDA2, g3r, ev3r, renorm_settings, mass_nodes=8)


@pytest.fixture(scope="module")
def ev4(renorm_settings: EngineSettings) -> PropagatorEvaluator:
    return PropagatorEvaluator(
        ModelParams(dimension=4, mass=1.0, Lambda=0.5), CutoffSpec(), renorm_settings
    )


@pytest.fixture(scope="module")
def g4() -> SpacetimeTestFunction:
    return SpacetimeTestFunction.unit(center=[0.0] * 4, halfwidth=[0.3] * 4)


def same_grid_integral(f, box, settings: EngineSettings) -> complex:
    return integrate(IntegrationRequest.from_settings(f, box, settings.quadrature)).value


def one_row_table(**entries: float) -> CountertermTable:
    return CountertermTable(
        rows=[
            CountertermRow(
                order=1, **{name: CountertermEntry(value=v) for name, v in entries.items()}
            )
        ]
    )


class TestGaussianRegulator:
    def test_center_value(self) -> None:
        assert gaussian_density(0.0, GaussianRegulator(Lambda1=1.0)) == pytest.approx(
            1.0 / (2.0 * math.sqrt(math.pi))
        )
        assert gaussian_density(0.0, GaussianRegulator(Lambda1=0.5)) == pytest.approx(
            1.0 / math.sqrt(math.pi)
        )

    def test_densities_are_even(self) -> None:
        reg = GaussianRegulator(Lambda1=0.7)
        a = np.linspace(0.1, 5.0, 17)
        for k in (0, 2, 4):
            assert np.allclose(gaussian_density(a, reg, k), gaussian_density(-a, reg, k))

    def test_unit_mass(self) -> None:
        tight = EngineSettings(quadrature=QuadratureSettings(target_rel_tol=1e-13))
        result = gaussian_fourier(0.0, GaussianRegulator(Lambda1=0.7), settings=tight)

        assert result.value == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("order", [0, 2, 4])
    @pytest.mark.parametrize("phi", [-2.0, -0.5, 0.0, 1.0, 3.0])
    def test_fourier_transform_matches_closed_form(self, order: int, phi: float) -> None:
        tight = EngineSettings(quadrature=QuadratureSettings(target_rel_tol=1e-12))
        result = gaussian_fourier(phi, GaussianRegulator(Lambda1=0.7), order, tight)

        expected = complex(regulated_transform(phi, 0.7, order))
        assert abs(result.value - expected) <= 1e-8

    def test_second_derivative_by_finite_difference(self) -> None:
        reg = GaussianRegulator(Lambda1=1.0)
        a = np.linspace(-4.0, 4.0, 21)
        h = 1e-3

        second = (
            gaussian_density(a + h, reg) - 2.0 * gaussian_density(a, reg) + gaussian_density(a - h, reg)
        ) / h**2

        assert np.allclose(second, gaussian_density(a, reg, 2), atol=1e-6)

    def test_hermite_rule_integrates_transforms(self) -> None:
        reg = GaussianRegulator(Lambda1=0.6, rule_nodes=40)
        nodes, weights = reg.charge_rule()
        for k in (0, 2, 4):
            for phi in (0.0, 0.5, 1.5):
                total = np.sum(weights * gaussian_density(nodes, reg, k) * np.exp(1j * nodes * phi))
                assert abs(total - regulated_transform(phi, 0.6, k)) <= 1e-10

    def test_rule_is_read_only(self) -> None:
        nodes, _ = GaussianRegulator(Lambda1=0.3).charge_rule()
        with pytest.raises(ValueError):
            nodes[0] = 1.0

    def test_odd_order_rejected(self) -> None:
        with pytest.raises(ValueError, match="derivative order"):
            gaussian_density(0.0, GaussianRegulator(Lambda1=1.0), 3)

    def test_nonpositive_width_rejected(self) -> None:
        with pytest.raises(ValidationError):
            GaussianRegulator(Lambda1=0.0)


class TestRegulatedProfile:
    def test_zero_coefficients_drop(self) -> None:
        reg = GaussianRegulator(Lambda1=0.5)
        assert potential_profile(reg, 0.0, 0.0, 0.0).is_zero
        assert not potential_profile(reg, 1.0, 0.0, 0.0).is_zero

    def test_position_dependent_needs_points(self) -> None:
        profile = RegulatedProfile(GaussianRegulator(Lambda1=0.5), {2: lambda x: x[:, 0]})

        assert profile.position_dependent
        with pytest.raises(ValueError, match="needs the points"):
            profile.evaluate(np.zeros(3))

    def test_broadcasts_against_charge_nodes(self) -> None:
        reg = GaussianRegulator(Lambda1=0.5)
        profile = RegulatedProfile(reg, {0: 0.3, 2: lambda x: 1.0 + x[:, 0]})
        x = np.array([[0.1, 0.0], [-0.2, 0.3], [0.0, 0.0]])
        a = np.linspace(-1.0, 1.0, 15).reshape(3, 5)

        values = profile.evaluate(a, x)

        for i in range(3):
            expected = 0.3 * gaussian_density(a[i], reg) + (1.0 + x[i, 0]) * gaussian_density(
                a[i], reg, 2
            )
            assert np.allclose(values[i], expected)

    def test_transform_is_the_potential(self) -> None:
        reg = GaussianRegulator(Lambda1=0.6, rule_nodes=40)
        profile = potential_profile(reg, 1.0, 0.5, 0.3)
        phi = np.array([-1.0, 0.0, 0.4, 1.2])
        nodes, weights = reg.charge_rule()

        potential = np.exp(-((0.6 * phi) ** 2)) * (phi**4 / 4 + 0.5 * phi**2 / 2 + 0.3)
        by_rule = np.array([np.sum(weights * profile.evaluate(nodes) * np.exp(1j * nodes * p)) for p in phi])

        assert np.allclose(profile.transform(phi), potential, rtol=1e-12)
        assert np.allclose(by_rule, potential, rtol=1e-10, atol=1e-12)

    def test_lagrangian_on_the_charge_rule(
        self, g2: SpacetimeTestFunction, settings: EngineSettings
    ) -> None:
        reg = GaussianRegulator(Lambda1=0.4)
        profile = potential_profile(reg, 1.0, 0.5, 0.3)
        L = InteractionLagrangian(coupling=1.0, smearing=g2, components={1: profile})
        phi = FieldConfiguration.constant(0.8)

        result = lagrangian_eval(L, phi, settings)

        expected = complex(profile.transform(np.array([0.8]))[0]) * g2.l1_norm
        assert result.value == pytest.approx(expected, rel=1e-4)

    def test_pair_product_matches_gaussian_integral(
        self, g2: SpacetimeTestFunction, ev2: PropagatorEvaluator
    ) -> None:
        Lambda1 = 0.3
        reg = GaussianRegulator(Lambda1=Lambda1, rule_nodes=40)
        profile = potential_profile(reg, 0.0, 0.0, 1.0)
        phi = FieldConfiguration.constant(0.7)
        integrand = ProductIntegrand(
            [profile, profile],
            [g2, g2],
            [(1.0, PairKernelAssignment.uniform(2, PairKernel.FEYNMAN))],
            ev2,
            phi,
        )
        points = np.array([[0.05, -0.1, -0.1, 0.12], [0.0, 0.0, 0.1, 0.1], [-0.15, 0.2, 0.1, -0.05]])

        values = integrand(points)

        x1, x2 = points[:, :2], points[:, 2:]
        K = ev2.kernel_values(PairKernel.FEYNMAN, x1[:, 0] - x2[:, 0], np.abs(x1[:, 1] - x2[:, 1]))
        diag = 1.0 / (2.0 * Lambda1**2)
        norm = (1.0 / (2.0 * math.sqrt(math.pi) * Lambda1)) ** 2
        for k in range(points.shape[0]):
            A = np.array([[diag, K[k]], [K[k], diag]])
            j = np.array([0.7, 0.7])
            gaussian = 2.0 * math.pi / np.sqrt(np.linalg.det(A)) * np.exp(-0.5 * j @ np.linalg.solve(A, j))
            expected = norm * gaussian * g2(x1[k : k + 1])[0] * g2(x2[k : k + 1])[0]
            assert values[k] == pytest.approx(expected, rel=1e-8)


class TestCounterterms3D:
    def test_zero_coupling_is_exact(
        self, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator, renorm_settings: EngineSettings
    ) -> None:
        assert delta_m([0.0, 0.0, 0.0], 0.0, LAMBDA2, g3r, ev3r, renorm_settings).value == 0
        assert c_constant(0.0, LAMBDA2, g3r, ev3r, renorm_settings).value == 0

    def test_mass_is_quadratic_in_coupling(
        self, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator, renorm_settings: EngineSettings
    ) -> None:
        x = [0.05, 0.0, -0.05]
        one = delta_m(x, 1.0, LAMBDA2, g3r, ev3r, renorm_settings)
        two = delta_m(x, 2.0, LAMBDA2, g3r, ev3r, renorm_settings)

        assert two.value == pytest.approx(4.0 * one.value, rel=1e-12)

    def test_mass_rule_matches_direct_sum(
        self, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator
    ) -> None:
        mass = MassCounterterm(g3r, ev3r, nodes=6)
        x = np.array([[0.05, 0.0, -0.05], [0.0, 0.1, 0.0]])
        y, w = tensor_points(g3r.box, 6)

        values = mass(x)

        diff = x[:, None, :] - y[None, :, :]
        kernel = ev3r.kernel_values(
            PairKernel.FEYNMAN,
            diff[..., 0].ravel(),
            np.linalg.norm(diff[..., 1:], axis=-1).ravel(),
        ).reshape(2, -1)
        expected = -6j * (kernel**3 @ (w * g3r(y)))
        assert np.allclose(values, expected, rtol=1e-10)

    def test_mass_rule_against_adaptive_integral(
        self, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator, renorm_settings: EngineSettings
    ) -> None:
        x = [0.05, 0.0, -0.05]
        direct = delta_m(x, 1.0, LAMBDA2, g3r, ev3r, renorm_settings)

        assert MassCounterterm(g3r, ev3r, nodes=24)([x])[0] == pytest.approx(direct.value, rel=1e-2)

    def test_mass_memoizes_repeated_points(
        self, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator
    ) -> None:
        mass = MassCounterterm(g3r, ev3r, nodes=4)
        x = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.0, 0.0]])

        first = mass(x)
        again = mass(x[::-1])

        assert first[0] == first[2]
        assert np.array_equal(again, first[::-1])

    def test_c_matches_the_set(
        self,
        counterterms: CountertermSet3D,
        g3r: SpacetimeTestFunction,
        ev3r: PropagatorEvaluator,
        renorm_settings: EngineSettings,
    ) -> None:
        c = c_constant(LAMBDA, LAMBDA2, g3r, ev3r, renorm_settings)

        assert c.value == pytest.approx(counterterms.c, rel=1e-12)
        assert counterterms.c == pytest.approx(
            LAMBDA**2 * counterterms.c2.value + LAMBDA**3 * counterterms.c3.value
        )

    def test_coupling_parity(self, counterterms: CountertermSet3D) -> None:
        flipped = counterterms.with_coupling(-LAMBDA)
        x = np.array([[0.0, 0.05, 0.0]])

        assert flipped.c == pytest.approx(
            LAMBDA**2 * counterterms.c2.value - LAMBDA**3 * counterterms.c3.value
        )
        assert np.allclose(flipped.delta_m(x), counterterms.delta_m(x))
        assert np.allclose(counterterms.delta_m(x), LAMBDA**2 * counterterms.mass(x))

    def test_triangle_refuses_tensor_quadrature(
        self, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator
    ) -> None:
        tensor = EngineSettings(quadrature=QuadratureSettings(scheme=QuadratureScheme.TENSOR_GAUSS))
        with pytest.raises(BudgetExceededError):
            triangle_integral(LAMBDA2, g3r, ev3r, tensor)

    def test_triangle_runs_quasi_random(self, counterterms: CountertermSet3D) -> None:
        assert counterterms.c3.scheme is QuadratureScheme.QUASI_RANDOM

    def test_wrong_dimension_or_cutoff_rejected(
        self,
        g2: SpacetimeTestFunction,
        ev2: PropagatorEvaluator,
        g3r: SpacetimeTestFunction,
        ev3r: PropagatorEvaluator,
    ) -> None:
        with pytest.raises(ValueError, match="d = 3"):
            sunset_integral(LAMBDA2, g2, ev2)
        with pytest.raises(ValueError, match="Lambda2 > 0"):
            sunset_integral(0.0, g3r, ev3r)


class TestWick:
    def test_two_quadratic_vertices(self) -> None:
        assert contraction_patterns((2, 2)) == {(0,): 1, (1,): 4, (2,): 2}

    def test_three_linear_vertices(self) -> None:
        assert contraction_patterns((1, 1, 1)) == {
            (0, 0, 0): 1,
            (1, 0, 0): 1,
            (0, 1, 0): 1,
            (0, 0, 1): 1,
        }

    @pytest.mark.parametrize("degrees", [(4, 2), (4, 4), (2, 2, 2), (4, 2, 2), (4, 0, 2), (3, 1, 2)])
    def test_counts_match_multiplicity(self, degrees: tuple[int, ...]) -> None:
        for lines, count in contraction_patterns(degrees).items():
            assert count == pattern_multiplicity(degrees, lines)

    def test_impossible_pattern_has_no_multiplicity(self) -> None:
        assert pattern_multiplicity((2, 2), (3,)) == 0

    def test_leg_cap(self) -> None:
        with pytest.raises(BudgetExceededError):
            contraction_patterns((4, 4, 4, 2))

    def test_fully_contracted_pair(
        self, g2: SpacetimeTestFunction, ev2: PropagatorEvaluator, settings: EngineSettings
    ) -> None:
        spec = VertexSpec(degree=2, smearing=g2)
        integrand = WickIntegrand([spec, spec], ev2, FieldConfiguration.zero())
        points = np.array([[0.1, 0.0, -0.1, 0.05], [0.0, 0.2, 0.05, -0.1]])

        x1, x2 = points[:, :2], points[:, 2:]
        K = ev2.kernel_values(PairKernel.FEYNMAN, x1[:, 0] - x2[:, 0], np.abs(x1[:, 1] - x2[:, 1]))
        assert np.allclose(integrand(points), 2.0 * K**2 * g2(x1) * g2(x2), rtol=1e-12)

        def direct(p: np.ndarray) -> np.ndarray:
            y1, y2 = p[:, :2], p[:, 2:]
            k = ev2.kernel_values(PairKernel.FEYNMAN, y1[:, 0] - y2[:, 0], np.abs(y1[:, 1] - y2[:, 1]))
            return 2.0 * k**2 * g2(y1) * g2(y2)

        oracle = polynomial_tproduct_oracle([spec, spec], ev2, FieldConfiguration.zero(), settings)
        assert oracle.value == pytest.approx(
            same_grid_integral(direct, g2.box * 2, settings), rel=1e-10
        )

    def test_single_quartic_vertex(self, g2: SpacetimeTestFunction, ev2: PropagatorEvaluator) -> None:
        spec = VertexSpec(degree=4, smearing=g2, coefficient=0.25)
        x = np.array([[0.0, 0.0], [0.1, -0.2]])

        values = WickIntegrand([spec], ev2, FieldConfiguration.constant(1.3))(x)

        assert np.allclose(values, 0.25 * 1.3**4 * g2(x))

    def test_linear_pair_keeps_uncontracted_legs(
        self, g2: SpacetimeTestFunction, ev2: PropagatorEvaluator
    ) -> None:
        spec = VertexSpec(degree=1, smearing=g2)
        points = np.array([[0.1, 0.0, -0.1, 0.05]])
        x1, x2 = points[:, :2], points[:, 2:]
        K = ev2.kernel_values(PairKernel.FEYNMAN, x1[:, 0] - x2[:, 0], np.abs(x1[:, 1] - x2[:, 1]))

        values = WickIntegrand([spec, spec], ev2, FieldConfiguration.constant(0.5))(points)

        assert np.allclose(values, (0.25 + K) * g2(x1) * g2(x2))

    def test_odd_legs_vanish_at_zero_field(
        self, g2: SpacetimeTestFunction, ev2: PropagatorEvaluator
    ) -> None:
        points = np.array([[0.1, 0.0, -0.1, 0.05], [0.0, 0.0, 0.0, 0.1]])
        integrand = WickIntegrand(
            [VertexSpec(degree=1, smearing=g2), VertexSpec(degree=2, smearing=g2)],
            ev2,
            FieldConfiguration.zero(),
        )

        assert np.all(integrand(points) == 0)

    def test_monomial_alternatives_add(self, g2: SpacetimeTestFunction, ev2: PropagatorEvaluator) -> None:
        vertex = [
            VertexSpec(degree=2, smearing=g2, coefficient=0.5),
            VertexSpec(degree=0, smearing=g2, coefficient=0.2, weight=lambda x: 1.0 + x[:, 0]),
        ]
        points = np.array([[0.1, 0.0, -0.1, 0.05]])
        x1, x2 = points[:, :2], points[:, 2:]
        K = ev2.kernel_values(PairKernel.FEYNMAN, x1[:, 0] - x2[:, 0], np.abs(x1[:, 1] - x2[:, 1]))

        values = WickIntegrand([vertex, vertex], ev2, FieldConfiguration.zero())(points)

        constant = 0.2 * (1.0 + x1[:, 0]) * 0.2 * (1.0 + x2[:, 0])
        assert np.allclose(values, (0.25 * 2.0 * K**2 + constant) * g2(x1) * g2(x2))

    def test_oracle_limits(self, g2: SpacetimeTestFunction, ev2: PropagatorEvaluator) -> None:
        spec = VertexSpec(degree=2, smearing=g2)
        other = SpacetimeTestFunction.unit(center=[0.1, 0.0], halfwidth=[0.3, 0.3])
        with pytest.raises(BudgetExceededError):
            WickIntegrand([spec] * 4, ev2, FieldConfiguration.zero())
        with pytest.raises(ValueError, match="at least one vertex"):
            WickIntegrand([], ev2, FieldConfiguration.zero())
        with pytest.raises(ValueError, match="share one smearing"):
            WickIntegrand([[spec, VertexSpec(degree=0, smearing=other)]], ev2, FieldConfiguration.zero())
        with pytest.raises(ValidationError):
            VertexSpec(degree=5, smearing=g2)


class TestRenormalizedLagrangian:
    def test_grades(
        self, counterterms: CountertermSet3D, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator
    ) -> None:
        L = build_renormalized_lagrangian(LAMBDA, 0.3, LAMBDA2, g3r, ev3r, counterterms=counterterms)

        assert L.grades == [1, 2, 3]
        assert L.coupling == LAMBDA

    def test_mismatched_inputs_rejected(
        self, counterterms: CountertermSet3D, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator
    ) -> None:
        with pytest.raises(ValueError, match="computed at"):
            build_renormalized_lagrangian(LAMBDA, 0.3, 0.7, g3r, ev3r, counterterms=counterterms)
        with pytest.raises(ValueError, match="Lambda1 > 0"):
            build_renormalized_lagrangian(LAMBDA, 0.0, LAMBDA2, g3r, ev3r, counterterms=counterterms)

    def test_charge_sum_is_the_regulated_potential(
        self, counterterms: CountertermSet3D, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator
    ) -> None:
        Lambda1 = 0.3
        L = build_renormalized_lagrangian(
            LAMBDA, Lambda1, LAMBDA2, g3r, ev3r, counterterms=counterterms
        )
        density = L.effective_density()
        nodes, weights = density.charge_rule()
        x = np.array([[0.0, 0.0, 0.0], [0.1, -0.05, 0.1]])
        phi = 0.7

        a = np.broadcast_to(nodes, (2, nodes.size))
        by_rule = (density.evaluate(a, x) * np.exp(1j * a * phi)) @ weights

        polynomial = (
            LAMBDA * phi**4 / 4
            + LAMBDA**2 * counterterms.mass(x) * phi**2 / 2
            + counterterms.c
        )
        assert np.allclose(by_rule, np.exp(-((Lambda1 * phi) ** 2)) * polynomial, rtol=1e-9)

    def test_zero_field_leaves_the_constant(
        self,
        counterterms: CountertermSet3D,
        g3r: SpacetimeTestFunction,
        ev3r: PropagatorEvaluator,
        renorm_settings: EngineSettings,
    ) -> None:
        L = build_renormalized_lagrangian(LAMBDA, 0.3, LAMBDA2, g3r, ev3r, counterterms=counterterms)
        mass_of_g = same_grid_integral(g3r, g3r.box, renorm_settings)

        regulated = lagrangian_eval(L, FieldConfiguration.zero(), renorm_settings)
        limit = limit_lagrangian_eval(
            LAMBDA, g3r, counterterms, FieldConfiguration.zero(), renorm_settings
        )

        assert regulated.value == pytest.approx(counterterms.c * mass_of_g, rel=1e-7)
        assert limit.value == pytest.approx(counterterms.c * mass_of_g, rel=1e-7)


class TestLimitCheck:
    def test_order_zero_is_trivial(
        self,
        counterterms: CountertermSet3D,
        g3r: SpacetimeTestFunction,
        ev3r: PropagatorEvaluator,
        renorm_settings: EngineSettings,
    ) -> None:
        report = limit_check_order_n(
            0,
            LAMBDA,
            LAMBDA2,
            g3r,
            ev3r,
            FieldConfiguration.constant(0.5),
            [0.3, 0.1],
            renorm_settings,
            counterterms,
            corollary=False,
        )

        assert report.target == 1
        assert report.deviations == [0.0, 0.0]
        assert report.decreasing
        assert report.corollary_decreasing is None

    def test_order_limits(
        self, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator
    ) -> None:
        with pytest.raises(BudgetExceededError):
            limit_check_order_n(3, LAMBDA, LAMBDA2, g3r, ev3r, FieldConfiguration.zero(), [0.1])
        with pytest.raises(ValueError):
            limit_check_order_n(-1, LAMBDA, LAMBDA2, g3r, ev3r, FieldConfiguration.zero(), [0.1])

    def test_corollary_path(self) -> None:
        assert corollary_path(0.5) == pytest.approx((0.5, 1.0 / math.log(2.0)))
        with pytest.raises(ValueError):
            corollary_path(1.0)

    def test_first_order_at_zero_field(
        self,
        counterterms: CountertermSet3D,
        g3r: SpacetimeTestFunction,
        ev3r: PropagatorEvaluator,
        renorm_settings: EngineSettings,
    ) -> None:
        report = limit_check_order_n(
            1,
            LAMBDA,
            LAMBDA2,
            g3r,
            ev3r,
            FieldConfiguration.zero(),
            [0.4, 0.2],
            renorm_settings,
            counterterms,
            corollary=False,
        )

        mass_of_g = same_grid_integral(g3r, g3r.box, renorm_settings)
        assert report.target == pytest.approx(1j * counterterms.c * mass_of_g, rel=1e-6)
        assert max(report.deviations) <= 1e-9 * max(1.0, abs(report.target))

    def test_first_order_shrinks_with_the_regulator(
        self,
        counterterms: CountertermSet3D,
        g3r: SpacetimeTestFunction,
        ev3r: PropagatorEvaluator,
        renorm_settings: EngineSettings,
    ) -> None:
        phi = 0.6
        widths = [0.4, 0.2, 0.1]
        report = limit_check_order_n(
            1,
            LAMBDA,
            LAMBDA2,
            g3r,
            ev3r,
            FieldConfiguration.constant(phi),
            widths,
            renorm_settings,
            counterterms,
            corollary=False,
        )

        assert report.decreasing
        suppression = [1.0 - math.exp(-((w * phi) ** 2)) for w in widths]
        for k in (1, 2):
            assert report.deviations[k] / report.deviations[0] == pytest.approx(
                suppression[k] / suppression[0], rel=1e-6
            )

    def test_joint_path_points(
        self,
        counterterms: CountertermSet3D,
        g3r: SpacetimeTestFunction,
        ev3r: PropagatorEvaluator,
        renorm_settings: EngineSettings,
    ) -> None:
        report = limit_check_order_n(
            1,
            LAMBDA,
            LAMBDA2,
            g3r,
            ev3r,
            FieldConfiguration.constant(0.6),
            [0.3, 0.1],
            renorm_settings,
            counterterms,
            corollary=True,
        )

        assert [p.Lambda2 for p in report.corollary_points] == pytest.approx(
            [corollary_path(0.3)[1], corollary_path(0.1)[1]]
        )
        assert report.corollary_decreasing is not None

    def test_second_order_shrinks(
        self,
        counterterms: CountertermSet3D,
        g3r: SpacetimeTestFunction,
        ev3r: PropagatorEvaluator,
    ) -> None:
        small = EngineSettings(threads=1, quadrature=QuadratureSettings(max_evals=5_000))
        report = limit_check_order_n(
            2,
            LAMBDA,
            LAMBDA2,
            g3r,
            ev3r,
            FieldConfiguration.constant(0.6),
            [0.3, 0.05],
            small,
            counterterms,
            corollary=False,
            rule_nodes=12,
        )

        assert report.deviations[1] < report.deviations[0]


class TestFourD:
    def test_truncation_sums_rows(self) -> None:
        table = CountertermTable(
            metadata=TableMetadata(validity=(0.1, 10.0)),
            rows=[
                CountertermRow(order=1, dZ=CountertermEntry(value=0.1), dM=CountertermEntry(value=0.3)),
                CountertermRow(order=2, dM=CountertermEntry(basis=BasisCoefficients(inv=0.2))),
            ],
        )

        first = truncate_table(table, 1, 0.5)
        both = truncate_table(table, 2, 0.5)

        assert (first.dZ, first.dM) == (0.1, 0.3)
        assert both.dM == pytest.approx(0.3 + 0.4)
        assert both.dLambda == 0.0
        with pytest.raises(OutOfRangeError):
            truncate_table(table, 3, 0.5)
        with pytest.raises(OutOfRangeError):
            truncate_table(table, 0, 0.5)
        with pytest.raises(OutOfRangeError):
            truncate_table(table, 1, 20.0)

    def test_zero_table_leaves_the_bare_couplings(self) -> None:
        tilde = tilde_constants(truncate_table(CountertermTable.zeros(2), 2, 0.5), 1.0, 0.7)

        assert (tilde.M_tilde, tilde.lambda_tilde, tilde.C_tilde) == (0.0, 0.7, 0.0)
        assert tilde.field_scale == 1.0

    def test_tilde_constants(self) -> None:
        table = one_row_table(dZ=0.25, dM=0.5, dLambda=0.1, dC=0.2)

        tilde = tilde_constants(truncate_table(table, 1, 0.5), 1.0, 0.7)

        assert tilde.M_tilde == pytest.approx(1.5 / 1.25 - 1.0)
        assert tilde.lambda_tilde == pytest.approx(0.8 / 1.25)
        assert tilde.C_tilde == pytest.approx(0.2 / 1.25)
        assert tilde.field_scale == pytest.approx(math.sqrt(1.25))

    def test_mass_shift_absorbed_by_wavefunction(self) -> None:
        tilde = tilde_constants(truncate_table(one_row_table(dZ=1.0, dM=1.0), 1, 0.5), 1.0, 0.7)

        assert tilde.M_tilde == pytest.approx(0.0)
        assert tilde.lambda_tilde == pytest.approx(0.35)

    def test_singular_wavefunction(self) -> None:
        with pytest.raises(SingularWavefunctionError):
            tilde_constants(truncate_table(one_row_table(dZ=-1.0), 1, 0.5), 1.0, 0.7)

        tilde = tilde_constants(truncate_table(one_row_table(dZ=-2.0), 1, 0.5), 1.0, 0.7)
        assert tilde.field_scale is None
        with pytest.raises(SingularWavefunctionError):
            rescaled_field(FieldConfiguration.constant(1.0), tilde)

    def test_rescaled_field(self) -> None:
        tilde = tilde_constants(truncate_table(one_row_table(dZ=0.44), 1, 0.5), 1.0, 0.7)

        phi0 = rescaled_field(FieldConfiguration.constant(1.0), tilde)

        assert np.allclose(phi0(np.zeros((3, 4))), 1.2)

    def test_vanishing_coupling_gives_no_interaction(
        self, g4: SpacetimeTestFunction, ev4: PropagatorEvaluator
    ) -> None:
        L = build_lagrangian_4d(1, 0.3, 0.5, g4, CountertermTable.zeros(1), 1.0, 0.0, ev4)

        assert L.effective_density().is_zero
        assert smatrix_order(1, L, ev4, FieldConfiguration.constant(0.5)).value == 0

    def test_zero_table_is_the_bare_quartic(
        self, g4: SpacetimeTestFunction, ev4: PropagatorEvaluator
    ) -> None:
        reg = GaussianRegulator(Lambda1=0.3)
        a = np.linspace(-2.0, 2.0, 11)

        L = build_lagrangian_4d(1, 0.3, 0.5, g4, CountertermTable.zeros(1), 1.0, 0.7, ev4)

        assert np.allclose(L.components[1].evaluate(a), 0.7 / 4 * gaussian_density(a, reg, 4))

    def test_profile_from_one_row(self, g4: SpacetimeTestFunction, ev4: PropagatorEvaluator) -> None:
        reg = GaussianRegulator(Lambda1=0.3)
        table = one_row_table(dZ=0.25, dM=0.5, dLambda=0.1, dC=0.2)
        a = np.linspace(-2.0, 2.0, 11)

        L = build_lagrangian_4d(1, 0.3, 0.5, g4, table, 1.0, 0.7, ev4)

        expected = (
            0.16 * gaussian_density(a, reg, 4)
            - 0.1 * gaussian_density(a, reg, 2)
            + 0.16 * gaussian_density(a, reg)
        )
        assert L.coupling == 1.0
        assert np.allclose(L.components[1].evaluate(a), expected)

    def test_lagrangian_needs_four_dimensions(
        self, g3r: SpacetimeTestFunction, ev3r: PropagatorEvaluator, g4: SpacetimeTestFunction, ev4: PropagatorEvaluator
    ) -> None:
        with pytest.raises(ValueError, match="d = 4"):
            build_lagrangian_4d(1, 0.3, 0.5, g3r, CountertermTable.zeros(1), 1.0, 0.7, ev3r)
        with pytest.raises(ValueError, match="Lambda1 > 0"):
            build_lagrangian_4d(1, 0.0, 0.5, g4, CountertermTable.zeros(1), 1.0, 0.7, ev4)

    def test_scheduled_sequence(self) -> None:
        base = (0.5, 0.8)
        elements = [scheduled_sequence(k, base) for k in range(1, 6)]

        assert elements[0].Lambda1 == 0.5
        assert elements[0].Lambda2 == pytest.approx(0.8 / math.log(2.0))
        assert elements[2].Lambda1 == pytest.approx(0.5 / 3)
        assert elements[2].Lambda2 == pytest.approx(0.8 / math.log(4.0))
        assert [e.N for e in elements] == [1, 2, 3, 4, 5]
        for earlier, later in combinations(elements, 2):
            assert later.Lambda1 < earlier.Lambda1
            assert later.Lambda2 < earlier.Lambda2
        with pytest.raises(ValueError):
            scheduled_sequence(0, base)

    def test_counterterm_legs(self) -> None:
        assert [E for E in range(8) if requires_counterterm(E)] == [0, 2, 4]
        with pytest.raises(ValueError):
            requires_counterterm(-1)

    def test_schedule_clamps_and_converges(
        self, g4: SpacetimeTestFunction, ev4: PropagatorEvaluator, renorm_settings: EngineSettings
    ) -> None:
        table = one_row_table(dZ=0.25, dM=0.5, dLambda=0.1, dC=0.2)
        phi = 0.5
        base = (0.4, 0.8)

        report = schedule_report(
            [1, 2, 3],
            base,
            table,
            1.0,
            0.7,
            g4,
            ev4,
            FieldConfiguration.constant(phi),
            renorm_settings,
        )

        assert report.clamped
        assert [row.effective_order for row in report.rows] == [1, 1, 1]
        assert [row.N for row in report.rows] == [1, 2, 3]
        assert len({row.tilde.lambda_tilde for row in report.rows}) == 1
        phi0 = phi * math.sqrt(1.25)
        suppression = [
            1.0 - math.exp(-((scheduled_sequence(k, base).Lambda1 * phi0) ** 2)) for k in (1, 2, 3)
        ]
        deviations = [row.deviation for row in report.rows]
        assert deviations[0] > deviations[1] > deviations[2]
        assert deviations[2] / deviations[0] == pytest.approx(suppression[2] / suppression[0], rel=1e-6)
