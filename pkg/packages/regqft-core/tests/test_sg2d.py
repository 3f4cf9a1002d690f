import math

import numpy as np
import pytest
from scipy.special import k0

from regqft_core.configs import EngineSettings, QuadratureSettings
from regqft_core.data import ChargeProfile, CutoffSpec, ModelParams, SpacetimeTestFunction
from regqft_core.errors import (
    BudgetExceededError,
    CalibrationFailureError,
    ExponentViolationError,
    LightconeSingularityError,
    OutOfRangeError,
)
from regqft_core.kernels import FieldConfiguration, PairKernel, PropagatorEvaluator
from regqft_core.sg2d import (
    SG2DParams,
    calibrate_constant,
    check_supports,
    conditioning_step_report,
    hoelder_step_report,
    k_constant,
    lq_norm,
    sn_bound,
    verify_sn_bound,
    ws_2d,
    ws_log_split,
)


@pytest.fixture(scope="module")
def sg_settings() -> EngineSettings:
    return EngineSettings(
        threads=1,
        quadrature=QuadratureSettings(target_rel_tol=1e-3, max_evals=60_000),
    )


@pytest.fixture(scope="module")
def ev_sg(sg_settings: EngineSettings) -> PropagatorEvaluator:
    return PropagatorEvaluator(ModelParams(dimension=2, mass=1.0, Lambda=1.0), CutoffSpec(), sg_settings)


@pytest.fixture
def params() -> SG2DParams:
    """a_max = 1 inside the cone of radius 1, p = 2"""
    return SG2DParams(mass=1.0, mu=1.0, a_max=1.0, p=2.0, C_cal=1.0)


@pytest.fixture
def f() -> ChargeProfile:
    return ChargeProfile.normalized(1.0)


@pytest.fixture
def g() -> SpacetimeTestFunction:
    return SpacetimeTestFunction.unit(center=[0.0, 0.0], halfwidth=[0.3, 0.3])


class TestWs:
    def test_matches_symmetric_kernel_at_zero_cutoff(self) -> None:
        ev0 = PropagatorEvaluator(ModelParams(dimension=2, mass=1.0, Lambda=0.0))
        dt = np.array([0.0, 0.3, 1.2, -0.7])
        r = np.array([0.5, 0.1, 0.4, 2.0])
        expected = ev0.kernel_values(PairKernel.SYMMETRIC, dt, r).real
        np.testing.assert_allclose(ws_2d(dt, r, 1.0), expected, rtol=1e-12)

    def test_spacelike_is_bessel_k0(self) -> None:
        x = np.array([0.2, 1.0, 3.0])
        np.testing.assert_allclose(ws_2d(np.zeros(3), x, 2.0), k0(2.0 * x) / (2.0 * math.pi))

    def test_even_in_both_arguments(self) -> None:
        assert ws_2d(0.3, 0.9, 1.0) == pytest.approx(ws_2d(-0.3, -0.9, 1.0))
        assert ws_2d(0.9, 0.3, 1.0) == pytest.approx(ws_2d(-0.9, 0.3, 1.0))

    def test_decays_at_large_spacelike_separation(self) -> None:
        ratio = float(ws_2d(0.0, 11.0, 1.0) / ws_2d(0.0, 10.0, 1.0))
        assert ratio == pytest.approx(math.exp(-1.0) * math.sqrt(10.0 / 11.0), rel=1e-2)

    @pytest.mark.parametrize("t, x", [(0.5, 0.5), (-1.0, 1.0), (0.0, 0.0)])
    def test_light_cone_rejected(self, t: float, x: float) -> None:
        with pytest.raises(LightconeSingularityError):
            ws_2d(t, x, 1.0)


class TestLogSplit:
    def test_parts_add_up(self) -> None:
        t = np.array([0.0, 0.4, 1.5])
        x = np.array([0.6, 0.1, 0.2])
        singular, remainder = ws_log_split(t, x, 1.0, 0.8)
        np.testing.assert_allclose(singular + remainder, ws_2d(t, x, 1.0), rtol=1e-12)

    def test_log_part_vanishes_at_twice_mu(self) -> None:
        singular, _ = ws_log_split(0.0, 2.0 * 0.7, 1.0, 0.7)
        assert float(singular) == pytest.approx(0.0, abs=1e-14)

    def test_log_part_at_mu(self) -> None:
        singular, _ = ws_log_split(0.0, 1.0, 1.0, 1.0)
        assert float(singular) == pytest.approx(math.log(4.0) / (4.0 * math.pi))

    @pytest.mark.parametrize("m, mu", [(1.0, 1.0), (2.0, 0.5), (0.7, 1.3)])
    def test_remainder_tends_to_k_at_the_tip(self, m: float, mu: float) -> None:
        K = k_constant(m, mu)
        _, spacelike = ws_log_split(0.0, 1e-4, m, mu)
        _, timelike = ws_log_split(1e-4, 0.0, m, mu)
        assert float(spacelike) == pytest.approx(K, abs=1e-6)
        assert float(timelike) == pytest.approx(K, abs=1e-6)

    def test_remainder_continuous_across_the_cone(self) -> None:
        _, inside = ws_log_split(0.3, 0.3 - 1e-6, 1.0, 1.0)
        _, outside = ws_log_split(0.3, 0.3 + 1e-6, 1.0, 1.0)
        assert float(inside) == pytest.approx(float(outside), abs=1e-4)

    def test_k_at_unit_mass_and_cone(self) -> None:
        assert k_constant(1.0, 1.0) == pytest.approx(-np.euler_gamma / (2.0 * math.pi))

    def test_k_at_root_two_cone(self) -> None:
        """
        K keeps log(m^2 mu^2) without a factor 1/2: at m = 1, mu = sqrt 2 it is
        -(2 gamma + log 2) / 4 pi, not the -gamma / 2 pi that log(m^2 mu^2 / 2) gives.
        """
        mu = math.sqrt(2.0)
        K = k_constant(1.0, mu)
        assert K == pytest.approx(-(2.0 * np.euler_gamma + math.log(2.0)) / (4.0 * math.pi), rel=1e-12)
        assert K - (-np.euler_gamma / (2.0 * math.pi)) == pytest.approx(-math.log(2.0) / (4.0 * math.pi))
        _, remainder = ws_log_split(0.0, 1e-5, 1.0, mu)
        assert float(remainder) == pytest.approx(K, abs=1e-6)

    def test_k_needs_positive_arguments(self) -> None:
        with pytest.raises(ValueError):
            k_constant(0.0, 1.0)


class TestParams:
    def test_conjugate_exponent(self) -> None:
        assert SG2DParams(p=2.0).q == pytest.approx(2.0)
        assert SG2DParams(p=4.0).q == pytest.approx(4.0 / 3.0)
        assert math.isinf(SG2DParams(p=1.0).q)

    def test_charge_above_the_finite_regime(self) -> None:
        with pytest.raises(ExponentViolationError):
            SG2DParams(a_max=4.0).check_exponents()

    def test_exponent_beyond_the_limit(self) -> None:
        params = SG2DParams(a_max=1.0, mu=1.0, p=13.0)
        assert params.p_limit == pytest.approx(4.0 * math.pi)
        with pytest.raises(ExponentViolationError):
            params.check_exponents()

    def test_exponent_below_one_rejected(self) -> None:
        with pytest.raises(ValueError):
            SG2DParams(p=0.5)


class TestSupports:
    def test_accepts_the_default_setup(
        self, params: SG2DParams, f: ChargeProfile, g: SpacetimeTestFunction
    ) -> None:
        check_supports(params, f, g)

    def test_charge_support_too_wide(self, params: SG2DParams, g: SpacetimeTestFunction) -> None:
        with pytest.raises(OutOfRangeError):
            check_supports(params, ChargeProfile.normalized(2.0), g)

    def test_smearing_leaves_the_cone(self, params: SG2DParams, f: ChargeProfile) -> None:
        corner = SpacetimeTestFunction.unit(center=[0.5, 0.4], halfwidth=[0.2, 0.2])
        with pytest.raises(OutOfRangeError):
            check_supports(params, f, corner)

    def test_wrong_dimension(self, params: SG2DParams, f: ChargeProfile) -> None:
        g3 = SpacetimeTestFunction.unit(center=[0.0, 0.0, 0.0], halfwidth=[0.2, 0.2, 0.2])
        with pytest.raises(OutOfRangeError):
            check_supports(params, f, g3)


class TestLqNorm:
    def test_q_one_is_the_mass(self, g: SpacetimeTestFunction, sg_settings: EngineSettings) -> None:
        assert lq_norm(g, 1.0, sg_settings) == pytest.approx(g.l1_norm, rel=1e-3)

    def test_against_factorized_norm(self, g: SpacetimeTestFunction, sg_settings: EngineSettings) -> None:
        assert lq_norm(g, 2.0, sg_settings) == pytest.approx(g.lq_norm(2.0), rel=1e-3)

    def test_sup_norm(self, g: SpacetimeTestFunction) -> None:
        assert lq_norm(g, math.inf) == pytest.approx(g.amplitude * math.exp(-2.0))

    def test_below_one_rejected(self, g: SpacetimeTestFunction) -> None:
        with pytest.raises(ValueError):
            lq_norm(g, 0.5)


class TestSnBound:
    def test_order_zero(self, params: SG2DParams, f: ChargeProfile, g: SpacetimeTestFunction) -> None:
        assert sn_bound(0, params, f, g) == 1.0

    def test_first_order_closed_form(
        self,
        params: SG2DParams,
        f: ChargeProfile,
        g: SpacetimeTestFunction,
        sg_settings: EngineSettings,
    ) -> None:
        K = k_constant(1.0, 1.0)
        expected = (
            f.l1_norm
            * math.exp(K / 2.0)
            * 2.0 ** (1.0 / (4.0 * math.pi))
            * lq_norm(g, 2.0, sg_settings)
        )
        assert sn_bound(1, params, f, g, sg_settings) == pytest.approx(expected, rel=1e-10)

    def test_factorial_structure(
        self,
        params: SG2DParams,
        f: ChargeProfile,
        g: SpacetimeTestFunction,
        sg_settings: EngineSettings,
    ) -> None:
        # S_n bound = X^n (n!)^(1/p) / n!
        first = sn_bound(1, params, f, g, sg_settings)
        second = sn_bound(2, params, f, g, sg_settings)
        third = sn_bound(3, params, f, g, sg_settings)
        assert second / first**2 == pytest.approx(2.0**0.5 / 2.0, rel=1e-10)
        assert third / first**3 == pytest.approx(6.0**0.5 / 6.0, rel=1e-10)

    def test_scales_with_the_calibration(
        self,
        params: SG2DParams,
        f: ChargeProfile,
        g: SpacetimeTestFunction,
        sg_settings: EngineSettings,
    ) -> None:
        base = sn_bound(2, params, f, g, sg_settings)
        scaled = sn_bound(2, params.model_copy(update={"C_cal": 4.0}), f, g, sg_settings)
        assert scaled / base == pytest.approx(4.0, rel=1e-10)

    def test_sup_norm_exponent(self, f: ChargeProfile, g: SpacetimeTestFunction) -> None:
        params = SG2DParams(p=1.0)
        K = k_constant(1.0, 1.0)
        expected = f.l1_norm * math.exp(K / 2.0) * 2.0 ** (1.0 / (4.0 * math.pi)) * g.lq_norm(math.inf)
        assert sn_bound(1, params, f, g) == pytest.approx(expected, rel=1e-10)

    def test_exponent_violation(self, f: ChargeProfile, g: SpacetimeTestFunction) -> None:
        with pytest.raises(ExponentViolationError):
            sn_bound(1, SG2DParams(p=20.0), f, g)

    def test_negative_order(self, params: SG2DParams, f: ChargeProfile, g: SpacetimeTestFunction) -> None:
        with pytest.raises(ValueError):
            sn_bound(-1, params, f, g)


class TestVerification:
    def test_calibrated_constant_passes(
        self,
        params: SG2DParams,
        f: ChargeProfile,
        g: SpacetimeTestFunction,
        ev_sg: PropagatorEvaluator,
        sg_settings: EngineSettings,
    ) -> None:
        calibration = calibrate_constant(params, f, g, ev_sg, sg_settings)
        assert calibration.C_cal > 0
        loose = params.model_copy(update={"C_cal": 1.5 * calibration.C_cal})
        report = verify_sn_bound(
            [0, 2], loose, f, g, FieldConfiguration.zero(), ev_sg, sg_settings, threads=1
        )
        assert [row.n for row in report.rows] == [0, 2]
        assert report.rows[0].ratio == pytest.approx(1.0)
        assert report.rows[1].ratio == pytest.approx(1.5 ** (-1.0), rel=1e-6)
        assert report.max_ratio <= 1.0

    def test_too_small_constant_fails_with_report(
        self,
        params: SG2DParams,
        f: ChargeProfile,
        g: SpacetimeTestFunction,
        ev_sg: PropagatorEvaluator,
        sg_settings: EngineSettings,
    ) -> None:
        calibration = calibrate_constant(params, f, g, ev_sg, sg_settings)
        tight = params.model_copy(update={"C_cal": 1e-3 * calibration.C_cal})
        with pytest.raises(CalibrationFailureError) as info:
            verify_sn_bound([2], tight, f, g, FieldConfiguration.zero(), ev_sg, sg_settings, threads=1)
        assert info.value.report.max_ratio > 1.0

    def test_order_cap(
        self,
        params: SG2DParams,
        f: ChargeProfile,
        g: SpacetimeTestFunction,
        ev_sg: PropagatorEvaluator,
    ) -> None:
        with pytest.raises(BudgetExceededError):
            verify_sn_bound([1, 4], params, f, g, FieldConfiguration.zero(), ev_sg)

    def test_needs_two_dimensions_and_a_cutoff(
        self, params: SG2DParams, f: ChargeProfile, g: SpacetimeTestFunction
    ) -> None:
        ev0 = PropagatorEvaluator(ModelParams(dimension=2, mass=1.0, Lambda=0.0))
        with pytest.raises(ValueError):
            verify_sn_bound([1], params, f, g, FieldConfiguration.zero(), ev0)


class TestSteps:
    def test_hoelder_equal_charges_is_an_identity(
        self, g: SpacetimeTestFunction, ev_sg: PropagatorEvaluator, sg_settings: EngineSettings
    ) -> None:
        report = hoelder_step_report([0.6, 0.6], g, ev_sg, sg_settings)
        assert report.lhs == pytest.approx(report.rhs, rel=1e-12)
        assert report.holds

    def test_hoelder_sides(
        self, g: SpacetimeTestFunction, ev_sg: PropagatorEvaluator, sg_settings: EngineSettings
    ) -> None:
        report = hoelder_step_report([0.4, 0.9], g, ev_sg, sg_settings)
        assert len(report.equal_charge) == 2
        assert report.lhs == pytest.approx(report.mixed**2)
        assert report.rhs == pytest.approx(report.equal_charge[0] * report.equal_charge[1])

    def test_hoelder_needs_two_charges(
        self, g: SpacetimeTestFunction, ev_sg: PropagatorEvaluator
    ) -> None:
        with pytest.raises(ValueError):
            hoelder_step_report([0.5], g, ev_sg)

    def test_conditioning_report(
        self,
        params: SG2DParams,
        g: SpacetimeTestFunction,
        ev_sg: PropagatorEvaluator,
        sg_settings: EngineSettings,
    ) -> None:
        report = conditioning_step_report(0.5, 2, params, g, ev_sg, sg_settings)
        assert report.K == pytest.approx(k_constant(1.0, 1.0))
        assert report.factor == pytest.approx(math.exp(2 * 0.25 * report.K / 2.0))
        assert report.full_kernel > 0
        # (|s^2| / 4)^(a^2 / 4 pi) <= 1 on the cone of radius 1
        assert 0 < report.log_kernel <= 1.0 + 1e-3

    def test_conditioning_order_range(
        self, params: SG2DParams, g: SpacetimeTestFunction, ev_sg: PropagatorEvaluator
    ) -> None:
        with pytest.raises(ValueError):
            conditioning_step_report(0.5, 4, params, g, ev_sg)
