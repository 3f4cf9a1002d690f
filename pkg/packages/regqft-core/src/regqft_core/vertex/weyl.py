"""
Both sides of the exponential product rule

    e^{i Phi(f)} * e^{i Phi(h)} = e^{i Phi(f + h)} e^{-<f, Delta_+ h>}

The series side sums the deformation terms (-<f, Delta_+ h>)^k / k! with the
pairing integrated in position space; the closed-form side takes the pairing
from the Fourier transforms of the test functions.
"""

import cmath
import math

import numpy as np

from ..configs import EngineSettings
from ..data import SpacetimeTestFunction
from ..errors import BudgetExceededError
from ..kernels import FieldConfiguration, PairKernel, PropagatorEvaluator, chi_hat_table
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..utils import ComplexArray, FloatArray, bump, bump_integral, composite_gauss, leggauss

MAX_MOMENTUM_POINTS = 1 << 22
CORRELATION_NODES = 96


def linear_functional(
    f: SpacetimeTestFunction, phi: FieldConfiguration, settings: EngineSettings
) -> IntegrationResult:
    """Phi(f)(phi) = int f(x) phi(x) dx"""

    def integrand(x: FloatArray) -> FloatArray:
        return f(x) * phi(x)

    req = IntegrationRequest.from_settings(integrand, f.box, settings.quadrature, label="Phi(f)")
    return integrate(req)


def axis_correlation(
    z: FloatArray, f_axis: tuple[float, float], h_axis: tuple[float, float]
) -> FloatArray:
    """int bump((z + y - c_f) / w_f) bump((y - c_h) / w_h) dy for each z"""
    (cf, wf), (ch, wh) = f_axis, h_axis
    nodes, weights = leggauss(CORRELATION_NODES)
    low = np.maximum(ch - wh, cf - wf - z)
    high = np.minimum(ch + wh, cf + wf - z)
    width = np.clip(high - low, 0.0, None)
    y = 0.5 * (low + high)[:, None] + 0.5 * width[:, None] * nodes[None, :]
    values = bump((z[:, None] + y - cf) / wf) * bump((y - ch) / wh)
    return 0.5 * width * (values @ weights)


def correlation_box(
    f: SpacetimeTestFunction, h: SpacetimeTestFunction
) -> list[tuple[float, float]]:
    axes = zip(f.center, f.halfwidth, h.center, h.halfwidth)
    return [(cf - wf - ch - wh, cf + wf - ch + wh) for cf, wf, ch, wh in axes]


def correlation(f: SpacetimeTestFunction, h: SpacetimeTestFunction, z: FloatArray) -> FloatArray:
    """(f x h)(z) = int f(z + y) h(y) dy, a product of per-axis correlations"""
    out = np.full(z.shape[0], f.amplitude * h.amplitude)
    for axis, (cf, wf, ch, wh) in enumerate(zip(f.center, f.halfwidth, h.center, h.halfwidth)):
        out = out * axis_correlation(z[:, axis], (cf, wf), (ch, wh))
    return out


def pairing_position_space(
    f: SpacetimeTestFunction,
    h: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    settings: EngineSettings,
) -> IntegrationResult:
    """
    <f, Delta_+ h> = int dz Delta_+(z) (f x h)(z), where the correlation
    (f x h)(z) = int f(z + y) h(y) dy factorizes over the axes.
    """

    def integrand(z: FloatArray) -> ComplexArray:
        r = np.linalg.norm(z[:, 1:], axis=1)
        return correlation(f, h, z) * ev.kernel_values(PairKernel.WIGHTMAN_PLUS, z[:, 0], r)

    req = IntegrationRequest.from_settings(
        integrand, correlation_box(f, h), settings.quadrature, label="<f, Delta_+ h>"
    )
    return integrate(req)


def _bump_transform(u: FloatArray) -> FloatArray:
    return bump_integral() * chi_hat_table(1.0, 1)(u)


def _transform(g: SpacetimeTestFunction, kappa: FloatArray) -> ComplexArray:
    """int g(x) e^{i kappa . x} dx for an (N, d) array of frequencies"""
    out = np.full(kappa.shape[0], g.amplitude, dtype=np.complex128)
    for axis, (c, hw) in enumerate(zip(g.center, g.halfwidth)):
        out *= hw * np.exp(1j * kappa[:, axis] * c) * _bump_transform(kappa[:, axis] * hw)
    return out


def pairing_momentum_space(
    f: SpacetimeTestFunction,
    h: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    nodes_per_panel: int = 8,
) -> complex:
    """
    <f, Delta_+ h> = (2 pi)^{-k} int d^k p chi_hat(Lambda p)^2 / (2 omega) f~(omega, p) conj h~(omega, p)
    with f~(omega, p) = int f(x) e^{-i omega x_0 + i p.x} dx.
    """
    k = ev.spatial_dim
    Lambda = ev.params.Lambda
    reach = sum(abs(a - b) for a, b in zip(f.center, h.center))
    reach += sum(f.halfwidth) + sum(h.halfwidth) + Lambda * ev.cutoff.radius
    panels = max(64, math.ceil(ev.p_max * reach / math.pi))
    nodes, weights = composite_gauss(-ev.p_max, ev.p_max, panels, nodes_per_panel)
    n = nodes.shape[0]
    if n**k > MAX_MOMENTUM_POINTS:
        raise BudgetExceededError(f"momentum pairing would need {n**k} points")
    cut = chi_hat_table(ev.cutoff.radius, k)
    grid = np.indices((n,) * k).reshape(k, -1)
    total = 0j
    step = 1 << 18
    for start in range(0, grid.shape[1], step):
        idx = grid[:, start : start + step]
        p = nodes[idx].T
        w = np.prod(weights[idx], axis=0)
        p_norm = np.linalg.norm(p, axis=1)
        omega = np.sqrt(p_norm**2 + ev.params.mass**2)
        kappa = np.concatenate([-omega[:, None], p], axis=1)
        values = _transform(f, kappa) * np.conj(_transform(h, kappa))
        total += complex(np.sum(w * cut(Lambda * p_norm) ** 2 / (2 * omega) * values))
    return total / (2 * math.pi) ** k


def weyl_star_series(
    f: SpacetimeTestFunction,
    h: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    order: int,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """Deformation series of e^{i Phi(f)} * e^{i Phi(h)} truncated after `order` terms"""
    settings = settings or ev.settings
    phase_f = linear_functional(f, phi, settings)
    phase_h = linear_functional(h, phi, settings)
    pairing = pairing_position_space(f, h, ev, settings)
    prefactor = cmath.exp(1j * (phase_f.value + phase_h.value))
    series = sum((-pairing.value) ** k / math.factorial(k) for k in range(order + 1))
    truncation = abs(pairing.value) ** (order + 1) / math.factorial(order + 1) * math.exp(
        abs(pairing.value)
    )
    error = abs(prefactor) * (
        abs(series) * (phase_f.error_estimate + phase_h.error_estimate)
        + math.exp(abs(pairing.value)) * pairing.error_estimate
        + truncation
    )
    return IntegrationResult(
        value=prefactor * series,
        error_estimate=error,
        evals_used=phase_f.evals_used + phase_h.evals_used + pairing.evals_used,
        converged=phase_f.converged and phase_h.converged and pairing.converged,
        scheme=pairing.scheme,
        magnitude=abs(prefactor * series),
    )


def weyl_product_closed_form(
    f: SpacetimeTestFunction,
    h: SpacetimeTestFunction,
    ev: PropagatorEvaluator,
    phi: FieldConfiguration,
    settings: EngineSettings | None = None,
) -> complex:
    """e^{i Phi(f + h)(phi)} e^{-<f, Delta_+ h>} with the pairing in momentum space"""
    settings = settings or ev.settings
    phase = linear_functional(f, phi, settings).value + linear_functional(h, phi, settings).value
    return cmath.exp(1j * phase - pairing_momentum_space(f, h, ev))
