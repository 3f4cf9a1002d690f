import math
from functools import lru_cache
from typing import Callable, Union

import numpy as np
import numpy.typing as npt
from numpy.polynomial.hermite import hermgauss, hermval
from pydantic import BaseModel, Field

from ..configs import EngineSettings
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..utils import ComplexArray, FloatArray

# the charge box |a| <= CHARGE_REACH * Lambda1 holds all but e^{-49} of the mass
CHARGE_REACH = 14.0
DERIVATIVE_ORDERS = (0, 2, 4)

Coefficient = Union[complex, Callable[[FloatArray], npt.ArrayLike]]


class GaussianRegulator(BaseModel):
    """
    r_L(a) = r(a / L) / L with r(a) = exp(-a^2 / 4) / (2 sqrt(pi)), whose
    Fourier transform is exp(-L^2 phi^2).
    """

    Lambda1: float = Field(gt=0)
    rule_nodes: int = Field(default=20, ge=4, le=100)

    @property
    def reach(self) -> float:
        return CHARGE_REACH * self.Lambda1

    def charge_rule(self) -> tuple[FloatArray, FloatArray]:
        return _hermite_rule(self.Lambda1, self.rule_nodes)


@lru_cache(maxsize=64)
def _hermite_rule(Lambda1: float, k: int) -> tuple[FloatArray, FloatArray]:
    """
    Gauss-Hermite nodes in the charge a = 2 L s; the weights carry e^{s^2} so
    that sum_j w_j f(a_j) integrates f directly.
    """
    s, w = hermgauss(k)
    nodes = 2.0 * Lambda1 * s
    weights = 2.0 * Lambda1 * w * np.exp(s * s)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _check_order(derivative_order: int) -> None:
    if derivative_order not in DERIVATIVE_ORDERS:
        raise ValueError(
            f"derivative order must be one of {DERIVATIVE_ORDERS}, got {derivative_order}"
        )


def unit_density_derivative(u: npt.ArrayLike, k: int) -> FloatArray:
    """r^{(k)}(u) = (-1/2)^k H_k(u / 2) exp(-u^2 / 4) / (2 sqrt(pi)), physicists' H_k"""
    u = np.asarray(u, dtype=np.float64)
    coeffs = np.zeros(k + 1)
    coeffs[k] = 1.0
    return (-0.5) ** k * hermval(0.5 * u, coeffs) * np.exp(-0.25 * u * u) / (2.0 * math.sqrt(math.pi))


def gaussian_density(
    a: npt.ArrayLike, reg: GaussianRegulator, derivative_order: int = 0
) -> FloatArray:
    """r_L^{(k)}(a) = L^{-k-1} r^{(k)}(a / L)"""
    _check_order(derivative_order)
    L = reg.Lambda1
    return unit_density_derivative(np.asarray(a, dtype=np.float64) / L, derivative_order) / L ** (
        derivative_order + 1
    )


def regulated_transform(
    phi: npt.ArrayLike, Lambda1: float, derivative_order: int
) -> ComplexArray:
    """int r_L^{(k)}(a) e^{i a phi} da = (-i phi)^k exp(-L^2 phi^2)"""
    phi = np.asarray(phi, dtype=np.float64)
    return (-1j * phi) ** derivative_order * np.exp(-((Lambda1 * phi) ** 2))


def gaussian_fourier(
    phi: float,
    reg: GaussianRegulator,
    derivative_order: int = 0,
    settings: EngineSettings | None = None,
) -> IntegrationResult:
    """int r_L^{(k)}(a) e^{i a phi} da by quadrature over the charge box"""
    _check_order(derivative_order)
    settings = settings or EngineSettings()

    def integrand(points: FloatArray) -> ComplexArray:
        a = points[:, 0]
        return gaussian_density(a, reg, derivative_order) * np.exp(1j * a * phi)

    req = IntegrationRequest.from_settings(
        integrand,
        [(-reg.reach, reg.reach)],
        settings.quadrature,
        label=f"Fourier transform of r^({derivative_order})",
    )
    return integrate(req)


class RegulatedProfile:
    """
    f_x(a) = sum_k c_k(x) r_L^{(k)}(a) over k in {0, 2, 4}; a coefficient is a
    constant or a callable of the points x. Charges are integrated on the
    regulator's Gauss-Hermite rule.
    """

    def __init__(self, regulator: GaussianRegulator, coefficients: dict[int, Coefficient]) -> None:
        for k in coefficients:
            _check_order(k)
        self.regulator = regulator
        self.coefficients = {
            k: c for k, c in sorted(coefficients.items()) if callable(c) or c != 0
        }
        self.position_dependent = any(callable(c) for c in self.coefficients.values())

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    def support_interval(self) -> tuple[float, float]:
        return (-self.regulator.reach, self.regulator.reach)

    def charge_rule(self) -> tuple[FloatArray, FloatArray]:
        return self.regulator.charge_rule()

    def _coefficient(self, c: Coefficient, x: FloatArray | None, ndim: int) -> ComplexArray | complex:
        if not callable(c):
            return c
        if x is None:
            raise ValueError("a position-dependent profile needs the points x")
        values = np.asarray(c(x), dtype=np.complex128)
        return values[:, None] if ndim == 2 else values

    def evaluate(self, a: npt.ArrayLike, x: FloatArray | None = None) -> ComplexArray:
        a = np.asarray(a, dtype=np.float64)
        out = np.zeros(a.shape, dtype=np.complex128)
        for k, c in self.coefficients.items():
            out += self._coefficient(c, x, a.ndim) * gaussian_density(a, self.regulator, k)
        return out

    def transform(self, phi_values: npt.ArrayLike, x: FloatArray | None = None) -> ComplexArray:
        """int f_x(a) e^{i a phi(x)} da in closed form"""
        phi_values = np.asarray(phi_values, dtype=np.float64)
        out = np.zeros(phi_values.shape, dtype=np.complex128)
        for k, c in self.coefficients.items():
            out += self._coefficient(c, x, 1) * regulated_transform(
                phi_values, self.regulator.Lambda1, k
            )
        return out


def _negated_half(c: Coefficient) -> Coefficient:
    if callable(c):
        return lambda x: -0.5 * np.asarray(c(x), dtype=np.complex128)
    return -0.5 * c


def potential_profile(
    regulator: GaussianRegulator,
    quartic: complex,
    mass: Coefficient,
    constant: complex,
) -> RegulatedProfile:
    """
    (quartic / 4) r'''' - (mass / 2) r'' + constant r, the charge profile whose
    transform is exp(-L^2 phi^2) (quartic phi^4 / 4 + mass phi^2 / 2 + constant)
    """
    return RegulatedProfile(
        regulator, {4: 0.25 * quartic, 2: _negated_half(mass), 0: constant}
    )
