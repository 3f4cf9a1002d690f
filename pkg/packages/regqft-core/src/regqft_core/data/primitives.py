import math
from typing import Literal, Protocol, runtime_checkable

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field, model_validator
from typing_extensions import Self

from ..utils import ComplexArray, FloatArray, bump, bump_integral, leggauss


class ModelParams(BaseModel):
    dimension: Literal[2, 3, 4]
    mass: float = Field(gt=0)
    Lambda: float = Field(ge=0)

    @property
    def spatial_dim(self) -> int:
        return self.dimension - 1


class CutoffSpec(BaseModel):
    """Radial mollifier exp(-1/(1 - |x/R|^2)) normalized to unit L1 norm"""

    radius: float = Field(default=1.0, gt=0)
    profile: Literal["mollifier"] = "mollifier"


class SpacetimeTestFunction(BaseModel):
    """
    Product bump g(x) = amplitude * prod_i mollifier((x_i - c_i) / h_i)
    """

    amplitude: float = 1.0
    center: list[float]
    halfwidth: list[float]

    @model_validator(mode="after")
    def _consistent_axes(self) -> Self:
        if len(self.center) != len(self.halfwidth):
            raise ValueError(
                f"center has {len(self.center)} axes but halfwidth has {len(self.halfwidth)}"
            )
        if not self.center:
            raise ValueError("a test function needs at least one axis")
        if any(h <= 0 for h in self.halfwidth):
            raise ValueError(f"halfwidths must be positive, got {self.halfwidth}")
        if self.amplitude == 0:
            raise ValueError("amplitude must be nonzero so that the L1 norm is positive")
        return self

    @classmethod
    def unit(cls, center: list[float], halfwidth: list[float]) -> "SpacetimeTestFunction":
        """Nonnegative bump with unit L1 norm"""
        volume = math.prod(h * bump_integral() for h in halfwidth)
        return cls(amplitude=1.0 / volume, center=center, halfwidth=halfwidth)

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def nonnegative(self) -> bool:
        return self.amplitude > 0

    @property
    def box(self) -> list[tuple[float, float]]:
        return [(c - h, c + h) for c, h in zip(self.center, self.halfwidth)]

    @property
    def l1_norm(self) -> float:
        return abs(self.amplitude) * math.prod(h * bump_integral() for h in self.halfwidth)

    def lq_norm(self, q: float) -> float:
        """L^q norm; each axis factorizes into a 1-D quadrature"""
        if math.isinf(q):
            return abs(self.amplitude) * math.exp(-self.dimension)
        nodes, weights = leggauss(200)
        axis_integral = float(np.sum(weights * bump(nodes) ** q))
        return abs(self.amplitude) * math.prod(
            (h * axis_integral) ** (1.0 / q) for h in self.halfwidth
        )

    def __call__(self, points: npt.ArrayLike) -> FloatArray:
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        c = np.asarray(self.center)
        h = np.asarray(self.halfwidth)
        return self.amplitude * np.prod(bump((x - c) / h), axis=1)

    def rescaled(self, spatial_factor: float) -> "SpacetimeTestFunction":
        """Same amplitude, spatial halfwidths multiplied by the factor"""
        halfwidth = [self.halfwidth[0]] + [h * spatial_factor for h in self.halfwidth[1:]]
        return self.model_copy(update={"halfwidth": halfwidth}, deep=True)


class VertexFactor(BaseModel):
    charge: float
    smearing: SpacetimeTestFunction


class ChargeProfile(BaseModel):
    """
    f(a) = (P_even(a) + i P_odd(a)) * mollifier(a / A) on [-A, A].

    real_coeffs multiply a^0, a^2, a^4, ...; imag_coeffs multiply a^1, a^3, ...
    so that f(-a) is the conjugate of f(a).
    """

    support: float = Field(gt=0)
    real_coeffs: list[float] = Field(default_factory=lambda: [1.0])
    imag_coeffs: list[float] = Field(default_factory=list)

    position_dependent: Literal[False] = False

    @classmethod
    def normalized(cls, support: float) -> "ChargeProfile":
        """Real even bump with unit integral"""
        return cls(support=support, real_coeffs=[1.0 / (support * bump_integral())])

    @property
    def is_zero(self) -> bool:
        return not any(self.real_coeffs) and not any(self.imag_coeffs)

    def support_interval(self) -> tuple[float, float]:
        return (-self.support, self.support)

    def charge_rule(self) -> None:
        return None

    def __call__(self, charges: npt.ArrayLike) -> ComplexArray:
        a = np.asarray(charges, dtype=np.float64)
        a2 = a * a
        even = np.zeros_like(a)
        for k, coeff in enumerate(self.real_coeffs):
            even = even + coeff * a2**k
        odd = np.zeros_like(a)
        for k, coeff in enumerate(self.imag_coeffs):
            odd = odd + coeff * a * a2**k
        return (even + 1j * odd) * bump(a / self.support)

    def evaluate(self, a: npt.ArrayLike, x: FloatArray | None = None) -> ComplexArray:
        return self(a)

    def _integrate(self, weight: FloatArray | None = None, absolute: bool = False) -> complex:
        nodes, weights = leggauss(256)
        a = self.support * nodes
        values = self(a)
        if absolute:
            values = np.abs(values)
        if weight is not None:
            values = values * weight
        return complex(self.support * np.sum(weights * values))

    @property
    def l1_norm(self) -> float:
        return self._integrate(absolute=True).real

    def integral(self) -> complex:
        return self._integrate()

    def weighted_l1(self, coincidence: float) -> float:
        """Integral of |f(a)| exp(a^2 W / 2)"""
        nodes, _ = leggauss(256)
        a = self.support * nodes
        return self._integrate(weight=np.exp(0.5 * a * a * coincidence), absolute=True).real

    def shrunk(self, factor: float) -> "ChargeProfile":
        """Support scaled by the factor, same polynomial"""
        return self.model_copy(update={"support": self.support * factor})


@runtime_checkable
class ChargeDensity(Protocol):
    """A charge weight f_x(a), possibly depending on the spacetime point"""

    @property
    def position_dependent(self) -> bool: ...

    @property
    def is_zero(self) -> bool: ...

    def support_interval(self) -> tuple[float, float]: ...

    def charge_rule(self) -> tuple[FloatArray, FloatArray] | None:
        """
        Fixed charge nodes and weights, or None when the charge is an outer
        integration variable over `support_interval()`.
        """
        ...

    def evaluate(self, a: FloatArray, x: FloatArray | None = None) -> ComplexArray:
        """`a` is (N,) or (N, M) against points `x` of shape (N, d)"""
        ...
