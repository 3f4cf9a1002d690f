import math
from functools import lru_cache

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline
from scipy.special import j0

from ..data import CutoffSpec
from ..utils import FloatArray, bump, composite_gauss

# |chi_hat|^2 below this relative level is treated as zero
TAIL_LEVEL = 1e-14
TABLE_POINTS = 40001
TABLE_SPAN = 600.0

_SURFACE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def _check_dim(spatial_dim: int) -> None:
    if spatial_dim not in _SURFACE:
        raise ValueError(f"spatial dimension must be 1, 2 or 3, got {spatial_dim}")


def _radial_kernel(z: FloatArray, spatial_dim: int) -> FloatArray:
    """cos, J0 or sin(z)/z: the angular average of exp(i p.x) in 1, 2, 3 dimensions"""
    if spatial_dim == 1:
        return np.cos(z)
    if spatial_dim == 2:
        return np.asarray(j0(z), dtype=np.float64)
    return np.sinc(z / math.pi)


def radial_weight(p: FloatArray, spatial_dim: int) -> FloatArray:
    """Radial measure of d^k p / (2 pi)^k after the angular integration"""
    if spatial_dim == 1:
        return np.full_like(p, 1.0 / math.pi)
    if spatial_dim == 2:
        return p / (2.0 * math.pi)
    return p * p / (2.0 * math.pi**2)


def angular_average(z: FloatArray, spatial_dim: int) -> FloatArray:
    return _radial_kernel(z, spatial_dim)


@lru_cache(maxsize=16)
def _radial_rule(spatial_dim: int) -> tuple[FloatArray, FloatArray]:
    s, w = composite_gauss(0.0, 1.0, 32, 32)
    return s, w * _SURFACE[spatial_dim] * s ** (spatial_dim - 1) * bump(s)


@lru_cache(maxsize=16)
def _normalization(radius: float, spatial_dim: int) -> float:
    _, w = _radial_rule(spatial_dim)
    return float(radius**spatial_dim * np.sum(w))


def chi(points: npt.ArrayLike, cutoff: CutoffSpec, spatial_dim: int) -> FloatArray:
    """Position-space mollifier at (N, k) points, unit L1 norm in k dimensions"""
    _check_dim(spatial_dim)
    x = np.asarray(points, dtype=np.float64).reshape(-1, spatial_dim)
    r = np.linalg.norm(x, axis=1)
    return bump(r / cutoff.radius) / _normalization(cutoff.radius, spatial_dim)


def chi_hat_direct(p_norm: npt.ArrayLike, radius: float, spatial_dim: int) -> FloatArray:
    """Radial Fourier transform of the normalized mollifier by direct quadrature"""
    _check_dim(spatial_dim)
    p = np.abs(np.atleast_1d(np.asarray(p_norm, dtype=np.float64)))
    s, w = _radial_rule(spatial_dim)
    out = np.empty_like(p)
    step = 2048
    for start in range(0, p.shape[0], step):
        chunk = p[start : start + step]
        out[start : start + step] = (
            _radial_kernel(chunk[:, None] * radius * s[None, :], spatial_dim) @ w
        )
    return out * radius**spatial_dim / _normalization(radius, spatial_dim)


class ChiHatTable:
    """
    Cubic-spline table of chi_hat on [0, TABLE_SPAN / R] with the tail cut
    where chi_hat^2 drops below TAIL_LEVEL.
    """

    def __init__(self, radius: float, spatial_dim: int) -> None:
        self.radius = radius
        self.spatial_dim = spatial_dim
        self.u_max = TABLE_SPAN / radius
        u = np.linspace(0.0, self.u_max, TABLE_POINTS)
        values = chi_hat_direct(u, radius, spatial_dim)
        self._spline = CubicSpline(u, values)
        significant = np.nonzero(values**2 >= TAIL_LEVEL)[0]
        last = min(int(significant[-1]) + 1, TABLE_POINTS - 1)
        self.u_star = float(u[last])

    def __call__(self, u: npt.ArrayLike) -> FloatArray:
        u = np.abs(np.asarray(u, dtype=np.float64))
        inside = u <= self.u_star
        return np.where(inside, self._spline(np.minimum(u, self.u_star)), 0.0)


@lru_cache(maxsize=16)
def chi_hat_table(radius: float, spatial_dim: int) -> ChiHatTable:
    _check_dim(spatial_dim)
    return ChiHatTable(radius, spatial_dim)


def chi_hat(p_norm: float, cutoff: CutoffSpec, spatial_dim: int = 1) -> float:
    """Radial Fourier transform of chi; equals 1 at the origin and is even"""
    return float(chi_hat_direct(p_norm, cutoff.radius, spatial_dim)[0])


def momentum_cutoff(cutoff: CutoffSpec, spatial_dim: int, Lambda: float) -> float:
    """P_max with chi_hat(Lambda P_max)^2 below TAIL_LEVEL beyond it"""
    if Lambda <= 0:
        raise ValueError(f"momentum cutoff needs Lambda > 0, got {Lambda}")
    return chi_hat_table(cutoff.radius, spatial_dim).u_star / Lambda
