import math
import threading
from enum import Enum

import logfire
import numpy as np
import numpy.typing as npt
from scipy.interpolate import RectBivariateSpline
from scipy.special import j0, k0, y0

from ..configs import EngineSettings
from ..data import CutoffSpec, ModelParams
from ..errors import BudgetExceededError, CoincidenceDivergenceError, LightconeSingularityError
from ..utils import ComplexArray, FloatArray, composite_gauss
from .cutoff import ChiHatTable, angular_average, chi_hat_table, radial_weight

MIN_PANELS = 128
MAX_MOMENTUM_NODES = 1 << 21
BLOCK = 1 << 22
LIGHTCONE_TOL = 1e-12


class PairKernel(str, Enum):
    """Two-point kernel attached to a pair (i, j), i < j, of vertex factors"""

    FEYNMAN = "feynman"
    ANTI_FEYNMAN = "anti-feynman"
    WIGHTMAN_PLUS = "wightman-plus"
    SYMMETRIC = "symmetric"


def combine_kind(kind: PairKernel, re: FloatArray, im: FloatArray, dt: FloatArray) -> ComplexArray:
    """
    Build a pair kernel from Delta_+(|t|, r) = re + i im, using
    Delta_+(-t, r) = conj Delta_+(t, r).
    """
    if kind is PairKernel.FEYNMAN:
        return re + 1j * im
    if kind is PairKernel.ANTI_FEYNMAN:
        return re - 1j * im
    if kind is PairKernel.WIGHTMAN_PLUS:
        return re + 1j * np.sign(dt) * im
    return re + 0j


class TabulatedKernel:
    """
    Spline table of Delta_+(|t|, r) over [0, T] x [0, R], nodes quadratically
    clustered toward the origin.
    """

    def __init__(self, t_grid: FloatArray, r_grid: FloatArray, values: ComplexArray) -> None:
        self.t_grid = t_grid
        self.r_grid = r_grid
        self.t_extent = float(t_grid[-1])
        self.r_extent = float(r_grid[-1])
        self._re = RectBivariateSpline(t_grid, r_grid, values.real)
        self._im = RectBivariateSpline(t_grid, r_grid, values.imag)

    @classmethod
    def build(
        cls,
        ev: "PropagatorEvaluator",
        t_extent: float,
        r_extent: float,
        t_points: int,
        r_points: int,
    ) -> "TabulatedKernel":
        t_grid = t_extent * np.linspace(0.0, 1.0, t_points) ** 2
        r_grid = r_extent * np.linspace(0.0, 1.0, r_points) ** 2
        p, omega, weight = ev.momentum_rule(t_extent + r_extent)
        values = np.zeros((t_points, r_points), dtype=np.complex128)
        step = max(1, BLOCK // (8 * max(t_points, r_points)))
        for start in range(0, p.shape[0], step):
            stop = start + step
            phase = np.exp(-1j * np.outer(t_grid, omega[start:stop])) * weight[start:stop]
            radial = angular_average(np.outer(p[start:stop], r_grid), ev.spatial_dim)
            values += phase @ radial
        return cls(t_grid, r_grid, values)

    def covers(self, t_extent: float, r_extent: float) -> bool:
        return t_extent <= self.t_extent and r_extent <= self.r_extent

    def __call__(self, kind: PairKernel, dt: npt.ArrayLike, r: npt.ArrayLike) -> ComplexArray:
        dt = np.asarray(dt, dtype=np.float64)
        at = np.minimum(np.abs(dt), self.t_extent)
        rr = np.minimum(np.asarray(r, dtype=np.float64), self.r_extent)
        re = self._re.ev(at, rr)
        im = self._im.ev(at, rr)
        return combine_kind(kind, re, im, dt)


def _rounded_extent(value: float) -> float:
    return max(0.5, math.ceil(4.0 * value) / 4.0)


class PropagatorEvaluator:
    """
    Evaluates the regularized two-point function

        Delta_+(t, x) = (2 pi)^{-k} int d^k p  exp(i p.x - i omega t) chi_hat(Lambda p)^2 / (2 omega)

    through its radial reduction. The coincidence value W is computed on
    construction; kernel tables are built lazily and cached.
    """

    def __init__(
        self,
        params: ModelParams,
        cutoff: CutoffSpec | None = None,
        settings: EngineSettings | None = None,
    ) -> None:
        self.params = params
        self.cutoff = cutoff or CutoffSpec()
        self.settings = settings or EngineSettings()
        self.spatial_dim = params.spatial_dim
        self._tables: list[TabulatedKernel] = []
        self._lock = threading.Lock()
        self._chi_hat: ChiHatTable | None = None
        self.p_max = math.inf
        self.W = math.inf
        if params.Lambda > 0:
            self._chi_hat = chi_hat_table(self.cutoff.radius, self.spatial_dim)
            self.p_max = self._chi_hat.u_star / params.Lambda
            self.W = float(self.radial(np.zeros(1), np.zeros(1))[0].real)
            logfire.debug(
                f"propagator d={params.dimension} m={params.mass} Lambda={params.Lambda}: "
                f"P_max={self.p_max:.4g}, W={self.W:.6g}"
            )

    @property
    def regularized(self) -> bool:
        return self.params.Lambda > 0

    def with_lambda(self, Lambda: float) -> "PropagatorEvaluator":
        params = self.params.model_copy(update={"Lambda": Lambda})
        return PropagatorEvaluator(params, self.cutoff, self.settings)

    def momentum_rule(
        self, extent: float, nodes_per_panel: int | None = None
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Radial nodes p, energies omega and weights for points within the extent"""
        if self._chi_hat is None:
            raise CoincidenceDivergenceError("the momentum integral needs Lambda > 0")
        npp = nodes_per_panel or self.settings.panel_nodes
        Lambda = self.params.Lambda
        panels = max(
            MIN_PANELS,
            math.ceil(self.p_max * (extent + Lambda * self.cutoff.radius) / math.pi),
        )
        if panels * npp > MAX_MOMENTUM_NODES:
            raise BudgetExceededError(
                f"radial rule needs {panels * npp} nodes for extent {extent} at Lambda={Lambda}"
            )
        p, w = composite_gauss(0.0, self.p_max, panels, npp)
        omega = np.sqrt(p * p + self.params.mass**2)
        weight = (
            w * radial_weight(p, self.spatial_dim) * self._chi_hat(Lambda * p) ** 2 / (2.0 * omega)
        )
        return p, omega, weight

    def radial(
        self, t: FloatArray, r: FloatArray, nodes_per_panel: int | None = None
    ) -> ComplexArray:
        """Delta_+ at displacements (t_i, |x_i| = r_i) by the radial quadrature"""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        r = np.atleast_1d(np.asarray(r, dtype=np.float64))
        extent = float(np.max(np.abs(t), initial=0.0) + np.max(r, initial=0.0))
        p, omega, weight = self.momentum_rule(extent, nodes_per_panel)
        out = np.empty(t.shape[0], dtype=np.complex128)
        step = max(1, BLOCK // p.shape[0])
        for start in range(0, t.shape[0], step):
            stop = start + step
            phase = np.exp(-1j * np.outer(t[start:stop], omega))
            radial = angular_average(np.outer(r[start:stop], p), self.spatial_dim)
            out[start:stop] = (phase * radial) @ weight
        return out

    def _vacuum_2d(self, t: FloatArray, r: FloatArray) -> ComplexArray:
        interval = r * r - t * t
        if np.any(np.abs(interval) < LIGHTCONE_TOL):
            if np.any((np.abs(t) < LIGHTCONE_TOL) & (r < LIGHTCONE_TOL)):
                raise CoincidenceDivergenceError("Delta_+ at Lambda = 0 diverges at coincidence")
            raise LightconeSingularityError("Delta_+ at Lambda = 0 is singular on the light cone")
        m = self.params.mass
        tau = m * np.sqrt(np.abs(interval))
        spacelike = interval > 0
        safe = np.where(spacelike, tau, 1.0)
        timelike = np.where(spacelike, 1.0, tau)
        return np.where(
            spacelike,
            k0(safe) / (2.0 * math.pi) + 0j,
            -(y0(timelike) + 1j * np.sign(t) * j0(timelike)) / 4.0,
        )

    def values(self, t: npt.ArrayLike, r: npt.ArrayLike) -> ComplexArray:
        """Delta_+ at (t_i, r_i); Lambda = 0 is admitted only for d = 2"""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        r = np.atleast_1d(np.asarray(r, dtype=np.float64))
        if self.regularized:
            return self.radial(t, r)
        if self.params.dimension != 2:
            raise CoincidenceDivergenceError(
                f"Delta_+ at Lambda = 0 is not evaluated pointwise in d = {self.params.dimension}"
            )
        return self._vacuum_2d(t, r)

    def pair_kernel(self, t_extent: float, r_extent: float) -> TabulatedKernel:
        """A cached table covering |t| <= t_extent, r <= r_extent"""
        with self._lock:
            for table in self._tables:
                if table.covers(t_extent, r_extent):
                    return table
            t_new, r_new = t_extent, r_extent
            for table in self._tables:
                t_new = max(t_new, table.t_extent)
                r_new = max(r_new, table.r_extent)
            t_new = _rounded_extent(1.25 * t_new)
            r_new = _rounded_extent(1.25 * r_new)
            with logfire.span(f"kernel table T={t_new} R={r_new}"):
                table = TabulatedKernel.build(
                    self,
                    t_new,
                    r_new,
                    self.settings.table_t_points,
                    self.settings.table_r_points,
                )
            self._tables.append(table)
            return table

    def kernel_values(self, kind: PairKernel, dt: FloatArray, r: FloatArray) -> ComplexArray:
        """Pair kernel of the given kind at time differences dt and distances r"""
        if self.regularized and self.settings.use_kernel_table:
            extent_t = float(np.max(np.abs(dt), initial=0.0))
            extent_r = float(np.max(r, initial=0.0))
            return self.pair_kernel(extent_t, extent_r)(kind, dt, r)
        plus = self.values(np.abs(dt), r)
        return combine_kind(kind, plus.real, plus.imag, dt)


def _norm(x: npt.ArrayLike) -> float:
    return float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=np.float64))))


def delta_plus(t: float, x: npt.ArrayLike, ev: PropagatorEvaluator) -> complex:
    return complex(ev.values([t], [_norm(x)])[0])


def delta_feynman(t: float, x: npt.ArrayLike, ev: PropagatorEvaluator) -> complex:
    """theta(t) Delta_+(t, x) + theta(-t) Delta_+(-t, x)"""
    return complex(ev.values([abs(t)], [_norm(x)])[0])


def coincidence_W(ev: PropagatorEvaluator) -> float:
    if not ev.regularized:
        raise CoincidenceDivergenceError("W = w_s(x, x) diverges at Lambda = 0")
    return ev.W


def delta_plus_with_error(
    t: float, x: npt.ArrayLike, ev: PropagatorEvaluator
) -> tuple[complex, float]:
    """Delta_+ plus the difference between two panel rules as its error"""
    r = _norm(x)
    if not ev.regularized:
        return delta_plus(t, x, ev), 0.0
    npp = ev.settings.panel_nodes
    coarse = complex(ev.radial(np.array([t]), np.array([r]), npp)[0])
    fine = complex(ev.radial(np.array([t]), np.array([r]), npp + 8)[0])
    return fine, abs(fine - coarse)


def delta_plus_cartesian(
    t: float, x: npt.ArrayLike, ev: PropagatorEvaluator, nodes_per_panel: int = 8
) -> complex:
    """
    Delta_+ by a full k-dimensional composite Gauss rule over [-P_max, P_max]^k,
    with no radial reduction.
    """
    if not ev.regularized:
        raise CoincidenceDivergenceError("the Cartesian rule needs Lambda > 0")
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64))
    k = ev.spatial_dim
    Lambda = ev.params.Lambda
    table = chi_hat_table(ev.cutoff.radius, k)
    reach = float(np.max(np.abs(xv), initial=0.0)) + abs(t) + Lambda * ev.cutoff.radius
    panels = max(16, math.ceil(ev.p_max * reach / math.pi))
    nodes, weights = composite_gauss(-ev.p_max, ev.p_max, panels, nodes_per_panel)
    n = nodes.shape[0]
    if n**k > MAX_MOMENTUM_NODES * 4:
        raise BudgetExceededError(f"Cartesian rule would need {n**k} nodes")
    total = 0j
    grid = np.indices((n,) * k).reshape(k, -1)
    step = max(1, BLOCK // 8)
    for start in range(0, grid.shape[1], step):
        idx = grid[:, start : start + step]
        p = nodes[idx].T
        w = np.prod(weights[idx], axis=0)
        p_norm = np.linalg.norm(p, axis=1)
        omega = np.sqrt(p_norm**2 + ev.params.mass**2)
        integrand = np.exp(1j * (p @ xv) - 1j * omega * t) * table(Lambda * p_norm) ** 2 / (2 * omega)
        total += complex(np.sum(w * integrand))
    return total / (2.0 * math.pi) ** k
