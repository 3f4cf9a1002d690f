import math
from typing import Sequence

import numpy as np

from ..errors import BudgetExceededError
from ..quadrature import IntegrationRequest, IntegrationResult, integrate
from ..utils import FloatArray
from .gas import ClusterConfig, Particles, normalized_order

MAX_KS_MAYER_ORDER = 3


class KSRecursion:
    """
    The perturbative Kirkwood-Salsburg correlations rho_{n,l} of one batch of
    particles, solved on demand:

        rho_{n,l}(x_1, ..., x_n) = e^{-W(x_1; x_2, ..., x_n)}
            sum_{s<=l} (1/s!) int dmu^s prod_k (e^{-a_1 b_k w_s(x_1, y_k)} - 1)
            rho_{n-1+s, l-s}(x_2, ..., x_n, y_1, ..., y_s)

    with rho_{n,0} = e^{-U} and rho_{0,l} = delta_{0l}. Every nonvanishing
    branch of rho_{n,l} consumes exactly l integrated particles, so the
    nested integrals fuse into one integral over l extra particle slots,
    taken in order from `first_free`.
    """

    def __init__(self, particles: Particles) -> None:
        self.p = particles
        self._memo: dict[tuple[tuple[int, ...], int, int], FloatArray] = {}

    def rho(self, slots: tuple[int, ...], ell: int, first_free: int) -> FloatArray:
        key = (slots, ell, first_free)
        if key not in self._memo:
            self._memo[key] = self._solve(slots, ell, first_free)
        return self._memo[key]

    def _solve(self, slots: tuple[int, ...], ell: int, first_free: int) -> FloatArray:
        p = self.p
        if not slots:
            return np.full(p.size, 1.0 if ell == 0 else 0.0)
        if ell == 0:
            return np.exp(-p.energy(slots))
        first, rest = slots[0], slots[1:]
        prefactor = np.ones(p.size)
        for j in rest:
            prefactor = prefactor * np.exp(-p.coupling_energy(first, j))
        total = np.zeros(p.size)
        for s in range(ell + 1):
            if not rest and s == 0:
                continue
            new = tuple(range(first_free, first_free + s))
            edges = np.ones(p.size)
            for k in new:
                edges = edges * p.edge(first, k)
            inner = self.rho(rest + new, ell - s, first_free + s)
            total = total + edges * inner / math.factorial(s)
        return prefactor * total


def _check_indices(n: int, ell: int, config: ClusterConfig) -> None:
    if n < 1 or ell < 0:
        raise ValueError(f"rho_(n,l) needs n >= 1 and l >= 0, got ({n}, {ell})")
    cap = config.settings.ks_cap
    if n + ell > cap:
        raise BudgetExceededError(f"n + l = {n + ell} exceeds the cap of {cap}")


def ks_evaluate(
    n: int,
    ell: int,
    points: Sequence[tuple[Sequence[float], float]],
    config: ClusterConfig,
) -> IntegrationResult:
    """rho_{n,l} at fixed particles (x_i, a_i), integrating the l added ones"""
    _check_indices(n, ell, config)
    if len(points) != n:
        raise ValueError(f"rho_({n},{ell}) takes {n} particles, got {len(points)}")
    fixed = Particles.from_pairs(config, points)
    slots = tuple(range(n))
    if ell == 0:
        return IntegrationResult.exact(float(KSRecursion(fixed).rho(slots, 0, n)[0]))

    def integrand(nodes: FloatArray) -> FloatArray:
        added = Particles.from_points(config, nodes, ell)
        return added.weight() * KSRecursion(fixed.joined(added)).rho(slots, ell, n)

    settings = config.settings
    req = IntegrationRequest.from_settings(
        integrand,
        config.particle_box(ell),
        settings.quadrature,
        tensor_max_dim=settings.product_tensor_max_dim,
        label=f"rho_({n},{ell})",
    )
    return integrate(req)


def mayer_from_ks(ell: int, config: ClusterConfig) -> IntegrationResult:
    """C~_{l+1} = int rho_{1,l} g|f| / ((l + 1) |g|_1 |f|_1)"""
    if ell < 0:
        raise ValueError(f"l must be >= 0, got {ell}")
    if ell > MAX_KS_MAYER_ORDER:
        raise BudgetExceededError(f"the Kirkwood-Salsburg route stops at l = {MAX_KS_MAYER_ORDER}")
    _check_indices(1, ell, config)
    if ell == 0:
        return IntegrationResult.exact(1.0)

    def integrand(nodes: FloatArray) -> FloatArray:
        particles = Particles.from_points(config, nodes, ell + 1)
        return particles.weight() * KSRecursion(particles).rho((0,), ell, 1)

    settings = config.settings
    req = IntegrationRequest.from_settings(
        integrand,
        config.particle_box(ell + 1),
        settings.quadrature,
        tensor_max_dim=settings.product_tensor_max_dim,
        label=f"int rho_(1,{ell})",
    )
    # (l+1) |g|_1 |f|_1 = (l+1)! |g|_1 |f|_1 / l!
    divisor = normalized_order(ell + 1, config) / math.factorial(ell)
    return integrate(req).scaled(1.0 / divisor)
