from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
import numpy.typing as npt

T = TypeVar("T")
R = TypeVar("R")

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]


@lru_cache(maxsize=64)
def leggauss(k: int) -> tuple[FloatArray, FloatArray]:
    """Gauss-Legendre nodes and weights on [-1, 1]"""
    nodes, weights = np.polynomial.legendre.leggauss(k)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def bump(s: npt.ArrayLike) -> FloatArray:
    """Unnormalized mollifier exp(-1/(1 - s^2)) on |s| < 1, zero outside"""
    s = np.asarray(s, dtype=np.float64)
    inside = np.abs(s) < 1.0
    gap = np.where(inside, 1.0 - s**2, 1.0)
    return np.where(inside, np.exp(-1.0 / gap), 0.0)


@lru_cache(maxsize=1)
def bump_integral() -> float:
    """Integral of the unnormalized 1-D mollifier over [-1, 1]"""
    nodes, weights = leggauss(200)
    return float(np.sum(weights * bump(nodes)))


def composite_gauss(
    low: float, high: float, panels: int, nodes_per_panel: int
) -> tuple[FloatArray, FloatArray]:
    """Composite Gauss-Legendre rule with equal panels on [low, high]"""
    x, w = leggauss(nodes_per_panel)
    edges = np.linspace(low, high, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    points = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return points, weights


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Map preserving input order; results are assembled by a single writer"""
    work: Sequence[T] = list(items)
    if threads <= 1 or len(work) <= 1:
        return [fn(item) for item in work]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, work))


__all__ = [
    "ComplexArray",
    "FloatArray",
    "bump",
    "bump_integral",
    "composite_gauss",
    "leggauss",
    "parallel_map",
]
