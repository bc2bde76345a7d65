"""Product-kernel estimation of the conditional joint survival surface.

Estimates pi(t; z) = P(T > t | Z = z) from (duration, covariate) pairs by
smoothing only in the covariates: with product Epanechnikov weights

    a(t, z) = sum_i 1{T_i > t} * prod_k K(u_ik) / h_k,
    b(z)    = sum_i              prod_k K(u_ik) / h_k,
    u_ik    = (z_k - Z_ik) / h_k,

the surface is pi_hat = a / b, its covariate derivatives follow from the
quotient rule with the exact kernel derivative (the derivative factor in
coordinate k is K'(u_ik) / h_k**2), and the cross derivative is taken in
the first two covariate coordinates.

Every reported sum is evaluated with math.fsum, which returns the correctly
rounded value of the exact real sum.  Numbers are therefore bitwise
independent of summation order, of scheduling across evaluation points, and
of whether a duration grid is evaluated in one pass or point by point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Sample

__all__ = [
    "EmptyNeighborhoodError",
    "KernelShape",
    "KernelSpec",
    "KernelSums",
    "SurfaceEstimate",
    "estimate_surface",
    "estimate_surface_grid",
    "kernel_deriv",
    "kernel_eval",
    "raw_sums",
]


class EmptyNeighborhoodError(RuntimeError):
    """No observation carries kernel weight at the evaluation covariate point."""


class KernelShape(Enum):
    """Supported kernel shapes (bounded support, finite second moment)."""

    EPANECHNIKOV = "epanechnikov"


@dataclass(frozen=True)
class KernelSpec:
    """Bandwidth vector (one per covariate coordinate) and kernel shape."""

    bandwidths: tuple[float, ...]
    kernel: KernelShape = KernelShape.EPANECHNIKOV

    def __post_init__(self) -> None:
        bw = tuple(float(h) for h in self.bandwidths)
        if len(bw) == 0:
            raise ValueError("at least one bandwidth is required")
        if not all(math.isfinite(h) and h > 0.0 for h in bw):
            raise ValueError(f"bandwidths must be positive and finite, got {bw!r}")
        if not isinstance(self.kernel, KernelShape):
            raise ValueError(f"unknown kernel shape {self.kernel!r}")
        object.__setattr__(self, "bandwidths", bw)

    @property
    def d(self) -> int:
        return len(self.bandwidths)


@dataclass(frozen=True)
class KernelSums:
    """Raw numerator/denominator sums behind one surface evaluation.

    ``a`` carries the duration indicator, ``b`` does not; ``*_grad`` swap in
    the kernel-derivative factor for one coordinate, ``*_cross`` for the
    first two coordinates at once.
    """

    a: float
    b: float
    a_grad: tuple[float, ...]
    b_grad: tuple[float, ...]
    a_cross: float
    b_cross: float


@dataclass(frozen=True)
class SurfaceEstimate:
    """Estimated joint survival level and covariate derivatives at one point.

    ``b_at_z`` is the kernel mass at the covariate point (a density proxy),
    kept as a diagnostic; pi_hat lies in [0, 1] whenever it is positive.
    """

    pi_hat: float
    dpi_hat: tuple[float, ...]
    d2pi_hat: float
    b_at_z: float


def kernel_eval(kernel: KernelShape, u: float) -> float:
    """Kernel value K(u): 0.75 * (1 - u^2) on |u| <= 1, else 0."""
    if not isinstance(kernel, KernelShape):
        raise ValueError(f"unknown kernel shape {kernel!r}")
    u = float(u)
    return 0.75 * (1.0 - u * u) if abs(u) <= 1.0 else 0.0


def kernel_deriv(kernel: KernelShape, u: float) -> float:
    """Kernel derivative K'(u): -1.5 * u on |u| <= 1, else 0."""
    if not isinstance(kernel, KernelShape):
        raise ValueError(f"unknown kernel shape {kernel!r}")
    u = float(u)
    return -1.5 * u if abs(u) <= 1.0 else 0.0


class _ZWeights:
    """All per-observation kernel weights for one covariate evaluation point.

    Observations outside the product-kernel support are dropped; the rest
    are sorted by duration so that the indicator sum over {T_i > t} is a
    suffix, located by binary search.  Weight columns are kept as plain
    lists: math.fsum consumes them fastest, and the b-side totals (duration
    independent) are computed once here.
    """

    __slots__ = ("t_sorted", "w", "w_grad", "w_cross", "b", "b_grad", "b_cross")

    def __init__(self, sample: Sample, spec: KernelSpec, z: np.ndarray) -> None:
        d = sample.z.shape[1]
        h = np.asarray(spec.bandwidths, dtype=float)
        u = (z[None, :] - sample.z) / h
        inside = np.flatnonzero(np.all(np.abs(u) <= 1.0, axis=1))
        if inside.size == 0:
            self.t_sorted = np.empty(0)
            self.w = []
            self.w_grad = [[] for _ in range(d)]
            self.w_cross = []
            self.b = 0.0
            self.b_grad = (0.0,) * d
            self.b_cross = 0.0
            return
        u = u[inside]
        factor = 0.75 * (1.0 - u * u) / h  # K(u_k)/h_k per coordinate
        dfactor = -1.5 * u / (h * h)  # K'(u_k)/h_k^2 per coordinate
        w = factor.prod(axis=1)
        grad = np.empty((inside.size, d))
        for k in range(d):
            cols = factor.copy()
            cols[:, k] = dfactor[:, k]
            grad[:, k] = cols.prod(axis=1)
        cols = factor.copy()
        cols[:, 0] = dfactor[:, 0]
        cols[:, 1] = dfactor[:, 1]
        cross = cols.prod(axis=1)

        order = np.argsort(sample.t[inside], kind="stable")
        self.t_sorted = sample.t[inside][order]
        self.w = w[order].tolist()
        self.w_grad = [grad[order, k].tolist() for k in range(d)]
        self.w_cross = cross[order].tolist()
        self.b = math.fsum(self.w)
        self.b_grad = tuple(math.fsum(col) for col in self.w_grad)
        self.b_cross = math.fsum(self.w_cross)

    def sums_at(self, t: float) -> KernelSums:
        i0 = int(np.searchsorted(self.t_sorted, t, side="right"))
        return KernelSums(
            a=math.fsum(self.w[i0:]),
            b=self.b,
            a_grad=tuple(math.fsum(col[i0:]) for col in self.w_grad),
            b_grad=self.b_grad,
            a_cross=math.fsum(self.w_cross[i0:]),
            b_cross=self.b_cross,
        )


def _check_point(sample: Sample, spec: KernelSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    d = sample.z.shape[1]
    if z.shape != (d,):
        raise ValueError(f"z must have shape ({d},) to match the sample, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    if spec.d != d:
        raise ValueError(
            f"kernel spec has {spec.d} bandwidths but the sample has {d} covariates"
        )
    return z


def _check_t(t) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t!r}")
    return t


def raw_sums(sample: Sample, spec: KernelSpec, t, z) -> KernelSums:
    """Kernel numerator/denominator sums at one (duration, covariate) point.

    An all-zero result (empty kernel window) is a legal return; turning it
    into an error is the surface estimator's job.
    """
    z = _check_point(sample, spec, z)
    return _ZWeights(sample, spec, z).sums_at(_check_t(t))


def _surface_from(sums: KernelSums) -> SurfaceEstimate:
    b = sums.b
    if b == 0.0:
        raise EmptyNeighborhoodError(
            "no kernel mass at the evaluation covariate point"
        )
    a = sums.a
    b2 = b * b
    pi_hat = a / b
    dpi_hat = tuple(
        (ak * b - a * bk) / b2 for ak, bk in zip(sums.a_grad, sums.b_grad)
    )
    d2pi_hat = (
        sums.a_cross / b
        - (
            sums.b_grad[0] * sums.a_grad[1]
            + sums.a_grad[0] * sums.b_grad[1]
            + sums.b_cross * a
        )
        / b2
        + 2.0 * sums.b_grad[0] * a * sums.b_grad[1] / (b2 * b)
    )
    return SurfaceEstimate(pi_hat=pi_hat, dpi_hat=dpi_hat, d2pi_hat=d2pi_hat, b_at_z=b)


def estimate_surface(sample: Sample, spec: KernelSpec, t, z) -> SurfaceEstimate:
    """Estimate the joint survival surface and its covariate derivatives.

    Raises EmptyNeighborhoodError when no observation carries kernel weight
    at z (the caller decides whether to skip the point).
    """
    z = _check_point(sample, spec, z)
    return _surface_from(_ZWeights(sample, spec, z).sums_at(_check_t(t)))


def estimate_surface_grid(sample: Sample, spec: KernelSpec, t_grid, z) -> list[SurfaceEstimate]:
    """Evaluate the surface along a duration grid at one covariate point.

    The kernel weights depend on z only, so they are built once and shared
    by all grid points; each returned entry is bitwise identical to a
    separate estimate_surface call at the same duration.  The empty-window
    error is duration independent, hence raised for the grid as a whole.
    """
    z = _check_point(sample, spec, z)
    ts = [_check_t(t) for t in np.asarray(t_grid, dtype=float).ravel()]
    if not ts:
        raise ValueError("t_grid must be nonempty")
    weights = _ZWeights(sample, spec, z)
    if weights.b == 0.0:
        raise EmptyNeighborhoodError(
            "no kernel mass at the evaluation covariate point"
        )
    return [_surface_from(weights.sums_at(t)) for t in ts]
