"""Uniform B-spline grids, basis evaluation with derivatives, and coefficient curves.

A grid places ``num_intervals`` uniform intervals on a working range and extends
``degree`` extra uniform steps past each end, so every point of the range has
full basis support and the basis values sum to one there. Inputs outside the
range are clamped to it before evaluation; callers that care how often that
happens count clamped inputs themselves (see the network forward pass).

All functions are pure and all values immutable after construction, so they
are safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_NUM_INTERVALS = 5
DEFAULT_DEGREE = 3
# Inputs are standardized to zero mean / unit variance upstream, so +-4 sigma
# covers the bulk of what a curve will ever see.
DEFAULT_RANGE_MIN = -4.0
DEFAULT_RANGE_MAX = 4.0

LSQ_DAMPING = 1e-8


@dataclass(frozen=True)
class KnotGrid:
    """Uniformly spaced knot vector extended ``degree`` steps past each end.

    ``knots`` has ``num_intervals + 2 * degree + 1`` entries and the grid
    carries ``num_intervals + degree`` basis functions.
    """

    range_min: float
    range_max: float
    num_intervals: int
    degree: int
    knots: np.ndarray

    @property
    def num_bases(self) -> int:
        return self.num_intervals + self.degree

    @property
    def step(self) -> float:
        return (self.range_max - self.range_min) / self.num_intervals


def make_grid(
    range_min: float,
    range_max: float,
    num_intervals: int = DEFAULT_NUM_INTERVALS,
    degree: int = DEFAULT_DEGREE,
) -> KnotGrid:
    """Build a uniform extended knot grid on ``[range_min, range_max]``."""
    if not range_min < range_max:
        raise ValueError(
            f"invalid range: need range_min < range_max, got [{range_min}, {range_max}]"
        )
    if num_intervals < 1:
        raise ValueError(f"num_intervals must be >= 1, got {num_intervals}")
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    h = (float(range_max) - float(range_min)) / num_intervals
    idx = np.arange(-degree, num_intervals + degree + 1, dtype=float)
    knots = float(range_min) + idx * h
    knots.setflags(write=False)
    return KnotGrid(float(range_min), float(range_max), int(num_intervals), int(degree), knots)


def _degree_zero(grid: KnotGrid, t: np.ndarray) -> np.ndarray:
    # Indicator of [knots[i], knots[i+1]); the very last interval is closed on
    # the right so the top of the knot range is not lost (matters for p=0).
    knots = grid.knots
    tt = t[..., None]
    b = ((tt >= knots[:-1]) & (tt < knots[1:])).astype(float)
    b[..., -1] = np.where(t >= knots[-1], 1.0, b[..., -1])
    return b


def _raise_degree(b: np.ndarray, grid: KnotGrid, t: np.ndarray, p: int) -> np.ndarray:
    # One Cox-de Boor step from degree p-1 values to degree p values.
    # Uniform knots: every denominator equals p * step > 0.
    knots = grid.knots
    tt = t[..., None]
    left = (tt - knots[: -(p + 1)]) / (knots[p:-1] - knots[: -(p + 1)]) * b[..., :-1]
    right = (knots[p + 1 :] - tt) / (knots[p + 1 :] - knots[1:-p]) * b[..., 1:]
    return left + right


def basis_matrix(grid: KnotGrid, ts) -> np.ndarray:
    """Basis values at (clamped) ``ts``; output shape is ``ts.shape + (num_bases,)``."""
    t = np.clip(np.asarray(ts, dtype=float), grid.range_min, grid.range_max)
    b = _degree_zero(grid, t)
    for p in range(1, grid.degree + 1):
        b = _raise_degree(b, grid, t, p)
    return b


def basis_values(grid: KnotGrid, t: float) -> np.ndarray:
    """All basis function values at a single point, as a length ``num_bases`` vector."""
    return basis_matrix(grid, float(t))


def basis_derivative_matrix(grid: KnotGrid, ts) -> np.ndarray:
    """First derivatives of every basis function at (clamped) ``ts``."""
    p = grid.degree
    if p < 1:
        raise ValueError("unsupported degree: derivatives require degree >= 1")
    t = np.clip(np.asarray(ts, dtype=float), grid.range_min, grid.range_max)
    b = _degree_zero(grid, t)
    for q in range(1, p):
        b = _raise_degree(b, grid, t, q)
    # Degree-reduction formula: B'_{i,p} = p * (B_{i,p-1}/den_l - B_{i+1,p-1}/den_r).
    knots = grid.knots
    den_l = knots[p:-1] - knots[: -(p + 1)]
    den_r = knots[p + 1 :] - knots[1:-p]
    return p * (b[..., :-1] / den_l - b[..., 1:] / den_r)


def basis_derivatives(grid: KnotGrid, t: float) -> np.ndarray:
    """Derivatives of every basis function at a single point."""
    return basis_derivative_matrix(grid, float(t))


@dataclass(frozen=True)
class SplineCurve:
    """A coefficient vector over a knot grid: ``s(t) = sum_i c_i B_i(t)``."""

    grid: KnotGrid
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.shape != (self.grid.num_bases,):
            raise ValueError(
                f"coefficient count {coeffs.shape} does not match basis count "
                f"({self.grid.num_bases},)"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must all be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)


def eval_curve(curve: SplineCurve, t: float) -> float:
    """Curve value at ``t`` (clamped to the grid range)."""
    return float(basis_values(curve.grid, t) @ curve.coefficients)


def eval_curve_derivative(curve: SplineCurve, t: float) -> float:
    """Curve derivative at ``t`` (clamped to the grid range)."""
    return float(basis_derivatives(curve.grid, t) @ curve.coefficients)


def curve_values(curve: SplineCurve, ts) -> np.ndarray:
    """Vectorized curve evaluation."""
    return basis_matrix(curve.grid, ts) @ curve.coefficients


def least_squares_fit(grid: KnotGrid, samples, damping: float = LSQ_DAMPING) -> SplineCurve:
    """Fit coefficients to ``(t, y)`` samples by damped normal equations.

    ``samples`` is a sequence of (t, y) pairs or an (n, 2) array. Requires at
    least ``num_bases`` distinct sample locations (after clamping to the grid
    range); the small ridge term keeps near-collinear locations solvable.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("samples must be a sequence of (t, y) pairs")
    ts = np.clip(arr[:, 0], grid.range_min, grid.range_max)
    ys = arr[:, 1]
    k = grid.num_bases
    if np.unique(ts).size < k:
        raise ValueError(
            f"underdetermined fit: need at least {k} distinct sample locations, "
            f"got {np.unique(ts).size}"
        )
    design = basis_matrix(grid, ts)
    gram = design.T @ design + damping * np.eye(k)
    coeffs = np.linalg.solve(gram, design.T @ ys)
    return SplineCurve(grid, coeffs)


def extend_grid(curve: SplineCurve, new_min: float, new_max: float) -> SplineCurve:
    """Refit an existing curve onto a grid covering a wider range.

    The new range must contain the old one. Coefficients are refit against
    dense samples of the old curve over its own domain, which reproduces the
    old values there (exactly for curves polynomial up to the grid degree).
    """
    old = curve.grid
    if new_min > old.range_min or new_max < old.range_max:
        raise ValueError(
            f"shrink not allowed: [{new_min}, {new_max}] does not contain "
            f"[{old.range_min}, {old.range_max}]"
        )
    if new_min == old.range_min and new_max == old.range_max:
        return SplineCurve(old, curve.coefficients.copy())
    new_grid = make_grid(new_min, new_max, old.num_intervals, old.degree)
    ts = np.linspace(old.range_min, old.range_max, 32 * new_grid.num_bases)
    ys = curve_values(curve, ts)
    return least_squares_fit(new_grid, np.column_stack([ts, ys]))
