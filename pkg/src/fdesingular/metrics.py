"""Weighted L¹ norms and the contraction / convergence series built on them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch
from .exponents import ExponentSet
from .pde import Trajectory
from .profile import SelfSimilarProfile

_SPHERE_CLOSED = {3: 4.0 * math.pi, 4: 2.0 * math.pi ** 2, 5: 8.0 * math.pi ** 2 / 3.0}


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    if n in _SPHERE_CLOSED:
        return _SPHERE_CLOSED[n]
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def log_weights(N: int, h: float) -> np.ndarray:
    """Composite Boole weights on N equally spaced nodes with spacing h.

    Intervals left over after the last full panel of four are covered by
    Simpson's 3/8, Simpson's or the trapezoid rule. All weights are positive.
    """
    if N < 2:
        raise ValueError("need at least two nodes")
    w = np.zeros(N)
    panels = (N - 1) // 4
    boole = np.array([7.0, 32.0, 12.0, 32.0, 7.0]) * (2.0 * h / 45.0)
    for k in range(panels):
        w[4 * k:4 * k + 5] += boole
    rest = (N - 1) - 4 * panels
    i0 = 4 * panels
    if rest == 1:
        w[i0:i0 + 2] += np.array([0.5, 0.5]) * h
    elif rest == 2:
        w[i0:i0 + 3] += np.array([1.0, 4.0, 1.0]) * (h / 3.0)
    elif rest == 3:
        w[i0:i0 + 4] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


@dataclass(frozen=True)
class WeightedNorm:
    """Norm ω_{n-1} ∫ |h(r)| r^(n-1-mu) dr over [r_lo, r_hi]."""

    mu: float
    n: int
    r_lo: float
    r_hi: float
    points_per_decade: int = 256

    def __post_init__(self):
        if not 0 < self.r_lo < self.r_hi:
            raise ValueError("need 0 < r_lo < r_hi")

    def grid(self) -> np.ndarray:
        """Log-uniform nodes with exact endpoints, at least ``points_per_decade``
        per decade, and an interval count divisible by four (pure Boole)."""
        decades = math.log10(self.r_hi / self.r_lo)
        intervals = 4 * max(1, math.ceil(decades * self.points_per_decade / 4 - 1e-9))
        r = np.geomspace(self.r_lo, self.r_hi, intervals + 1)
        r[0], r[-1] = self.r_lo, self.r_hi
        return r

    def check_mode(self, e: ExponentSet, mode: str) -> bool:
        """True when mu suits ``mode`` ("contraction": mu1 <= mu < mu2,
        "convergence": mu == mu1)."""
        if mode == "contraction":
            return e.mu1 <= self.mu < e.mu2
        if mode == "convergence":
            return math.isclose(self.mu, e.mu1, rel_tol=1e-12, abs_tol=1e-14)
        raise ValueError(f"unknown mode {mode!r}")

    def weights(self, radii) -> np.ndarray:
        """Quadrature weights for samples on a log-uniform grid ``radii``."""
        r = np.asarray(radii, dtype=float)
        if r.size < 2:
            raise ValueError("need at least two radii")
        s = np.log(r)
        h = (s[-1] - s[0]) / (r.size - 1)
        if np.max(np.abs(np.diff(s) - h)) > 1e-9 * max(h, 1.0):
            raise GridMismatch("radii are not log-uniform")
        return sphere_area(self.n) * log_weights(r.size, h) * r ** (self.n - self.mu)


def _window(radii, w: WeightedNorm):
    r = np.asarray(radii, dtype=float)
    sel = (r >= w.r_lo * (1 - 1e-12)) & (r <= w.r_hi * (1 + 1e-12))
    if sel.sum() < 2:
        raise GridMismatch("grid does not cover the norm's domain")
    return sel


def weighted_l1(h, w: WeightedNorm, radii=None) -> float:
    """ω_{n-1} ∫ |h(r)| r^(n-1-mu) dr by composite quadrature in log r.

    ``h`` is either a callable sampled on ``w.grid()`` or an array of samples
    at ``radii`` (only nodes inside the norm's domain are used).
    """
    if callable(h):
        r = w.grid()
        vals = np.asarray(h(r), dtype=float)
    else:
        if radii is None:
            raise ValueError("radii are required for sampled input")
        sel = _window(radii, w)
        r = np.asarray(radii, dtype=float)[sel]
        vals = np.asarray(h, dtype=float)[sel]
    return float(np.sum(w.weights(r) * np.abs(vals)))


@dataclass(frozen=True)
class Series:
    """A norm series with its monotonicity summary."""

    times: np.ndarray
    values: np.ndarray
    positive_part: np.ndarray | None = None
    sup_compact: np.ndarray | None = None
    flux_correction: np.ndarray | None = None
    tail_bound: float = 0.0

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def worst_uptick(self) -> float:
        return float(max(0.0, np.max(self.increments))) if self.values.size > 1 else 0.0

    def nonincreasing(self, slack: float = 0.0) -> bool:
        allowed = slack + (0.0 if self.flux_correction is None else np.maximum(self.flux_correction, 0))
        return bool(np.all(self.increments <= allowed))

    def strictly_decreasing(self, floor: float = 0.0) -> bool:
        """Every step decreases while the value is above ``floor``."""
        d = self.increments
        active = self.values[:-1] > floor
        return bool(np.all(d[active] < 0))

    @property
    def ratio(self) -> float:
        return float(self.values[-1] / self.values[0]) if self.values[0] else 0.0

    def to_csv(self, path) -> None:
        """Columns tau_or_t, weighted_l1, positive_part, sup_compact, tail_bound."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["tau_or_t", "weighted_l1", "positive_part", "sup_compact", "tail_bound"])
            for k, t in enumerate(self.times):
                pp = "" if self.positive_part is None else repr(float(self.positive_part[k]))
                sc = "" if self.sup_compact is None else repr(float(self.sup_compact[k]))
                wr.writerow([repr(float(t)), repr(float(self.values[k])), pp, sc,
                             repr(float(self.tail_bound))])


def _check_pair(u: Trajectory, v: Trajectory):
    if u.radii.shape != v.radii.shape or not np.array_equal(u.radii, v.radii):
        raise GridMismatch("trajectories live on different grids")
    if u.times.shape != v.times.shape or not np.allclose(u.times, v.times, rtol=0, atol=1e-12):
        raise GridMismatch("trajectories have different snapshot times")


def _boundary_flux(u, v, r, mu, n, m):
    """Boundary terms of d/dt ∫ |u-v| r^-mu dx at one time."""
    om = sphere_area(n)
    d = u ** m - v ** m
    ad = np.abs(d)
    out = 0.0
    for i, j, sign in ((-1, -2, 1.0), (0, 1, -1.0)):
        grad = (ad[i] - ad[j]) / (r[i] - r[j])
        out += sign * om * (r[i] ** (n - 1 - mu) * grad + mu * r[i] ** (n - 2 - mu) * ad[i])
    return out


def contraction_series(u_traj: Trajectory, v_traj: Trajectory, w: WeightedNorm,
                       envelope: tuple | None = None) -> Series:
    """‖u - v‖ and ‖(u - v)+‖ in L¹(r^-mu) at every common snapshot.

    ``flux_correction[k]`` integrates, over [t_k, t_{k+1}], the boundary
    terms by which a truncated domain can raise the norm (trapezoid in time).
    ``envelope`` = (lower, upper) callables r -> U_lambda bounds at t_end
    enables the tail bound ∫_{r > r_hi} (upper - lower) r^(n-1-mu) dr.
    """
    _check_pair(u_traj, v_traj)
    r = u_traj.radii
    sel = _window(r, w)
    rr = r[sel]
    wts = w.weights(rr)
    U, V = u_traj.values, v_traj.values
    diff = (U - V)[:, sel]
    l1 = np.abs(diff) @ wts
    pos = np.maximum(diff, 0.0) @ wts
    m, n = u_traj.exps.m, u_traj.exps.n
    flux = np.array([_boundary_flux(U[k][sel], V[k][sel], rr, w.mu, n, m) for k in range(len(U))])
    t = u_traj.times
    corr = 0.5 * (flux[1:] + flux[:-1]) * np.diff(t)
    tail = 0.0
    if envelope is not None:
        lower, upper = envelope
        far = np.geomspace(w.r_hi, w.r_hi * 1e8, 4097)
        tail = weighted_l1(np.asarray(upper(far)) - np.asarray(lower(far)),
                           WeightedNorm(w.mu, n, far[0], far[-1]), radii=far)
    return Series(t, l1, pos, None, corr, tail)


def convergence_to_profile(rt: Trajectory, target: SelfSimilarProfile, w: WeightedNorm,
                           compact: tuple = (0.5, 4.0)) -> Series:
    """‖ũ(τ) - f_λ0‖ in L¹(r^-mu) and max |ũ(τ) - f_λ0| over the annulus ``compact``."""
    r = rt.radii
    sel = _window(r, w)
    f = np.asarray(target.f(r))
    diff = rt.values - f
    l1 = np.abs(diff[:, sel]) @ w.weights(r[sel])
    a, b = compact
    cs = (r >= a) & (r <= b)
    if not cs.any():
        raise GridMismatch("compact annulus contains no grid points")
    sup = np.max(np.abs(diff[:, cs]), axis=1)
    pos = np.maximum(diff[:, sel], 0.0) @ w.weights(r[sel])
    return Series(rt.times, l1, pos, sup, None, 0.0)


def decrease_ratios(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return v[1:] / v[:-1]
