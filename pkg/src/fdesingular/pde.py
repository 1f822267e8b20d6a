"""Radial finite-difference simulation of u_t = Δu^m on annuli 1/R < |x| < R.

Space is discretized in s = log r on a uniform grid with the conservative
form Δw = r^-n d/ds (r^(n-2) dw/ds); the stationary solution A r^-(n-2)/m is
then an exact discrete steady state. Time stepping is the linearly implicit
two-stage Rosenbrock method ROS2 with a tridiagonal Jacobian and an embedded
first-order error estimate.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .diagnostics import DiagnosticsReport
from .errors import EmptyOverlap, GridMismatch, PositivityLoss, StiffnessFailure
from .exponents import ExponentSet
from .selfsimilar import SelfSimilarSolution, initial_trace

log = logging.getLogger(__name__)

GAMMA_ROS2 = 1.0 + 1.0 / math.sqrt(2.0)
TRAP_ABS, TRAP_REL = 1e-8, 1e-6


def annulus_grid(R: float, points_per_decade: int) -> np.ndarray:
    """Radii 10^(j/ppd) for |j| <= ppd * log10(R); R must be a power of ten
    times an integer multiple of the spacing for exact endpoints."""
    if not R > 1:
        raise ValueError(f"R must exceed 1, got {R}")
    j_max = int(round(math.log10(R) * points_per_decade))
    if abs(j_max / points_per_decade - math.log10(R)) > 1e-9:
        raise ValueError("log10(R) * points_per_decade must be an integer")
    return 10.0 ** (np.arange(-j_max, j_max + 1) / points_per_decade)


@dataclass(frozen=True, eq=False)
class RadialField:
    radii: np.ndarray
    values: np.ndarray
    time: float
    exps: ExponentSet

    def __post_init__(self):
        r = np.array(self.radii, dtype=float)
        v = np.array(self.values, dtype=float)
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)
        if r.shape != v.shape or r.ndim != 1 or r.size < 5:
            raise ValueError("radii and values must be equal-length 1-d arrays (>= 5 points)")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise PositivityLoss("field values must be positive and finite")

    @property
    def h(self) -> float:
        return float(np.log(self.radii[1] / self.radii[0]))

    @classmethod
    def sample(cls, fn: Callable, radii, time: float, exps: ExponentSet) -> "RadialField":
        r = np.asarray(radii, dtype=float)
        return cls(r, np.asarray(fn(r), dtype=float), time, exps)


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet data at both ends of the annulus.

    ``value(r, t)`` gives the boundary values; ``rate(r, t)`` is its time
    derivative (estimated by differences when omitted).
    """

    kind: str
    value: Callable
    rate: Callable | None = None
    description: str = ""

    @classmethod
    def frozen(cls, field_: RadialField) -> "BoundarySpec":
        lo, hi = float(field_.values[0]), float(field_.values[-1])
        r_lo = float(field_.radii[0])

        def value(r, t):
            return np.where(np.asarray(r) <= r_lo, lo, hi)
        return cls("frozen", value, lambda r, t: np.zeros_like(np.asarray(r, float)),
                   "boundary values frozen at their initial values")

    @classmethod
    def from_self_similar(cls, sol: SelfSimilarSolution) -> "BoundarySpec":
        def value(r, t):
            if t <= 0:
                return initial_trace(sol, r)
            return sol(r, t)

        def rate(r, t):
            if t <= 0:
                return _fd_rate(value, r, t)
            return sol.rate(r, t) * np.asarray(sol(r, t))
        return cls("U_lambda", value, rate, f"U_lambda with lambda={sol.lam!r}, A={sol.profile.A!r}")

    def rate_at(self, r, t):
        if self.rate is not None:
            return np.asarray(self.rate(r, t), dtype=float)
        return _fd_rate(self.value, r, t)


def _fd_rate(value, r, t):
    d = 1e-6 * max(abs(t), 1e-3)
    if t - d <= 0:
        return (np.asarray(value(r, t + d)) - np.asarray(value(r, t))) / d
    return (np.asarray(value(r, t + d)) - np.asarray(value(r, t - d))) / (2 * d)


@dataclass(frozen=True)
class SchemeOptions:
    rtol: float = 1e-6
    atol: float = 0.0
    first_step: float | None = None
    min_step: float = 1e-14
    max_steps: int = 200_000
    max_growth: float = 2.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    snapshots: tuple
    boundary: BoundarySpec
    scheme: dict = field(default_factory=dict)

    def __post_init__(self):
        t = self.times
        if np.any(np.diff(t) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        r0 = self.snapshots[0].radii
        for s in self.snapshots[1:]:
            if s.radii.shape != r0.shape or not np.array_equal(s.radii, r0):
                raise GridMismatch("snapshots do not share a grid")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def radii(self) -> np.ndarray:
        return self.snapshots[0].radii

    @property
    def values(self) -> np.ndarray:
        return np.array([s.values for s in self.snapshots])

    @property
    def exps(self) -> ExponentSet:
        return self.snapshots[0].exps

    def __len__(self):
        return len(self.snapshots)


@dataclass(frozen=True, eq=False)
class RescaledTrajectory(Trajectory):
    """Snapshots of the rescaled field; snapshot ``time`` holds tau."""

    y_window: tuple = (0.0, math.inf)

    @property
    def taus(self) -> np.ndarray:
        return self.times


class _Operator:
    """Discrete right-hand side and tridiagonal Jacobian on the interior nodes."""

    def __init__(self, radii, exps, rescaled=False):
        self.e = exps
        s = np.log(radii)
        self.h = h = s[1] - s[0]
        n = exps.n
        self.rn = radii[1:-1] ** (-n) / (h * h)
        self.rho_p = np.exp((n - 2) * (s[1:-1] + h / 2))
        self.rho_m = np.exp((n - 2) * (s[1:-1] - h / 2))
        # alpha u + beta u_s = beta r^-gamma d/ds (r^gamma u) since alpha = beta gamma;
        # differencing r^gamma u keeps the truncation error small where u decays fast
        self.rescaled = rescaled
        c = exps.beta / (2 * h) if rescaled else 0.0
        self.c_p = c * math.exp(exps.gamma * h)
        self.c_m = c * math.exp(-exps.gamma * h)

    def rhs(self, u):
        m = self.e.m
        w = u ** m
        lap = self.rn * (self.rho_p * (w[2:] - w[1:-1]) - self.rho_m * (w[1:-1] - w[:-2]))
        out = lap
        if self.rescaled:
            out = out + self.c_p * u[2:] - self.c_m * u[:-2]
        return out

    def jacobian(self, u):
        """Banded (upper, diag, lower) rows for interior unknowns, plus the
        couplings to the two boundary values."""
        m = self.e.m
        dw = m * u ** (m - 1.0)
        up = self.rn * self.rho_p * dw[2:] + self.c_p
        lo = self.rn * self.rho_m * dw[:-2] - self.c_m
        diag = -self.rn * (self.rho_p + self.rho_m) * dw[1:-1]
        return up, diag, lo


def _solve_W(up, diag, lo, gt, rhs):
    N = diag.size
    ab = np.zeros((3, N))
    ab[0, 1:] = -gt * up[:-1]
    ab[1] = 1.0 - gt * diag
    ab[2, :-1] = -gt * lo[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _run(u0: RadialField, boundary: BoundarySpec, t_eval, opts: SchemeOptions, rescaled: bool):
    r = u0.radii
    op = _Operator(r, u0.exps, rescaled)
    ends = r[[0, -1]]
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or t_eval.size < 1 or np.any(np.diff(t_eval) <= 0):
        raise ValueError("t_eval must be strictly increasing")
    t = float(u0.time)
    if t_eval[0] < t:
        raise ValueError("t_eval starts before the initial time")
    u = u0.values.copy()
    u[[0, -1]] = boundary.value(ends, t)
    snaps = []
    if t_eval[0] == t:
        snaps.append(RadialField(r, u.copy(), t, u0.exps))
        targets = list(t_eval[1:])
    else:
        targets = list(t_eval)
    span = t_eval[-1] - t
    tau = opts.first_step or min(1e-4 * max(span, 1e-12), 1e-3)
    gt = GAMMA_ROS2
    accepted = rejected = 0
    m = u0.exps.m
    wall = _time.perf_counter()

    for target in targets:
        while t < target:
            if accepted + rejected > opts.max_steps:
                raise StiffnessFailure(f"step budget exhausted at t={t:.6g}")
            step = min(tau, target - t)
            last = step >= target - t
            t_new = target if last else t + step
            up, diag, lo = op.jacobian(u)
            # boundary couplings for the time derivative of F
            bl = op.rn[0] * op.rho_m[0] * m * u[0] ** (m - 1) - op.c_m
            br = op.rn[-1] * op.rho_p[-1] * m * u[-1] ** (m - 1) + op.c_p
            db = boundary.rate_at(ends, t)
            Ft = np.zeros(diag.size)
            Ft[0] += bl * db[0]
            Ft[-1] += br * db[1]
            F0 = op.rhs(u)
            k1 = _solve_W(up, diag, lo, gt * step, F0 + gt * step * Ft)
            u1 = u.copy()
            u1[1:-1] += step * k1
            u1[[0, -1]] = boundary.value(ends, t_new)
            ok = np.all(u1[1:-1] > 0)
            if ok:
                F1 = op.rhs(u1)
                k2 = _solve_W(up, diag, lo, gt * step, F1 - 2.0 * k1 - gt * step * Ft)
                inc = step * (1.5 * k1 + 0.5 * k2)
                new = u[1:-1] + inc
                ok = np.all(new > 0) and np.all(np.isfinite(new))
            if not ok:
                rejected += 1
                tau = step / 2
                if tau < opts.min_step:
                    raise PositivityLoss(f"positivity lost at t={t:.6g} below the minimum step")
                continue
            err_vec = 0.5 * step * (k1 + k2) / (opts.atol + opts.rtol * np.abs(new))
            err = float(np.max(np.abs(err_vec)))
            fac = opts.max_growth if err == 0 else min(opts.max_growth, max(0.2, 0.9 / math.sqrt(err)))
            if err <= 1.0:
                u[1:-1] = new
                u[[0, -1]] = boundary.value(ends, t_new)
                t = t_new
                accepted += 1
                if not last or step == tau:
                    tau = step * fac
            else:
                rejected += 1
                tau = step * fac
                if tau < opts.min_step:
                    raise StiffnessFailure(f"step size underflow at t={t:.6g}")
        snaps.append(RadialField(r, u.copy(), t, u0.exps))
    scheme = {
        "method": "ROS2", "rtol": opts.rtol, "atol": opts.atol, "accepted_steps": accepted,
        "rejected_steps": rejected, "points": int(r.size), "h": float(op.h),
        "R": float(r[-1]), "rescaled": rescaled,
        "wall_clock_s": _time.perf_counter() - wall,
    }
    log.info("simulation done: %d accepted, %d rejected steps", accepted, rejected)
    return snaps, scheme


def simulate(u0: RadialField, boundary: BoundarySpec, t_span, opts: SchemeOptions | None = None,
             t_eval=None) -> Trajectory:
    """Integrate u_t = Δu^m from ``u0`` with Dirichlet ``boundary`` data.

    Parameters
    ----------
    t_span : (t0, t1)
        Start must equal ``u0.time``.
    t_eval : array, optional
        Snapshot times inside [t0, t1]; defaults to 11 equally spaced times.
    """
    t0, t1 = map(float, t_span)
    if abs(t0 - u0.time) > 1e-14 * max(1.0, abs(t0)):
        raise ValueError("t_span must start at u0.time")
    if t_eval is None:
        t_eval = np.linspace(t0, t1, 11)
    snaps, scheme = _run(u0, boundary, t_eval, opts or SchemeOptions(), rescaled=False)
    return Trajectory(tuple(snaps), boundary, scheme)


def simulate_rescaled(u0: RadialField, boundary: BoundarySpec, tau_span,
                      opts: SchemeOptions | None = None, tau_eval=None) -> RescaledTrajectory:
    """Integrate ũ_τ = Δũ^m + α ũ + β y·∇ũ, whose steady states are the profiles."""
    t0, t1 = map(float, tau_span)
    if abs(t0 - u0.time) > 1e-14 * max(1.0, abs(t0)):
        raise ValueError("tau_span must start at u0.time")
    if tau_eval is None:
        tau_eval = np.linspace(t0, t1, 11)
    snaps, scheme = _run(u0, boundary, tau_eval, opts or SchemeOptions(), rescaled=True)
    r = u0.radii
    return RescaledTrajectory(tuple(snaps), boundary, scheme, (float(r[0]), float(r[-1])))


def rescale_trajectory(traj: Trajectory, y_window: tuple | None = None) -> RescaledTrajectory:
    """Map u(x, t) to ũ(y, τ) = t^α u(t^β y, t) with τ = log t.

    The y grid is the trajectory's own grid restricted to ``y_window``
    (default: the largest window covered at every snapshot).

    Raises
    ------
    EmptyOverlap
        When no grid point of the window is covered by every snapshot.
    """
    e = traj.exps
    if not e.beta < 0:
        raise ValueError("rescaling requires beta < 0")
    t = traj.times
    if np.any(t <= 0):
        raise ValueError("all snapshot times must be positive")
    r = traj.radii
    lo_cov = np.max(r[0] * t ** (-e.beta))
    hi_cov = np.min(r[-1] * t ** (-e.beta))
    lo, hi = (lo_cov, hi_cov) if y_window is None else y_window
    if y_window is not None and (lo < lo_cov * (1 - 1e-12) or hi > hi_cov * (1 + 1e-12)):
        raise EmptyOverlap(f"window [{lo:.4g}, {hi:.4g}] not covered; available "
                           f"[{lo_cov:.4g}, {hi_cov:.4g}]")
    sel = (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))
    if sel.sum() < 5:
        raise EmptyOverlap(f"covered window [{lo_cov:.4g}, {hi_cov:.4g}] holds too few grid points")
    y = r[sel]
    lr = np.log(r)
    snaps = []
    for tk, snap in zip(t, traj.snapshots):
        spline = CubicSpline(lr, np.log(snap.values))
        x = tk ** e.beta * y
        vals = tk ** e.alpha * np.exp(spline(np.clip(np.log(x), lr[0], lr[-1])))
        snaps.append(RadialField(y, vals, float(np.log(tk)), e))
    scheme = dict(traj.scheme, rescaled_from_physical=True,
                  y_shrinkage=float((hi_cov / lo_cov) / (r[-1] / r[0])))
    return RescaledTrajectory(tuple(snaps), traj.boundary, scheme, (float(y[0]), float(y[-1])))


def _solution_on(sol: SelfSimilarSolution, r, t):
    return np.asarray(initial_trace(sol, r) if t <= 0 else sol(r, t))


def check_trapping(traj: Trajectory, lower: SelfSimilarSolution, upper: SelfSimilarSolution,
                   abs_slack: float = TRAP_ABS, rel_slack: float = TRAP_REL) -> DiagnosticsReport:
    """Verify U_lower <= u <= U_upper at every snapshot.

    ``lower`` must have the larger lambda. Margins are reported relative to
    the bound; a point fails when it crosses the bound by more than
    abs_slack + rel_slack * |bound|.
    """
    if not lower.lam > upper.lam:
        raise ValueError("lower solution must have the larger lambda")
    rep = DiagnosticsReport("trapping")
    r = traj.radii
    worst = {"lower": (math.inf, None), "upper": (math.inf, None)}
    ok = {"lower": True, "upper": True}
    for snap in traj.snapshots:
        u = snap.values
        for key, sol, sign in (("lower", lower, 1.0), ("upper", upper, -1.0)):
            b = _solution_on(sol, r, snap.time)
            margin = sign * (u - b)
            rel = margin / b
            i = int(np.argmin(rel))
            if rel[i] < worst[key][0]:
                worst[key] = (float(rel[i]), (float(r[i]), snap.time))
            if np.any(margin < -(abs_slack + rel_slack * np.abs(b))):
                ok[key] = False
    for key in ("lower", "upper"):
        w, where = worst[key]
        rep.add(f"{key}_margin", ok[key], w, -(rel_slack), where=None if where is None else where[0],
                detail="" if where is None else f"t={where[1]:.6g}")
    return rep


def check_aronson_benilan(traj: Trajectory, abs_slack: float = TRAP_ABS,
                          rel_slack: float = TRAP_REL) -> DiagnosticsReport:
    """Discrete check of u_t <= u / ((1-m) t) at snapshot midpoints."""
    if len(traj) < 2:
        raise ValueError("need at least two snapshots")
    m = traj.exps.m
    rep = DiagnosticsReport("aronson_benilan")
    t = traj.times
    U = traj.values
    worst, where, ok = -math.inf, None, True
    for k in range(len(t) - 1):
        tm = 0.5 * (t[k] + t[k + 1])
        if tm <= 0:
            continue
        ut = (U[k + 1] - U[k]) / (t[k + 1] - t[k])
        um = 0.5 * (U[k + 1] + U[k])
        excess = ut - um / ((1 - m) * tm)
        if np.any(excess > abs_slack + rel_slack * np.abs(um)):
            ok = False
        rel = excess / um
        i = int(np.argmax(rel))
        if rel[i] > worst:
            worst, where = float(rel[i]), (float(traj.radii[i]), tm)
    rep.add("ab_bound", ok, worst, rel_slack, where=where[0] if where else None,
            detail=f"t={where[1]:.6g}" if where else "")
    return rep


def write_trajectory(traj: Trajectory, outdir, prefix: str = "snapshot") -> Path:
    """One columnar file per snapshot plus ``manifest.txt``.

    Wall-clock time goes to ``timing.txt`` so that data files and manifest
    are byte-identical across repeated runs.
    """
    from .profile import __version__
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    e = traj.exps
    for k, snap in enumerate(traj.snapshots):
        lines = [f"# time = {snap.time!r}", "# columns = radius u"]
        lines += [f"{float(r)!r} {float(v)!r}" for r, v in zip(snap.radii, snap.values)]
        (out / f"{prefix}_{k:04d}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    man = {"library_version": __version__, "n": e.n, "m": e.m, "gamma": e.gamma, "rho1": e.rho1,
           "alpha": e.alpha, "beta": e.beta, "boundary_kind": traj.boundary.kind,
           "boundary": traj.boundary.description, "snapshots": len(traj),
           "times": " ".join(repr(float(x)) for x in traj.times)}
    for k, v in sorted(traj.scheme.items()):
        if k != "wall_clock_s":
            man[f"scheme.{k}"] = v
    path = out / "manifest.txt"
    path.write_text("".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n"
                            for k, v in man.items()), encoding="utf-8")
    (out / "timing.txt").write_text(f"wall_clock_s = {traj.scheme.get('wall_clock_s', 0.0)!r}\n",
                                    encoding="utf-8")
    return path
