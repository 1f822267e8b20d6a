"""Construction of the singular self-similar profile through the inverted problem.

Pipeline (one run with g(0) = eta):

1. :func:`local_fixed_point` solves the inverted ODE on [0, eps] by Picard
   iteration of the integral operator, written in the variable t = r^a with
   a = (n-2-nm)/m so that the unknowns are smooth at the origin in both
   regimes.
2. :func:`continue_g` carries the solution to r_max in log radius.
3. :func:`extract_far_constant` reads off A = lim r^kappa g(r).
4. :func:`invert` maps g back to f(r) = r^-(n-2)/m g(1/r).

:func:`solve_profile` wraps the pipeline and rescales to any origin constant.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import roots_jacobi

from .diagnostics import DiagnosticsReport
from .errors import BlowUp, NoContraction, NoPlateau, StepFailure, Vanish
from .exponents import ExponentSet, derive_exponents

log = logging.getLogger(__name__)

__version__ = "0.1.0"

MONOTONE_SLACK = 1e-12
SIGMA_REL_TOL = 0.1


# ----------------------------------------------------------------------------
# data types

def _frozen(x) -> np.ndarray:
    a = np.array(x, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    """Radial samples of g (variable ``"G"``) or f (variable ``"F"``).

    ``origin_constant`` and ``far_constant`` are the limits of
    r^p * value at r -> 0 and r -> infinity with the appropriate power p for
    the variable (for G: g(0) = eta and A; for F: A and D).
    """

    variable: str
    radii: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    exps: ExponentSet
    eta: float | None = None
    origin_constant: float | None = None
    far_constant: float | None = None

    def __post_init__(self):
        if self.variable not in ("G", "F"):
            raise ValueError(f"variable must be 'G' or 'F', got {self.variable!r}")
        for name in ("radii", "values", "derivs"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (self.radii.shape == self.values.shape == self.derivs.shape):
            raise ValueError("radii, values and derivs must have equal shapes")

    def __len__(self):
        return self.radii.size

    @property
    def log_slope(self) -> np.ndarray:
        """r v'(r) / v(r)."""
        return self.radii * self.derivs / self.values

    def scaled(self, lam: float, power: float) -> "ProfileCurve":
        """The curve of r -> lam^power * v(lam r), sampled at radii / lam."""
        amp = lam ** power
        return replace(self, radii=self.radii / lam, values=amp * self.values,
                       derivs=amp * lam * self.derivs, origin_constant=None,
                       far_constant=None)


@dataclass(frozen=True, eq=False)
class LocalSeed:
    """Local solution of the inverted problem on [0, eps].

    g(r) = G(r^a) and g'(r) = r^(a-1) H(r^a) with G, H Chebyshev series on
    [0, eps^a]; ``coeffs`` holds their coefficient arrays.
    """

    eta: float
    zeta: float
    eps: float
    coeffs: dict
    exps: ExponentSet
    iterations: int = 0
    contraction: float = 0.0

    def _series(self, key):
        t_max = self.eps ** self.exps.a
        return Chebyshev(self.coeffs[key], domain=[0.0, t_max])

    def g(self, r):
        r = np.asarray(r, dtype=float)
        return self._series("G")(r ** self.exps.a)

    def h_scaled(self, r):
        """r^(a-1)-stripped derivative H with g'(r) = r^(a-1) H."""
        r = np.asarray(r, dtype=float)
        return self._series("H")(r ** self.exps.a)

    def dg(self, r):
        r = np.asarray(r, dtype=float)
        return r ** (self.exps.a - 1.0) * self.h_scaled(r)


@dataclass(frozen=True)
class FarConstant:
    """Result of :func:`extract_far_constant`."""

    A: float
    uncertainty: float
    correction: float
    sigma: float
    rate_max: float
    rate_decreasing: bool
    raw_spread: float


@dataclass(frozen=True)
class ProfileOptions:
    eta: float = 1.0
    eps: float | None = None
    eps_start: float = 1e-3
    eps_shrinks: int = 60
    cheb_degree: int = 32
    picard_tol: float = 1e-14
    max_iter: int = 200
    points_per_decade: int = 256
    r_min_factor: float = 1e-6
    r_max: float | None = None
    r_max_cap: float = 1e60
    rtol: float = 1e-12
    atol: float = 1e-14
    method: str = "Radau"
    plateau_tol: float = 1e-3


# ----------------------------------------------------------------------------
# local fixed point

def _sup_distance(e, r, g1, H1, g0, H0):
    # norm of the fixed-point space: sup|g| and sup|r^max(delta1,0) g'|
    w = r ** (max(e.delta1, 0.0) + e.a - 1.0)
    return max(np.max(np.abs(g1 - g0)), np.max(np.abs(w * (H1 - H0))))


def _picard(eta, e, eps, tol, max_iter, degree, start):
    a = e.a
    t_max = eps ** a
    p = (e.n - 2) / a
    x, wq = roots_jacobi(degree + 8, 0.0, p)
    sig = 0.5 * (1.0 + x)
    wq = wq * 2.0 ** (-p - 1.0)
    zeta = e.zeta_factor * eta ** (2.0 - e.m)
    r_chk = np.linspace(0.0, eps, 513)
    t_chk = r_chk ** a

    G = Chebyshev([eta], domain=[0.0, t_max])
    H = Chebyshev([0.0 if start == "zero" else -zeta], domain=[0.0, t_max])
    dists = []
    for it in range(1, max_iter + 1):
        g_old, H_old = G, H

        def new_H(t, G=g_old, H=H_old):
            ts = np.multiply.outer(t, sig)
            F = e.alpha_tilde * G(ts) + e.beta_tilde * ts * H(ts)
            avg = F @ wq
            gt = G(t)
            if np.any(gt <= 0):
                return np.full_like(t, np.nan)
            return -gt ** (1.0 - e.m) / (e.m * a) * avg

        # sequential update: g is rebuilt from the fresh h
        with np.errstate(invalid="ignore"):
            H = Chebyshev.interpolate(new_H, degree, domain=[0.0, t_max])
        G = Chebyshev((H.integ(lbnd=0.0) / a + eta).coef, domain=[0.0, t_max])
        if not np.all(np.isfinite(H.coef)):
            return None, None, dists, "nonfinite"
        gv, Hv = G(t_chk), H(t_chk)
        if np.max(np.abs(gv - eta)) > eta / 2:
            return None, None, dists, "left ball"
        d = _sup_distance(e, r_chk, gv, Hv, g_old(t_chk), H_old(t_chk))
        dists.append(d)
        if d < tol:
            return G, H, dists, "ok"
        # halving test after the first two iterates
        if len(dists) >= 3 and dists[-1] > 0.5 * dists[-2] and dists[-1] > 10 * tol:
            return None, None, dists, "slow"
    return None, None, dists, "max_iter"


def local_fixed_point(eta: float, e: ExponentSet, eps: float | None = None,
                      tol: float = 1e-14, max_iter: int = 200, *,
                      eps_start: float = 1e-3, shrinks: int = 60,
                      degree: int = 32, start: str = "zero") -> LocalSeed:
    """Solve the inverted ODE on [0, eps] by Picard iteration.

    Parameters
    ----------
    eta : float
        Value g(0) > 0.
    eps : float, optional
        Matching radius. When omitted it starts at ``eps_start`` and is
        halved until the iteration contracts with factor <= 1/2.
    tol : float
        Sup-norm distance between successive iterates at which to stop.
    start : {"zero", "leading"}
        Initial iterate (g, h) = (eta, 0) or (eta, -zeta r^-delta1).

    Raises
    ------
    NoContraction
        When no radius in the shrink schedule yields a converging iteration.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    candidates = [eps] if eps is not None else [eps_start * 0.5 ** k for k in range(shrinks + 1)]
    zeta = e.zeta_factor * eta ** (2.0 - e.m)
    last = ""
    for eps_k in candidates:
        G, H, dists, status = _picard(eta, e, eps_k, tol, max_iter, degree, start)
        if status == "ok":
            # ratios near the round-off floor carry no information
            ratios = [d1 / d0 for d0, d1 in zip(dists, dists[1:]) if d1 > 1e4 * tol]
            contraction = max(ratios, default=0.0)
            log.debug("picard eps=%.3g iterations=%d contraction=%.3g",
                      eps_k, len(dists), contraction)
            return LocalSeed(eta=eta, zeta=zeta, eps=eps_k,
                             coeffs={"G": G.coef.copy(), "H": H.coef.copy()},
                             exps=e, iterations=len(dists), contraction=contraction)
        last = status
    raise NoContraction(f"Picard iteration did not contract (last status: {last}); "
                        "parameters may be too close to the admissible boundary")


def seed_curve(seed: LocalSeed, r_min: float | None = None, points: int = 129) -> ProfileCurve:
    """Samples of the local solution on (0, eps]."""
    r_min = seed.eps * 1e-6 if r_min is None else r_min
    r = np.geomspace(r_min, seed.eps, points)
    return ProfileCurve("G", r, seed.g(r), seed.dg(r), seed.exps, eta=seed.eta,
                        origin_constant=seed.eta)


# ----------------------------------------------------------------------------
# continuation

def log_grid(r_lo: float, r_hi: float, points_per_decade: int) -> np.ndarray:
    """Anchored log-uniform radii 10^(j/ppd) inside [r_lo, r_hi]."""
    j0 = math.ceil(math.log10(r_lo) * points_per_decade - 1e-9)
    j1 = math.floor(math.log10(r_hi) * points_per_decade + 1e-9)
    return 10.0 ** (np.arange(j0, j1 + 1) / points_per_decade)


class _InvertedSystem:
    """Inverted ODE in s = log r for L = log g^m and P = r (g^m)' / g^m."""

    def __init__(self, e: ExponentSet):
        self.e = e

    def rhs(self, s, y):
        e = self.e
        L, P = y
        z = math.exp(e.a * s + (1.0 - e.m) * L / e.m)
        return [P, -(e.n - 2) * P - P * P - z * (e.alpha_tilde + e.beta_tilde * P / e.m)]

    def jac(self, s, y):
        e = self.e
        L, P = y
        z = math.exp(e.a * s + (1.0 - e.m) * L / e.m)
        return [[0.0, 1.0],
                [-z * (1.0 - e.m) / e.m * (e.alpha_tilde + e.beta_tilde * P / e.m),
                 -(e.n - 2) - 2.0 * P - z * e.beta_tilde / e.m]]


def _integrate(e, y0, s0, s1, s_eval, eta, opts):
    system = _InvertedSystem(e)
    kw = {"jac": system.jac} if opts.method in ("Radau", "BDF", "LSODA") else {}
    log_hi = math.log(2.0 * eta)

    def blow(s, y):
        return log_hi - y[0] / e.m
    blow.terminal = True

    def vanish(s, y):
        return y[0] / e.m + 700.0
    vanish.terminal = True

    sol = solve_ivp(system.rhs, (s0, s1), y0, method=opts.method, t_eval=s_eval,
                    rtol=opts.rtol, atol=opts.atol, events=[blow, vanish], **kw)
    if sol.status == 1:
        if sol.t_events[0].size:
            raise BlowUp(f"g exceeded 2*eta at r={math.exp(sol.t_events[0][0]):.6g}")
        raise Vanish(f"g underflowed at r={math.exp(sol.t_events[1][0]):.6g}")
    if sol.status != 0:
        raise StepFailure(sol.message)
    return sol


def _curve_from_states(e, s, L, P, eta):
    r = np.exp(s)
    g = np.exp(L / e.m)
    dg = P * g / (e.m * r)
    return r, g, dg


@dataclass
class _Continuation:
    seed: LocalSeed
    ppd: int
    r_lo: float
    s_end: float
    y_end: list
    radii: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    opts: ProfileOptions = field(default_factory=ProfileOptions)

    def curve(self) -> ProfileCurve:
        return ProfileCurve("G", self.radii, self.values, self.derivs, self.seed.exps,
                            eta=self.seed.eta, origin_constant=self.seed.eta)

    def extend(self, r_max: float) -> None:
        e = self.seed.exps
        s1 = math.log(r_max)
        if s1 <= self.s_end:
            return
        grid = log_grid(math.exp(self.s_end), r_max, self.ppd)
        grid = grid[grid > self.radii[-1] * (1 + 1e-12)]
        s_eval = np.log(grid)
        s_eval = s_eval[(s_eval > self.s_end) & (s_eval <= s1)]
        on_grid = s_eval.size > 0 and abs(s_eval[-1] - s1) < 1e-12
        if not on_grid:
            s_eval = np.append(s_eval, s1)
        sol = _integrate(e, self.y_end, self.s_end, s1, s_eval, self.seed.eta, self.opts)
        self.s_end = s1
        self.y_end = [float(sol.y[0, -1]), float(sol.y[1, -1])]
        keep = slice(None) if on_grid else slice(None, -1)
        r, g, dg = _curve_from_states(e, sol.t[keep], sol.y[0, keep], sol.y[1, keep],
                                      self.seed.eta)
        self.radii = np.concatenate([self.radii, r])
        self.values = np.concatenate([self.values, g])
        self.derivs = np.concatenate([self.derivs, dg])


def _start_continuation(seed, opts, r_lo):
    e = seed.exps
    eps = seed.eps
    inner = log_grid(r_lo, eps, opts.points_per_decade)
    g_in, dg_in = seed.g(inner), seed.dg(inner)
    g_eps = float(seed.g(eps))
    P0 = e.m * eps * float(seed.dg(eps)) / g_eps
    y0 = [e.m * math.log(g_eps), P0]
    return _Continuation(seed=seed, ppd=opts.points_per_decade, r_lo=r_lo,
                         s_end=math.log(eps), y_end=y0, radii=inner, values=g_in,
                         derivs=dg_in, opts=opts)


def continue_g(seed: LocalSeed, e: ExponentSet | None = None, r_max: float = 1e6,
               points_per_decade: int = 256, *, r_min: float | None = None,
               rtol: float = 1e-12, atol: float = 1e-14,
               method: str = "Radau") -> ProfileCurve:
    """Carry the local solution from eps out to ``r_max``.

    The returned curve is sampled on the anchored log-uniform grid from
    ``r_min`` (default eps * 1e-6, filled from the local series) to r_max.

    Raises
    ------
    BlowUp, Vanish
        If g leaves (0, 2 eta); for the true solution this cannot happen.
    StepFailure
        If the integrator gives up.
    """
    if e is not None and e != seed.exps:
        raise ValueError("exponent set does not match the seed")
    if r_max < 10 * seed.eps:
        raise ValueError("r_max must exceed 10 * eps")
    opts = ProfileOptions(points_per_decade=points_per_decade, rtol=rtol, atol=atol,
                          method=method)
    r_lo = seed.eps * 1e-6 if r_min is None else r_min
    cont = _start_continuation(seed, opts, r_lo)
    cont.extend(r_max)
    return cont.curve()


# ----------------------------------------------------------------------------
# far constant

def _aitken(q0, q1, q2):
    d1 = q1 - q0
    d2 = q2 - q1
    den = d2 - d1
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(den != 0, q2 - d2 * d2 / den, q2)
        ratio = np.where(d1 != 0, d2 / d1, np.nan)
    return c, ratio


def plateau_extrapolate(radii, q, window_decades=1.0, at_end=True):
    """Aitken extrapolation of a sequence q(r) sampled on a log-uniform grid.

    Triples (r, r*rho, r*rho^2) with rho a quarter of the window are fitted
    exactly by c + b r^-sigma. Returns (c_end, spread, sigma, raw_spread)
    over the window at the large-r end (or small-r end when ``at_end`` is
    false).
    """
    radii = np.asarray(radii, dtype=float)
    q = np.asarray(q, dtype=float)
    if not at_end:
        radii, q = 1.0 / radii[::-1], q[::-1]
    lr = np.log10(radii)
    if lr[-1] - lr[0] < 2.0 * window_decades:
        raise NoPlateau(f"curve spans only {lr[-1] - lr[0]:.3g} decades")
    ppd = (radii.size - 1) / (lr[-1] - lr[0])
    d = max(int(round(ppd * window_decades / 4)), 1)
    start = int(np.searchsorted(lr, lr[-1] - window_decades - 1e-9))
    win = np.arange(start, radii.size)
    if win.size < 2 * d + 1:
        raise NoPlateau("too few samples in the plateau window")
    i0 = win[: win.size - 2 * d]
    c, ratio = _aitken(q[i0], q[i0 + d], q[i0 + 2 * d])
    if not np.all(np.isfinite(c)):
        raise NoPlateau("non-finite extrapolation")
    c_end = float(c[-1])
    spread = float(np.max(c) - np.min(c))
    rho = 10 ** (d / ppd)
    r_last = ratio[-1]
    sigma = float(-math.log(r_last) / math.log(rho)) if r_last > 0 else float("nan")
    raw_spread = float(np.max(q[win]) - np.min(q[win]))
    return c_end, spread, sigma, raw_spread


def extract_far_constant(curve: ProfileCurve, tol: float = 1e-3,
                         window_decades: float = 1.0) -> FarConstant:
    """Plateau value A of r^kappa g(r) as r -> infinity.

    The estimate is the Aitken extrapolation over the last decade; its
    uncertainty is the spread of the extrapolants across that decade.

    Raises
    ------
    NoPlateau
        When the tail is not monotone, too short, or either the uncertainty
        or the remaining correction |q(r_max) - A| / A exceeds ``tol``.
    """
    if curve.variable != "G":
        raise ValueError("extract_far_constant expects a G curve")
    e = curve.exps
    r = curve.radii
    kappa = e.kappa
    q = np.exp(kappa * np.log(r) + np.log(curve.values))
    c, spread, sigma, raw_spread = plateau_extrapolate(r, q, window_decades)
    tail = r >= r[-1] / 10 ** window_decades
    qt = q[tail]
    if np.any(np.diff(qt) < -MONOTONE_SLACK * qt[1:]):
        raise NoPlateau("r^kappa g is not increasing on the tail")
    correction = abs(c - q[-1]) / abs(c)
    uncertainty = spread
    # decay-rate bound r^p q'/q -> 0 with p = 1 + (a - (1-m) kappa) / 2
    p0 = 1.0 + 0.5 * (e.a - (1.0 - e.m) * kappa)
    rate = r[tail] ** (p0 - 1.0) * (kappa + curve.log_slope[tail])
    result = FarConstant(A=c, uncertainty=uncertainty, correction=correction,
                         sigma=sigma, rate_max=float(np.max(np.abs(rate))),
                         rate_decreasing=bool(abs(rate[-1]) < abs(rate[0])),
                         raw_spread=raw_spread / c)
    # the fitted tail exponent must match the linearized decay a - (1-m) kappa
    sigma_th = e.a - (1.0 - e.m) * kappa
    if not abs(sigma / sigma_th - 1.0) <= SIGMA_REL_TOL:
        raise NoPlateau(f"tail exponent {sigma:.4g} inconsistent with {sigma_th:.4g} "
                        f"at r={r[-1]:.3g}; extend r_max")
    if uncertainty / c > tol or correction > tol:
        raise NoPlateau(f"plateau not reached by r={r[-1]:.3g}: correction={correction:.3g}, "
                        f"uncertainty={uncertainty / c:.3g}, tol={tol:.3g}")
    return result


# ----------------------------------------------------------------------------
# inversion

def invert(curve: ProfileCurve) -> ProfileCurve:
    """Apply v(r) -> r^-(n-2)/m v(1/r); maps G to F and F to G."""
    e = curve.exps
    fp = e.far_power
    rho = curve.radii[::-1]
    r = 1.0 / rho
    v = curve.values[::-1]
    dv = curve.derivs[::-1]
    log_r = np.log(r)
    out = np.exp(-fp * log_r + np.log(v))
    # d/dr [r^-fp v(1/r)] = -fp out / r - r^(-fp-2) v'(1/r)
    out_d = -fp * out / r - np.sign(dv) * np.exp(np.log(np.abs(dv) + 0.0) - (fp + 2.0) * log_r)
    out_d = np.where(dv == 0, -fp * out / r, out_d)
    new_var = "F" if curve.variable == "G" else "G"
    return ProfileCurve(new_var, r, out, out_d, e,
                        eta=curve.far_constant if new_var == "G" else None,
                        origin_constant=curve.far_constant,
                        far_constant=curve.origin_constant)


def invert_to_f(curve: ProfileCurve) -> ProfileCurve:
    if curve.variable != "G":
        raise ValueError("invert_to_f expects a G curve")
    return invert(curve)


# ----------------------------------------------------------------------------
# solved profile

@dataclass(frozen=True, eq=False)
class ReferenceRun:
    """One pipeline run with g(0) = eta; immutable and shareable."""

    exps: ExponentSet
    opts: ProfileOptions
    seed: LocalSeed
    g: ProfileCurve
    f: ProfileCurve
    far: FarConstant
    r_max: float


def _run_pipeline(e: ExponentSet, opts: ProfileOptions) -> ReferenceRun:
    seed = local_fixed_point(opts.eta, e, opts.eps, opts.picard_tol, opts.max_iter,
                             eps_start=opts.eps_start, shrinks=opts.eps_shrinks,
                             degree=opts.cheb_degree)
    r_lo = seed.eps * opts.r_min_factor
    r_max = opts.r_max if opts.r_max is not None else 1e6 * seed.eps
    cont = _start_continuation(seed, opts, r_lo)
    while True:
        cont.extend(r_max)
        try:
            far = extract_far_constant(cont.curve(), opts.plateau_tol)
            break
        except NoPlateau:
            if opts.r_max is not None or r_max * 10 > opts.r_max_cap * (1 + 1e-9):
                raise
            r_max *= 10
    g = replace(cont.curve(), far_constant=far.A)
    f = invert(g)
    log.info("profile n=%d m=%g gamma=%g eta=%g: A=%.12g (+-%.2g) r_max=%.3g eps=%.3g",
             e.n, e.m, e.gamma, opts.eta, far.A, far.uncertainty, r_max, seed.eps)
    return ReferenceRun(exps=e, opts=opts, seed=seed, g=g, f=f, far=far, r_max=r_max)


@functools.lru_cache(maxsize=32)
def reference_run(e: ExponentSet, opts: ProfileOptions = ProfileOptions()) -> ReferenceRun:
    """Cached pipeline run for (e, opts)."""
    return _run_pipeline(e, opts)


@dataclass(frozen=True, eq=False)
class SelfSimilarProfile:
    """f_lambda(x) = lambda^(2/(1-m)) f_ref(lambda x) with origin constant A.

    ``A0`` and ``D1`` are the origin and far constants of the reference run
    (``D1`` = eta, equal to 1 for the default normalization).
    """

    f1: ProfileCurve
    A0: float
    D1: float
    lam: float
    A: float
    D_A: float
    run: ReferenceRun

    @property
    def exps(self) -> ExponentSet:
        return self.f1.exps

    @functools.cached_property
    def _spline(self):
        x = np.log(self.f1.radii)
        return CubicHermiteSpline(x, np.log(self.f1.values), self.f1.log_slope)

    @property
    def switch_radii(self) -> tuple[float, float]:
        """Reference-run radii outside which closed-form tails are used."""
        return float(self.f1.radii[0]), float(self.f1.radii[-1])

    def _ref_log_and_slope(self, x):
        """log f_ref(x) and x f_ref'(x) / f_ref(x)."""
        e = self.exps
        x = np.asarray(x, dtype=float)
        lx = np.log(x)
        lo, hi = self.switch_radii
        out = np.empty_like(lx)
        slope = np.empty_like(lx)
        mid = (x >= lo) & (x <= hi)
        out[mid] = self._spline(lx[mid])
        slope[mid] = self._spline(lx[mid], 1)
        small = x < lo
        if np.any(small):
            # origin tail: r^gamma f = A0 + (q_lo - A0) (r / lo)^sigma, continuous at lo
            q_lo = self.f1.values[0] * lo ** e.gamma
            sig = e.a - (1.0 - e.m) * e.kappa
            corr = (q_lo - self.A0) * (x[small] / lo) ** sig
            q = self.A0 + corr
            out[small] = np.log(q) - e.gamma * lx[small]
            slope[small] = -e.gamma + sig * corr / q
        big = x > hi
        if np.any(big):
            # far tail from the local series: f(r) = r^-(n-2)/m g(1/r)
            rho = 1.0 / x[big]
            seed = self.run.seed
            gv = seed.g(rho)
            out[big] = np.log(gv) - e.far_power * lx[big]
            slope[big] = -e.far_power - rho * seed.dg(rho) / gv
        return out, slope

    def f(self, x):
        """f_lambda at radius x (scalar or array)."""
        s = self.exps.scaling_power
        lf, _ = self._ref_log_and_slope(self.lam * np.asarray(x, dtype=float))
        res = self.lam ** s * np.exp(lf)
        return float(res) if np.ndim(res) == 0 else res

    def df(self, x):
        """d f_lambda / dr at radius x."""
        x = np.asarray(x, dtype=float)
        s = self.exps.scaling_power
        lf, slope = self._ref_log_and_slope(self.lam * x)
        res = self.lam ** s * np.exp(lf) * slope / x
        return float(res) if np.ndim(res) == 0 else res

    def log_slope(self, x):
        """x f_lambda'(x) / f_lambda(x)."""
        _, slope = self._ref_log_and_slope(self.lam * np.asarray(x, dtype=float))
        return float(slope) if np.ndim(slope) == 0 else slope

    def rescaled(self, A: float) -> "SelfSimilarProfile":
        return profile_from_run(self.run, A)

    def curve(self) -> ProfileCurve:
        """f_lambda sampled on the reference grid mapped by 1/lambda."""
        c = self.f1.scaled(self.lam, self.exps.scaling_power)
        return replace(c, origin_constant=self.A, far_constant=self.D_A)


def profile_from_run(run: ReferenceRun, A_target: float) -> SelfSimilarProfile:
    e = run.exps
    if not A_target > 0:
        raise ValueError(f"A_target must be positive, got {A_target}")
    A0 = run.far.A
    D1 = run.seed.eta
    s = e.scaling_power
    lam = (A_target / A0) ** (1.0 / (s - e.gamma))
    D_A = D1 * (A_target / A0) ** ((s - e.far_power) / (s - e.gamma))
    return SelfSimilarProfile(f1=run.f, A0=A0, D1=D1, lam=lam, A=A_target, D_A=D_A, run=run)


def solve_profile(A_target: float, e: ExponentSet,
                  opts: ProfileOptions | None = None) -> SelfSimilarProfile:
    """Profile with origin constant ``A_target``.

    The g(0) = eta pipeline runs once per (e, opts) and is cached; the
    requested profile is its rescaling with
    lambda = (A_target / A0)^(1 / (2/(1-m) - gamma)).
    """
    run = reference_run(e, opts if opts is not None else ProfileOptions())
    return profile_from_run(run, A_target)


# ----------------------------------------------------------------------------
# diagnostics

def _monotone_residual(v, increasing):
    dv = np.diff(v)
    scale = np.maximum(np.abs(v[1:]), np.abs(v[:-1]))
    bad = (-dv if increasing else dv) / scale
    i = int(np.argmax(bad))
    return float(bad[i]), i


def profile_diagnostics(p: SelfSimilarProfile, tol: float = 1e-3,
                        slack: float = MONOTONE_SLACK) -> DiagnosticsReport:
    """Check the limits and sign conditions that every profile must satisfy."""
    e = p.exps
    rep = DiagnosticsReport(f"profile n={e.n} m={e.m} gamma={e.gamma} A={p.A:.12g}")
    c = p.curve()
    r, f, df = c.radii, c.values, c.derivs

    # origin derivative plateau r^(gamma+1) f' -> -gamma A
    lo_seq = np.exp((e.gamma + 1.0) * np.log(r) + np.log(-df)) if np.all(df < 0) else None
    if lo_seq is None:
        rep.add("f_decreasing", False, float(np.max(df)), 0.0)
    else:
        try:
            c0, spread0, _, _ = plateau_extrapolate(r, -lo_seq, at_end=False)
            target = -e.gamma * p.A
            err = abs(c0 - target) / abs(target)
            rep.add("origin_derivative_plateau", err <= tol, err, tol,
                    detail=f"plateau={c0:.10g} expected={target:.10g}")
        except NoPlateau as exc:
            rep.add("origin_derivative_plateau", False, float("inf"), tol, detail=str(exc))
        far_seq = -np.exp((e.far_power + 1.0) * np.log(r) + np.log(-df))
        try:
            c1, _, _, _ = plateau_extrapolate(r, far_seq, at_end=True)
            target = -e.far_power * p.D_A
            err = abs(c1 - target) / abs(target)
            rep.add("far_derivative_plateau", err <= tol, err, tol,
                    detail=f"plateau={c1:.10g} expected={target:.10g}")
        except NoPlateau as exc:
            rep.add("far_derivative_plateau", False, float("inf"), tol, detail=str(exc))

    # sign of the radial Laplacian of f^m via monotonicity of the flux r^(n-1) (f^m)'
    flux = -np.exp((e.n - 1) * np.log(r) + np.log(e.m) + (e.m - 1.0) * np.log(f) + np.log(np.abs(df)))
    flux = np.where(df < 0, flux, -flux)
    worst, i = _monotone_residual(flux, increasing=False)
    rep.add("laplacian_fm_nonpositive", worst <= slack, worst, slack, where=r[i + 1])

    q = np.exp(e.gamma * np.log(r) + np.log(f))
    worst, i = _monotone_residual(q, increasing=False)
    rep.add("q_decreasing", worst <= slack, worst, slack, where=r[i + 1])

    g = p.run.g
    lw = 2.0 * np.log(g.radii) + 2.0 * e.k_tilde * np.log(g.values)
    worst, i = _monotone_residual(lw, increasing=True)
    rep.add("w1_increasing", worst <= slack, worst, slack, where=g.radii[i + 1])
    h1 = g.values + e.k_tilde * g.radii * g.derivs
    rep.add("h1_positive", bool(np.all(h1 > 0)), float(-np.min(h1 / g.values)), 0.0)
    rep.add("g_decreasing", bool(np.all(g.derivs < 0)), float(np.max(g.derivs)), 0.0)
    return rep


def curve_diagnostics(curve: ProfileCurve, slack: float = MONOTONE_SLACK) -> DiagnosticsReport:
    """Monotonicity checks on a bare curve (used for injected-fault tests)."""
    e = curve.exps
    rep = DiagnosticsReport(f"curve {curve.variable}")
    r, v = curve.radii, curve.values
    rep.add("positive", bool(np.all(v > 0)), float(-np.min(v)), 0.0)
    if curve.variable == "F":
        q = np.exp(e.gamma * np.log(r) + np.log(v))
        worst, i = _monotone_residual(q, increasing=False)
        rep.add("q_decreasing", worst <= slack, worst, slack, where=r[i + 1])
    else:
        lw = 2.0 * np.log(r) + 2.0 * e.k_tilde * np.log(v)
        worst, i = _monotone_residual(lw, increasing=True)
        rep.add("w1_increasing", worst <= slack, worst, slack, where=r[i + 1])
        worst, i = _monotone_residual(v, increasing=False)
        rep.add("g_decreasing", worst <= slack, worst, slack, where=r[i + 1])
    return rep


def comparison_constant(p1: SelfSimilarProfile, p2: SelfSimilarProfile, radii) -> tuple[float, bool]:
    """(inf f_l1 / f_l2, strict ordering) over ``radii`` for lambda1 > lambda2."""
    ratio = np.asarray(p1.f(radii)) / np.asarray(p2.f(radii))
    return float(np.min(ratio)), bool(np.all(ratio < 1.0))


def sandwich_constant(p: SelfSimilarProfile, radii) -> float:
    """Smallest C with f(r) <= C min(r^-gamma, r^-(n-2)/m) over ``radii``."""
    e = p.exps
    r = np.asarray(radii, dtype=float)
    env = np.minimum(r ** -e.gamma, r ** -e.far_power)
    return float(np.max(np.asarray(p.f(r)) / env))


# ----------------------------------------------------------------------------
# export

def export_profile(p: SelfSimilarProfile, path) -> None:
    """Write radius, f, df/dr columns with a key = value header block."""
    e = p.exps
    c = p.curve()
    o = p.run.opts
    header = {
        "library_version": __version__,
        "n": e.n, "m": e.m, "gamma": e.gamma, "rho1": e.rho1,
        "alpha": e.alpha, "beta": e.beta, "alpha_tilde": e.alpha_tilde,
        "beta_tilde": e.beta_tilde, "regime": e.regime.value,
        "eta": p.run.seed.eta, "A0": p.A0, "D1": p.D1, "lambda": p.lam, "A": p.A,
        "D_A": p.D_A, "A0_uncertainty": p.run.far.uncertainty, "eps": p.run.seed.eps,
        "r_max": p.run.r_max, "picard_tol": o.picard_tol, "rtol": o.rtol, "atol": o.atol,
        "method": o.method, "points_per_decade": o.points_per_decade,
        "plateau_tol": o.plateau_tol,
    }
    lines = [f"# {k} = {v!r}" if isinstance(v, float) else f"# {k} = {v}" for k, v in header.items()]
    lines.append("# columns = radius f df_dr")
    for r, v, d in zip(c.radii, c.values, c.derivs):
        lines.append(f"{float(r)!r} {float(v)!r} {float(d)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_profile_table(path) -> tuple[dict, np.ndarray]:
    """Read a file written by :func:`export_profile`: (header, Nx3 array)."""
    header = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                header[k.strip()] = v.strip()
            elif line.strip():
                rows.append([float(x) for x in line.split()])
    return header, np.array(rows)


def load_profile_curve(path) -> ProfileCurve:
    header, data = load_profile_table(path)
    e = derive_exponents(int(header["n"]), float(header["m"]), float(header["gamma"]),
                         float(header["rho1"]))
    return ProfileCurve("F", data[:, 0], data[:, 1], data[:, 2], e,
                        origin_constant=float(header["A"]), far_constant=float(header["D_A"]))
