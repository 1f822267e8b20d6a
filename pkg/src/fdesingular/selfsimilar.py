"""Exact and semi-exact solutions of u_t = Δu^m used as data and as oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError
from .exponents import ExponentSet
from .profile import SelfSimilarProfile


def _check_positive(name, v):
    if np.any(np.asarray(v) <= 0):
        raise DomainError(f"{name} must be positive")


def _ret(v):
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True, eq=False)
class SelfSimilarSolution:
    """U_lambda(x, t) = t^-alpha f_lambda(t^-beta x)."""

    profile: SelfSimilarProfile

    @property
    def exps(self) -> ExponentSet:
        return self.profile.exps

    @property
    def lam(self) -> float:
        return self.profile.lam

    @property
    def trace_constant(self) -> float:
        """Coefficient of |x|^-gamma in the initial trace; equals A."""
        return self.profile.A

    def __call__(self, x, t):
        return eval_U(self, x, t)

    def rate(self, x, t):
        """u_t / u at (x, t), from the profile's logarithmic slope."""
        e = self.exps
        x = np.asarray(x, dtype=float)
        y = t ** (-e.beta) * x
        return _ret((-e.alpha - e.beta * self.profile.log_slope(y)) / t)


def eval_U(sol: SelfSimilarSolution, x_radius, t: float):
    """Value of U_lambda at radius ``x_radius`` and time ``t``.

    Raises
    ------
    DomainError
        When x_radius <= 0 or t <= 0.
    """
    _check_positive("x_radius", x_radius)
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    e = sol.exps
    x = np.asarray(x_radius, dtype=float)
    return _ret(t ** (-e.alpha) * np.asarray(sol.profile.f(t ** (-e.beta) * x)))


@dataclass(frozen=True)
class BarenblattSolution:
    """B_k(x, t) = (C* (T - t) / (|x|^2 + k (T - t)^(2 sigma*)))^(1/(1-m))."""

    T: float
    k: float
    n: int
    m: float

    def __post_init__(self):
        if not self.T > 0:
            raise RangeError(f"T must be positive, got {self.T}")
        if self.k < 0:
            raise RangeError(f"k must be nonnegative, got {self.k}")
        if not 0 < self.m < (self.n - 2) / self.n:
            raise RangeError(f"m must lie in (0, (n-2)/n), got {self.m}")

    @property
    def Cstar(self) -> float:
        return 2.0 * self.m * (self.n - 2 - self.n * self.m) / (1.0 - self.m)

    @property
    def sigmastar(self) -> float:
        return -1.0 / (self.n - 2 - self.n * self.m)

    def __call__(self, x, t):
        return eval_barenblatt(self, x, t)


def eval_barenblatt(b: BarenblattSolution, x_radius, t: float):
    """Closed-form value of B_k for 0 <= t < T."""
    if not 0 <= t < b.T:
        raise DomainError(f"t={t} outside [0, T={b.T})")
    x = np.asarray(x_radius, dtype=float)
    if np.any(x < 0) or (b.k == 0 and np.any(x == 0)):
        raise DomainError("x_radius must be positive (nonnegative when k > 0)")
    tau = b.T - t
    val = (b.Cstar * tau / (x * x + b.k * tau ** (2.0 * b.sigmastar))) ** (1.0 / (1.0 - b.m))
    return _ret(val)


@dataclass(frozen=True)
class StaticSingular:
    """The stationary solution A |x|^-(n-2)/m."""

    A: float
    n: int
    m: float

    def __post_init__(self):
        if not self.A > 0:
            raise RangeError(f"A must be positive, got {self.A}")

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        _check_positive("x_radius", x)
        return _ret(self.A * x ** (-(self.n - 2) / self.m))


def residual_heat_operator(sampler, x_radius: float, t: float, h_space: float,
                           h_time: float, n: int, m: float) -> float:
    """Centered-difference estimate of u_t - Δu^m for a radial sampler u(r, t).

    The radial Laplacian is (u^m)'' + (n-1)/r (u^m)', both derivatives taken
    by second-order central differences with step ``h_space``.
    """
    r, h = x_radius, h_space
    if not (r > h > 0 and h_time > 0):
        raise DomainError("need x_radius > h_space > 0 and h_time > 0")
    ut = (sampler(r, t + h_time) - sampler(r, t - h_time)) / (2.0 * h_time)
    w_m, w_0, w_p = (sampler(rr, t) ** m for rr in (r - h, r, r + h))
    lap = (w_p - 2.0 * w_0 + w_m) / (h * h) + (n - 1) / r * (w_p - w_m) / (2.0 * h)
    return float(ut - lap)


def barenblatt_time_derivative(b: BarenblattSolution, x_radius, t):
    """Exact u_t of B_k, used as the boundary rate in simulations."""
    x = np.asarray(x_radius, dtype=float)
    tau = b.T - t
    s2 = 2.0 * b.sigmastar
    den = x * x + b.k * tau ** s2
    # d/dt log B = -(1/(1-m)) [1/tau - k s2 tau^(s2-1) / den]
    dlog = -(1.0 / (1.0 - b.m)) * (1.0 / tau - b.k * s2 * tau ** (s2 - 1.0) / den)
    return _ret(dlog * np.asarray(eval_barenblatt(b, x, t)))


def initial_trace(sol: SelfSimilarSolution, x_radius):
    """lambda^(2/(1-m) - gamma) A0 |x|^-gamma, the t -> 0 limit of U_lambda."""
    e = sol.exps
    x = np.asarray(x_radius, dtype=float)
    p = sol.profile
    return _ret(p.lam ** (e.scaling_power - e.gamma) * p.A0 * x ** (-e.gamma))

