"""Exponent algebra for singular self-similar solutions of u_t = Δu^m.

Every other module consumes a validated :class:`ExponentSet`; nothing else
recomputes these quantities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import RangeError

DEFAULT_MARGIN = 1e-10


class Regime(enum.Enum):
    """Regularity of the inverted profile g at r = 0."""

    SMOOTH_ORIGIN = "SmoothOrigin"      # 0 < m < (n-2)/(n+1): g'(0) = 0
    HOELDER_ORIGIN = "HoelderOrigin"    # (n-2)/(n+1) <= m < (n-2)/n


@dataclass(frozen=True)
class ExponentSet:
    """All derived exponents for one admissible triple (n, m, gamma).

    ``alpha``, ``beta`` are the self-similar exponents in
    U(x, t) = t^-alpha f(t^-beta x); the tilde pair belongs to the inverted
    profile g(r) = r^-(n-2)/m f(1/r).
    """

    n: int
    m: float
    gamma: float
    rho1: float
    beta: float
    alpha: float
    alpha_tilde: float
    beta_tilde: float
    mu1: float
    mu2: float
    delta0: float
    delta1: float
    k_tilde: float
    k: float
    regime: Regime

    @property
    def a(self) -> float:
        """(n-2-nm)/m, the power of r in the inverted equation's lower-order coefficient."""
        return (self.n - 2 - self.n * self.m) / self.m

    @property
    def far_power(self) -> float:
        """(n-2)/m, decay power of f at infinity."""
        return (self.n - 2) / self.m

    @property
    def kappa(self) -> float:
        """alpha_tilde / beta_tilde = (n-2)/m - gamma, decay power of g at infinity."""
        return self.alpha_tilde / self.beta_tilde

    @property
    def scaling_power(self) -> float:
        """2/(1-m), the amplitude power in f_lambda(x) = lambda^(2/(1-m)) f_1(lambda x)."""
        return 2.0 / (1.0 - self.m)

    @property
    def zeta_factor(self) -> float:
        """zeta / eta^(2-m) = alpha_tilde / (n-2-2m)."""
        return self.alpha_tilde / (self.n - 2 - 2 * self.m)


def _require(ok: bool, message: str) -> None:
    if not ok:
        raise RangeError(message)


def derive_exponents(n: int, m: float, gamma: float, rho1: float = 1.0,
                     margin: float = DEFAULT_MARGIN) -> ExponentSet:
    """Validate (n, m, gamma) and derive every exponent.

    Parameters
    ----------
    n : int
        Space dimension, n >= 3.
    m : float
        Diffusion exponent, 0 < m < (n-2)/n.
    gamma : float
        Singularity exponent alpha/beta, 2/(1-m) < gamma < (n-2)/m.
    rho1 : float
        Right-hand side of (m-1)alpha + 2beta = rho1. Dynamics use 1.
    margin : float
        Strict inequalities are checked with this relative margin so that
        parameters numerically on the boundary are rejected.

    Raises
    ------
    RangeError
        Naming the violated inequality.
    """
    if isinstance(n, bool) or int(n) != n:
        raise RangeError(f"n must be an integer, got {n!r}")
    n = int(n)
    m = float(m)
    gamma = float(gamma)
    rho1 = float(rho1)
    _require(n >= 3, f"n >= 3 violated: n={n}")
    _require(math.isfinite(m) and math.isfinite(gamma) and math.isfinite(rho1),
             "parameters must be finite")
    m_crit = (n - 2) / n
    _require(m > margin, f"0 < m violated: m={m}")
    _require(m < m_crit * (1 - margin), f"m < (n-2)/n = {m_crit} violated: m={m}")
    g_lo = 2.0 / (1.0 - m)
    g_hi = (n - 2) / m
    _require(gamma > g_lo * (1 + margin),
             f"gamma > 2/(1-m) = {g_lo} violated: gamma={gamma}")
    _require(gamma < g_hi * (1 - margin),
             f"gamma < (n-2)/m = {g_hi} violated: gamma={gamma}")
    _require(rho1 > 0, f"rho1 > 0 violated: rho1={rho1}")

    beta = rho1 / (2.0 - gamma * (1.0 - m))
    alpha = beta * gamma
    beta_t = -beta
    alpha_t = alpha - (n - 2) / m * beta
    mu1 = max(0.0, n - gamma)
    mu2 = n - 2 - m * gamma
    delta1 = 1.0 - (n - 2 - n * m) / m
    delta0 = (1.0 - delta1) / 2.0
    regime = Regime.HOELDER_ORIGIN if m >= (n - 2) / (n + 1) else Regime.SMOOTH_ORIGIN
    return ExponentSet(n=n, m=m, gamma=gamma, rho1=rho1, beta=beta, alpha=alpha,
                       alpha_tilde=alpha_t, beta_tilde=beta_t, mu1=mu1, mu2=mu2,
                       delta0=delta0, delta1=delta1, k_tilde=beta_t / alpha_t,
                       k=beta / alpha, regime=regime)


def validate_asymptotics_mode(e: ExponentSet) -> bool:
    """True iff gamma < n, the range where the rescaled flow converges."""
    return e.gamma < e.n


def lambda_for_A(A: float, e: ExponentSet, A0: float) -> float:
    """Scale factor lambda with f_lambda attaining origin constant ``A``.

    ``A0`` is the origin constant of the reference (lambda = 1) profile.
    """
    if not (A > 0 and A0 > 0):
        raise RangeError(f"A and A0 must be positive, got A={A}, A0={A0}")
    return (A / A0) ** (1.0 / (e.scaling_power - e.gamma))
