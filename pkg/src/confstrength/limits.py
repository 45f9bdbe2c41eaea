"""Closed-form high-dimensional limits, used as independent test oracles.

These functions evaluate the limiting expressions by direct quadrature or
exact sums over a limiting spectral measure. They deliberately share no code
with the estimators, so agreement between the two paths is evidence rather
than tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import Degenerate, InvalidInput

__all__ = [
    "LimitSpectrum",
    "mp_moment",
    "f_pop_limit",
    "f_plugin_limit",
    "plugin_consistency_condition",
    "mixed_trace_limits",
]


def _mp_quad(c: float, g) -> float:
    """Integral of g against the MP(c) density.

    The substitution lambda = c- + (c+ - c-) sin^2(u) absorbs the square-root
    edge singularities, leaving a smooth integrand on [0, pi/2].
    """
    s = math.sqrt(c)
    lo, hi = (1.0 - s) ** 2, (1.0 + s) ** 2
    width = hi - lo

    def integrand(u):
        su, cu = math.sin(u), math.cos(u)
        lam = lo + width * su * su
        # density * dlambda/du = width * su * cu / (2 pi c lam) * 2 width su cu
        w = (width * su * cu) ** 2 / (math.pi * c * lam)
        return g(lam) * w

    val, _ = integrate.quad(integrand, 0.0, 0.5 * math.pi, epsabs=0, epsrel=1e-10)
    return val


@dataclass(frozen=True)
class LimitSpectrum:
    """A limiting spectral measure: MP(c) or an explicit weighted atom list."""

    c: float | None = None
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if (self.c is None) == (self.atoms is None):
            raise InvalidInput("specify exactly one of c or atoms")
        if self.c is not None and not (0.0 < self.c < 1.0):
            raise InvalidInput("c must lie in (0, 1)")
        if self.atoms is not None:
            atoms = np.asarray(self.atoms, dtype=float)
            if self.weights is None:
                w = np.full(len(atoms), 1.0 / len(atoms))
            else:
                w = np.asarray(self.weights, dtype=float)
            if abs(w.sum() - 1.0) > 1e-12:
                raise InvalidInput("weights must sum to 1")
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "weights", w)

    @classmethod
    def marchenko_pastur(cls, c: float) -> "LimitSpectrum":
        return cls(c=c)

    @classmethod
    def from_eigenvalues(cls, eigenvalues, weights=None) -> "LimitSpectrum":
        return cls(atoms=np.asarray(eigenvalues, dtype=float), weights=weights)

    def expect(self, g) -> float:
        """E[g(lambda)] under the measure."""
        if self.c is not None:
            return _mp_quad(self.c, g)
        return float(np.sum(self.weights * g(self.atoms)))

    def moment(self, theta: float, k: int) -> float:
        """E[1/(lambda + theta)^k]."""
        return self.expect(lambda lam: 1.0 / (lam + theta) ** k)

    def resolvent_variance(self, theta: float) -> float:
        return self.moment(theta, 2) - self.moment(theta, 1) ** 2


def mp_moment(c: float, theta: float, k: int = 1) -> float:
    """E[1/(lambda + theta)^k] under MP(c) by adaptive quadrature."""
    if not (0.0 < c < 1.0):
        raise InvalidInput("c must lie in (0, 1)")
    if k not in (1, 2):
        raise InvalidInput("k must be 1 or 2")
    return LimitSpectrum.marchenko_pastur(c).moment(theta, k)


def f_pop_limit(theta: float, theta_star: float, nu: LimitSpectrum) -> float:
    """Limiting population derivative:
    (theta - theta*) Var[1/(lam+theta)] / E[(lam+theta*)/(lam+theta)].
    """
    var = nu.resolvent_variance(theta)
    scale = nu.expect(lambda lam: (lam + theta_star) / (lam + theta))
    return (theta - theta_star) * var / scale


def f_plugin_limit(
    theta: float,
    theta_star: float,
    gamma: float,
    gamma_tilde: float,
    mu: LimitSpectrum,
) -> float:
    """Limiting plug-in derivative over the limiting sample spectrum mu."""
    m = mu.moment(theta, 1)
    M = mu.moment(theta, 2)
    spread = M - m * m
    if abs(spread) < 1e-14:
        raise Degenerate("degenerate sample spectrum")
    bracket = (
        theta
        - (1.0 + gamma * gamma_tilde) * theta_star
        + gamma * theta_star * (1.0 - theta * m) * (1.0 + M / spread)
    )
    h_den = (
        1.0
        - theta * m
        + (1.0 - 2.0 * gamma + gamma * gamma_tilde) * theta_star * m
        + gamma * theta * theta_star * m * m
    )
    if abs(h_den) < 1e-12:
        raise Degenerate("vanishing normalization in h(theta)")
    return bracket * spread / h_den


def plugin_consistency_condition(
    theta_star: float, gamma_tilde: float, mu: LimitSpectrum
) -> float:
    """gamma_tilde minus the value it would need for the plug-in root to sit
    exactly at theta*; zero means the plug-in estimator is (coincidentally)
    consistent.
    """
    m = mu.moment(theta_star, 1)
    M = mu.moment(theta_star, 2)
    spread = M - m * m
    if abs(spread) < 1e-14:
        raise Degenerate("degenerate sample spectrum")
    rhs = (1.0 - theta_star * m) * (1.0 + M / spread)
    return gamma_tilde - rhs


def mixed_trace_limits(
    theta: float, gamma: float, mu: LimitSpectrum
) -> tuple[float, float]:
    """Limits of (1/d)Tr[(cov+theta)^-k cov Sigma^+] for k = 1, 2."""
    m = mu.moment(theta, 1)
    M = mu.moment(theta, 2)
    first = gamma * theta * m * m + (1.0 - gamma) * m
    second = -gamma * m * m + 2.0 * gamma * theta * m * M + (1.0 - gamma) * M
    return first, second
