"""Backstepping controller synthesis for stochastic Hamiltonian systems with jumps.

Provides the gain condition, the derived dissipation constants, the feedback
law, the coordinate transform and its metric, the comparison functions of the
moment bound, and the metric-equivalence eigenvalue bounds for constant
inertia.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, GainBoundError, UnsupportedOrderError
from .model import HamiltonianSystem, eval_eta, mass_derivative, solve_matrix


@dataclass(frozen=True)
class BacksteppingGains:
    """Validated design gains and every constant derived from them.

    Young exponent pairs satisfy (r1-1)(s1-1) = 1 and, for k > 2,
    (r2-1)(s2-1) = 1 with r2 = k/2 pairing the coordinate block.  For k = 2
    the second pair is not used (s2 is stored as inf) and eps2 is None.
    """

    k: float
    kappa1: float
    eps1: float
    eps2: float | None
    r1: float
    s1: float
    r2: float
    s2: float
    c1: float
    c2: float
    c3: float
    kappa: float
    lam: float


@dataclass(frozen=True)
class Controller:
    """State feedback v(q, p, u_hat), broadcast over leading axes."""

    law: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    gains: BacksteppingGains

    def __call__(self, q, p, uhat) -> np.ndarray:
        return self.law(q, p, uhat)


@dataclass(frozen=True)
class ComparisonFunctions:
    """The KL function beta and K-infinity function gamma of the moment bound.

    beta(y, t) = 2^(k/2-1) e^(-kappa t) y and gamma(y) = 2^(k/2-1) k c3 y / kappa.
    The factor 2 of the generic construction is dropped because the linear
    lower comparison function has an additive inverse.
    """

    kappa: float
    k: float
    c3: float

    def beta(self, y, t):
        return 2.0 ** (self.k / 2.0 - 1.0) * np.exp(-self.kappa * np.asarray(t)) * y

    def gamma(self, y):
        return self.gamma_coefficient() * np.asarray(y)

    def gamma_coefficient(self) -> float:
        return 2.0 ** (self.k / 2.0 - 1.0) * self.k * self.c3 / self.kappa


def _check_order(k: float) -> float:
    k = float(k)
    if k < 2.0:
        raise UnsupportedOrderError(f"moment order k={k} not supported; need k >= 2")
    return k


def gain_lower_bound(
    k: float,
    L1: float,
    L2: float,
    Lsigma: float,
    Lrho: float,
    lam: float,
    n: int,
    r: int,
    eps1: float,
    eps2: float | None = None,
) -> float:
    """Strict lower bound on the design gain kappa1.

    For k = 2 the diffusion term needs no Young split and the bound is
    L1 + max(L2,1) eps1^2/2 + min(n,r) Lsigma^2/2 + Lrho^2 lam.
    """
    k = _check_order(k)
    if eps1 <= 0.0:
        raise ContractError("eps1 must be positive")
    r1 = k / (k - 1.0)
    state_term = max(L2, 1.0) * eps1**r1 / r1
    jump_term = 2.0 ** (k - 1.0) * Lrho**k * lam / k
    if k == 2.0:
        trace_term = min(n, r) * Lsigma**2 / 2.0
    else:
        if eps2 is None or eps2 <= 0.0:
            raise ContractError("eps2 must be positive when k > 2")
        r2 = k / 2.0
        trace_term = min(n, r) * Lsigma**2 * eps2**r2 * (k - 1.0) / (2.0 * r2)
    return L1 + state_term + trace_term + jump_term


def derive_constants(
    k: float,
    kappa1: float,
    eps1: float,
    eps2: float | None,
    L1: float,
    L2: float,
    Lsigma: float,
    Lrho: float,
    lam: float,
    n: int,
    r: int,
) -> BacksteppingGains:
    """Validate kappa1 against the gain bound and derive (c1, c2, c3, kappa).

    c1 = kappa1 - (L1 + L2 eps1^r1/r1 + trace + jump), c2 = kappa1 - eps1^r1/r1,
    c3 = 1/(s1 eps1^s1), kappa = min(k c1, k c2).
    """
    k = _check_order(k)
    bound = gain_lower_bound(k, L1, L2, Lsigma, Lrho, lam, n, r, eps1, eps2)
    if not kappa1 > bound:
        raise GainBoundError(kappa1, bound)
    r1, s1 = k / (k - 1.0), k
    if k == 2.0:
        r2, s2 = 1.0, math.inf
        trace_term = min(n, r) * Lsigma**2 / 2.0
        eps2 = None
    else:
        r2, s2 = k / 2.0, k / (k - 2.0)
        trace_term = min(n, r) * Lsigma**2 * eps2**r2 * (k - 1.0) / (2.0 * r2)
    c1 = kappa1 - (L1 + L2 * eps1**r1 / r1 + trace_term + 2.0 ** (k - 1.0) * Lrho**k * lam / k)
    c2 = kappa1 - eps1**r1 / r1
    c3 = 1.0 / (s1 * eps1**s1)
    if not (c1 > 0.0 and c2 > 0.0):
        raise GainBoundError(kappa1, bound)
    return BacksteppingGains(
        k=k, kappa1=float(kappa1), eps1=float(eps1), eps2=eps2,
        r1=r1, s1=s1, r2=r2, s2=s2,
        c1=c1, c2=c2, c3=c3, kappa=min(k * c1, k * c2), lam=float(lam),
    )


def gains_for_system(
    sys: HamiltonianSystem, k: float, kappa1: float, eps1: float, eps2: float | None = None
) -> BacksteppingGains:
    """derive_constants with the constants, rate, and dimensions read off a system."""
    c = sys.constants
    return derive_constants(
        k, kappa1, eps1, eps2,
        c.L1, c.L2, c.Lsigma, c.Lrho,
        sys.total_rate, sys.dof, sys.brownian_dim,
    )


def feedback_coefficient(sys: HamiltonianSystem, gains: BacksteppingGains) -> float:
    """Coefficient multiplying (p + kappa1 M q) in the synthesized law."""
    k, lam = gains.k, gains.lam
    c = sys.constants
    coeff = 2.0 * gains.kappa1 + (2.0 ** (k - 1.0) - 1.0) * lam / k
    coeff += c.L2 / (gains.s1 * gains.eps1**gains.s1)
    if k > 2.0:
        coeff += (
            min(sys.dof, sys.brownian_dim) * c.Lsigma**2 * (k - 1.0)
            / (2.0 * gains.s2 * gains.eps2**gains.s2)
        )
    return coeff


def synthesize(sys: HamiltonianSystem, gains: BacksteppingGains) -> Controller:
    """Build the state feedback rendering the closed loop incrementally stable.

    v = G^-1(q) [ -eta(q,p) - kappa1 (dM/dt) q + kappa1^2 M q
                  - coeff (p + kappa1 M q) + u_hat ]

    where dM/dt is the directional derivative of the inertia matrix along the
    flow and coeff comes from feedback_coefficient.  This is the version under
    which the closed-loop generator inequality closes.
    """
    if abs(gains.lam - sys.total_rate) > 1e-12 * (1.0 + sys.total_rate):
        raise ContractError(
            f"gains were derived for total rate {gains.lam}, system has {sys.total_rate}"
        )
    kappa1 = gains.kappa1
    coeff = feedback_coefficient(sys, gains)

    def law(q, p, uhat):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        M = sys.mass(q)
        Mq = np.einsum("...ij,...j->...i", M, q)
        dMq = np.einsum("...ij,...j->...i", mass_derivative(sys, q, p), q)
        bracket = (
            -eval_eta(sys, q, p)
            - kappa1 * dMq
            + kappa1**2 * Mq
            - coeff * (p + kappa1 * Mq)
            + uhat
        )
        return solve_matrix(sys.input_matrix(q), bracket)

    return Controller(law=law, gains=gains)


def transform(sys: HamiltonianSystem, gains: BacksteppingGains, x: np.ndarray) -> np.ndarray:
    """Coordinate change z = psi(x) = [q; p + kappa1 M(q) q]."""
    x = np.asarray(x, dtype=float)
    n = sys.dof
    q, p = x[..., :n], x[..., n:]
    Mq = np.einsum("...ij,...j->...i", sys.mass(q), q)
    return np.concatenate([q, p + gains.kappa1 * Mq], axis=-1)


def inverse_transform(sys: HamiltonianSystem, gains: BacksteppingGains, z: np.ndarray) -> np.ndarray:
    """Inverse of the coordinate change: x = [z1; z2 - kappa1 M(z1) z1]."""
    z = np.asarray(z, dtype=float)
    n = sys.dof
    z1, z2 = z[..., :n], z[..., n:]
    Mq = np.einsum("...ij,...j->...i", sys.mass(z1), z1)
    return np.concatenate([z1, z2 - gains.kappa1 * Mq], axis=-1)


def metric(sys: HamiltonianSystem, gains: BacksteppingGains, x, x_prime) -> np.ndarray:
    """The incremental metric d(x, x') = |psi(x) - psi(x')|."""
    dz = transform(sys, gains, x) - transform(sys, gains, x_prime)
    return np.linalg.norm(dz, axis=-1)


def comparison_functions(gains: BacksteppingGains) -> ComparisonFunctions:
    """Comparison functions of the k-th moment bound for validated gains."""
    return ComparisonFunctions(kappa=gains.kappa, k=gains.k, c3=gains.c3)


def metric_equivalence_bounds(M_const: np.ndarray, kappa1: float, k: float) -> tuple[float, float]:
    """Eigenvalue sandwich between the transformed metric and the Euclidean one.

    For constant inertia M the transform is linear with matrix
    A = [[I, 0], [kappa1 M, I]]; the k-th power of the metric is bounded by
    lambda_min(A'A)^(k/2) and lambda_max(A'A)^(k/2) times |x - x'|^k.
    """
    k = _check_order(k)
    M = np.asarray(M_const, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError("M_const must be a square matrix")
    n = M.shape[0]
    A = np.block([
        [np.eye(n), np.zeros((n, n))],
        [kappa1 * M, np.eye(n)],
    ])
    eigs = np.linalg.eigvalsh(A.T @ A)
    return float(eigs.min() ** (k / 2.0)), float(eigs.max() ** (k / 2.0))
