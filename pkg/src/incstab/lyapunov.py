"""Incremental Lyapunov function and exact generator evaluation.

The candidate function on transformed state pairs is
``V(z, z') = (|z1 - z1'|^k + |z2 - z2'|^k) / k``.  Its infinitesimal generator
along the synchronously-coupled closed-loop pair is evaluated exactly
(analytic derivatives of V, actual controller in the loop) and compared
against the dissipation right-hand side ``-kappa V + c3 |du|^k``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backstepping import Controller, inverse_transform, transform
from .errors import ContractError, DomainError
from .model import HamiltonianSystem, ValidityBox, eval_eta, mass_derivative, solve_matrix


@dataclass(frozen=True)
class GeneratorBreakdown:
    """Generator value split into drift, trace, and jump parts plus the bound.

    ``margin = rhs_bound - total``; the dissipation inequality holds at a
    point when the margin is nonnegative up to roundoff.  Fields are scalars
    for single pairs and arrays for batched evaluation.
    """

    drift_term: np.ndarray
    trace_term: np.ndarray
    jump_term: np.ndarray
    total: np.ndarray
    rhs_bound: np.ndarray
    margin: np.ndarray


def lyapunov_value(z: np.ndarray, z_prime: np.ndarray, k: float) -> np.ndarray:
    """V(z, z') = (|z1 - z1'|^k + |z2 - z2'|^k) / k, broadcast over leading axes."""
    if k < 2.0:
        raise ContractError("k must be at least 2")
    z = np.asarray(z, dtype=float)
    z_prime = np.asarray(z_prime, dtype=float)
    n = z.shape[-1] // 2
    d1 = z[..., :n] - z_prime[..., :n]
    d2 = z[..., n:] - z_prime[..., n:]
    s1 = np.einsum("...i,...i->...", d1, d1)
    s2 = np.einsum("...i,...i->...", d2, d2)
    return (s1 ** (k / 2.0) + s2 ** (k / 2.0)) / k


def grad_norm_power(d: np.ndarray, k: float) -> np.ndarray:
    """Gradient of (1/k)|d|^k, i.e. |d|^(k-2) d, with the k=2 case exact."""
    d = np.asarray(d, dtype=float)
    if k == 2.0:
        return d
    sq = np.einsum("...i,...i->...", d, d)
    factor = np.where(sq > 0.0, sq ** ((k - 2.0) / 2.0), 0.0)
    return factor[..., None] * d


def hess_norm_power(d: np.ndarray, k: float) -> np.ndarray:
    """Hessian of (1/k)|d|^k: |d|^(k-2) I + (k-2)|d|^(k-4) d d'.

    At d = 0 the limit is I for k = 2 and 0 for k > 2 (the diagonal itself is
    excluded from generator evaluation).
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[-1]
    eye = np.eye(n)
    if k == 2.0:
        return np.broadcast_to(eye, d.shape + (n,)).copy()
    sq = np.einsum("...i,...i->...", d, d)
    safe = np.where(sq > 0.0, sq, 1.0)
    iso = np.where(sq > 0.0, safe ** ((k - 2.0) / 2.0), 0.0)
    aniso = np.where(sq > 0.0, (k - 2.0) * safe ** ((k - 4.0) / 2.0), 0.0)
    outer = np.einsum("...i,...j->...ij", d, d)
    return iso[..., None, None] * eye + aniso[..., None, None] * outer


def young_bound(a, b, rr: float, ss: float, eps: float):
    """Young's inequality bound (eps^rr/rr)|a|^rr + |b|^ss/(ss eps^ss) >= |a b|."""
    if not (rr > 1.0 and ss > 1.0):
        raise ContractError("exponents must satisfy rr > 1 and ss > 1")
    if abs((rr - 1.0) * (ss - 1.0) - 1.0) > 1e-12:
        raise ContractError("exponents must satisfy (rr - 1)(ss - 1) = 1")
    if eps <= 0.0:
        raise ContractError("eps must be positive")
    a = np.abs(np.asarray(a, dtype=float))
    b = np.abs(np.asarray(b, dtype=float))
    return eps**rr / rr * a**rr + b**ss / (ss * eps**ss)


def _transformed_drift(sys, ctrl, z1, z2, uhat):
    """Drift of the transformed closed loop, evaluated through the actual controller."""
    kappa1 = ctrl.gains.kappa1
    M = sys.mass(z1)
    p = z2 - kappa1 * np.einsum("...ij,...j->...i", M, z1)
    F1 = solve_matrix(M, z2) - kappa1 * z1
    v = ctrl(z1, p, uhat)
    F2 = (
        eval_eta(sys, z1, p)
        + np.einsum("...ij,...j->...i", sys.input_matrix(z1), v)
        + np.einsum("...ij,...j->...i", mass_derivative(sys, z1, p), z1) * kappa1
        + kappa1 * p
    )
    return F1, F2


def generator_evaluate(
    sys: HamiltonianSystem,
    ctrl: Controller,
    z: np.ndarray,
    z_prime: np.ndarray,
    uhat: np.ndarray,
    uhat_prime: np.ndarray,
    box: ValidityBox | None = None,
) -> GeneratorBreakdown:
    """Exact generator of V along the coupled transformed closed loop.

    Both pair members are driven by the same Brownian motion and Poisson
    channels; the trace term therefore sees only the diffusion difference and
    jumps displace both z2 components simultaneously.  When a box is given,
    states whose preimages leave it raise DomainError (the constants are not
    certified there).
    """
    gains = ctrl.gains
    k = gains.k
    n = sys.dof
    z = np.asarray(z, dtype=float)
    z_prime = np.asarray(z_prime, dtype=float)
    uhat = np.asarray(uhat, dtype=float)
    uhat_prime = np.asarray(uhat_prime, dtype=float)
    if z.shape[-1] != 2 * n or z_prime.shape[-1] != 2 * n:
        raise ContractError(f"transformed states must have dimension {2 * n}")

    if box is not None:
        inside = box.contains(inverse_transform(sys, gains, z)) & box.contains(
            inverse_transform(sys, gains, z_prime)
        )
        if not np.all(inside):
            raise DomainError(
                f"{int(np.sum(~inside))} state pair(s) outside the validity box"
            )

    z1, z2 = z[..., :n], z[..., n:]
    z1p, z2p = z_prime[..., :n], z_prime[..., n:]
    d1, d2 = z1 - z1p, z2 - z2p

    F1, F2 = _transformed_drift(sys, ctrl, z1, z2, uhat)
    F1p, F2p = _transformed_drift(sys, ctrl, z1p, z2p, uhat_prime)
    drift = np.einsum("...i,...i->...", grad_norm_power(d1, k), F1 - F1p)
    drift += np.einsum("...i,...i->...", grad_norm_power(d2, k), F2 - F2p)

    dsig = np.asarray(sys.diffusion(z1), dtype=float) - np.asarray(
        sys.diffusion(z1p), dtype=float
    )
    trace = 0.5 * np.einsum("...ir,...jr,...ij->...", dsig, dsig, hess_norm_power(d2, k))

    rho, rho_p = np.asarray(sys.reset(z1), dtype=float), np.asarray(sys.reset(z1p), dtype=float)
    sq2 = np.einsum("...i,...i->...", d2, d2)
    jump = np.zeros(np.broadcast_shapes(d1.shape[:-1], d2.shape[:-1]))
    for i in range(sys.poisson_dim):
        shifted = d2 + (rho[..., i] - rho_p[..., i])
        sq_shift = np.einsum("...i,...i->...", shifted, shifted)
        jump = jump + sys.rates[i] * (sq_shift ** (k / 2.0) - sq2 ** (k / 2.0)) / k

    # exactly-equal pairs sit on the diagonal where V and its derivatives vanish
    diagonal = np.all(z == z_prime, axis=-1)
    drift = np.where(diagonal, 0.0, drift)
    trace = np.where(diagonal, 0.0, trace)
    jump = np.where(diagonal, 0.0, jump)

    total = drift + trace + jump
    du = uhat - uhat_prime
    value = lyapunov_value(z, z_prime, k)
    rhs = -gains.kappa * value + gains.c3 * np.einsum("...i,...i->...", du, du) ** (k / 2.0)
    return GeneratorBreakdown(
        drift_term=drift,
        trace_term=trace,
        jump_term=jump,
        total=total,
        rhs_bound=rhs,
        margin=rhs - total,
    )


@dataclass(frozen=True)
class DissipationSweep:
    """Sampled dissipation check over a validity box."""

    states: np.ndarray        # (samples, 2n) original coordinates, first member
    states_prime: np.ndarray  # (samples, 2n) second member
    inputs: np.ndarray        # (samples, m)
    inputs_prime: np.ndarray
    breakdown: GeneratorBreakdown
    min_margin: float
    argmin_index: int

    @property
    def scaled_margin(self) -> np.ndarray:
        """Margin relative to the roundoff scale 1 + |LV|."""
        return self.breakdown.margin / (1.0 + np.abs(self.breakdown.total))


def sample_dissipation(
    sys: HamiltonianSystem,
    ctrl: Controller,
    box: ValidityBox,
    samples: int,
    seed: int,
    input_bound: float = 1.0,
) -> DissipationSweep:
    """Check the dissipation inequality at uniformly sampled box pairs.

    Inputs are drawn uniformly from [-input_bound, input_bound]^n.  Pairs are
    mapped through the coordinate change before generator evaluation.
    """
    if samples < 1:
        raise ContractError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    x = box.sample(rng, samples)
    x_prime = box.sample(rng, samples)
    m = sys.dof
    u = rng.uniform(-input_bound, input_bound, size=(samples, m))
    u_prime = rng.uniform(-input_bound, input_bound, size=(samples, m))
    z = transform(sys, ctrl.gains, x)
    z_prime = transform(sys, ctrl.gains, x_prime)
    breakdown = generator_evaluate(sys, ctrl, z, z_prime, u, u_prime, box=box)
    idx = int(np.argmin(breakdown.margin))
    return DissipationSweep(
        states=x,
        states_prime=x_prime,
        inputs=u,
        inputs_prime=u_prime,
        breakdown=breakdown,
        min_margin=float(breakdown.margin[idx]),
        argmin_index=idx,
    )
