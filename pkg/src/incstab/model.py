"""System descriptions: generic jump diffusions and structured Hamiltonian systems.

All evaluation procedures are expected to broadcast over leading axes, i.e.
accept states of shape ``(..., n)`` and return ``(..., n)`` / ``(..., n, n)``
arrays.  Everything built by this package follows that convention, which is
what makes vectorized ensemble simulation possible.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, TYPE_CHECKING

import numpy as np

from .errors import ContractError, SingularMatrixError

if TYPE_CHECKING:  # pragma: no cover
    from .backstepping import Controller

# Central finite differences with h ~ eps^(1/3) balance truncation and roundoff.
_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


def solve_matrix(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` batched over leading axes.

    2x2 systems use the closed-form inverse (the hot path for mechanical
    systems with few degrees of freedom); larger systems go through LAPACK.
    Raises SingularMatrixError when a batch member is singular.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[-1]
    if n == 1:
        a = A[..., 0, 0]
        if not np.all(np.abs(a) > 0.0):
            raise SingularMatrixError("1x1 matrix is singular")
        return b / a
    if n == 2:
        a, bb = A[..., 0, 0], A[..., 0, 1]
        c, d = A[..., 1, 0], A[..., 1, 1]
        det = a * d - bb * c
        scale = np.max(np.abs(A), axis=(-2, -1))
        if not np.all(np.abs(det) > np.finfo(float).tiny * np.maximum(scale, 1.0)):
            raise SingularMatrixError("2x2 matrix is numerically singular")
        x0 = (d * b[..., 0] - bb * b[..., 1]) / det
        x1 = (a * b[..., 1] - c * b[..., 0]) / det
        return np.stack([x0, x1], axis=-1)
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc


@dataclass(frozen=True)
class LipschitzConstants:
    """Declared Lipschitz constants of a generic jump diffusion (Definition-style).

    ``Lx``/``Lu`` bound the drift in state/input, ``Lsigma``/``Lrho`` the
    diffusion and reset maps.  They are carried for completeness; no synthesis
    formula in this package consumes ``Lx`` or ``Lu``.
    """

    Lx: float = 0.0
    Lu: float = 0.0
    Lsigma: float = 0.0
    Lrho: float = 0.0


@dataclass(frozen=True)
class DriftNoiseConstants:
    """Constants certifying a Hamiltonian system on a validity box.

    ``L1``/``L2`` bound the momentum-to-velocity map:
    ``|M^-1(q)p - M^-1(q')p'| <= L1 |q-q'| + L2 |p-p'|``;
    ``Lsigma``/``Lrho`` are spectral-norm Lipschitz bounds for the diffusion
    and reset maps.
    """

    L1: float
    L2: float
    Lsigma: float
    Lrho: float


@dataclass(frozen=True)
class JumpDiffusionSystem:
    """Controlled Ito jump diffusion dx = f(x,u) dt + sigma(x) dW + rho(x) dP."""

    state_dim: int
    input_dim: int
    brownian_dim: int
    poisson_dim: int
    drift: Callable[[np.ndarray, np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    reset: Callable[[np.ndarray], np.ndarray]
    rates: np.ndarray
    lipschitz: LipschitzConstants | None = None

    def __post_init__(self):
        for name in ("state_dim", "input_dim", "brownian_dim", "poisson_dim"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"{name} must be a positive integer")
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if rates.shape != (self.poisson_dim,):
            raise ContractError(
                f"rates must have shape ({self.poisson_dim},), got {rates.shape}"
            )
        if not np.all(rates > 0.0):
            raise ContractError("all Poisson rates must be strictly positive")
        object.__setattr__(self, "rates", rates)


@dataclass(frozen=True)
class HamiltonianSystem:
    """Stochastic Hamiltonian system with jumps.

        dq = M^-1(q) p dt
        dp = (eta(q,p) + G(q) v) dt + sigma(q) dW + rho(q) dP

    with eta(q,p) = -d/dq [p' M^-1(q) p / 2 + Xi(q)] + b(q,p).

    ``mass_partials`` (shape ``(..., n, n, n)``, axis -3 indexing the
    coordinate of differentiation) and ``potential_grad`` are optional;
    central finite differences are used when they are absent.
    """

    dof: int
    mass: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], np.ndarray]
    damping: Callable[[np.ndarray, np.ndarray], np.ndarray]
    input_matrix: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    reset: Callable[[np.ndarray], np.ndarray]
    rates: np.ndarray
    brownian_dim: int
    poisson_dim: int
    constants: DriftNoiseConstants
    mass_partials: Callable[[np.ndarray], np.ndarray] | None = None
    potential_grad: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if int(self.dof) < 1:
            raise ContractError("dof must be a positive integer")
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if rates.shape != (self.poisson_dim,):
            raise ContractError(
                f"rates must have shape ({self.poisson_dim},), got {rates.shape}"
            )
        if not np.all(rates > 0.0):
            raise ContractError("all Poisson rates must be strictly positive")
        object.__setattr__(self, "rates", rates)

    @property
    def total_rate(self) -> float:
        return float(np.sum(self.rates))


@dataclass(frozen=True)
class ValidityBox:
    """Componentwise bounds on the stacked state [q; p] certifying the constants."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ContractError("box bounds must be 1-d arrays of equal length")
        if lower.size % 2 != 0:
            raise ContractError("box must bound the stacked state [q; p] (even length)")
        if not np.all(lower < upper):
            raise ContractError("box is degenerate: lower < upper must hold componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dof(self) -> int:
        return self.lower.size // 2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw states uniformly from the box, shape (size, 2n)."""
        return rng.uniform(self.lower, self.upper, size=(size, self.lower.size))

    def contains(self, x: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
        """Membership test, broadcast over leading axes."""
        x = np.asarray(x, dtype=float)
        slack = rtol * (1.0 + np.abs(self.lower) + np.abs(self.upper))
        return np.all((x >= self.lower - slack) & (x <= self.upper + slack), axis=-1)


def _fd_steps(q: np.ndarray) -> np.ndarray:
    return _FD_STEP * np.maximum(1.0, np.abs(q))


def _kinetic_energy(sys: HamiltonianSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    w = solve_matrix(sys.mass(q), p)
    return 0.5 * np.einsum("...i,...i->...", p, w)


def eval_eta(sys: HamiltonianSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Evaluate eta(q,p) = -d/dq H(q,p) + b(q,p) for H = p'M^-1(q)p/2 + Xi(q)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    n = sys.dof
    if q.shape[-1] != n or p.shape[-1] != n:
        raise ContractError(f"q and p must have trailing dimension {n}")

    if sys.mass_partials is not None:
        w = solve_matrix(sys.mass(q), p)
        partials = sys.mass_partials(q)
        # d/dq_k (p'M^-1 p / 2) = -w' (dM/dq_k) w / 2, so eta picks up +w'(dM/dq_k)w/2
        kinetic = 0.5 * np.einsum("...i,...kij,...j->...k", w, partials, w)
    else:
        kinetic = np.empty_like(q)
        h = _fd_steps(q)
        for i in range(n):
            dq = np.zeros_like(q)
            dq[..., i] = h[..., i]
            kinetic[..., i] = -(
                _kinetic_energy(sys, q + dq, p) - _kinetic_energy(sys, q - dq, p)
            ) / (2.0 * h[..., i])

    if sys.potential_grad is not None:
        pot = sys.potential_grad(q)
    else:
        pot = np.empty_like(q)
        h = _fd_steps(q)
        for i in range(n):
            dq = np.zeros_like(q)
            dq[..., i] = h[..., i]
            pot[..., i] = (sys.potential(q + dq) - sys.potential(q - dq)) / (2.0 * h[..., i])

    return kinetic - pot + sys.damping(q, p)


def mass_derivative(sys: HamiltonianSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Directional derivative of M along the flow: sum_i (dM/dq_i) (M^-1 p)_i."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    w = solve_matrix(sys.mass(q), p)
    if sys.mass_partials is not None:
        return np.einsum("...kij,...k->...ij", sys.mass_partials(q), w)
    n = sys.dof
    out = np.zeros(q.shape[:-1] + (n, n))
    h = _fd_steps(q)
    for i in range(n):
        dq = np.zeros_like(q)
        dq[..., i] = h[..., i]
        dMi = (sys.mass(q + dq) - sys.mass(q - dq)) / (2.0 * h[..., i])[..., None, None]
        out += dMi * w[..., i, None, None]
    return out


def to_jump_diffusion(sys: HamiltonianSystem, controller: "Controller") -> JumpDiffusionSystem:
    """Assemble the closed loop as a jump diffusion on x = [q; p].

    The exogenous signal u-hat becomes the new input; the q-rows of the
    diffusion and reset blocks are identically zero.
    """
    n = sys.dof

    def drift(x, u):
        q, p = x[..., :n], x[..., n:]
        qdot = solve_matrix(sys.mass(q), p)
        v = controller(q, p, u)
        pdot = eval_eta(sys, q, p) + np.einsum("...ij,...j->...i", sys.input_matrix(q), v)
        return np.concatenate([qdot, pdot], axis=-1)

    def diffusion(x):
        q = x[..., :n]
        block = np.asarray(sys.diffusion(q), dtype=float)
        out = np.zeros(block.shape[:-2] + (2 * n, sys.brownian_dim))
        out[..., n:, :] = block
        return out

    def reset(x):
        q = x[..., :n]
        block = np.asarray(sys.reset(q), dtype=float)
        out = np.zeros(block.shape[:-2] + (2 * n, sys.poisson_dim))
        out[..., n:, :] = block
        return out

    return JumpDiffusionSystem(
        state_dim=2 * n,
        input_dim=n,
        brownian_dim=sys.brownian_dim,
        poisson_dim=sys.poisson_dim,
        drift=drift,
        diffusion=diffusion,
        reset=reset,
        rates=sys.rates,
    )


def estimate_lipschitz(
    sys: HamiltonianSystem, box: ValidityBox, samples: int, seed: int
) -> DriftNoiseConstants:
    """Empirically bound the constants from below by sampled difference ratios.

    Pairs are drawn uniformly from the box.  L1 is probed with a shared
    momentum (vary q), L2 with a shared coordinate (vary p); Lsigma and Lrho
    use spectral norms.  The returned values are lower bounds on the true
    suprema and grow toward them with the sample count.
    """
    if samples < 2:
        raise ContractError("samples must be at least 2")
    if box.dof != sys.dof:
        raise ContractError(f"box has {box.dof} dof, system has {sys.dof}")
    n = sys.dof
    rng = np.random.default_rng(seed)
    states = box.sample(rng, 2 * samples)
    q, qp = states[:samples, :n], states[samples:, :n]
    p, pp = states[:samples, n:], states[samples:, n:]

    dq = np.linalg.norm(q - qp, axis=-1)
    dp = np.linalg.norm(p - pp, axis=-1)
    ok_q, ok_p = dq > 0.0, dp > 0.0

    w = solve_matrix(sys.mass(q), p)
    wq = solve_matrix(sys.mass(qp), p)
    L1 = float(np.max(np.linalg.norm(w - wq, axis=-1)[ok_q] / dq[ok_q]))

    wp = solve_matrix(sys.mass(q), p - pp)
    L2 = float(np.max(np.linalg.norm(wp, axis=-1)[ok_p] / dp[ok_p]))

    dsig = np.asarray(sys.diffusion(q)) - np.asarray(sys.diffusion(qp))
    Lsigma = float(np.max(np.linalg.norm(dsig, ord=2, axis=(-2, -1))[ok_q] / dq[ok_q]))

    drho = np.asarray(sys.reset(q)) - np.asarray(sys.reset(qp))
    Lrho = float(np.max(np.linalg.norm(drho, ord=2, axis=(-2, -1))[ok_q] / dq[ok_q]))

    return DriftNoiseConstants(L1=L1, L2=L2, Lsigma=Lsigma, Lrho=Lrho)
