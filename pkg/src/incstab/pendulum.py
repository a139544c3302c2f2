"""Spring pendulum hanging from a stochastically vibrating ceiling.

Two degrees of freedom: q1 is the spring elongation relative to the static
length l, q2 the angle from the vertical.  The ceiling vibration enters as a
two-channel Brownian diffusion on the momenta; random jerks enter through a
one-channel Poisson process with the identity reset rho(q) = q acting on the
momentum equation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backstepping import BacksteppingGains, Controller
from .errors import ContractError
from .model import DriftNoiseConstants, HamiltonianSystem, ValidityBox

# Constants declared for the default validity box.  Note these are design
# inputs; estimate_lipschitz shows the worst-case box ratios for L1 and
# Lsigma exceed them, so the certification instrument is the sampled
# generator margin, not the raw ratio estimates.
DECLARED_CONSTANTS = DriftNoiseConstants(L1=1.0, L2=2.0, Lsigma=1.0, Lrho=1.0)


@dataclass(frozen=True)
class PendulumParams:
    """Physical parameters (SI units)."""

    m: float = 0.8      # ball mass, kg
    l: float = 1.5      # static spring length, m
    g: float = 9.8      # gravity, m/s^2
    ks: float = 15.0    # spring constant, N/m
    b1: float = 1.0     # piston damping
    b2: float = 1.0     # air damping
    lam: float = 1.0    # jump rate, 1/s

    def __post_init__(self):
        if min(self.m, self.l, self.g, self.ks) <= 0.0:
            raise ContractError("m, l, g, ks must be positive")
        if min(self.b1, self.b2, self.lam) < 0.0:
            raise ContractError("b1, b2, lam must be nonnegative")


def default_box() -> ValidityBox:
    """Box |q1| <= 0.6, |q2| <= 1, |p_i| <= 3 containing the demo initial pairs."""
    return ValidityBox(lower=[-0.6, -1.0, -3.0, -3.0], upper=[0.6, 1.0, 3.0, 3.0])


def build_pendulum(params: PendulumParams | None = None) -> HamiltonianSystem:
    """Assemble the spring pendulum as a HamiltonianSystem with analytic partials."""
    par = params if params is not None else PendulumParams()
    m, l, g, ks = par.m, par.l, par.g, par.ks
    b1, b2 = par.b1, par.b2

    def mass(q):
        q1 = np.asarray(q, dtype=float)[..., 0]
        M = np.zeros(q1.shape + (2, 2))
        M[..., 0, 0] = m
        M[..., 1, 1] = m * (l + q1) ** 2
        return M

    def mass_partials(q):
        q1 = np.asarray(q, dtype=float)[..., 0]
        P = np.zeros(q1.shape + (2, 2, 2))
        P[..., 0, 1, 1] = 2.0 * m * (l + q1)
        return P

    def potential(q):
        q = np.asarray(q, dtype=float)
        q1, q2 = q[..., 0], q[..., 1]
        return 0.5 * ks * q1**2 + m * g * (l + q1) * (1.0 - np.cos(q2))

    def potential_grad(q):
        q = np.asarray(q, dtype=float)
        q1, q2 = q[..., 0], q[..., 1]
        return np.stack(
            [ks * q1 + m * g * (1.0 - np.cos(q2)), m * g * (l + q1) * np.sin(q2)],
            axis=-1,
        )

    def damping(q, p):
        p = np.asarray(p, dtype=float)
        return np.stack([-b1 * p[..., 0] / m, -b2 * p[..., 1] / m], axis=-1)

    def input_matrix(q):
        q1 = np.asarray(q, dtype=float)[..., 0]
        G = np.zeros(q1.shape + (2, 2))
        G[..., 0, 0] = 1.0
        G[..., 1, 1] = 1.0
        return G

    def diffusion(q):
        q = np.asarray(q, dtype=float)
        q1, q2 = q[..., 0], q[..., 1]
        S = np.empty(q1.shape + (2, 2))
        S[..., 0, 0] = -m * np.sin(q2)
        S[..., 0, 1] = m * np.cos(q2)
        S[..., 1, 0] = -m * (l + q1) * np.cos(q2)
        S[..., 1, 1] = -m * (l + q1) * np.sin(q2)
        return S

    def reset(q):
        return np.asarray(q, dtype=float)[..., None]

    return HamiltonianSystem(
        dof=2,
        mass=mass,
        potential=potential,
        damping=damping,
        input_matrix=input_matrix,
        diffusion=diffusion,
        reset=reset,
        rates=np.array([par.lam]),
        brownian_dim=2,
        poisson_dim=1,
        constants=DECLARED_CONSTANTS,
        mass_partials=mass_partials,
        potential_grad=potential_grad,
    )


def paper_controller(params: PendulumParams, gains: BacksteppingGains) -> Controller:
    """Explicit closed-form k=2 feedback law as a cross-check for synthesize().

    Written out per coordinate.  The dM/dt term enters with a negative sign
    and carries the factor 2 kappa1 (l + q1) p1 (the true directional
    derivative of the inertia matrix along the flow).
    """
    if gains.k != 2.0:
        raise ContractError("the closed-form law is the k=2 branch")
    if abs(gains.lam - params.lam) > 1e-12 * (1.0 + params.lam):
        raise ContractError("gains were derived for a different jump rate")
    m, l, g, ks = params.m, params.l, params.g, params.ks
    b1, b2 = params.b1, params.b2
    k1, lam = gains.kappa1, gains.lam
    L2 = DECLARED_CONSTANTS.L2
    cq = k1 * (k1 + lam / 2.0 + L2 / (2.0 * gains.eps1**2))
    cp = 2.0 * k1 + lam / 2.0 + L2 / (2.0 * gains.eps1**2)

    def law(q, p, uhat):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        uhat = np.asarray(uhat, dtype=float)
        q1, q2 = q[..., 0], q[..., 1]
        p1, p2 = p[..., 0], p[..., 1]
        arm = l + q1
        v1 = (
            -p2**2 / (m * arm**3)
            + ks * q1
            + m * g * (1.0 - np.cos(q2))
            + b1 * p1 / m
            - cq * m * q1
            - cp * p1
            + uhat[..., 0]
        )
        v2 = (
            m * g * arm * np.sin(q2)
            + b2 * p2 / m
            - 2.0 * k1 * arm * p1 * q2
            - cq * m * arm**2 * q2
            - cp * p2
            + uhat[..., 1]
        )
        return np.stack([v1, v2], axis=-1)

    return Controller(law=law, gains=gains)
