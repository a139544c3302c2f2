"""Reproducible Euler-Maruyama integration of jump diffusions.

Noise is pre-sampled into a NoisePath so that a (seed, config) pair maps to a
bit-identical trajectory, and so that two trajectories can share one
realization (synchronous coupling).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, DivergenceError
from .model import JumpDiffusionSystem


@dataclass(frozen=True)
class NoisePath:
    """Pre-sampled Brownian and Poisson increments on a uniform step grid."""

    dt: float
    steps: int
    brownian_increments: np.ndarray  # (steps, r), each entry ~ Normal(0, dt)
    poisson_increments: np.ndarray   # (steps, r~), each entry ~ Poisson(rate_i * dt)
    seed: int

    @property
    def brownian_dim(self) -> int:
        return self.brownian_increments.shape[1]

    @property
    def poisson_dim(self) -> int:
        return self.poisson_increments.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution path: states on the step grid plus the inputs applied."""

    times: np.ndarray           # (steps+1,)
    states: np.ndarray          # (steps+1, n)
    applied_inputs: np.ndarray  # (steps, m)

    def write_csv(self, path) -> None:
        """Write `t,x1,...,xn,u1,...,um` rows at full double precision.

        The terminal row repeats the last applied input (zero-order hold).
        """
        n = self.states.shape[1]
        m = self.applied_inputs.shape[1]
        header = ["t"] + [f"x{i+1}" for i in range(n)] + [f"u{j+1}" for j in range(m)]
        inputs = np.vstack([self.applied_inputs, self.applied_inputs[-1:]])
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for t, x, u in zip(self.times, self.states, inputs):
                row = [t, *x, *u]
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def sample_noise(seed: int, steps: int, dt: float, brownian_dim: int, rates) -> NoisePath:
    """Sample an independent Brownian/Poisson increment grid from one seed.

    Draw order is fixed (all Brownian increments, then all Poisson counts),
    so paths are reproducible bit-exactly for a given numpy version.
    """
    if dt <= 0.0:
        raise ContractError("dt must be positive")
    if steps < 1:
        raise ContractError("steps must be at least 1")
    if brownian_dim < 1:
        raise ContractError("brownian_dim must be at least 1")
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if not np.all(rates > 0.0):
        raise ContractError("all rates must be strictly positive")
    rng = np.random.default_rng(seed)
    brownian = rng.normal(0.0, np.sqrt(dt), size=(steps, brownian_dim))
    poisson = rng.poisson(rates * dt, size=(steps, rates.size))
    return NoisePath(
        dt=float(dt),
        steps=int(steps),
        brownian_increments=brownian,
        poisson_increments=poisson,
        seed=int(seed),
    )


def step(
    sys: JumpDiffusionSystem,
    x: np.ndarray,
    u: np.ndarray,
    dW: np.ndarray,
    dN: np.ndarray,
    dt: float,
    step_index: int | None = None,
) -> np.ndarray:
    """One Euler-Maruyama step: x + f(x,u) dt + sigma(x) dW + rho(x) dN.

    The reset matrix is evaluated at the pre-jump state and scaled by the
    integer increment vector.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if dt <= 0.0:
        raise ContractError("dt must be positive")
    if x.shape[-1] != sys.state_dim:
        raise ContractError(f"state has dimension {x.shape[-1]}, expected {sys.state_dim}")
    if u.shape[-1] != sys.input_dim:
        raise ContractError(f"input has dimension {u.shape[-1]}, expected {sys.input_dim}")
    dW = np.asarray(dW, dtype=float)
    dN = np.asarray(dN, dtype=float)
    if dW.shape[-1] != sys.brownian_dim or dN.shape[-1] != sys.poisson_dim:
        raise ContractError("noise increments do not match the declared channel counts")

    out = (
        x
        + sys.drift(x, u) * dt
        + np.einsum("...ij,...j->...i", sys.diffusion(x), dW)
        + np.einsum("...ij,...j->...i", sys.reset(x), dN)
    )
    if not np.all(np.isfinite(out)):
        where = "" if step_index is None else f" at step {step_index}"
        raise DivergenceError(f"non-finite state{where}", step_index=step_index)
    return out


def simulate(
    sys: JumpDiffusionSystem,
    input_signal: Callable[[float], np.ndarray],
    x0: np.ndarray,
    noise: NoisePath,
) -> Trajectory:
    """Integrate one trajectory against a pre-sampled noise path."""
    if noise.brownian_dim != sys.brownian_dim or noise.poisson_dim != sys.poisson_dim:
        raise ContractError("noise path dimensions do not match the system")
    x0 = np.asarray(x0, dtype=float)
    steps, dt = noise.steps, noise.dt
    states = np.empty((steps + 1, sys.state_dim))
    inputs = np.empty((steps, sys.input_dim))
    states[0] = x0
    x = x0
    for s in range(steps):
        t = s * dt
        u = np.asarray(input_signal(t), dtype=float)
        inputs[s] = u
        try:
            x = step(
                sys, x, u,
                noise.brownian_increments[s], noise.poisson_increments[s],
                dt, step_index=s,
            )
        except DivergenceError as exc:
            raise DivergenceError(
                f"trajectory diverged at t={t + dt:.6g} (step {s})",
                step_index=s, time=t + dt,
            ) from exc
        states[s + 1] = x
    times = np.arange(steps + 1) * dt
    return Trajectory(times=times, states=states, applied_inputs=inputs)


def simulate_pair(
    sys: JumpDiffusionSystem,
    input_a: Callable[[float], np.ndarray],
    input_b: Callable[[float], np.ndarray],
    x0: np.ndarray,
    x0_prime: np.ndarray,
    noise: NoisePath,
) -> tuple[Trajectory, Trajectory]:
    """Integrate two trajectories against the identical noise realization."""
    return (
        simulate(sys, input_a, x0, noise),
        simulate(sys, input_b, x0_prime, noise),
    )
