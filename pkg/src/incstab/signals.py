"""Named input-signal families for experiment configs.

Every builder returns a callable mapping a time (scalar or array) to an
input vector, broadcasting time over a trailing component axis.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def zero_signal(dim: int):
    def signal(t):
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape + (dim,))
    return signal


def constant_signal(value):
    value = np.atleast_1d(np.asarray(value, dtype=float))

    def signal(t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(value, t.shape + value.shape).copy()
    return signal


def sinusoid_signal(amplitude, angular_frequency: float = 1.0, phase: float = 0.0, dim: int | None = None):
    amplitude = np.atleast_1d(np.asarray(amplitude, dtype=float))
    if dim is not None and amplitude.size == 1:
        amplitude = np.full(dim, amplitude[0])

    def signal(t):
        t = np.asarray(t, dtype=float)
        return amplitude * np.sin(angular_frequency * t + phase)[..., None]
    return signal


SIGNAL_FAMILIES = {
    "zero": zero_signal,
    "constant": constant_signal,
    "sinusoid": sinusoid_signal,
}


def make_signal(spec: dict, dim: int, path: str = "inputs"):
    """Build a signal from a config mapping like {"family": "sinusoid", ...}."""
    if not isinstance(spec, dict):
        raise ConfigError("input spec must be a mapping", path)
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in SIGNAL_FAMILIES:
        raise ConfigError(
            f"unknown input family {family!r}; known: {sorted(SIGNAL_FAMILIES)}", path
        )
    try:
        if family == "zero":
            if spec:
                raise TypeError(f"unexpected keys {sorted(spec)}")
            signal = zero_signal(dim)
        elif family == "constant":
            value = spec.pop("value")
            if spec:
                raise TypeError(f"unexpected keys {sorted(spec)}")
            signal = constant_signal(value)
        else:
            signal = sinusoid_signal(dim=dim, **spec)
    except (TypeError, KeyError) as exc:
        raise ConfigError(str(exc), path) from exc
    probe = np.asarray(signal(0.0))
    if probe.shape != (dim,):
        raise ConfigError(
            f"signal produces shape {probe.shape}, expected ({dim},)", path
        )
    return signal
