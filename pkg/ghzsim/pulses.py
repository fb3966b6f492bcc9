# ghzsim/pulses.py
"""
Per-spin 2x2 propagators for frequency-selective pulses and field exposure.

Pulses are treated in the rotating-wave approximation: a pulse at carrier
omega_+ (PLUS) drives the memory spins of the |e>_c branch with

    (lambda/4)(sigma_x cos(phi) + sigma_y sin(phi)) + (delta_i/2) sigma_z

while the |g>_c branch only sees the detuning term (omega_- / MINUS swaps
the roles). Rotation angle of a resonant pulse is lambda * duration / 2.

Matrices are written in the (|g>, |e>) basis with sigma_z|g> = -|g>.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple
import logging
import math

import numpy as np

from .constants import PROBABILITY_SLACK
from .exceptions import InvalidArgumentError
from .qstate import BranchProductState, apply_branch_unitaries

logger = logging.getLogger("ghzsim.pulses")

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)


class Branch(str, Enum):
    PLUS = "plus"    # carrier omega_+, resonant with the |e>_c branch
    MINUS = "minus"  # carrier omega_-, resonant with the |g>_c branch

    @property
    def opposite(self) -> "Branch":
        return Branch.MINUS if self is Branch.PLUS else Branch.PLUS


@dataclass(frozen=True)
class PulseStep:
    """
    One rectangular pulse.

    duration is the physical duration (units of 1/lambda_max); the rotation
    it produces on a resonant spin is strength * duration / 2.
    """

    branch: Branch
    phase: float
    strength: float
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch(self.branch))
        if not (0.0 < self.strength <= 1.0 + PROBABILITY_SLACK):
            raise InvalidArgumentError(f"Pulse strength must lie in (0, 1], got {self.strength}")
        if not self.duration > 0.0:
            raise InvalidArgumentError(f"Pulse duration must be positive, got {self.duration}")

    @property
    def rotation_angle(self) -> float:
        return self.strength * self.duration / 2

    @property
    def normalized_duration(self) -> float:
        """Duration in units of this pulse's own strength (the "s" of a sequence table)."""
        return self.strength * self.duration


@dataclass(frozen=True, eq=False)
class SpinEnvironment:
    """Per-spin detunings delta_i and the target field Omega, fixed for a run."""

    detunings: np.ndarray
    field: float = 0.0

    def __post_init__(self):
        detunings = np.array(self.detunings, dtype=float, copy=True).reshape(-1)
        detunings.flags.writeable = False
        object.__setattr__(self, "detunings", detunings)
        object.__setattr__(self, "field", float(self.field))

    @classmethod
    def uniform(cls, n_spins: int, delta: float = 0.0, field: float = 0.0) -> "SpinEnvironment":
        return cls(detunings=np.full(n_spins, float(delta)), field=field)

    @property
    def n_spins(self) -> int:
        return self.detunings.shape[0]


def su2_exp(n_x, n_y, n_z, s) -> np.ndarray:
    """
    exp(-i s (n_x sigma_x + n_y sigma_y + n_z sigma_z)) in closed form:
    cos(r s) I - i sin(r s) (n . sigma) / r, with r = |n|; r = 0 gives I exactly.

    Arguments broadcast; the result has shape broadcast_shape + (2, 2).
    """
    n_x, n_y, n_z, s = np.broadcast_arrays(
        np.asarray(n_x, dtype=float),
        np.asarray(n_y, dtype=float),
        np.asarray(n_z, dtype=float),
        np.asarray(s, dtype=float),
    )
    r = np.sqrt(n_x ** 2 + n_y ** 2 + n_z ** 2)
    safe_r = np.where(r > 0, r, 1.0)
    cos_term = np.cos(r * s)
    sin_term = np.where(r > 0, np.sin(r * s) / safe_r, 0.0)

    out = np.empty(r.shape + (2, 2), dtype=complex)
    # n . sigma = [[-n_z, n_x - i n_y], [n_x + i n_y, n_z]]
    out[..., 0, 0] = cos_term + 1j * sin_term * n_z
    out[..., 0, 1] = -1j * sin_term * (n_x - 1j * n_y)
    out[..., 1, 0] = -1j * sin_term * (n_x + 1j * n_y)
    out[..., 1, 1] = cos_term - 1j * sin_term * n_z
    return out


def pulse_unitaries(step: PulseStep, delta) -> Tuple[np.ndarray, np.ndarray]:
    """
    (u_resonant, u_offresonant) for one pulse at detuning delta (scalar or
    per-spin array).
    """
    quarter = step.strength / 4
    u_resonant = su2_exp(
        quarter * math.cos(step.phase),
        quarter * math.sin(step.phase),
        np.asarray(delta, dtype=float) / 2,
        step.duration,
    )
    u_offresonant = su2_exp(0.0, 0.0, np.asarray(delta, dtype=float) / 2, step.duration)
    return u_resonant, u_offresonant


def exposure_unitary(t: float, field: float, delta) -> np.ndarray:
    """
    Free evolution under (Omega + delta_i)/2 sigma_z for time t:
    phase e^{+i(Omega+delta)t/2} on |g>, e^{-i(Omega+delta)t/2} on |e>.
    """
    if t < 0:
        raise InvalidArgumentError(f"Exposure time must be non-negative, got {t}")
    return su2_exp(0.0, 0.0, (field + np.asarray(delta, dtype=float)) / 2, t)


def _check_environment(state: BranchProductState, env: SpinEnvironment) -> None:
    if env.n_spins != state.n_spins:
        raise InvalidArgumentError(
            f"Environment holds {env.n_spins} detunings for a state of {state.n_spins} spins"
        )


def apply_pulse(state: BranchProductState, step: PulseStep, env: SpinEnvironment) -> BranchProductState:
    """Apply one pulse; the target field is decoupled while pulsing."""
    _check_environment(state, env)
    u_resonant, u_offresonant = pulse_unitaries(step, env.detunings)

    if step.branch is Branch.PLUS:
        return apply_branch_unitaries(state, u_g=u_offresonant, u_e=u_resonant)
    return apply_branch_unitaries(state, u_g=u_resonant, u_e=u_offresonant)


def apply_exposure(state: BranchProductState, t: float, env: SpinEnvironment) -> BranchProductState:
    _check_environment(state, env)
    u = exposure_unitary(t, env.field, env.detunings)
    return apply_branch_unitaries(state, u_g=u, u_e=u)


def apply_sequence(
    state: BranchProductState,
    steps: Sequence[PulseStep],
    env: SpinEnvironment,
) -> BranchProductState:
    for step in steps:
        state = apply_pulse(state, step, env)
    return state
