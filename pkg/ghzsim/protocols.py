# ghzsim/protocols.py
"""
Protocol builders for GHZ magnetometry with frequency-selective pulses.

Each builder splits a fixed single-trial budget tau into memory-spin
preparation, exposure to the target field and readout:

    conventional:  pi pulse on omega_+ | t_ex = tau - 4pi | pi pulse on omega_-
    composite:     7-step composite on each side at a common weakened lambda
    appendix:      three pi pulses on each side, two of them at variable strength

Builders only assemble PulseStep lists; run_protocol evolves the branch-product
state through them and returns the +y probability of the controllable spin.
"""
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple
import logging
import math

import numpy as np

from .constants import (
    BUDGET_TOL,
    LAMBDA_MAX,
    MAX_COMPOSITE_T_NORM,
    PI_PULSE_DURATION,
    PI_PULSE_PHASE,
    PROTOCOL_APPENDIX,
    PROTOCOL_COMPOSITE,
    PROTOCOL_CONVENTIONAL,
    COMPOSITE_ARC_LONG,
    COMPOSITE_ARC_SHORT,
)
from .exceptions import DomainError, InfeasibleBudgetError, InvalidArgumentError
from .pulses import Branch, PulseStep, SpinEnvironment, apply_exposure, apply_sequence
from .qstate import BranchProductState, initial_state, measure_plus_y

logger = logging.getLogger("ghzsim.protocols")


class ProtocolLabel(str, Enum):
    CONVENTIONAL = PROTOCOL_CONVENTIONAL
    COMPOSITE = PROTOCOL_COMPOSITE
    APPENDIX = PROTOCOL_APPENDIX


class CompositeArc(str, Enum):
    """
    SHORT rotates each composite unit by a = arcsin((pi + t/2)/8).
    LONG rotates by pi + a, which flips the sign of the detuning phase picked
    up along the arc so that the first-order slope cancels.
    """

    LONG = COMPOSITE_ARC_LONG
    SHORT = COMPOSITE_ARC_SHORT


@dataclass(frozen=True)
class TimeBudget:
    tau: float
    lambda_max: float = LAMBDA_MAX

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise InvalidArgumentError(f"tau must be a positive finite number, got {self.tau}")


@dataclass(frozen=True)
class ProtocolSpec:
    """
    Complete single-trial protocol. Steps carry physical durations, so the
    budget check is a plain sum.
    """

    n_spins: int
    prep: Tuple[PulseStep, ...]
    exposure_time: float
    readout: Tuple[PulseStep, ...]
    label: ProtocolLabel
    tau: Optional[float] = None
    strength: float = LAMBDA_MAX
    phi1: float = 0.0
    arc: Optional[CompositeArc] = None

    def __post_init__(self):
        object.__setattr__(self, "prep", tuple(self.prep))
        object.__setattr__(self, "readout", tuple(self.readout))
        object.__setattr__(self, "label", ProtocolLabel(self.label))
        if not isinstance(self.n_spins, (int, np.integer)) or self.n_spins < 1:
            raise InvalidArgumentError(f"n_spins must be a positive integer, got {self.n_spins!r}")
        if self.exposure_time < 0:
            raise InvalidArgumentError(f"Exposure time must be non-negative, got {self.exposure_time}")

    @property
    def prep_duration(self) -> float:
        return math.fsum(step.duration for step in self.prep)

    @property
    def readout_duration(self) -> float:
        return math.fsum(step.duration for step in self.readout)

    @property
    def total_duration(self) -> float:
        return math.fsum([self.prep_duration, self.exposure_time, self.readout_duration])

    def budget_error(self) -> float:
        if self.tau is None:
            return 0.0
        return abs(self.total_duration - self.tau)

    def check_budget(self) -> None:
        error = self.budget_error()
        if error > BUDGET_TOL * max(1.0, abs(self.tau or 0.0)):
            raise InfeasibleBudgetError(
                f"{self.label.value} protocol spends {self.total_duration!r} of a {self.tau!r} budget"
            )


def _pi_pulse(branch: Branch, strength: float = LAMBDA_MAX, phase: float = PI_PULSE_PHASE) -> PulseStep:
    return PulseStep(branch=branch, phase=phase, strength=strength, duration=PI_PULSE_DURATION / strength)


def _clamp_strength(strength: float) -> float:
    """Snap a strength that overshoots LAMBDA_MAX by rounding noise back onto it."""
    if strength > LAMBDA_MAX + BUDGET_TOL:
        raise InfeasibleBudgetError(f"Required pulse strength {strength!r} exceeds lambda_max")
    return min(strength, LAMBDA_MAX)


# =============================================================================
# CONVENTIONAL
# =============================================================================

def conventional_protocol(tau: float, n_spins: int) -> ProtocolSpec:
    budget = TimeBudget(tau)
    if budget.tau <= 2 * PI_PULSE_DURATION:
        raise InfeasibleBudgetError(f"Conventional protocol needs tau > 4pi, got {tau!r}")

    spec = ProtocolSpec(
        n_spins=n_spins,
        prep=(_pi_pulse(Branch.PLUS),),
        exposure_time=budget.tau - 2 * PI_PULSE_DURATION,
        readout=(_pi_pulse(Branch.MINUS),),
        label=ProtocolLabel.CONVENTIONAL,
        tau=budget.tau,
    )
    spec.check_budget()
    return spec


# =============================================================================
# COMPOSITE
# =============================================================================

def composite_angle(t_norm: float, arc: CompositeArc = CompositeArc.SHORT) -> float:
    """Rotation of the outer units of the identity composite for exposure t_norm."""
    if t_norm < 0:
        raise DomainError(f"Normalized exposure must be non-negative, got {t_norm!r}")
    argument = (math.pi + t_norm / 2) / 8
    if argument > 1 + BUDGET_TOL:
        raise DomainError(
            f"Normalized exposure {t_norm!r} exceeds the composite maximum {MAX_COMPOSITE_T_NORM!r}"
        )
    angle = math.asin(min(argument, 1.0))
    if CompositeArc(arc) is CompositeArc.LONG:
        angle += math.pi
    return angle


def composite_sequence_duration(t_norm: float, arc: CompositeArc = CompositeArc.SHORT) -> float:
    """Normalized duration (at lambda = 1) of one seven-step sequence: 16 a + 2 pi."""
    return 16 * composite_angle(t_norm, arc) + PI_PULSE_DURATION


def composite_sequence(
    t_norm: float,
    phi1: float,
    branch: Branch,
    arc: CompositeArc = CompositeArc.SHORT,
    strength: float = LAMBDA_MAX,
) -> List[PulseStep]:
    """
    Seven steps: identity composites on the opposite carrier around a pi
    pulse on `branch`.

        I, III, V, VII   opposite   phi1        s = 2a
        II, VI           opposite   phi1 + pi   s = 4a
        IV               branch     -pi/2       s = 2pi

    s is the duration at lambda = 1; steps carry s / strength.
    """
    branch = Branch(branch)
    angle = composite_angle(t_norm, arc)
    other = branch.opposite

    def unit(phase: float, s: float, on: Branch) -> PulseStep:
        return PulseStep(branch=on, phase=phase, strength=strength, duration=s / strength)

    outer = unit(phi1, 2 * angle, other)
    inner = unit(phi1 + math.pi, 4 * angle, other)
    return [
        outer,
        inner,
        outer,
        unit(PI_PULSE_PHASE, PI_PULSE_DURATION, branch),
        outer,
        inner,
        outer,
    ]


def composite_protocol_general(
    tau: float,
    n_spins: int,
    t_norm: float,
    phi1: float = 0.0,
    arc: CompositeArc = CompositeArc.LONG,
) -> ProtocolSpec:
    """
    Composite protocol for any normalized exposure t_norm. All fourteen steps
    and the exposure share the strength lambda = (2 S + t_norm) / tau, where S
    is the normalized duration of one seven-step sequence.
    """
    budget = TimeBudget(tau)
    arc = CompositeArc(arc)
    sequence_norm = composite_sequence_duration(t_norm, arc)
    strength = _clamp_strength((2 * sequence_norm + t_norm) / budget.tau)

    spec = ProtocolSpec(
        n_spins=n_spins,
        prep=composite_sequence(t_norm, phi1, Branch.PLUS, arc=arc, strength=strength),
        exposure_time=t_norm / strength,
        readout=composite_sequence(t_norm, phi1, Branch.MINUS, arc=arc, strength=strength),
        label=ProtocolLabel.COMPOSITE,
        tau=budget.tau,
        strength=strength,
        phi1=phi1,
        arc=arc,
    )
    spec.check_budget()
    return spec


def composite_protocol(
    tau: float,
    n_spins: int,
    phi1: float = 0.0,
    arc: CompositeArc = CompositeArc.LONG,
) -> ProtocolSpec:
    return composite_protocol_general(tau, n_spins, MAX_COMPOSITE_T_NORM, phi1=phi1, arc=arc)


def composite_min_tau(arc: CompositeArc = CompositeArc.LONG) -> float:
    """Smallest tau for which the maximal-exposure composite fits at lambda = 1."""
    return 2 * composite_sequence_duration(MAX_COMPOSITE_T_NORM, arc) + MAX_COMPOSITE_T_NORM


# =============================================================================
# APPENDIX (variable strength)
# =============================================================================

def appendix_protocol(tau: float, n_spins: int) -> ProtocolSpec:
    """
    prep    = MINUS weak, PLUS weak, MINUS full
    readout = MINUS full, PLUS weak, MINUS weak

    Weak pulses run at lambda = 4pi/(t_ex + 2pi) so that each lasts
    (t_ex + 2pi)/2 and the idle branch waits the same time in |g> as in |e>.
    The readout PLUS pulse uses phase +pi/2 so both branches return to |g>
    with matching sign.
    """
    budget = TimeBudget(tau)
    if budget.tau <= 4 * PI_PULSE_DURATION:
        raise InfeasibleBudgetError(f"Appendix protocol needs tau > 8pi, got {tau!r}")

    t_ex = (budget.tau - 4 * PI_PULSE_DURATION) / 3
    weak = 2 * PI_PULSE_DURATION / (t_ex + PI_PULSE_DURATION)
    if weak > LAMBDA_MAX + BUDGET_TOL:
        raise InfeasibleBudgetError(
            f"Appendix protocol needs tau >= 14pi for weak pulses within lambda_max, got {tau!r}"
        )
    weak = min(weak, LAMBDA_MAX)

    spec = ProtocolSpec(
        n_spins=n_spins,
        prep=(
            _pi_pulse(Branch.MINUS, weak),
            _pi_pulse(Branch.PLUS, weak),
            _pi_pulse(Branch.MINUS),
        ),
        exposure_time=t_ex,
        readout=(
            _pi_pulse(Branch.MINUS),
            _pi_pulse(Branch.PLUS, weak, phase=-PI_PULSE_PHASE),
            _pi_pulse(Branch.MINUS, weak),
        ),
        label=ProtocolLabel.APPENDIX,
        tau=budget.tau,
        strength=weak,
    )
    spec.check_budget()
    return spec


# =============================================================================
# DISPATCH
# =============================================================================

def build_protocol(
    label,
    tau: float,
    n_spins: int,
    phi1: float = 0.0,
    arc: CompositeArc = CompositeArc.LONG,
) -> ProtocolSpec:
    label = ProtocolLabel(label)
    if label is ProtocolLabel.CONVENTIONAL:
        return conventional_protocol(tau, n_spins)
    if label is ProtocolLabel.COMPOSITE:
        return composite_protocol(tau, n_spins, phi1=phi1, arc=arc)
    return appendix_protocol(tau, n_spins)


def can_build_protocol(label, tau: float, n_spins: int = 1, **kwargs) -> Tuple[bool, str]:
    """
    Check whether a protocol fits the budget.

    Returns (can_build: bool, reason: str)
    """
    try:
        label = ProtocolLabel(label)
    except ValueError:
        return False, f"Unknown protocol: {label}"

    try:
        build_protocol(label, tau, n_spins, **kwargs)
    except (InfeasibleBudgetError, InvalidArgumentError, DomainError) as exc:
        return False, str(exc)
    return True, ""


def exposure_ratio(tau: float, arc: CompositeArc = CompositeArc.LONG) -> float:
    """Composite exposure time over conventional exposure time at equal tau."""
    composite = composite_protocol(tau, 1, arc=arc)
    conventional = conventional_protocol(tau, 1)
    return composite.exposure_time / conventional.exposure_time


# =============================================================================
# EXECUTION
# =============================================================================

def _check_env(spec: ProtocolSpec, env: SpinEnvironment) -> None:
    if env.n_spins != spec.n_spins:
        raise InvalidArgumentError(
            f"Environment holds {env.n_spins} detunings for a {spec.n_spins}-spin protocol"
        )


def final_state(spec: ProtocolSpec, env: SpinEnvironment) -> BranchProductState:
    """Branch-product state just before the controllable-spin measurement."""
    _check_env(spec, env)
    state = initial_state(spec.n_spins)
    state = apply_sequence(state, spec.prep, env)
    state = apply_exposure(state, spec.exposure_time, env)
    return apply_sequence(state, spec.readout, env)


def run_protocol(spec: ProtocolSpec, env: SpinEnvironment) -> float:
    return measure_plus_y(final_state(spec, env))


def overlap_residuals(spec: ProtocolSpec, env: SpinEnvironment) -> np.ndarray:
    """
    Per-spin 1 - |<psi_i|psi''_i>| between the detuning-free and the detuned
    final memory-spin vectors, worst branch per spin.
    """
    ideal = final_state(spec, SpinEnvironment(np.zeros(env.n_spins), env.field))
    detuned = final_state(spec, env)

    residuals = []
    for ideal_v, detuned_v in ((ideal.v_g, detuned.v_g), (ideal.v_e, detuned.v_e)):
        overlaps = np.abs(np.sum(np.conj(ideal_v) * detuned_v, axis=1))
        residuals.append(1.0 - overlaps)
    return np.maximum(residuals[0], residuals[1])
