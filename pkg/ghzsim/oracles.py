# ghzsim/oracles.py
"""
Independent verification paths for the branch-product simulator.

dense_rwa_run
    Full 2^(N+1) statevector; every pulse is an explicit controlled operation
    with the controllable spin as control and per-spin propagators from
    scipy.linalg.expm.
lab_frame_run
    Same register, but pulse propagators come from integrating the rotating
    frame Hamiltonian with its counter-rotating terms kept (no RWA), using a
    fixed-step commutator-free fourth-order Magnus scheme.
probability_slope
    Central-difference dP/d(delta) for uniform detuning.

The check_* suites drive these against the fast path and return an
OracleReport; the management command turns a failed report into exit code 1.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union
import logging
import math

import numpy as np
from scipy.linalg import expm

from .constants import (
    DENSE_AGREEMENT_TOL,
    DENSE_ORACLE_MAX_SPINS,
    LAB_FRAME_MAX_SPINS,
    LAB_MIN_COUPLING,
    LAB_NORM_TOL,
    LAB_OMEGA_M_RATIO,
    LAB_RWA_CONSTANT,
    LAB_STEP_FACTOR,
    NORM_TOL,
)
from .estimator import estimator_stats, monte_carlo_stats
from .exceptions import CapacityError, InvalidArgumentError, OracleViolation
from .protocols import (
    CompositeArc,
    ProtocolLabel,
    ProtocolSpec,
    build_protocol,
    conventional_protocol,
    run_protocol,
)
from .pulses import SIGMA_X, SIGMA_Y, SIGMA_Z, Branch, PulseStep, SpinEnvironment, su2_exp
from .qstate import initial_state, to_dense

logger = logging.getLogger("ghzsim.oracles")

SQRT3 = math.sqrt(3)
CF4_W0 = (1.5 + SQRT3) / 6
CF4_W1 = (1.5 - SQRT3) / 6
CF4_NODES = (0.5 - SQRT3 / 6, 0.5 + SQRT3 / 6)

# Integrator steps evaluated per vectorized batch.
LAB_CHUNK_STEPS = 65536

SLOPE_H_RANGE = (1e-9, 1e-4)


# =============================================================================
# DENSE REGISTER
# =============================================================================

def project_plus_y(psi: np.ndarray) -> float:
    """P(|+y>_c) for a (2,)*(N+1) register, |+y> = (|e> + i|g>)/sqrt(2)."""
    amplitude = (psi[1] - 1j * psi[0]) / math.sqrt(2)
    return float(np.sum(np.abs(amplitude) ** 2))


class DenseRegister:
    """Controllable spin on axis 0, memory spin i on axis i + 1."""

    def __init__(self, n_spins: int, max_spins: int = DENSE_ORACLE_MAX_SPINS, norm_tol: float = NORM_TOL):
        if n_spins > max_spins:
            raise CapacityError(f"Dense register limited to {max_spins} memory spins, got {n_spins}")
        self.n_spins = n_spins
        self.norm_tol = norm_tol
        self.applied = 0
        self.psi = to_dense(initial_state(n_spins)).reshape((2,) * (n_spins + 1))

    @staticmethod
    def _apply_local(branch: np.ndarray, unitaries) -> np.ndarray:
        for axis, u in enumerate(unitaries):
            branch = np.moveaxis(np.tensordot(u, branch, axes=([1], [axis])), 0, axis)
        return branch

    def apply_controlled(self, u_g, u_e) -> None:
        """Apply u_g[i] to spin i when the control is |g>, u_e[i] when it is |e>."""
        self.psi = np.stack([
            self._apply_local(self.psi[0], u_g),
            self._apply_local(self.psi[1], u_e),
        ])
        self.applied += 1
        # drift accumulates, so the bound scales with the number of operations
        drift = abs(self.norm() - 1.0)
        if drift > self.norm_tol * self.applied:
            raise OracleViolation(f"Dense register norm drifted by {drift:.3e}")

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2))

    def probability_plus_y(self) -> float:
        return project_plus_y(self.psi)


def _controlled_pair(branch: Branch, resonant, offresonant):
    if Branch(branch) is Branch.PLUS:
        return offresonant, resonant
    return resonant, offresonant


def _expm_pulse(step: PulseStep, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    z_term = (delta / 2) * SIGMA_Z
    drive = (step.strength / 4) * (math.cos(step.phase) * SIGMA_X + math.sin(step.phase) * SIGMA_Y)
    resonant = expm(-1j * step.duration * (drive + z_term))
    offresonant = expm(-1j * step.duration * z_term)
    return resonant, offresonant


def _expm_exposure(t: float, field_value: float, delta: float) -> np.ndarray:
    return expm(-1j * t * ((field_value + delta) / 2) * SIGMA_Z)


def _apply_exposure(register: DenseRegister, spec: ProtocolSpec, env: SpinEnvironment) -> None:
    phases = [_expm_exposure(spec.exposure_time, env.field, delta) for delta in env.detunings]
    register.apply_controlled(phases, phases)


def _check_env(spec: ProtocolSpec, env: SpinEnvironment) -> None:
    if env.n_spins != spec.n_spins:
        raise InvalidArgumentError(
            f"Environment holds {env.n_spins} detunings for a {spec.n_spins}-spin protocol"
        )


def dense_rwa_run(spec: ProtocolSpec, env: SpinEnvironment) -> float:
    _check_env(spec, env)
    register = DenseRegister(spec.n_spins)

    def pulse(step: PulseStep) -> None:
        pairs = [_expm_pulse(step, delta) for delta in env.detunings]
        resonant = [pair[0] for pair in pairs]
        offresonant = [pair[1] for pair in pairs]
        register.apply_controlled(*_controlled_pair(step.branch, resonant, offresonant))

    for step in spec.prep:
        pulse(step)
    _apply_exposure(register, spec, env)
    for step in spec.readout:
        pulse(step)
    return register.probability_plus_y()


# =============================================================================
# LAB FRAME
# =============================================================================

@dataclass(frozen=True)
class LabFrameParams:
    """
    omega_m: memory-spin frequency; coupling: g, so the branch resonances are
    omega_m +- g/2. omega_c is carried along but never enters the dynamics.
    """

    omega_m: float
    coupling: float
    step: float
    omega_c: Optional[float] = None

    @classmethod
    def for_coupling(cls, coupling: float, ratio: float = LAB_OMEGA_M_RATIO) -> "LabFrameParams":
        omega_m = ratio * coupling
        return cls(omega_m=omega_m, coupling=coupling, step=LAB_STEP_FACTOR / (omega_m + coupling))

    @property
    def max_step(self) -> float:
        return LAB_STEP_FACTOR / (self.omega_m + self.coupling)

    @property
    def omega_plus(self) -> float:
        return self.omega_m + self.coupling / 2

    @property
    def omega_minus(self) -> float:
        return self.omega_m - self.coupling / 2

    def carrier(self, branch: Branch) -> float:
        return self.omega_plus if Branch(branch) is Branch.PLUS else self.omega_minus

    def refined(self, factor: int = 2) -> "LabFrameParams":
        return LabFrameParams(self.omega_m, self.coupling, self.step / factor, self.omega_c)

    def validate(self) -> Tuple[bool, str]:
        """
        Check the intended regime.

        Returns (valid: bool, reason: str)
        """
        if self.coupling < LAB_MIN_COUPLING:
            return False, f"coupling g={self.coupling} below {LAB_MIN_COUPLING}"
        if self.omega_m < LAB_OMEGA_M_RATIO * self.coupling:
            return False, f"omega_m={self.omega_m} below {LAB_OMEGA_M_RATIO} * g"
        if not 0 < self.step <= self.max_step * (1 + 1e-12):
            return False, f"step {self.step} outside (0, {self.max_step}]"
        return True, ""


def _ordered_product(stack: np.ndarray) -> np.ndarray:
    """stack[-1] @ ... @ stack[0] by pairwise reduction."""
    while stack.shape[0] > 1:
        leftover = stack[-1:] if stack.shape[0] % 2 else None
        paired = stack[1::2] @ stack[0:stack.shape[0] - (stack.shape[0] % 2):2]
        stack = paired if leftover is None else np.concatenate([paired, leftover])
    return stack[0]


def _branch_propagator(
    start: float,
    duration: float,
    n_steps: int,
    carrier: float,
    frame: float,
    step: PulseStep,
    delta: float,
) -> np.ndarray:
    """
    Propagator of

        H(t) = (lambda/2) cos(carrier t - phi) (sigma_x cos(frame t) + sigma_y sin(frame t))
               + (delta/2) sigma_z

    over [start, start + duration], CF4 Magnus with n_steps equal steps.
    """
    h = duration / n_steps
    amplitude = step.strength / 2
    z_term = delta / 2
    total = np.eye(2, dtype=complex)

    for first in range(0, n_steps, LAB_CHUNK_STEPS):
        left = start + h * np.arange(first, min(first + LAB_CHUNK_STEPS, n_steps))
        samples = []
        for node in CF4_NODES:
            t = left + node * h
            drive = amplitude * np.cos(carrier * t - step.phase)
            samples.append((drive * np.cos(frame * t), drive * np.sin(frame * t)))
        (x1, y1), (x2, y2) = samples

        early = su2_exp(CF4_W0 * x1 + CF4_W1 * x2, CF4_W0 * y1 + CF4_W1 * y2, z_term, h)
        late = su2_exp(CF4_W1 * x1 + CF4_W0 * x2, CF4_W1 * y1 + CF4_W0 * y2, z_term, h)
        total = _ordered_product(late @ early) @ total
    return total


def lab_frame_step_unitaries(
    step: PulseStep,
    delta: float,
    params: LabFrameParams,
    start_time: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """(u_g, u_e) of one pulse for a spin with detuning delta, no RWA."""
    n_steps = max(1, math.ceil(step.duration / params.step - 1e-9))
    carrier = params.carrier(step.branch)
    u_g = _branch_propagator(start_time, step.duration, n_steps, carrier, params.omega_minus, step, delta)
    u_e = _branch_propagator(start_time, step.duration, n_steps, carrier, params.omega_plus, step, delta)
    return u_g, u_e


def lab_frame_run(spec: ProtocolSpec, env: SpinEnvironment, params: LabFrameParams) -> float:
    _check_env(spec, env)
    ok, reason = params.validate()
    if not ok:
        raise InvalidArgumentError(f"Invalid lab-frame parameters: {reason}")
    if spec.n_spins > LAB_FRAME_MAX_SPINS:
        raise CapacityError(
            f"Lab-frame oracle limited to {LAB_FRAME_MAX_SPINS} memory spins, got {spec.n_spins}"
        )

    register = DenseRegister(spec.n_spins, max_spins=LAB_FRAME_MAX_SPINS, norm_tol=LAB_NORM_TOL)
    clock = 0.0

    def pulse(step: PulseStep, start: float) -> None:
        cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}
        for delta in env.detunings:
            if float(delta) not in cache:
                cache[float(delta)] = lab_frame_step_unitaries(step, float(delta), params, start)
        u_g = [cache[float(delta)][0] for delta in env.detunings]
        u_e = [cache[float(delta)][1] for delta in env.detunings]
        register.apply_controlled(u_g, u_e)

    for step in spec.prep:
        pulse(step, clock)
        clock += step.duration
    _apply_exposure(register, spec, env)
    clock += spec.exposure_time
    for step in spec.readout:
        pulse(step, clock)
        clock += step.duration

    logger.debug(f"Lab-frame run: N={spec.n_spins}, g={params.coupling}, T={clock:.6g}")
    return register.probability_plus_y()


# =============================================================================
# SLOPE
# =============================================================================

ProtocolBuilder = Union[str, ProtocolLabel, Callable[..., ProtocolSpec]]


def probability_slope(
    protocol_builder: ProtocolBuilder,
    tau: float,
    n_spins: int,
    omega: float,
    h: float = 1e-7,
    **builder_kwargs,
) -> float:
    """Central difference of P at uniform detuning +-h."""
    lo, hi = SLOPE_H_RANGE
    if not lo <= h <= hi:
        raise InvalidArgumentError(f"Difference step h must lie in [{lo}, {hi}], got {h!r}")

    if callable(protocol_builder):
        spec = protocol_builder(tau, n_spins, **builder_kwargs)
    else:
        spec = build_protocol(protocol_builder, tau, n_spins, **builder_kwargs)

    p_plus = run_protocol(spec, SpinEnvironment.uniform(n_spins, h, omega))
    p_minus = run_protocol(spec, SpinEnvironment.uniform(n_spins, -h, omega))
    return (p_plus - p_minus) / (2 * h)


# =============================================================================
# SUITES
# =============================================================================

@dataclass
class OracleReport:
    name: str
    cases: int = 0
    max_deviation: float = 0.0
    tolerance: float = 0.0
    violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def record(self, deviation: float, limit: float, description: str) -> None:
        self.cases += 1
        self.max_deviation = max(self.max_deviation, deviation)
        if not deviation <= limit:
            message = f"{description}: deviation {deviation:.3e} exceeds {limit:.3e}"
            self.violations.append(message)
            logger.warning(f"[{self.name}] {message}")

    def summary(self) -> str:
        status = "ok" if self.passed else f"{len(self.violations)} violation(s)"
        return f"{self.name}: {self.cases} case(s), max deviation {self.max_deviation:.3e}, {status}"


def random_case(rng: np.random.Generator, max_spins: int = 8) -> Tuple[ProtocolSpec, SpinEnvironment]:
    """Random protocol, size, budget and detuning realization."""
    label = ProtocolLabel(rng.choice([label.value for label in ProtocolLabel]))
    n_spins = int(rng.integers(1, max_spins + 1))
    tau = float(rng.uniform(60 * math.pi, 150 * math.pi))
    kwargs = {}
    if label is ProtocolLabel.COMPOSITE:
        kwargs = {
            "phi1": float(rng.uniform(0, 2 * math.pi)),
            "arc": CompositeArc(rng.choice([arc.value for arc in CompositeArc])),
        }
    spec = build_protocol(label, tau, n_spins, **kwargs)
    env = SpinEnvironment(
        detunings=rng.uniform(-1e-2, 1e-2, size=n_spins),
        field=float(rng.uniform(0, 1e-3)),
    )
    return spec, env


def check_dense(cases: int = 100, max_spins: int = 8, seed: int = 0) -> OracleReport:
    report = OracleReport(name="dense", tolerance=DENSE_AGREEMENT_TOL)
    rng = np.random.default_rng(seed)
    for index in range(cases):
        spec, env = random_case(rng, max_spins)
        deviation = abs(run_protocol(spec, env) - dense_rwa_run(spec, env))
        report.record(deviation, DENSE_AGREEMENT_TOL, f"case {index} ({spec.label.value}, N={spec.n_spins})")
    logger.info(report.summary())
    return report


def check_labframe(
    n_values=(1, 2),
    couplings=(50.0, 100.0),
    tau: float = 100 * math.pi,
    omega: float = 1e-5,
    delta: float = 0.0,
) -> OracleReport:
    """
    RWA agreement |P_lab - P_rwa| <= c/g per (N, g), and the error must not
    grow when g increases.
    """
    report = OracleReport(name="labframe", tolerance=LAB_RWA_CONSTANT)
    for n_spins in n_values:
        spec = conventional_protocol(tau, n_spins)
        env = SpinEnvironment.uniform(n_spins, delta, omega)
        p_rwa = dense_rwa_run(spec, env)

        errors = []
        for coupling in sorted(couplings):
            p_lab = lab_frame_run(spec, env, LabFrameParams.for_coupling(coupling))
            error = abs(p_lab - p_rwa)
            errors.append(error)
            report.record(error, LAB_RWA_CONSTANT / coupling, f"N={n_spins}, g={coupling}")

        for (g_lo, err_lo), (g_hi, err_hi) in zip(
            zip(sorted(couplings), errors), zip(sorted(couplings)[1:], errors[1:])
        ):
            if err_hi > err_lo + NORM_TOL:
                message = f"N={n_spins}: RWA error grew from {err_lo:.3e} (g={g_lo}) to {err_hi:.3e} (g={g_hi})"
                report.violations.append(message)
                logger.warning(f"[labframe] {message}")

    logger.info(report.summary())
    return report


def check_slope(
    tau: float = 100 * math.pi,
    conventional_n=(1, 5, 20),
    cancelling_n=(1, 10, 50),
    h: float = 1e-7,
    arc: CompositeArc = CompositeArc.LONG,
) -> OracleReport:
    """Conventional slope N(2pi + t_ex)/2 within 0.1%; composite/appendix below 1e-5 N."""
    report = OracleReport(name="slope", tolerance=1e-3)

    for n_spins in conventional_n:
        spec = conventional_protocol(tau, n_spins)
        expected = n_spins * (2 * math.pi + spec.exposure_time) / 2
        slope = probability_slope(ProtocolLabel.CONVENTIONAL, tau, n_spins, 0.0, h)
        report.record(abs(slope - expected) / expected, 1e-3, f"conventional N={n_spins}")

    for label in (ProtocolLabel.COMPOSITE, ProtocolLabel.APPENDIX):
        kwargs = {"arc": arc} if label is ProtocolLabel.COMPOSITE else {}
        for n_spins in cancelling_n:
            slope = probability_slope(label, tau, n_spins, 0.0, h, **kwargs)
            report.record(abs(slope) / n_spins, 1e-5, f"{label.value} N={n_spins}")

    logger.info(report.summary())
    return report


def check_montecarlo(
    probabilities=(0.3, 0.5, 0.7),
    seeds: int = 10_000,
    trials: int = 1000,
    n_spins: int = 1,
    t_ex: float = 1.0,
) -> OracleReport:
    """Empirical rmse over seeded repetitions within 5% of the analytic rmse."""
    report = OracleReport(name="montecarlo", tolerance=0.05)
    for p in probabilities:
        analytic = estimator_stats(p, 0.0, n_spins, t_ex, trials)
        omega_true = analytic.mean
        analytic = estimator_stats(p, omega_true, n_spins, t_ex, trials)
        empirical = monte_carlo_stats(p, omega_true, n_spins, t_ex, trials, range(seeds))
        report.record(abs(empirical.rmse - analytic.rmse) / analytic.rmse, 0.05, f"p={p}")
    logger.info(report.summary())
    return report


ORACLE_SUITES: Dict[str, Callable[..., OracleReport]] = {
    "dense": check_dense,
    "labframe": check_labframe,
    "slope": check_slope,
    "montecarlo": check_montecarlo,
}


def run_oracle_suite(name: str, **kwargs) -> OracleReport:
    try:
        suite = ORACLE_SUITES[name]
    except KeyError:
        raise InvalidArgumentError(f"Unknown oracle: {name}") from None
    return suite(**kwargs)
