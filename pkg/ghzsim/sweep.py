# ghzsim/sweep.py
"""
N-sweeps and figure pipelines.

A sweep is a grid of (protocol, N) work items. Each item builds its protocol,
draws the detuning realization for its N, runs the fast simulator and turns
the probability into analytic estimator statistics. Items are independent and
run either on a local thread pool or as a celery group; results come back in
(protocol, N) order either way.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union
import csv
import logging
import os

import numpy as np
from django.conf import settings

from .constants import (
    CSV_HEADER,
    DEFAULT_MASTER_SEED,
    DEFAULT_N_VALUES,
    DEFAULT_OMEGA,
    DEFAULT_PHI1,
    DEFAULT_TAU,
    DEFAULT_TRIALS,
    FIGURE_N_VALUES,
)
from .estimator import estimator_stats, reference_curves
from .exceptions import InvalidArgumentError
from .protocols import CompositeArc, ProtocolLabel, build_protocol, can_build_protocol, run_protocol
from .pulses import SpinEnvironment

logger = logging.getLogger("ghzsim.sweep")

BACKEND_THREADS = "threads"
BACKEND_CELERY = "celery"


# =============================================================================
# DETUNING MODELS
# =============================================================================

class DetuningKind(str, Enum):
    UNIFORM = "uniform"
    IID_UNIFORM = "iid"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class DetuningModel:
    """
    UNIFORM(value): every spin detuned by `value`.
    IID_UNIFORM(lo, hi, seed): independent draws from [lo, hi).
    EXPLICIT(values): the list as given.
    """

    kind: DetuningKind = DetuningKind.UNIFORM
    value: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    values: Tuple[float, ...] = ()
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DetuningKind(self.kind))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind is DetuningKind.IID_UNIFORM and self.lo > self.hi:
            raise InvalidArgumentError(f"Detuning interval is empty: lo={self.lo} > hi={self.hi}")

    @classmethod
    def uniform(cls, delta: float) -> "DetuningModel":
        return cls(kind=DetuningKind.UNIFORM, value=float(delta))

    @classmethod
    def iid_uniform(cls, lo: float, hi: float, seed: Optional[int] = None) -> "DetuningModel":
        return cls(kind=DetuningKind.IID_UNIFORM, lo=float(lo), hi=float(hi), seed=seed)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "DetuningModel":
        return cls(kind=DetuningKind.EXPLICIT, values=tuple(values))

    @classmethod
    def from_text(cls, text: str) -> "DetuningModel":
        """
        Parse `uniform:<delta>`, `iid:<lo>:<hi>[:<seed>]` or
        `explicit:<d1>,<d2>,...`. A bare number means uniform.
        """
        text = text.strip()
        kind, _, rest = text.partition(":")
        try:
            if not rest:
                return cls.uniform(float(kind))
            if kind == DetuningKind.UNIFORM.value:
                return cls.uniform(float(rest))
            if kind == DetuningKind.IID_UNIFORM.value:
                parts = rest.split(":")
                if len(parts) not in (2, 3):
                    raise InvalidArgumentError(f"Expected iid:<lo>:<hi>[:<seed>], got {text!r}")
                seed = int(parts[2]) if len(parts) == 3 else None
                return cls.iid_uniform(float(parts[0]), float(parts[1]), seed)
            if kind == DetuningKind.EXPLICIT.value:
                return cls.explicit([float(v) for v in rest.split(",") if v.strip()])
        except ValueError as exc:
            if isinstance(exc, InvalidArgumentError):
                raise
            raise InvalidArgumentError(f"Malformed detuning model {text!r}: {exc}") from None
        raise InvalidArgumentError(f"Unknown detuning model {text!r}")

    def to_text(self) -> str:
        if self.kind is DetuningKind.UNIFORM:
            return f"uniform:{self.value!r}"
        if self.kind is DetuningKind.IID_UNIFORM:
            suffix = f":{self.seed}" if self.seed is not None else ""
            return f"iid:{self.lo!r}:{self.hi!r}{suffix}"
        return "explicit:" + ",".join(repr(v) for v in self.values)


def detuning_seed(model: DetuningModel, master_seed: int) -> int:
    return model.seed if model.seed is not None else master_seed


def realize_detunings(model: DetuningModel, n_spins: int, master_seed: int) -> np.ndarray:
    """
    One realization per (model, N, seed). The IID stream is keyed on
    (seed, N) so every protocol at the same N sees the same detunings.
    """
    if model.kind is DetuningKind.UNIFORM:
        return np.full(n_spins, model.value)

    if model.kind is DetuningKind.EXPLICIT:
        if len(model.values) != n_spins:
            raise InvalidArgumentError(
                f"Explicit detuning list holds {len(model.values)} values for N={n_spins}"
            )
        return np.array(model.values, dtype=float)

    stream = np.random.SeedSequence([detuning_seed(model, master_seed), n_spins])
    return np.random.default_rng(stream).uniform(model.lo, model.hi, size=n_spins)


# =============================================================================
# CONFIG / ROWS
# =============================================================================

@dataclass(frozen=True)
class SweepConfig:
    protocols: Tuple[ProtocolLabel, ...] = tuple(ProtocolLabel)
    n_values: Tuple[int, ...] = DEFAULT_N_VALUES
    tau: float = DEFAULT_TAU
    omega: float = DEFAULT_OMEGA
    trials: int = DEFAULT_TRIALS
    detuning: DetuningModel = field(default_factory=DetuningModel)
    master_seed: int = DEFAULT_MASTER_SEED
    phi1: float = DEFAULT_PHI1
    composite_arc: CompositeArc = CompositeArc.LONG

    def __post_init__(self):
        object.__setattr__(self, "protocols", tuple(ProtocolLabel(p) for p in self.protocols))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "composite_arc", CompositeArc(self.composite_arc))

    def validate(self) -> None:
        if not self.protocols:
            raise InvalidArgumentError("At least one protocol is required")
        if not self.n_values:
            raise InvalidArgumentError("At least one N value is required")
        if self.n_values[0] < 1 or any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise InvalidArgumentError("n_values must be strictly increasing positive integers")
        if self.trials < 1:
            raise InvalidArgumentError(f"trials must be at least 1, got {self.trials}")
        if self.omega == 0:
            raise InvalidArgumentError("omega must be nonzero for relative statistics")

    def to_dict(self) -> dict:
        return {
            "protocols": [p.value for p in self.protocols],
            "n_values": list(self.n_values),
            "tau": self.tau,
            "omega": self.omega,
            "trials": self.trials,
            "detuning": self.detuning.to_text(),
            "master_seed": self.master_seed,
            "phi1": self.phi1,
            "composite_arc": self.composite_arc.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        data["detuning"] = DetuningModel.from_text(data["detuning"])
        return cls(**data)


@dataclass(frozen=True)
class SweepRow:
    protocol: str
    n_spins: int
    tau: float
    omega: float
    trials: int
    t_ex: float
    lambda_used: float
    p_plus_y: float
    est_mean: float
    est_bias: float
    est_std: float
    rsd: float
    heisenberg_ref: float
    delta_min: float
    delta_max: float
    delta_sum: float
    seed: int

    def as_record(self) -> List[str]:
        """Values in CSV_HEADER order, floats as shortest round-trip decimals."""
        values = (
            self.protocol, self.n_spins, self.tau, self.omega, self.trials, self.t_ex,
            self.lambda_used, self.p_plus_y, self.est_mean, self.est_bias, self.est_std,
            self.rsd, self.heisenberg_ref, self.delta_sum, self.seed,
        )
        return [repr(float(v)) if isinstance(v, float) else str(v) for v in values]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepRow":
        return cls(**data)


class SweepResult(list):
    """Rows in (protocol, N) order plus per-protocol error messages."""

    def __init__(self, rows: Iterable[SweepRow] = (), errors: Optional[Dict[str, str]] = None):
        super().__init__(rows)
        self.errors: Dict[str, str] = dict(errors or {})

    def for_protocol(self, label) -> List[SweepRow]:
        label = ProtocolLabel(label).value
        return [row for row in self if row.protocol == label]


def compute_row(config: SweepConfig, label, n_spins: int) -> SweepRow:
    label = ProtocolLabel(label)
    spec = build_protocol(label, config.tau, n_spins, phi1=config.phi1, arc=config.composite_arc)
    deltas = realize_detunings(config.detuning, n_spins, config.master_seed)

    p = run_protocol(spec, SpinEnvironment(deltas, config.omega))
    stats = estimator_stats(p, config.omega, n_spins, spec.exposure_time, config.trials)
    heisenberg, _ = reference_curves(n_spins, config.omega, spec.exposure_time, config.trials)

    return SweepRow(
        protocol=label.value,
        n_spins=n_spins,
        tau=float(config.tau),
        omega=float(config.omega),
        trials=int(config.trials),
        t_ex=spec.exposure_time,
        lambda_used=spec.strength,
        p_plus_y=p,
        est_mean=stats.mean,
        est_bias=stats.bias,
        est_std=stats.std,
        rsd=stats.rsd,
        heisenberg_ref=heisenberg,
        delta_min=float(np.min(deltas)),
        delta_max=float(np.max(deltas)),
        delta_sum=float(np.sum(deltas)),
        seed=detuning_seed(config.detuning, config.master_seed),
    )


# =============================================================================
# EXECUTION
# =============================================================================

def _thread_cap() -> int:
    configured = getattr(settings, "GHZSIM_THREADS", None)
    return max(1, int(configured or os.cpu_count() or 1))


def _run_threads(config: SweepConfig, items, max_workers: Optional[int]) -> List[SweepRow]:
    workers = max_workers or _thread_cap()
    if workers == 1:
        return [compute_row(config, label, n) for label, n in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda item: compute_row(config, *item), items))


def _run_celery(config: SweepConfig, items) -> List[SweepRow]:
    from celery import group

    from .tasks import compute_sweep_row_task

    payload = config.to_dict()
    job = group(compute_sweep_row_task.s(payload, label.value, n) for label, n in items)
    return [SweepRow.from_dict(data) for data in job.apply_async().join()]


def run_sweep(
    config: SweepConfig,
    backend: Optional[str] = None,
    max_workers: Optional[int] = None,
) -> SweepResult:
    """
    Rows for every feasible (protocol, N). A protocol whose budget does not
    fit is skipped and its reason kept in result.errors.
    """
    config.validate()
    backend = backend or getattr(settings, "GHZSIM_SWEEP_BACKEND", BACKEND_THREADS)

    errors: Dict[str, str] = {}
    items = []
    for label in config.protocols:
        ok, reason = can_build_protocol(
            label, config.tau, config.n_values[0], phi1=config.phi1, arc=config.composite_arc
        )
        if not ok:
            errors[label.value] = reason
            logger.warning(f"Skipping {label.value}: {reason}")
            continue
        logger.info(f"Sweeping {label.value} over {len(config.n_values)} N values")
        items.extend((label, n) for n in config.n_values)

    if backend == BACKEND_CELERY:
        rows = _run_celery(config, items)
    elif backend == BACKEND_THREADS:
        rows = _run_threads(config, items, max_workers)
    else:
        raise InvalidArgumentError(f"Unknown sweep backend: {backend}")

    return SweepResult(rows, errors)


# =============================================================================
# FIGURES / OUTPUT
# =============================================================================

FIGURE_PANELS = ("a", "b")


def figure_configs(which: int, n_values: Sequence[int] = FIGURE_N_VALUES, **overrides) -> Dict[str, SweepConfig]:
    """
    Figure 1: uniform detuning at Omega (a) and 0.1 Omega (b).
    Figure 2: i.i.d. detuning on [0, Omega) (a) and [0, 0.1 Omega) (b).
    """
    omega = overrides.get("omega", DEFAULT_OMEGA)
    if which == 1:
        models = (DetuningModel.uniform(omega), DetuningModel.uniform(0.1 * omega))
    elif which == 2:
        models = (DetuningModel.iid_uniform(0.0, omega), DetuningModel.iid_uniform(0.0, 0.1 * omega))
    else:
        raise InvalidArgumentError(f"Figure must be 1 or 2, got {which!r}")

    return {
        panel: SweepConfig(n_values=tuple(n_values), detuning=model, **overrides)
        for panel, model in zip(FIGURE_PANELS, models)
    }


def write_rows(rows: Iterable[SweepRow], target: Union[str, Path, TextIO], fmt: str = "csv") -> None:
    if fmt not in ("csv", "tsv"):
        raise InvalidArgumentError(f"Unknown output format: {fmt}")
    delimiter = "," if fmt == "csv" else "\t"

    def emit(stream: TextIO) -> None:
        writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.as_record())

    if isinstance(target, (str, Path)):
        path = Path(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as stream:
            emit(stream)
    else:
        emit(target)


def reproduce_figure(
    which: int,
    out_path: Union[str, Path],
    fmt: str = "csv",
    n_values: Sequence[int] = FIGURE_N_VALUES,
    backend: Optional[str] = None,
    **overrides,
) -> Dict[str, Tuple[Path, SweepResult]]:
    """Run both panels of a figure and write one dataset per panel into out_path."""
    out_dir = Path(out_path)
    datasets = {}
    for panel, config in figure_configs(which, n_values, **overrides).items():
        result = run_sweep(config, backend=backend)
        path = out_dir / f"figure{which}{panel}.{fmt}"
        write_rows(result, path, fmt)
        logger.info(f"Wrote {len(result)} rows to {path}")
        datasets[panel] = (path, result)
    return datasets


def onset_n(rows: Iterable[SweepRow], factor: float = 2.0) -> Optional[int]:
    """First N whose rsd exceeds factor * heisenberg_ref, or None."""
    for row in sorted(rows, key=lambda r: r.n_spins):
        if row.rsd > factor * row.heisenberg_ref:
            return row.n_spins
    return None
