# ghzsim/cli.py
"""
Run configuration and command-line entry point.

Config files are `key = value` lines with `#` comments:

    protocols = conventional, composite
    n_values = 1..100
    tau = 100pi
    detuning = iid:0:1e-5
"""
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple
import logging
import math
import os
import sys

from .constants import (
    DEFAULT_MASTER_SEED,
    DEFAULT_N_VALUES,
    DEFAULT_OMEGA,
    DEFAULT_PHI1,
    DEFAULT_TAU,
    DEFAULT_TRIALS,
)
from .exceptions import ConfigParseError, InvalidArgumentError
from .protocols import CompositeArc, ProtocolLabel
from .sweep import DetuningModel, SweepConfig

logger = logging.getLogger("ghzsim.cli")

OUTPUT_FORMATS = ("csv", "tsv")
VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}


def _default_arc() -> CompositeArc:
    from django.conf import settings

    if settings.configured:
        return CompositeArc(getattr(settings, "GHZSIM_COMPOSITE_ARC", CompositeArc.LONG.value))
    return CompositeArc.LONG


@dataclass(frozen=True)
class RunConfig:
    protocols: Tuple[ProtocolLabel, ...] = tuple(ProtocolLabel)
    n_values: Tuple[int, ...] = DEFAULT_N_VALUES
    tau: float = DEFAULT_TAU
    omega: float = DEFAULT_OMEGA
    trials: int = DEFAULT_TRIALS
    detuning: DetuningModel = field(default_factory=DetuningModel)
    master_seed: int = DEFAULT_MASTER_SEED
    phi1: float = DEFAULT_PHI1
    composite_arc: CompositeArc = field(default_factory=_default_arc)
    output: Optional[str] = None
    format: str = "csv"
    verbosity: int = 1

    def to_sweep_config(self, **changes) -> SweepConfig:
        config = SweepConfig(
            protocols=self.protocols,
            n_values=self.n_values,
            tau=self.tau,
            omega=self.omega,
            trials=self.trials,
            detuning=self.detuning,
            master_seed=self.master_seed,
            phi1=self.phi1,
            composite_arc=self.composite_arc,
        )
        return replace(config, **changes) if changes else config

    def with_overrides(self, **overrides) -> "RunConfig":
        """Replace fields whose override is not None."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes) if changes else self


# =============================================================================
# VALUE PARSERS
# =============================================================================

def parse_float(text: str) -> float:
    """Decimal float; a trailing `pi` multiplies by pi (`100pi`, `2.5*pi`)."""
    text = text.strip().lower()
    if text.endswith("pi"):
        factor = text[:-2].rstrip("*").strip()
        return (float(factor) if factor else 1.0) * math.pi
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite number {text!r}")
    return value


def parse_int(text: str) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}") from None
        return int(value)


def parse_n_values(text: str) -> Tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, _, hi = text.partition("..")
        return tuple(range(parse_int(lo), parse_int(hi) + 1))
    return tuple(parse_int(part) for part in text.split(",") if part.strip())


def parse_protocols(text: str) -> Tuple[ProtocolLabel, ...]:
    return tuple(ProtocolLabel(part.strip().lower()) for part in text.split(",") if part.strip())


def parse_format(text: str) -> str:
    text = text.strip().lower()
    if text not in OUTPUT_FORMATS:
        raise ValueError(f"format must be one of {', '.join(OUTPUT_FORMATS)}")
    return text


def parse_verbosity(text: str) -> int:
    value = parse_int(text)
    if value not in VERBOSITY_LEVELS:
        raise ValueError("verbosity must be 0, 1, 2 or 3")
    return value


CONFIG_KEYS: Dict[str, Callable[[str], object]] = {
    "protocols": parse_protocols,
    "n_values": parse_n_values,
    "tau": parse_float,
    "omega": parse_float,
    "trials": parse_int,
    "detuning": DetuningModel.from_text,
    "master_seed": parse_int,
    "phi1": parse_float,
    "composite_arc": lambda text: CompositeArc(text.strip().lower()),
    "output": lambda text: text.strip(),
    "format": parse_format,
    "verbosity": parse_verbosity,
}


def parse_config(text: str) -> RunConfig:
    values = {}
    seen_on = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigParseError(f"expected 'key = value' (line {number})", line=number)
        if key not in CONFIG_KEYS:
            raise ConfigParseError(f"unknown key '{key}' (line {number})", line=number, key=key)
        if key in seen_on:
            raise ConfigParseError(
                f"duplicate key '{key}' (line {number}, first on line {seen_on[key]})",
                line=number,
                key=key,
            )
        if not value.strip():
            raise ConfigParseError(f"missing value for '{key}' (line {number})", line=number, key=key)

        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigParseError(
                f"malformed value for '{key}' (line {number}): {exc}", line=number, key=key
            ) from None
        seen_on[key] = number

    config = RunConfig(**values)
    try:
        config.to_sweep_config().validate()
    except InvalidArgumentError as exc:
        raise ConfigParseError(f"invalid configuration: {exc}") from None
    return config


def load_config(path: Optional[str]) -> RunConfig:
    if not path:
        return RunConfig()
    with open(path, encoding="utf-8") as handle:
        return parse_config(handle.read())


def configure_verbosity(verbosity: int) -> None:
    logging.getLogger("ghzsim").setLevel(VERBOSITY_LEVELS.get(verbosity, logging.INFO))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run `manage.py ghzsim ...` and return its exit code."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")
    from django.core.management import execute_from_command_line

    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        execute_from_command_line(["manage.py", "ghzsim", *argv])
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    return 0
