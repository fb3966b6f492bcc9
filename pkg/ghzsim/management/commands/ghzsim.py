from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from ghzsim.cli import OUTPUT_FORMATS, configure_verbosity, load_config
from ghzsim.constants import FIGURE_N_VALUES
from ghzsim.exceptions import (
    CapacityError,
    ConfigParseError,
    DomainError,
    GhzSimError,
    InfeasibleBudgetError,
    InvalidArgumentError,
)
from ghzsim.oracles import ORACLE_SUITES, run_oracle_suite
from ghzsim.protocols import ProtocolLabel
from ghzsim.sweep import DetuningModel, compute_row, reproduce_figure, run_sweep, write_rows

USAGE_ERRORS = (ConfigParseError, InvalidArgumentError, InfeasibleBudgetError, CapacityError, DomainError)


class Command(BaseCommand):
    help = "GHZ magnetometry simulator: run, sweep, figures, check"

    # No database or URL checks are relevant here.
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("action", choices=["run", "sweep", "figures", "check"])
        parser.add_argument("--config", help="key = value run configuration file")
        parser.add_argument("--protocol", choices=[label.value for label in ProtocolLabel])
        parser.add_argument("--n", type=int, help="number of memory spins (run)")
        parser.add_argument("--which", type=int, choices=[1, 2], help="figure number (figures)")
        parser.add_argument("--n-max", type=int, default=FIGURE_N_VALUES[-1], help="largest N (figures)")
        parser.add_argument("--oracle", choices=sorted(ORACLE_SUITES), help="verification suite (check)")
        parser.add_argument("--cases", type=int, default=100, help="random cases (check --oracle dense)")
        parser.add_argument("--seed", type=int, help="master seed")
        parser.add_argument("--delta", type=float, help="uniform detuning override")
        parser.add_argument("--tau", type=float)
        parser.add_argument("--omega", type=float)
        parser.add_argument("--trials", type=int)
        parser.add_argument("--output", help="output file (run, sweep) or directory (figures)")
        parser.add_argument("--format", choices=OUTPUT_FORMATS)

    def handle(self, *args, **options):
        try:
            config = load_config(options["config"])
        except OSError as exc:
            raise CommandError(f"Cannot read config: {exc}", returncode=2)
        except ConfigParseError as exc:
            raise CommandError(str(exc), returncode=2)

        config = config.with_overrides(
            tau=options["tau"],
            omega=options["omega"],
            trials=options["trials"],
            master_seed=options["seed"],
            output=options["output"],
            format=options["format"],
        )
        if options["delta"] is not None:
            config = config.with_overrides(detuning=DetuningModel.uniform(options["delta"]))

        verbosity = options["verbosity"] if options["verbosity"] != 1 else config.verbosity
        if verbosity != 1:
            configure_verbosity(verbosity)

        action = getattr(self, f"_{options['action']}")
        try:
            action(config, options)
        except USAGE_ERRORS as exc:
            raise CommandError(str(exc), returncode=2)
        except OSError as exc:
            raise CommandError(f"I/O error: {exc}", returncode=1)
        except GhzSimError as exc:
            raise CommandError(str(exc), returncode=1)

    # -------------------------------------------------------------------
    # ACTIONS
    # -------------------------------------------------------------------
    def _emit(self, rows, config):
        if config.output:
            write_rows(rows, config.output, config.format)
            self.stdout.write(f"Wrote {len(rows)} row(s) to {config.output}")
        else:
            write_rows(rows, self.stdout, config.format)

    def _run(self, config, options):
        if options["n"] is None:
            raise CommandError("run needs --n", returncode=2)
        label = ProtocolLabel(options["protocol"] or ProtocolLabel.CONVENTIONAL.value)
        sweep_config = config.to_sweep_config(protocols=(label,), n_values=(options["n"],))
        sweep_config.validate()
        self._emit([compute_row(sweep_config, label, options["n"])], config)

    def _sweep(self, config, options):
        sweep_config = config.to_sweep_config()
        if options["protocol"]:
            sweep_config = config.to_sweep_config(protocols=(ProtocolLabel(options["protocol"]),))

        result = run_sweep(sweep_config)
        for label, reason in result.errors.items():
            self.stderr.write(f"{label}: {reason}")
        if not result:
            raise CommandError("No protocol fits the time budget", returncode=1)
        self._emit(result, config)

    def _figures(self, config, options):
        if options["which"] is None:
            raise CommandError("figures needs --which 1|2", returncode=2)
        out_dir = Path(config.output) if config.output else Path(settings.GHZSIM_OUTPUT_DIR)

        datasets = reproduce_figure(
            options["which"],
            out_dir,
            fmt=config.format,
            n_values=range(1, options["n_max"] + 1),
            tau=config.tau,
            omega=config.omega,
            trials=config.trials,
            master_seed=config.master_seed,
            phi1=config.phi1,
            composite_arc=config.composite_arc,
        )
        for panel, (path, rows) in datasets.items():
            self.stdout.write(f"panel {panel}: {len(rows)} row(s) -> {path}")

    def _check(self, config, options):
        name = options["oracle"]
        if name is None:
            raise CommandError("check needs --oracle", returncode=2)

        kwargs = {}
        if name == "dense":
            kwargs = {"cases": options["cases"], "seed": config.master_seed}
        report = run_oracle_suite(name, **kwargs)

        self.stdout.write(report.summary())
        if not report.passed:
            for violation in report.violations:
                self.stderr.write(violation)
            raise CommandError(f"Oracle '{name}' reported violations", returncode=1)

