# ghzsim/tests/test_cli.py
import contextlib
import io
import math
import tempfile
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from ghzsim.cli import RunConfig, load_config, main, parse_config, parse_float, parse_n_values
from ghzsim.constants import CSV_HEADER
from ghzsim.exceptions import ConfigParseError
from ghzsim.protocols import CompositeArc, ProtocolLabel
from ghzsim.sweep import DetuningKind


def run_main(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class ParseConfigTest(SimpleTestCase):
    def test_empty_file_gives_defaults(self):
        config = parse_config("")
        self.assertEqual(config.tau, 100 * math.pi)
        self.assertEqual(config.omega, 1e-5)
        self.assertEqual(config.trials, 1_000_000)
        self.assertEqual(config.master_seed, 42)
        self.assertEqual(config.phi1, 0.0)
        self.assertEqual(config.protocols, tuple(ProtocolLabel))

    def test_full_file(self):
        config = parse_config(
            "# figure run\n"
            "protocols = conventional, appendix\n"
            "n_values = 1..3   # inclusive\n"
            "tau = 314.1592653589793\n"
            "detuning = iid:0:1e-5\n"
            "composite_arc = short\n"
            "format = tsv\n"
            "verbosity = 2\n"
        )
        self.assertEqual(config.protocols, (ProtocolLabel.CONVENTIONAL, ProtocolLabel.APPENDIX))
        self.assertEqual(config.n_values, (1, 2, 3))
        self.assertEqual(config.tau, 100 * math.pi)
        self.assertIs(config.detuning.kind, DetuningKind.IID_UNIFORM)
        self.assertIs(config.composite_arc, CompositeArc.SHORT)
        self.assertEqual((config.format, config.verbosity), ("tsv", 2))

    def test_unknown_key(self):
        with self.assertRaises(ConfigParseError) as ctx:
            parse_config("detunin = 1e-5")
        self.assertEqual(str(ctx.exception), "unknown key 'detunin' (line 1)")
        self.assertEqual((ctx.exception.line, ctx.exception.key), (1, "detunin"))

    def test_line_errors(self):
        cases = {
            "tau = abc": "malformed value for 'tau' (line 1)",
            "\ntrials =": "missing value for 'trials' (line 2)",
            "tau 5": "expected 'key = value' (line 1)",
            "tau = 5\ntau = 6": "duplicate key 'tau' (line 2, first on line 1)",
            "verbosity = 7": "malformed value for 'verbosity'",
            "protocols = ghz": "malformed value for 'protocols'",
        }
        for text, message in cases.items():
            with self.assertRaises(ConfigParseError, msg=text) as ctx:
                parse_config(text)
            self.assertIn(message, str(ctx.exception))

    def test_semantic_validation(self):
        with self.assertRaises(ConfigParseError):
            parse_config("omega = 0")
        with self.assertRaises(ConfigParseError):
            parse_config("n_values = 5, 3")

    def test_value_parsers(self):
        self.assertEqual(parse_float("2pi"), 2 * math.pi)
        self.assertEqual(parse_float("pi"), math.pi)
        self.assertEqual(parse_float("2.5*pi"), 2.5 * math.pi)
        self.assertEqual(parse_n_values("1, 4,9"), (1, 4, 9))
        self.assertEqual(parse_n_values("2..2"), (2,))
        with self.assertRaises(ValueError):
            parse_float("inf")

    def test_overrides_ignore_none(self):
        config = RunConfig().with_overrides(tau=None, trials=10)
        self.assertEqual(config.trials, 10)
        self.assertEqual(config.tau, 100 * math.pi)
        self.assertEqual(config.to_sweep_config(n_values=(3,)).n_values, (3,))

    def test_load_config(self):
        self.assertEqual(load_config(None), RunConfig())
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.conf"
            path.write_text("trials = 1000\n", encoding="utf-8")
            self.assertEqual(load_config(str(path)).trials, 1000)


class RunCommandTest(SimpleTestCase):
    def test_run_prints_one_row(self):
        out = io.StringIO()
        call_command("ghzsim", "run", "--protocol", "conventional", "--n", "10", stdout=out)
        lines = out.getvalue().strip().split("\n")
        self.assertEqual(lines[0], ",".join(CSV_HEADER))
        record = dict(zip(CSV_HEADER, lines[1].split(",")))
        self.assertEqual(record["protocol"], "conventional")
        self.assertAlmostEqual(float(record["p_plus_y"]), 0.5150774, places=7)

    def test_run_requires_n(self):
        with self.assertRaises(CommandError):
            call_command("ghzsim", "run", stdout=io.StringIO())

    def test_run_with_config_and_delta(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / "run.conf"
            config.write_text("trials = 1000\nformat = tsv\n", encoding="utf-8")
            out = io.StringIO()
            call_command(
                "ghzsim", "run", "--n", "2", "--protocol", "appendix",
                "--config", str(config), "--delta", "1e-6", stdout=out,
            )
        header, row = out.getvalue().strip().split("\n")
        record = dict(zip(header.split("\t"), row.split("\t")))
        self.assertEqual(record["M"], "1000")
        self.assertEqual(float(record["delta_sum"]), 2e-6)


class MainExitCodeTest(SimpleTestCase):
    def test_success(self):
        code, out, _ = run_main("run", "--n", "1")
        self.assertEqual(code, 0)
        self.assertIn("conventional,1,", out)

    def test_usage_errors_exit_two(self):
        self.assertEqual(run_main("run")[0], 2)
        self.assertEqual(run_main("launch")[0], 2)
        self.assertEqual(run_main("run", "--n", "1", "--tau", "2.0")[0], 2)
        self.assertEqual(run_main("run", "--n", "1", "--config", "/nonexistent/run.conf")[0], 2)
        self.assertEqual(run_main("check")[0], 2)

    def test_bad_config_names_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.conf"
            path.write_text("tau = 1\ndetunin = 1e-5\n", encoding="utf-8")
            code, _, err = run_main("sweep", "--config", str(path))
        self.assertEqual(code, 2)
        self.assertIn("unknown key 'detunin' (line 2)", err)

    def test_empty_sweep_exits_one(self):
        code, _, err = run_main("sweep", "--tau", "2.0")
        self.assertEqual(code, 1)
        self.assertIn("conventional", err)

    def test_dense_check(self):
        code, out, _ = run_main("check", "--oracle", "dense", "--cases", "5")
        self.assertEqual(code, 0)
        self.assertIn("dense: 5 case(s)", out)

    def test_figures_are_byte_identical(self):
        with tempfile.TemporaryDirectory() as tmp:
            for name in ("one", "two"):
                code, out, _ = run_main(
                    "figures", "--which", "1", "--n-max", "4", "--output", str(Path(tmp) / name)
                )
                self.assertEqual(code, 0)
                self.assertIn("panel a: 12 row(s)", out)
            for panel in ("a", "b"):
                first = (Path(tmp) / "one" / f"figure1{panel}.csv").read_bytes()
                second = (Path(tmp) / "two" / f"figure1{panel}.csv").read_bytes()
                self.assertEqual(first, second)
                self.assertEqual(len(first.decode().splitlines()), 13)
