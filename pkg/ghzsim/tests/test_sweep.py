# ghzsim/tests/test_sweep.py
import csv
import io
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from ghzsim.constants import CSV_HEADER
from ghzsim.exceptions import InvalidArgumentError
from ghzsim.protocols import CompositeArc, ProtocolLabel
from ghzsim.sweep import (
    DetuningKind,
    DetuningModel,
    SweepConfig,
    SweepResult,
    SweepRow,
    compute_row,
    figure_configs,
    onset_n,
    realize_detunings,
    reproduce_figure,
    run_sweep,
    write_rows,
)

OMEGA = 1e-5


def local_minima(values):
    return [
        i for i in range(1, len(values) - 1)
        if values[i] < values[i - 1] and values[i] < values[i + 1]
    ]


def max_relative_jump(values):
    return max(abs(b - a) / a for a, b in zip(values, values[1:]))


class DetuningModelTest(SimpleTestCase):
    def test_uniform(self):
        deltas = realize_detunings(DetuningModel.uniform(1e-5), 3, master_seed=0)
        np.testing.assert_array_equal(deltas, [1e-5, 1e-5, 1e-5])

    def test_degenerate_interval(self):
        deltas = realize_detunings(DetuningModel.iid_uniform(0.0, 0.0, seed=4), 5, master_seed=0)
        np.testing.assert_array_equal(deltas, np.zeros(5))

    def test_iid_statistics(self):
        deltas = realize_detunings(DetuningModel.iid_uniform(0.0, 1e-5), 100, master_seed=42)
        self.assertTrue(np.all((deltas >= 0) & (deltas < 1e-5)))
        sigma = 1e-5 / math.sqrt(12) / math.sqrt(100)
        self.assertLess(abs(np.mean(deltas) - 5e-6), 4 * sigma)

    def test_iid_is_keyed_on_seed_and_n(self):
        model = DetuningModel.iid_uniform(0.0, 1.0)
        first = realize_detunings(model, 10, master_seed=7)
        np.testing.assert_array_equal(first, realize_detunings(model, 10, master_seed=7))
        self.assertFalse(np.array_equal(first, realize_detunings(model, 10, master_seed=8)))
        self.assertFalse(np.array_equal(first[:9], realize_detunings(model, 9, master_seed=7)))
        pinned = DetuningModel.iid_uniform(0.0, 1.0, seed=7)
        np.testing.assert_array_equal(first, realize_detunings(pinned, 10, master_seed=99))

    def test_explicit(self):
        model = DetuningModel.explicit([1e-6, -2e-6])
        np.testing.assert_array_equal(realize_detunings(model, 2, 0), [1e-6, -2e-6])
        with self.assertRaises(InvalidArgumentError):
            realize_detunings(model, 3, 0)

    def test_empty_interval_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            DetuningModel.iid_uniform(1.0, 0.0)

    def test_text_forms(self):
        self.assertEqual(DetuningModel.from_text("1e-5"), DetuningModel.uniform(1e-5))
        self.assertEqual(DetuningModel.from_text("uniform:2e-6").value, 2e-6)
        model = DetuningModel.from_text("iid:0:1e-5:3")
        self.assertIs(model.kind, DetuningKind.IID_UNIFORM)
        self.assertEqual((model.lo, model.hi, model.seed), (0.0, 1e-5, 3))
        self.assertEqual(DetuningModel.from_text("explicit:1,2").values, (1.0, 2.0))
        for model in (DetuningModel.uniform(0.1), DetuningModel.iid_uniform(0, 0.3, 5), DetuningModel.explicit([0.1])):
            self.assertEqual(DetuningModel.from_text(model.to_text()), model)

    def test_bad_text(self):
        for text in ("gauss:1", "iid:1", "uniform:abc", "iid:2:1"):
            with self.assertRaises(InvalidArgumentError):
                DetuningModel.from_text(text)


class SweepConfigTest(SimpleTestCase):
    def test_validation(self):
        for bad in (
            SweepConfig(protocols=()),
            SweepConfig(n_values=()),
            SweepConfig(n_values=(3, 2)),
            SweepConfig(n_values=(0, 1)),
            SweepConfig(trials=0),
            SweepConfig(omega=0.0),
        ):
            with self.assertRaises(InvalidArgumentError):
                bad.validate()

    def test_dict_round_trip(self):
        config = SweepConfig(
            protocols=("composite",),
            n_values=(1, 4),
            detuning=DetuningModel.iid_uniform(0, 1e-5, 2),
            composite_arc="short",
        )
        self.assertEqual(SweepConfig.from_dict(config.to_dict()), config)
        self.assertIs(config.composite_arc, CompositeArc.SHORT)


class ComputeRowTest(SimpleTestCase):
    def test_ideal_rows_follow_closed_form(self):
        config = SweepConfig(n_values=tuple(range(1, 11)))
        for label in ProtocolLabel:
            for n in config.n_values:
                row = compute_row(config, label, n)
                p = 0.5 + math.sin(n * OMEGA * row.t_ex) / 2
                self.assertAlmostEqual(row.p_plus_y, p, delta=1e-9)
                ideal = math.sqrt(4 * p * (1 - p) / row.trials) / (n * row.t_ex * OMEGA)
                self.assertAlmostEqual(row.rsd / ideal, 1.0, delta=1e-4)
                self.assertAlmostEqual(
                    row.rsd ** 2, (row.est_std ** 2 + row.est_bias ** 2) / OMEGA ** 2, delta=1e-10 * row.rsd ** 2
                )

    def test_conventional_bias_tracks_detuning(self):
        delta = 1e-6
        config = SweepConfig(protocols=("conventional",), detuning=DetuningModel.uniform(delta))
        for n in (1, 5, 10):
            row = compute_row(config, ProtocolLabel.CONVENTIONAL, n)
            expected = (2 * math.pi / row.t_ex + 1) * delta
            self.assertLess(abs(row.est_bias / expected - 1), 0.01)

    def test_digest_and_seed(self):
        config = SweepConfig(detuning=DetuningModel.explicit([1e-6, 3e-6]), master_seed=5)
        row = compute_row(config, "appendix", 2)
        self.assertEqual((row.delta_min, row.delta_max), (1e-6, 3e-6))
        self.assertAlmostEqual(row.delta_sum, 4e-6, places=20)
        self.assertEqual(row.seed, 5)
        self.assertEqual(SweepRow.from_dict(row.to_dict()), row)

    def test_record_writes_plain_floats_for_numpy_scalars(self):
        row = compute_row(SweepConfig(), "conventional", 3)
        data = row.to_dict()
        data.update(p_plus_y=np.float64(row.p_plus_y), rsd=np.float64(row.rsd))
        record = dict(zip(CSV_HEADER, SweepRow.from_dict(data).as_record()))
        self.assertEqual(record["p_plus_y"], repr(float(row.p_plus_y)))
        self.assertEqual(float(record["rsd"]), float(row.rsd))
        self.assertNotIn("np.", ",".join(record.values()))


class RunSweepTest(SimpleTestCase):
    def setUp(self):
        self.config = SweepConfig(
            n_values=tuple(range(1, 31)),
            detuning=DetuningModel.iid_uniform(0.0, OMEGA),
        )

    def test_order_and_determinism(self):
        result = run_sweep(self.config, backend="threads", max_workers=4)
        self.assertIsInstance(result, SweepResult)
        self.assertEqual(len(result), 90)
        self.assertEqual(
            [(row.protocol, row.n_spins) for row in result],
            [(label.value, n) for label in ProtocolLabel for n in range(1, 31)],
        )
        self.assertEqual(list(result), list(run_sweep(self.config, backend="threads", max_workers=4)))

    def test_threads_match_sequential(self):
        parallel = run_sweep(self.config, backend="threads", max_workers=8)
        sequential = run_sweep(self.config, backend="threads", max_workers=1)
        self.assertEqual(list(parallel), list(sequential))

    def test_protocols_share_detunings_per_n(self):
        result = run_sweep(self.config, backend="threads")
        conventional = result.for_protocol("conventional")
        composite = result.for_protocol(ProtocolLabel.COMPOSITE)
        self.assertEqual([r.delta_sum for r in conventional], [r.delta_sum for r in composite])

    def test_infeasible_protocol_is_reported(self):
        config = SweepConfig(tau=20 * math.pi, n_values=(1, 2))
        result = run_sweep(config, backend="threads")
        self.assertIn("composite", result.errors)
        self.assertEqual({row.protocol for row in result}, {"conventional", "appendix"})

    def test_unknown_backend(self):
        with self.assertRaises(InvalidArgumentError):
            run_sweep(self.config, backend="mpi")


class CelerySweepTest(SimpleTestCase):
    def setUp(self):
        from config.celery import app

        self.app = app
        self.saved_eager = app.conf.task_always_eager
        app.conf.task_always_eager = True

    def tearDown(self):
        self.app.conf.task_always_eager = self.saved_eager

    def test_celery_backend_matches_threads(self):
        config = SweepConfig(n_values=(1, 2, 3), detuning=DetuningModel.iid_uniform(0.0, OMEGA))
        self.assertEqual(
            list(run_sweep(config, backend="celery")),
            list(run_sweep(config, backend="threads")),
        )


class OutputTest(SimpleTestCase):
    def test_csv_round_trip(self):
        result = run_sweep(SweepConfig(n_values=(1, 7)), backend="threads")
        buffer = io.StringIO()
        write_rows(result, buffer)

        lines = buffer.getvalue().split("\n")
        self.assertEqual(lines[0], ",".join(CSV_HEADER))
        records = list(csv.reader(io.StringIO(buffer.getvalue())))[1:]
        self.assertEqual(len(records), len(result))
        for record, row in zip(records, result):
            self.assertEqual(float(record[CSV_HEADER.index("rsd")]), row.rsd)
            self.assertEqual(float(record[CSV_HEADER.index("p_plus_y")]), row.p_plus_y)
            self.assertEqual(int(record[CSV_HEADER.index("N")]), row.n_spins)

    def test_tsv_and_bad_format(self):
        rows = [compute_row(SweepConfig(), "conventional", 1)]
        buffer = io.StringIO()
        write_rows(rows, buffer, fmt="tsv")
        self.assertEqual(buffer.getvalue().splitlines()[0], "\t".join(CSV_HEADER))
        with self.assertRaises(InvalidArgumentError):
            write_rows(rows, buffer, fmt="xlsx")

    def test_reproduce_figure_is_deterministic(self):
        with tempfile.TemporaryDirectory() as tmp:
            first = reproduce_figure(2, Path(tmp) / "one", n_values=range(1, 6), backend="threads")
            second = reproduce_figure(2, Path(tmp) / "two", n_values=range(1, 6), backend="threads")
            self.assertEqual(sorted(first), ["a", "b"])
            for panel in ("a", "b"):
                path, rows = first[panel]
                self.assertEqual(path.name, f"figure2{panel}.csv")
                self.assertEqual(len(rows), 15)
                self.assertEqual(path.read_bytes(), second[panel][0].read_bytes())

    def test_figure_configs(self):
        configs = figure_configs(1, n_values=(1, 2))
        self.assertEqual(configs["a"].detuning, DetuningModel.uniform(OMEGA))
        self.assertEqual(configs["b"].detuning, DetuningModel.uniform(0.1 * OMEGA))
        configs = figure_configs(2, n_values=(1,), omega=2e-5)
        self.assertEqual(configs["b"].detuning, DetuningModel.iid_uniform(0.0, 0.1 * 2e-5))
        self.assertEqual(configs["b"].omega, 2e-5)
        with self.assertRaises(InvalidArgumentError):
            figure_configs(3)


class FigureOneTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        configs = figure_configs(1, n_values=range(1, 2001), protocols=("conventional",))
        cls.strong = run_sweep(configs["a"], backend="threads")
        cls.weak = run_sweep(configs["b"], backend="threads")

    def test_single_spin_tracks_heisenberg_at_weak_detuning(self):
        row = self.weak[0]
        self.assertEqual(row.n_spins, 1)
        self.assertLessEqual(row.rsd / row.heisenberg_ref, 2.0)

    def test_conventional_degrades_at_large_n(self):
        rsd = [row.rsd for row in self.strong[:500]]
        self.assertGreaterEqual(rsd[499], 5 * min(rsd))
        self.assertGreaterEqual(rsd[499] / self.strong[499].heisenberg_ref, 5)

    def test_conventional_recurs(self):
        rsd = [row.rsd for row in self.strong[99:]]
        self.assertGreaterEqual(len(local_minima(rsd)), 2)

    def test_weaker_detuning_delays_onset(self):
        strong_onset = onset_n(self.strong)
        weak_onset = onset_n(self.weak)
        self.assertIsNotNone(strong_onset)
        self.assertTrue(weak_onset is None or weak_onset > strong_onset)

    def test_composite_beats_conventional_at_large_n(self):
        # conventional bias crosses zero near N = 313
        n_values = tuple(n for n in range(100, 1001, 3) if not 300 <= n <= 330)
        config = figure_configs(1, n_values=n_values, protocols=("conventional", "composite"))["a"]
        result = run_sweep(config, backend="threads")
        for composite, conventional in zip(result.for_protocol("composite"), result.for_protocol("conventional")):
            self.assertLessEqual(composite.rsd, conventional.rsd, f"N={composite.n_spins}")


class FigureTwoTest(SimpleTestCase):
    def test_composite_suppresses_fluctuations(self):
        config = figure_configs(2, n_values=range(100, 1001), protocols=("conventional", "composite"))["a"]
        result = run_sweep(config, backend="threads")
        composite = [row.rsd for row in result.for_protocol("composite")]
        conventional = [row.rsd for row in result.for_protocol("conventional")]
        self.assertLess(max_relative_jump(composite), max_relative_jump(conventional))
