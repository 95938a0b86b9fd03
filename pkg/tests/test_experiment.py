import json

import numpy as np
import pytest

from capprov.cli import main
from capprov.costs import total_cost
from capprov.experiment import (
    ExperimentConfig,
    StageError,
    SyntheticSpec,
    load_config,
    run_experiment,
    run_follow_baseline,
    run_no_provisioning,
    sweep_deadline,
    sweep_lookahead,
    synth_workload,
)
from capprov.schedule import CostParams

TRACE_TEXT = """job_id,release_time_s,input_bytes,shuffle_bytes,output_bytes
j1,0,15360,0,701440
j2,30,15360,0,701440
j3,400,134217728,0,134217728
j4,700,15360,0,701440
j5,900,134217728,1342177280,134217728
j6,1200,15360,0,701440
j7,1500,46080,0,1048576
j8,1800,134217728,0,701440
j9,2100,15360,0,701440
j10,2400,15360,0,701440
"""


@pytest.fixture
def trace(tmp_path):
    path = tmp_path / "trace.csv"
    path.write_text(TRACE_TEXT)
    return str(path)


class TestBaselines:
    def test_follow_tracks_the_load(self):
        schedule = run_follow_baseline(np.array([2.0, 6.0, 2.0]))
        assert schedule.m == pytest.approx([2, 6, 2])
        assert schedule.x == pytest.approx([2, 6, 2])

    def test_follow_zero_load(self):
        schedule = run_follow_baseline(np.zeros(4))
        assert schedule.m == pytest.approx(np.zeros(4))

    def test_follow_cost_example(self):
        params = CostParams(e0=1.0, e1=0.0, beta=12.0, fleet=10.0)
        assert total_cost(run_follow_baseline(np.array([2.0, 6.0, 2.0])), params) == 130.0

    def test_no_provisioning_runs_whole_fleet(self):
        params = CostParams(e0=1.0, e1=0.0, beta=12.0, fleet=30.0)
        schedule = run_no_provisioning(np.array([1.0, 2.0, 3.0]), 30.0)
        assert schedule.m == pytest.approx([30, 30, 30])
        assert schedule.x == pytest.approx([1, 2, 3])
        assert total_cost(schedule, params) == pytest.approx(90.0 + 360.0)

    def test_no_provisioning_zero_fleet_zero_load(self):
        schedule = run_no_provisioning(np.zeros(3), 0.0)
        assert total_cost(schedule, CostParams(fleet=1.0)) == 0.0

    def test_no_provisioning_overload_rejected(self):
        with pytest.raises(ValueError):
            run_no_provisioning(np.array([4.0]), 2.0)


class TestSynthWorkload:
    def test_sinusoid_peak_and_trough(self):
        curve = synth_workload(SyntheticSpec(kind="sinusoid", mean=10, pmr=2, period=288,
                                             slots=288))
        assert curve.peak() == pytest.approx(20.0, rel=1e-6)
        assert curve.values.min() == pytest.approx(0.0, abs=1e-9)
        assert curve.values.mean() == pytest.approx(10.0, rel=1e-9)

    def test_flat_when_ratio_is_one(self):
        curve = synth_workload(SyntheticSpec(kind="bursty", mean=7, pmr=1, slots=50))
        assert curve.values == pytest.approx(np.full(50, 7.0))

    def test_deterministic_per_seed(self):
        spec = SyntheticSpec(kind="bursty", mean=5, pmr=4, slots=100, seed=11)
        a = synth_workload(spec)
        b = synth_workload(SyntheticSpec(kind="bursty", mean=5, pmr=4, slots=100, seed=11))
        assert np.array_equal(a.values, b.values)
        c = synth_workload(SyntheticSpec(kind="bursty", mean=5, pmr=4, slots=100, seed=12))
        assert not np.array_equal(a.values, c.values)

    @pytest.mark.parametrize("kind", ["sinusoid", "bursty", "step"])
    @pytest.mark.parametrize("pmr", [1.0, 1.3, 2.0, 3.5, 5.0])
    def test_ratio_within_five_percent(self, kind, pmr):
        curve = synth_workload(SyntheticSpec(kind=kind, mean=9.0, pmr=pmr, period=64,
                                             slots=192, seed=3, noise=0.08))
        realized = curve.peak() / curve.values.mean()
        assert abs(realized - pmr) <= 0.05 * pmr
        assert (curve.values >= 0).all()

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            synth_workload(SyntheticSpec(kind="sawtooth"))

    def test_spec_parser(self):
        spec = SyntheticSpec.parse("step:mean=4,pmr=2.5,period=12,slots=48,seed=9,noise=0.1")
        assert spec.kind == "step" and spec.mean == 4 and spec.pmr == 2.5
        assert spec.period == 12 and spec.slots == 48 and spec.seed == 9
        with pytest.raises(ValueError):
            SyntheticSpec.parse("sinusoid:unknown=4")


class TestConfig:
    def test_file_plus_overrides(self, tmp_path):
        path = tmp_path / "exp.conf"
        path.write_text("# comment\nalgorithm = gcp\ndeadline = 4\nbeta = 6\n"
                        "synthetic = sinusoid:mean=5,pmr=2\ndeadline_pool = 1,2,3\n")
        config = load_config(path, {"beta": 9.0})
        assert config.algorithm == "gcp"
        assert config.deadline == 4
        assert config.beta == 9.0  # flag wins
        assert config.deadline_pool == [1, 2, 3]

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("nonsense = 1\n")
        with pytest.raises(ValueError):
            load_config(path)

    def test_validation_rules(self):
        config = ExperimentConfig(algorithm="vfw", deadline=1, synthetic="sinusoid:")
        with pytest.raises(ValueError):
            config.validate()
        config = ExperimentConfig(algorithm="vfw", deadline=6, delta=6, synthetic="sinusoid:")
        with pytest.raises(ValueError):
            config.validate()
        with pytest.raises(ValueError):
            ExperimentConfig(synthetic=None, trace=None).validate()

    def test_delta_defaults_to_half_deadline(self):
        assert ExperimentConfig(deadline=9).resolved_delta() == 4


class TestRunExperiment:
    def test_follow_vs_itself_saves_nothing(self):
        config = ExperimentConfig(algorithm="follow", synthetic="sinusoid:mean=5,pmr=2",
                                  horizon=48, deadline=2)
        result = run_experiment(config)
        assert result.reports["follow"].savings_vs_baseline == pytest.approx(0.0)

    def test_gcp_with_zero_deadline_matches_follow(self):
        config = ExperimentConfig(algorithm="gcp", synthetic="bursty:mean=4,pmr=3",
                                  horizon=40, deadline=0, seed=5)
        result = run_experiment(config)
        assert result.reports["gcp"].total_cost == pytest.approx(
            result.reports["follow"].total_cost, abs=1e-6)

    def test_schedules_validated_and_padded(self):
        config = ExperimentConfig(algorithm="vfw", synthetic="sinusoid:mean=6,pmr=2,noise=0.1",
                                  horizon=60, deadline=4, seed=2)
        result = run_experiment(config)
        assert result.schedules["vfw"].horizon == result.schedules["follow"].horizon

    def test_stage_error_tags(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("job_id,release_time_s,input_bytes,shuffle_bytes,output_bytes\n")
        config = ExperimentConfig(algorithm="offline", trace=str(empty))
        with pytest.raises(StageError) as info:
            run_experiment(config)
        assert "[ingest]" in str(info.value)

    def test_trace_pipeline_gcp_kmeans(self, trace):
        config = ExperimentConfig(algorithm="gcp", trace=trace, k=3, deadline_pool=[1, 2, 3],
                                  slot_seconds=300)
        result = run_experiment(config)
        assert result.reports["gcp"].total_cost <= result.reports["follow"].total_cost + 1e-9
        assert result.schedules["gcp"].x.sum() == pytest.approx(
            result.curve.total(), abs=1e-6)

    def test_trace_pipeline_dynamic_continuations(self, trace):
        config = ExperimentConfig(algorithm="gcp", trace=trace, k=3, deadline_pool=[2, 3, 6],
                                  dynamic_continuations=True)
        result = run_experiment(config)
        assert result.schedules["gcp"].x.sum() == pytest.approx(result.curve.total(), abs=1e-6)

    def test_output_files_and_determinism(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        base = dict(algorithm="gcp", synthetic="bursty:mean=5,pmr=3", horizon=36,
                    deadline=3, seed=7)
        run_experiment(ExperimentConfig(out_dir=str(out_a), **base))
        run_experiment(ExperimentConfig(out_dir=str(out_b), **base))
        for name in ("workload.csv", "schedule_gcp.csv", "schedule_follow.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        report = json.loads((out_a / "report.json").read_text())
        assert set(report["reports"]) == {"gcp", "follow"}
        assert (out_a / "schedule.png").stat().st_size > 0


class TestSweeps:
    def test_deadline_sweep_offline_is_monotone(self):
        config = ExperimentConfig(algorithm="offline", synthetic="sinusoid:mean=5,pmr=2.5,noise=0.15",
                                  horizon=48, seed=4)
        rows = sweep_deadline(config, deadlines=range(1, 5))
        offline = [r["total_cost"] for r in rows if r["algorithm"] == "offline"]
        assert all(a >= b - 1e-6 for a, b in zip(offline, offline[1:]))
        follow = {r["total_cost"] for r in rows if r["algorithm"] == "follow"}
        assert len(follow) == 1  # deadline-independent

    def test_lookahead_sweep_runs_all_valid_deltas(self):
        config = ExperimentConfig(algorithm="vfw", synthetic="sinusoid:mean=5,pmr=2,noise=0.1",
                                  horizon=36, deadline=5, seed=6)
        rows = sweep_lookahead(config)
        assert [r["delta"] for r in rows] == [1, 2, 3, 4]


class TestCli:
    def test_simulate_writes_bundle(self, tmp_path):
        out = tmp_path / "out"
        code = main(["simulate", "--synthetic", "bursty:mean=4,pmr=3", "--horizon", "30",
                     "--algorithm", "gcp", "--deadline", "2", "--seed", "3",
                     "--out-dir", str(out)])
        assert code == 0
        assert (out / "report.json").exists()
        assert (out / "schedule.png").exists()

    def test_sweep_emits_csv_and_figure(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(["sweep", "--synthetic", "sinusoid:mean=5,pmr=2,noise=0.1",
                     "--horizon", "30", "--start", "1", "--stop", "3",
                     "--out-dir", str(out)])
        assert code == 0
        text = (out / "sweep_deadline.csv").read_text()
        assert text.splitlines()[0] == ("deadline,delta,algorithm,operating_cost,"
                                        "switching_cost,total_cost,savings_vs_follow")
        assert (out / "sweep_deadline.png").exists()

    def test_estimate_and_classify(self, tmp_path, trace, capsys):
        assert main(["estimate", "--trace", trace]) == 0
        assert "1397.760 s, 5 slot(s)" in capsys.readouterr().out
        out = tmp_path / "cls"
        assert main(["classify", "--trace", trace, "--k", "3", "--out-dir", str(out)]) == 0
        lines = (out / "clusters.csv").read_text().splitlines()
        assert lines[0].startswith("cluster,jobs,pct_jobs")
        assert len(lines) == 4

    def test_energy_comparison(self, tmp_path):
        follow = tmp_path / "follow.csv"
        follow.write_text("slot,machine_id,u_cpu,disk_bytes,disk_ops,net_bytes\n"
                          "1,m1,1.0,0,0,0\n")
        lean = tmp_path / "lean.csv"
        lean.write_text("slot,machine_id,u_cpu,disk_bytes,disk_ops,net_bytes\n"
                        "1,m1,0.0,0,0,0\n")
        out = tmp_path / "energy"
        code = main(["energy", "--metrics", f"follow={follow}", "--metrics", f"lean={lean}",
                     "--baseline", "follow", "--out-dir", str(out)])
        assert code == 0
        table = (out / "energy_comparison.csv").read_text().splitlines()
        assert table[0] == "metric,follow,lean,lean_pct_reduction"
        energy_row = table[1].split(",")
        assert float(energy_row[1]) == pytest.approx(7.1666667, abs=1e-5)
        assert float(energy_row[2]) == pytest.approx(5.025, abs=1e-9)
        assert (out / "energy_per_slot.png").exists()

    def test_stage_errors_exit_nonzero(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        code = main(["simulate", "--trace", str(missing), "--algorithm", "offline"])
        assert code != 0
        assert capsys.readouterr().err.strip() != ""

    def test_vfw_requires_valid_delta(self, capsys):
        code = main(["simulate", "--synthetic", "sinusoid:mean=5,pmr=2", "--horizon", "20",
                     "--algorithm", "vfw", "--deadline", "4", "--delta", "4"])
        assert code != 0
