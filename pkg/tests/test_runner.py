import json

import numpy as np
import pandas as pd
import pytest

from cncscsg.core.exceptions import ConfigError
from cncscsg.models import RunSpec, SaddleProblemSpec, SigmoidProblemSpec
from cncscsg.models.enums import MethodKind, TerminationReason
from cncscsg.models.optimizer_config import OptimizerConfig
from cncscsg.models.trace import TRACE_COLUMNS, Trace, TraceRow
from cncscsg.runner import (build_problem, certify, escape_epoch, run_experiment, summary_path, sweep,
                            write_trace)


def small_spec(**updates) -> RunSpec:
    spec = RunSpec(problem=SigmoidProblemSpec(n=20, d=2, bound_draws=0),
                   config=OptimizerConfig(max_epochs=3, k_thres=1))
    return spec.model_copy(update=updates)


def test_zero_epoch_budget_writes_a_header_only_trace(tmp_path):
    spec = small_spec(config=OptimizerConfig(max_epochs=0), method=MethodKind.GD)
    path = write_trace(run_experiment(spec), tmp_path / "gd.csv")
    assert path.read_text().splitlines() == [",".join(TRACE_COLUMNS)]
    summary = json.loads(summary_path(path).read_text())
    assert summary["reason"] == "budget"
    assert summary["epochs"] == 0


def test_trace_rows_and_ifo_order(tmp_path):
    path = write_trace(run_experiment(small_spec()), tmp_path / "run.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == TRACE_COLUMNS
    assert list(frame["epoch"]) == [0, 1, 2]
    assert (frame["ifo"].diff().dropna() >= 0).all()


def test_reruns_are_byte_identical(tmp_path):
    spec = small_spec(seed=42)
    first = write_trace(run_experiment(spec), tmp_path / "a.csv")
    second = write_trace(run_experiment(spec), tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
    assert summary_path(first).read_bytes() == summary_path(second).read_bytes()


def test_spectral_probes_leave_the_iterates_alone():
    plain = run_experiment(small_spec(seed=3))
    probed = run_experiment(small_spec(seed=3, probe_every=1))
    assert probed.column("f") == plain.column("f")
    assert probed.column("ifo") == plain.column("ifo")
    assert all(lam is not None for lam in probed.column("lambda_min"))
    assert all(lam is None for lam in plain.column("lambda_min"))
    assert probed.summary.final_lambda_min == plain.summary.final_lambda_min


def test_summary_fields():
    spec = small_spec(seed=5)
    summary = run_experiment(spec).summary_json()
    assert summary["method"] == "cnc_scsg"
    assert summary["seed"] == 5
    assert summary["ifo_convention"] == "paper"
    assert len(summary["x0"]) == len(summary["x_final"]) == 2
    assert summary["final_lambda_min"] is not None
    assert isinstance(summary["perturbations"], list)


def _synthetic(fs, grads, perturbed=()):
    trace = Trace()
    for epoch, (f, g) in enumerate(zip(fs, grads)):
        trace.append(TraceRow(epoch=epoch, f=f, grad_norm=g, ifo=epoch, perturbed=epoch in perturbed))
    return trace


def test_escape_epoch_after_a_stationary_plateau():
    trace = _synthetic([1.0, 1.0, 1.0, 1.0, 0.995, 0.5], [0.0] * 6)
    assert escape_epoch(trace, eps=1e-3) == 5


def test_escape_epoch_after_a_perturbation():
    trace = _synthetic([2.0, 0.0, -0.5], [1.0, 1.0, 1.0], perturbed={1})
    assert escape_epoch(trace, eps=1e-3) == 2


def test_escape_epoch_without_an_escape():
    assert escape_epoch(_synthetic([1.0] * 6, [0.0] * 6), eps=1e-3) is None
    assert escape_epoch(_synthetic([3.0, 2.0, 1.0], [1.0] * 3), eps=1e-3) is None


def test_sweep_writes_traces_and_aggregate(tmp_path):
    summary = sweep(small_spec(), [0, 1, 2], tmp_path, workers=1)
    assert summary["runs"] == 3
    assert sum(summary["reasons"].values()) == 3
    for seed in range(3):
        assert (tmp_path / f"seed_{seed:04d}.csv").exists()
    on_disk = json.loads((tmp_path / "aggregate.json").read_text())
    assert on_disk["runs"] == 3
    assert set(on_disk["escape_epoch"]) == {"q10", "q25", "q50", "q75", "q90"}


def test_presets_and_problem_kinds():
    spec = RunSpec.from_flat({"dataset": "dataset-II", "eta": 0.2})
    assert (spec.problem.n, spec.problem.d) == (200, 20)
    assert spec.config.eta == 0.2
    saddle = RunSpec.from_flat({"problem": "saddle", "spectrum": [1.0, -2.0], "quartic": 1.0})
    assert isinstance(saddle.problem, SaddleProblemSpec)
    assert saddle.problem.d == 2
    with pytest.raises(ConfigError):
        RunSpec.from_flat({"dataset": "dataset-III"})
    with pytest.raises(ConfigError):
        RunSpec.from_flat({"problem": "saddle", "dataset": "dataset-I"})


def test_certify_the_quartic_minimum():
    problem = build_problem(SaddleProblemSpec(quartic=1.0))
    report = certify(problem, np.array([0.0, 1.0]), eps_g=1e-6, eps_h=0.1)
    assert report["second_order_stationary"]
    assert report["lambda_min"] == pytest.approx(2.0, abs=1e-5)
    saddle_report = certify(problem, np.zeros(2), eps_g=1e-6, eps_h=0.1)
    assert not saddle_report["second_order_stationary"]


def test_run_with_theory_mode_needs_constants():
    spec = small_spec(config=OptimizerConfig(mode="theory", gamma=0.1, g_thres=1e-6))
    with pytest.raises(ConfigError):
        run_experiment(spec)


def test_divergence_ends_the_run_cleanly():
    spec = RunSpec(problem=SaddleProblemSpec(), method=MethodKind.GD, x0=[0.0, 1.0],
                   config=OptimizerConfig(eta=1.0, max_epochs=100, divergence_bound=1e3))
    trace = run_experiment(spec)
    assert trace.summary.reason is TerminationReason.DIVERGED
    assert np.isfinite(trace.summary.final_f)
