"""Experiment execution and trace export."""
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np

from cncscsg.core.config import settings
from cncscsg.core.exceptions import ExperimentError
from cncscsg.models.enums import MethodKind, TerminationReason
from cncscsg.models.run_spec import ProblemSpec, RunSpec, SaddleProblemSpec
from cncscsg.models.trace import Trace
from cncscsg.optim.baselines import baseline_run
from cncscsg.optim.cnc_scsg import cnc_scsg_run
from cncscsg.optim.framework import framework_run, scsg_epoch_plugin
from cncscsg.optim.state import IfoMeter
from cncscsg.problems import (FiniteSumProblem, QuadraticSaddleSpec, generate_dataset, make_quadratic_saddle,
                              make_sigmoid_problem, read_dataset_csv, saddle_noise)
from cncscsg.services.sampling import Rng
from cncscsg.services.spectral import lambda_min

logger = logging.getLogger(__name__)

ESCAPE_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


def build_problem(spec: ProblemSpec) -> FiniteSumProblem:
    if isinstance(spec, SaddleProblemSpec):
        noise = saddle_noise(spec.n, spec.spectrum, spec.noise, scale=spec.noise_scale, seed=spec.noise_seed)
        return make_quadratic_saddle(QuadraticSaddleSpec(
            spectrum=np.asarray(spec.spectrum), noise=noise, quartic=spec.quartic,
            gradient_bound=spec.gradient_bound))
    if spec.data_path:
        data = read_dataset_csv(spec.data_path, seed=spec.data_seed)
    else:
        data = generate_dataset(spec.n, spec.d, spec.data_seed)
    return make_sigmoid_problem(data, spec.lam, remap_labels=spec.remap_labels, bound_draws=spec.bound_draws)


def initial_point(spec: RunSpec, problem: FiniteSumProblem, rng: Rng) -> np.ndarray:
    if spec.x0 is not None:
        return problem._point(spec.x0).copy()
    return rng.normal(problem.d)


def run_experiment(spec: RunSpec) -> Trace:
    """Build the problem and method from `spec`, run it, and return the terminated trace."""
    rng = Rng(spec.seed)
    problem = build_problem(spec.problem)
    x0 = initial_point(spec, problem, rng)
    meter = IfoMeter(spec.ifo_convention)
    cfg = spec.config
    logger.info(f"Run started: method={spec.method.value}, problem={problem.metadata.name}, "
                f"n={problem.n}, d={problem.d}, seed={spec.seed}")

    common = dict(x0=x0, meter=meter, probe_every=spec.probe_every, constants=spec.constants)
    if spec.method is MethodKind.FRAMEWORK:
        plugin = scsg_epoch_plugin(cfg.plugin_batch or problem.n, cfg.plugin_minibatch or cfg.b, cfg.eta,
                                   divergence_bound=cfg.divergence_bound)
        trace = framework_run(problem, plugin, cfg, rng, **common)
    elif spec.method is MethodKind.CNC_SCSG:
        trace = cnc_scsg_run(problem, cfg, rng, **common)
    else:
        trace = baseline_run(spec.method, problem, cfg, rng, **common)

    summary = trace.summary
    x_final = np.asarray(summary.x_final)
    if np.all(np.isfinite(x_final)):
        try:
            # independent of how many per-epoch spectral checks ran
            summary.final_lambda_min = lambda_min(problem, x_final, rng=Rng(spec.seed)).lambda_min_hat
        except ValueError as e:
            logger.warning(f"Final spectral probe failed: {e}")
    summary.hvp_calls = problem.hvp_calls
    summary.method = spec.method.value
    summary.seed = spec.seed
    summary.x0 = [float(v) for v in x0]
    logger.info(f"Run finished: reason={summary.reason.value}, epochs={summary.epochs}, ifo={summary.total_ifo}")
    return trace


def summary_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".summary.json")


def write_trace(trace: Trace, path: Union[str, Path]) -> Path:
    """CSV rows plus a `<stem>.summary.json` sidecar with the terminal summary."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        trace.to_frame().to_csv(path, index=False)
        summary_path(path).write_text(json.dumps(trace.summary_json(), indent=2))
    except OSError as e:
        logger.error(f"Could not write trace to {path}: {e}")
        raise ExperimentError(f"could not write trace to {path}: {e}")
    logger.info(f"Trace written: {path} ({len(trace.rows)} rows)")
    return path


def escape_epoch(trace: Trace, eps: float, plateau_epochs: int = 3, rel_drop: float = 0.01) -> Optional[int]:
    """First epoch at which f falls below plateau - rel_drop * |plateau| after a plateau.

    A plateau is `plateau_epochs` consecutive rows with grad_norm <= eps, or a
    row where a perturbation fired. None when no plateau is followed by an escape.
    """
    run = 0
    plateau: Optional[float] = None
    for row in trace.rows:
        if plateau is not None and row.f < plateau - rel_drop * abs(plateau):
            return row.epoch
        run = run + 1 if row.grad_norm <= eps else 0
        if run >= plateau_epochs or row.perturbed:
            if plateau is None:
                plateau = row.f
    return None


def _run_and_write(spec: RunSpec, path: str) -> Dict[str, Any]:
    trace = run_experiment(spec)
    write_trace(trace, path)
    summary = trace.summary
    return {
        "seed": spec.seed,
        "path": path,
        "reason": summary.reason.value,
        "epochs": summary.epochs,
        "total_ifo": summary.total_ifo,
        "final_grad_norm": summary.final_grad_norm,
        "final_lambda_min": summary.final_lambda_min,
        "escape_epoch": escape_epoch(trace, spec.config.eps),
    }


def _quantiles(values: List[float]) -> Dict[str, Optional[float]]:
    if not values:
        return {f"q{int(q * 100)}": None for q in ESCAPE_QUANTILES}
    return {f"q{int(q * 100)}": float(np.quantile(values, q)) for q in ESCAPE_QUANTILES}


def aggregate(results: List[Dict[str, Any]], eps_g: float, eps_h: float) -> Dict[str, Any]:
    escapes = [r["escape_epoch"] for r in results if r["escape_epoch"] is not None]
    reasons: Dict[str, int] = {}
    for r in results:
        reasons[r["reason"]] = reasons.get(r["reason"], 0) + 1
    second_order = [
        r for r in results
        if np.isfinite(r["final_grad_norm"]) and r["final_grad_norm"] <= eps_g
        and r["final_lambda_min"] is not None and r["final_lambda_min"] >= -eps_h
    ]
    return {
        "runs": len(results),
        "reasons": reasons,
        "escaped": len(escapes),
        "escape_epoch": _quantiles(escapes),
        "final_grad_norm_median": float(np.median([r["final_grad_norm"] for r in results])) if results else None,
        "second_order_fraction": len(second_order) / len(results) if results else None,
        "seeds": results,
    }


def sweep(spec: RunSpec, seeds: Iterable[int], out_dir: Union[str, Path],
          workers: Optional[int] = None) -> Dict[str, Any]:
    """One trace per seed under out_dir, then `aggregate.json` once every run is done."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = workers or settings.sweep_workers
    jobs = [(spec.with_overrides(seed=seed), str(out_dir / f"seed_{seed:04d}.csv")) for seed in seeds]
    logger.info(f"Sweep started: {len(jobs)} runs of {spec.method.value} with {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_and_write, job_spec, path) for job_spec, path in jobs]
            results = [future.result() for future in futures]
    else:
        results = [_run_and_write(job_spec, path) for job_spec, path in jobs]

    summary = aggregate(results, spec.config.resolved_eps_g, spec.config.resolved_eps_h)
    (out_dir / "aggregate.json").write_text(json.dumps(summary, indent=2))
    logger.info(f"Sweep finished: {summary['escaped']}/{summary['runs']} runs escaped, reasons {summary['reasons']}")
    return summary


def certify(problem: FiniteSumProblem, x, eps_g: float, eps_h: float, seed: int = 0) -> Dict[str, Any]:
    """Spectral report at x plus the (eps_g, eps_h) second-order verdict."""
    x = problem._point(x)
    report = lambda_min(problem, x, rng=Rng(seed))
    with problem.uncounted():
        grad_norm = float(np.linalg.norm(problem.grad_full(x)))
    return {
        **report.to_json(),
        "grad_norm": grad_norm,
        "eps_g": eps_g,
        "eps_h": eps_h,
        "second_order_stationary": bool(grad_norm <= eps_g and report.lambda_min_hat >= -eps_h),
    }


def is_failure(trace: Trace) -> bool:
    return trace.summary is not None and trace.summary.reason is TerminationReason.DIVERGED
