import math

import numpy as np
import pytest

from cncscsg.core.exceptions import ConfigError
from cncscsg.models.enums import RunMode
from cncscsg.models.optimizer_config import OptimizerConfig, ProblemConstants
from cncscsg.services.parameters import (ROW_B, ROW_GAMMA, admissible_c1_range, admissible_gamma_max,
                                         c1_reference, compute_c, compute_eta, derive_theory_params, eps_h_for,
                                         g_thres_bounds, load_run_file, r_max, read_flat_config,
                                         validate_config)

CONSTS = ProblemConstants(L=2.0, rho=1.0, l=1.5, tau=0.5)


def _admissible_inputs(gen):
    l = float(gen.uniform(0.5, 3.0))
    consts = ProblemConstants(L=float(gen.uniform(0.5, 5.0)), rho=float(gen.uniform(0.2, 5.0)), l=l,
                              tau=float(gen.uniform(0.05, 1.0)) * l ** 2)
    b = int(gen.integers(1, 9))
    n = 8 * b * int(gen.integers(1, 64))
    eps = float(10 ** gen.uniform(-4, -2))
    delta = float(gen.uniform(0.01, 0.5))
    gamma = float(gen.uniform(0.05, 0.95)) * admissible_gamma_max(eps, consts, delta, n, b)
    eta = compute_eta(gamma, consts.L, n, b)
    C = compute_c(eta, consts.L, n, b)
    eps_h = eps_h_for(eps, consts.rho)
    lo, hi = admissible_c1_range(gamma, eta, r_max(eta, C, consts, eps_h), C, consts, eps, eps_h, delta, n, b)
    c1 = math.sqrt(lo * hi)
    return eps, consts, n, b, gamma, delta, c1


def test_practical_defaults_are_accepted():
    assert validate_config(OptimizerConfig(eta=0.5, r=2.0, k_thres=50, n=40)) == []


def test_practical_range_checks():
    cfg = OptimizerConfig(eta=0.0, r=-1.0, delta=1.5, b=50, n=40)
    rows = {v.row for v in validate_config(cfg)}
    assert {"eta", "r", "delta", "b"} <= rows


def _derive_inside_box(eps, consts, n, b, gamma, delta):
    eta = compute_eta(gamma, consts.L, n, b)
    C = compute_c(eta, consts.L, n, b)
    eps_h = eps_h_for(eps, consts.rho)
    lo, hi = admissible_c1_range(gamma, eta, r_max(eta, C, consts, eps_h), C, consts, eps, eps_h, delta, n, b)
    return derive_theory_params(eps, consts, n, b, gamma, delta, c1=math.sqrt(lo * hi))


def test_gamma_above_one_third_names_its_row():
    cfg = _derive_inside_box(1e-3, CONSTS, 400, 5, 1e-9, 0.1).model_copy(update={"gamma": 0.4})
    violations = validate_config(cfg, CONSTS)
    assert any(v.row == ROW_GAMMA and "γ ≤ 1/3" in v.message for v in violations)


def test_batch_above_n_over_eight_names_its_row():
    bad = validate_config(OptimizerConfig(mode=RunMode.THEORY, n=40, b=10, gamma=0.01, g_thres=1.0), CONSTS)
    assert any(v.row == ROW_B and "b ≤ n/8" in v.message for v in bad)
    good = validate_config(OptimizerConfig(mode=RunMode.THEORY, n=40, b=5, gamma=0.01, g_thres=1.0), CONSTS)
    assert not any(v.row == ROW_B for v in good)


def test_theory_mode_needs_constants():
    violations = validate_config(OptimizerConfig(mode=RunMode.THEORY, n=40, b=5))
    assert violations and violations[0].row == "constants"


def test_eps_h_arithmetic():
    assert abs(eps_h_for(0.01, 1.0) - 0.15849) < 1e-5


def test_eps_h_scaling():
    for eps in (1e-2, 3e-3, 1e-4):
        ratio = eps_h_for(eps / 10.0, 2.0) / eps_h_for(eps, 2.0)
        assert abs(ratio - 10 ** -0.4) <= 1e-12


def test_c_tends_to_one_as_gamma_vanishes():
    eta = compute_eta(1e-12, 2.0, 400, 5)
    assert abs(compute_c(eta, 2.0, 400, 5) - 1.0) < 1e-9


def test_large_step_makes_c_undefined():
    with pytest.raises(ConfigError, match="η too large"):
        compute_c(1.0, 2.0, 400, 5)


def test_derived_configs_validate_cleanly():
    gen = np.random.default_rng(2718)
    for _ in range(1000):
        eps, consts, n, b, gamma, delta, c1 = _admissible_inputs(gen)
        cfg = derive_theory_params(eps, consts, n, b, gamma, delta, c1=c1)
        assert validate_config(cfg, consts) == []
        lower, upper_large, upper_saddle = g_thres_bounds(
            cfg.gamma, cfg.eta, cfg.r, compute_c(cfg.eta, consts.L, n, b), c1, consts,
            cfg.resolved_eps_g, cfg.resolved_eps_h, delta, n, b)
        assert lower <= cfg.g_thres <= min(upper_large, upper_saddle) * (1 + 1e-12)


def test_derivation_outside_the_box_is_rejected():
    with pytest.raises(ConfigError) as info:
        derive_theory_params(1e-3, CONSTS, 400, 5, gamma=0.3, delta=0.1)
    assert info.value.violations


def test_c1_reference_is_finite():
    eta = compute_eta(1e-6, CONSTS.L, 400, 5)
    C = compute_c(eta, CONSTS.L, 400, 5)
    assert math.isfinite(c1_reference(eta, C, CONSTS, 400, 5))


def test_tau_cannot_exceed_squared_gradient_bound():
    with pytest.raises(ValueError):
        ProblemConstants(L=1.0, rho=1.0, l=1.0, tau=2.0)


def test_flat_file_rejects_tables(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("eta = 0.5\n[extra]\nx = 1\n")
    with pytest.raises(ConfigError, match="flat"):
        read_flat_config(path)


def test_run_file_unknown_key(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("eta = 0.5\nwarp_speed = 9\n")
    with pytest.raises(ConfigError):
        load_run_file(path)


def test_run_file_splits_keys(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('dataset = "dataset-II"\nmethod = "pgd"\nseed = 3\neta = 0.25\nL = 1.0\nrho = 1.0\nl = 1.0\ntau = 0.5\n')
    spec = load_run_file(path)
    assert (spec.problem.n, spec.problem.d) == (200, 20)
    assert spec.method.value == "pgd" and spec.seed == 3
    assert spec.config.eta == 0.25
    assert spec.constants.tau == 0.5
