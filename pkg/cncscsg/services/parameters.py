"""Hyperparameter validation against the convergence-proof constraints.

Theory mode uses eta = (gamma / L) * (b/n)^(2/3) and
k_thres >= C1 / (eta * eps_h) * (n/b) * log(1/eps_h).
"""
import logging
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from pydantic import ValidationError

from cncscsg.core.exceptions import ConfigError
from cncscsg.models.enums import RunMode, StoppingRule
from cncscsg.models.optimizer_config import ConfigViolation, OptimizerConfig, ProblemConstants
from cncscsg.models.run_spec import RunSpec

logger = logging.getLogger(__name__)

# Relative slack for comparisons between a derived value and the bound it was derived from
_REL_SLACK = 1e-12

ROW_GAMMA = "gamma: γ ≤ min{η₀L(n/b)^(2/3), 1/3}"
ROW_ETA = "eta: ηL = γ(b/n)^(2/3)"
ROW_B = "b: b ≤ n/8"
ROW_R = "r: r ≤ min(1/2, η/(CL))·τ/(12ρl³)·ε_h²"
ROW_F_THRES = "f_thres: f_thres ≤ ητrε_h²/(12lρC)"
ROW_K_THRES = "k_thres: 𝒦_thres ≥ C₁/(ηε_h)·(n/b)·log(1/ε_h)"
ROW_G_LARGE = "g_thres: g_thres ≤ γ/(5L)·(n/b)^(1/3)·ε_g²"
ROW_G_INCREASE = "g_thres: g_thres ≥ 10l²γ²/(Lδ)·(b/n)^(1/3)"
ROW_G_SADDLE = "g_thres: g_thres ≤ (n/b)·η²ε_h³τr/(12C₁lρC)·log⁻¹(1/ε_h)"
ROW_EPS = "eps: ε_g = ε, ε_h = (ρε)^(2/5)"
ROW_C = "C: C > 0"


def compute_eta(gamma: float, L: float, n: int, b: int) -> float:
    return gamma / L * (b / n) ** (2.0 / 3.0)


def c_denominator(eta: float, L: float, n: int, b: int) -> float:
    first = (b - eta ** 2 * L ** 2 * n / b - eta * n) * (1.0 - eta * L) / (1.0 + 2.0 * eta)
    return first - L ** 3 * eta ** 2 * n / (2.0 * b)


def compute_c(eta: float, L: float, n: int, b: int) -> float:
    denominator = c_denominator(eta, L, n, b)
    if not denominator > 0:
        raise ConfigError(f"η too large for C > 0 (denominator {denominator:.6g})")
    return b / denominator


def compute_c2(eta: float, C: float, L: float) -> float:
    return min(0.5, eta / (C * L))


def eps_h_for(eps: float, rho: float) -> float:
    return (rho * eps) ** 0.4


def r_max(eta: float, C: float, consts: ProblemConstants, eps_h: float) -> float:
    return compute_c2(eta, C, consts.L) * consts.tau / (12.0 * consts.rho * consts.l ** 3) * eps_h ** 2


def f_thres_max(eta: float, r: float, C: float, consts: ProblemConstants, eps_h: float) -> float:
    return eta * consts.tau * r * eps_h ** 2 / (12.0 * consts.l * consts.rho * C)


def k_thres_min(c1: float, eta: float, eps_h: float, n: int, b: int) -> float:
    return c1 / (eta * eps_h) * (n / b) * math.log(1.0 / eps_h)


def _saddle_numerator(eta: float, r: float, C: float, consts: ProblemConstants,
                      eps_h: float, n: int, b: int) -> float:
    # g_thres saddle bound times C1
    return (n / b) * eta ** 2 * eps_h ** 3 * consts.tau * r / (
        12.0 * consts.l * consts.rho * C * math.log(1.0 / eps_h))


def g_thres_bounds(gamma: float, eta: float, r: float, C: float, c1: float, consts: ProblemConstants,
                   eps_g: float, eps_h: float, delta: float, n: int, b: int) -> Tuple[float, float, float]:
    """(lower, upper for large gradients, upper near saddles)."""
    lower = 10.0 * consts.l ** 2 * gamma ** 2 / (consts.L * delta) * (b / n) ** (1.0 / 3.0)
    upper_large = gamma / (5.0 * consts.L) * (n / b) ** (1.0 / 3.0) * eps_g ** 2
    upper_saddle = _saddle_numerator(eta, r, C, consts, eps_h, n, b) / c1
    return lower, upper_large, upper_saddle


def admissible_gamma_max(eps_g: float, consts: ProblemConstants, delta: float, n: int, b: int,
                         eta0: Optional[float] = None) -> float:
    """Largest gamma for which some C1 makes the three g_thres bounds consistent."""
    gamma_max = min(1.0 / 3.0, delta * eps_g ** 2 * (n / b) ** (2.0 / 3.0) / (50.0 * consts.l ** 2))
    if eta0 is not None:
        gamma_max = min(gamma_max, eta0 * consts.L * (n / b) ** (2.0 / 3.0))
    return gamma_max


def admissible_c1_range(gamma: float, eta: float, r: float, C: float, consts: ProblemConstants,
                        eps_g: float, eps_h: float, delta: float, n: int, b: int) -> Tuple[float, float]:
    lower, upper_large, _ = g_thres_bounds(gamma, eta, r, C, 1.0, consts, eps_g, eps_h, delta, n, b)
    numerator = _saddle_numerator(eta, r, C, consts, eps_h, n, b)
    return numerator / upper_large, numerator / lower


def theory_epoch_budget(eta: float, C: float, c1: float, consts: ProblemConstants,
                        eps: float, delta: float, n: int, b: int) -> int:
    c2 = compute_c2(eta, C, consts.L)
    scale = (b / n) * 288.0 * C * c1 * consts.l ** 4 * consts.f_star_gap / (
        c2 * delta * eta ** 2 * consts.tau ** 2 * eps ** 2)
    budget = scale * math.log(1.0 / (math.sqrt(consts.rho) * eps ** 0.4))
    if not math.isfinite(budget):
        raise ConfigError(f"epoch budget is not finite ({budget})")
    return max(1, math.ceil(budget))


def c1_reference(eta: float, C: float, consts: ProblemConstants, n: int, b: int) -> float:
    """Closed-form C1 lower bound from the k_thres argument; informational only."""
    L, rho, l, tau = consts.L, consts.rho, consts.l, consts.tau
    c2 = compute_c2(eta, C, L)
    slope = eta ** 2 / (36.0 * rho ** 2 * C * L) + eta ** 2 / (72.0 * rho ** 2 * C * L ** 2)
    q = 5.0 * math.log(10.0)
    log_term = math.log(3.0 * 144.0 * rho ** 2 * l ** 6 * b / (2.0 * n * c2 ** 2 * tau ** 3 * eta) * slope)
    ratio = (4.0 * l ** 2 * c2 * tau / (12.0 * rho * l ** 3) + 2.0 * (l * eta) ** 2) / (
        4.0 * eta / (C * L * rho ** 2) + 2.0 * eta ** 2 / (144.0 * C * L ** 2 * rho ** 2))
    return 1.0 + log_term / q + (ratio + 2.0) / q


def _exceeds(value: float, bound: float) -> bool:
    return value > bound + _REL_SLACK * abs(bound)


def _below(value: float, bound: float) -> bool:
    return value < bound - _REL_SLACK * abs(bound)


def _practical_violations(cfg: OptimizerConfig) -> List[ConfigViolation]:
    found: List[ConfigViolation] = []

    def need(ok: bool, row: str, message: str):
        if not ok:
            found.append(ConfigViolation(row=row, message=message))

    need(cfg.eps > 0, "eps", f"ε must be positive, got {cfg.eps}")
    need(cfg.resolved_eps_g > 0, "eps_g", f"ε_g must be positive, got {cfg.resolved_eps_g}")
    need(cfg.resolved_eps_h > 0, "eps_h", f"ε_h must be positive, got {cfg.resolved_eps_h}")
    need(cfg.eta > 0, "eta", f"η must be positive, got {cfg.eta}")
    need(cfg.r > 0, "r", f"r must be positive, got {cfg.r}")
    need(cfg.resolved_sgd_eta > 0, "sgd_eta", f"SGD step size must be positive, got {cfg.resolved_sgd_eta}")
    need(0 < cfg.delta < 1, "delta", f"δ must lie in (0, 1), got {cfg.delta}")
    need(cfg.b >= 1, "b", f"b must be at least 1, got {cfg.b}")
    if cfg.n is not None:
        need(cfg.b <= cfg.n, "b", f"b ≤ n required, got b={cfg.b}, n={cfg.n}")
    need(cfg.k_thres >= 0, "k_thres", f"𝒦_thres must be nonnegative, got {cfg.k_thres}")
    need(cfg.max_epochs >= 0, "max_epochs", f"epoch budget must be nonnegative, got {cfg.max_epochs}")
    need(cfg.f_thres > 0, "f_thres", f"f_thres must be positive, got {cfg.f_thres}")
    need(cfg.stall_tol > 0, "stall_tol", f"stall_tol must be positive, got {cfg.stall_tol}")
    need(cfg.stall_epochs >= 1, "stall_epochs", f"stall_epochs must be at least 1, got {cfg.stall_epochs}")
    need(cfg.pgd_radius > 0, "pgd_radius", f"perturbation radius must be positive, got {cfg.pgd_radius}")
    need(cfg.divergence_bound > 0, "divergence_bound", "divergence bound must be positive")
    if cfg.gamma is not None:
        need(cfg.gamma > 0, "gamma", f"γ must be positive, got {cfg.gamma}")
    if cfg.inner_perturb_every is not None:
        need(cfg.inner_perturb_every >= 1, "inner_perturb_every", "inner perturbation period must be >= 1")
    big = cfg.plugin_batch if cfg.plugin_batch is not None else cfg.n
    small = cfg.plugin_minibatch if cfg.plugin_minibatch is not None else cfg.b
    if big is not None:
        need(1 <= small <= big, "plugin_minibatch", f"b1 ≤ B1 required, got b1={small}, B1={big}")
        if cfg.n is not None:
            need(big <= cfg.n, "plugin_batch", f"B1 ≤ n required, got B1={big}, n={cfg.n}")
    return found


def _theory_violations(cfg: OptimizerConfig, consts: Optional[ProblemConstants]) -> List[ConfigViolation]:
    found: List[ConfigViolation] = []

    def need(ok: bool, row: str, message: str):
        if not ok:
            found.append(ConfigViolation(row=row, message=message))

    if consts is None or min(consts.L, consts.rho, consts.l, consts.tau) <= 0:
        need(False, "constants", "theory mode needs positive L, ρ, l and τ")
        return found
    if cfg.n is None or cfg.gamma is None or cfg.g_thres is None:
        need(cfg.n is not None, "n", "theory mode needs n")
        need(cfg.gamma is not None, ROW_GAMMA, "theory mode needs γ")
        need(cfg.g_thres is not None, ROW_G_SADDLE, "theory mode needs g_thres")
        return found
    n, b = cfg.n, cfg.b
    if b < 1 or b > n:
        return found

    need(b <= n / 8, ROW_B, f"b ≤ n/8 violated: b={b} > {n / 8:g}")
    need(cfg.gamma <= 1.0 / 3.0, ROW_GAMMA, f"γ ≤ 1/3 violated: γ={cfg.gamma}")
    if cfg.eta0 is not None:
        gamma_cap = cfg.eta0 * consts.L * (n / b) ** (2.0 / 3.0)
        need(cfg.gamma <= gamma_cap, ROW_GAMMA, f"γ ≤ η₀L(n/b)^(2/3) violated: γ={cfg.gamma} > {gamma_cap:.6g}")
    target = cfg.gamma * (b / n) ** (2.0 / 3.0)
    need(abs(cfg.eta * consts.L - target) <= 1e-12 * max(abs(target), 1e-300), ROW_ETA,
         f"ηL = {cfg.eta * consts.L:.12g} but γ(b/n)^(2/3) = {target:.12g}")

    eps_g, eps_h = cfg.resolved_eps_g, cfg.resolved_eps_h
    expected_h = eps_h_for(cfg.eps, consts.rho)
    need(eps_g == cfg.eps, ROW_EPS, f"ε_g must equal ε in theory mode, got {eps_g} vs {cfg.eps}")
    need(abs(eps_h - expected_h) <= 1e-12 * expected_h, ROW_EPS,
         f"ε_h must equal (ρε)^(2/5) = {expected_h:.12g}, got {eps_h}")
    need(eps_h < 1, ROW_EPS, f"ε_h must be below 1 for the log(1/ε_h) terms, got {eps_h}")

    denominator = c_denominator(cfg.eta, consts.L, n, b)
    if not denominator > 0:
        need(False, ROW_C, f"η too large for C > 0 (denominator {denominator:.6g})")
        return found
    if not 0 < eps_h < 1:
        return found
    C = b / denominator

    bound_r = r_max(cfg.eta, C, consts, eps_h)
    need(not _exceeds(cfg.r, bound_r), ROW_R, f"r={cfg.r:.6g} exceeds {bound_r:.6g}")
    bound_f = f_thres_max(cfg.eta, cfg.r, C, consts, eps_h)
    need(not _exceeds(cfg.f_thres, bound_f), ROW_F_THRES, f"f_thres={cfg.f_thres:.6g} exceeds {bound_f:.6g}")
    bound_k = k_thres_min(cfg.c1, cfg.eta, eps_h, n, b)
    need(cfg.k_thres >= bound_k, ROW_K_THRES, f"𝒦_thres={cfg.k_thres} below {bound_k:.6g}")

    lower, upper_large, upper_saddle = g_thres_bounds(
        cfg.gamma, cfg.eta, cfg.r, C, cfg.c1, consts, eps_g, eps_h, cfg.delta, n, b)
    need(not _exceeds(cfg.g_thres, upper_large), ROW_G_LARGE,
         f"g_thres={cfg.g_thres:.6g} exceeds {upper_large:.6g}")
    need(not _below(cfg.g_thres, lower), ROW_G_INCREASE, f"g_thres={cfg.g_thres:.6g} below {lower:.6g}")
    need(not _exceeds(cfg.g_thres, upper_saddle), ROW_G_SADDLE,
         f"g_thres={cfg.g_thres:.6g} exceeds {upper_saddle:.6g}")
    return found


def validate_config(cfg: OptimizerConfig, consts: Optional[ProblemConstants] = None) -> List[ConfigViolation]:
    """All violations of the config; empty when it is usable. Never clamps."""
    violations = _practical_violations(cfg)
    if cfg.mode is RunMode.THEORY:
        violations.extend(_theory_violations(cfg, consts))
    for violation in violations:
        logger.debug(f"Config violation {violation}")
    return violations


def ensure_valid(cfg: OptimizerConfig, consts: Optional[ProblemConstants] = None) -> OptimizerConfig:
    violations = validate_config(cfg, consts)
    if violations:
        raise ConfigError("invalid optimizer configuration: " + "; ".join(str(v) for v in violations),
                          violations)
    return cfg


def derive_theory_params(eps: float, consts: ProblemConstants, n: int, b: int, gamma: float,
                         delta: float, c1: float = 1.0, eta0: Optional[float] = None) -> OptimizerConfig:
    """Theory-mode config whose every parameter sits on its constraint."""
    if min(consts.L, consts.rho, consts.l, consts.tau) <= 0:
        raise ConfigError("theory parameters need positive L, ρ, l and τ")
    eta = compute_eta(gamma, consts.L, n, b)
    C = compute_c(eta, consts.L, n, b)
    eps_h = eps_h_for(eps, consts.rho)
    if not 0 < eps_h < 1:
        raise ConfigError(f"ε_h = (ρε)^(2/5) = {eps_h:.6g} must lie in (0, 1)")
    r = r_max(eta, C, consts, eps_h)
    f_thres = f_thres_max(eta, r, C, consts, eps_h)
    k_thres = max(1, math.ceil(k_thres_min(c1, eta, eps_h, n, b)))
    g_thres = _saddle_numerator(eta, r, C, consts, eps_h, n, b) / c1
    cfg = OptimizerConfig(
        mode=RunMode.THEORY, eps=eps, eps_g=eps, eps_h=eps_h, eta=eta, r=r, gamma=gamma, eta0=eta0,
        b=b, n=n, k_thres=k_thres, f_thres=f_thres, g_thres=g_thres, delta=delta, c1=c1,
        max_epochs=theory_epoch_budget(eta, C, c1, consts, eps, delta, n, b),
        stopping_rule=StoppingRule.F_THRES,
    )
    violations = validate_config(cfg, consts)
    if violations:
        raise ConfigError("derived parameters fall outside the admissible box: "
                          + "; ".join(str(v) for v in violations), violations)
    logger.debug(f"Derived theory parameters eta={eta:.6g}, C={C:.6g}, k_thres={k_thres}")
    return cfg


def read_flat_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Flat `key = value` file (TOML syntax, no tables)."""
    path = Path(path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}")
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"{path}: config must be flat, found tables {nested}")
    return data


def build_optimizer_config(values: Mapping[str, Any]) -> OptimizerConfig:
    try:
        return OptimizerConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid optimizer configuration: {e}")


def load_run_file(path: Union[str, Path]) -> RunSpec:
    """Flat run file -> RunSpec; unknown keys are ConfigErrors."""
    spec = RunSpec.from_flat(read_flat_config(path))
    logger.info(f"Loaded run file {path} (problem={spec.problem.kind}, method={spec.method.value})")
    return spec
