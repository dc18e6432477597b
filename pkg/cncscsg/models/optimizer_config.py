from typing import Optional

from pydantic import BaseModel, Field, model_validator

from cncscsg.models.enums import FirstOrderCheck, RunMode, StoppingRule

DEFAULT_EPS_H = 0.1


class OptimizerConfig(BaseModel):
    """Hyperparameters of every optimizer in the package.

    Range invariants are not enforced at construction; `validate_config`
    reports them as violations so a bad file can be explained in full.
    """

    mode: RunMode = RunMode.PRACTICAL

    # Accuracies: eps gates perturbations, (eps_g, eps_h) define second-order stationarity
    eps: float = 1e-3
    eps_g: Optional[float] = None
    eps_h: Optional[float] = None

    # SCSG / GD step size and the SGD perturbation step size
    eta: float = 0.5
    r: float = 2.0
    gamma: Optional[float] = None
    eta0: Optional[float] = None

    b: int = 5
    n: Optional[int] = None

    k_thres: int = 50
    f_thres: float = 1e-6
    g_thres: Optional[float] = None
    max_epochs: int = 500
    delta: float = 0.1
    c1: float = 1.0

    stopping_rule: StoppingRule = StoppingRule.STALL
    stall_tol: float = 1e-8
    stall_epochs: int = 5

    perturb: bool = True
    # Start with t_noise = k_thres so a stationary starting point is perturbed at epoch 0
    arm_at_start: bool = True
    pgd_radius: float = 0.05
    sgd_eta: Optional[float] = None
    inner_perturb_every: Optional[int] = None

    # Generic framework with the SCSG-epoch plug-in
    plugin_batch: Optional[int] = None
    plugin_minibatch: Optional[int] = None
    first_order_check: FirstOrderCheck = FirstOrderCheck.EXACT

    divergence_bound: float = 1e8

    class Config:
        extra = "forbid"
        frozen = True

    @property
    def resolved_eps_g(self) -> float:
        return self.eps if self.eps_g is None else self.eps_g

    @property
    def resolved_eps_h(self) -> float:
        return DEFAULT_EPS_H if self.eps_h is None else self.eps_h

    @property
    def resolved_sgd_eta(self) -> float:
        return self.eta if self.sgd_eta is None else self.sgd_eta

    def with_n(self, n: int) -> "OptimizerConfig":
        return self.model_copy(update={"n": n})


class ProblemConstants(BaseModel):
    """Problem constants the theory-mode constraints are written in."""

    L: float = Field(ge=0)
    rho: float = Field(ge=0)
    l: float = Field(ge=0)
    tau: float = Field(ge=0)
    f_star_gap: float = Field(default=1.0, ge=0)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _tau_below_gradient_bound(self) -> "ProblemConstants":
        if self.tau > self.l ** 2:
            raise ValueError(f"tau={self.tau} exceeds l^2={self.l ** 2}")
        return self


class ConfigViolation(BaseModel):
    row: str
    message: str

    def __str__(self) -> str:
        return f"[{self.row}] {self.message}"
