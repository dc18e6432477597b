from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, Field

from cncscsg.models.enums import TerminationReason

TRACE_COLUMNS = ["epoch", "f", "grad_norm", "ifo", "perturbed", "lambda_min", "tau"]


class TraceRow(BaseModel):
    """State at the start of one epoch, before any perturbation fired in it."""
    epoch: int
    f: float
    grad_norm: float
    ifo: int
    perturbed: bool = False
    lambda_min: Optional[float] = None
    tau: Optional[float] = None


class PerturbationEvent(BaseModel):
    epoch: int
    index: int
    t_noise: int
    grad_norm: float
    f_before: float
    f_after: float
    # Inner-loop perturbations carry the inner step they were inserted at
    inner_step: Optional[int] = None


class TraceSummary(BaseModel):
    reason: TerminationReason
    epochs: int
    total_ifo: int
    hvp_calls: int = 0
    final_f: float
    final_grad_norm: float
    final_lambda_min: Optional[float] = None
    method: str = ""
    seed: Optional[int] = None
    ifo_convention: str = "paper"
    x0: List[float] = Field(default_factory=list)
    x_final: List[float] = Field(default_factory=list)
    perturbations: List[PerturbationEvent] = Field(default_factory=list)


class Trace(BaseModel):
    rows: List[TraceRow] = Field(default_factory=list)
    events: List[PerturbationEvent] = Field(default_factory=list)
    summary: Optional[TraceSummary] = None

    def append(self, row: TraceRow):
        if self.summary is not None:
            raise ValueError("trace is already terminated")
        if self.rows:
            last = self.rows[-1]
            if row.epoch <= last.epoch:
                raise ValueError(f"epoch must increase strictly, got {row.epoch} after {last.epoch}")
            if row.ifo < last.ifo:
                raise ValueError(f"cumulative IFO decreased from {last.ifo} to {row.ifo}")
        self.rows.append(row)

    def terminate(self, summary: TraceSummary):
        if self.summary is not None:
            raise ValueError("trace already carries a terminal summary")
        summary.perturbations = list(self.events)
        self.summary = summary

    def column(self, name: str) -> List[Any]:
        return [getattr(row, name) for row in self.rows]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows], columns=TRACE_COLUMNS)

    def summary_json(self) -> Dict[str, Any]:
        if self.summary is None:
            raise ValueError("trace has no terminal summary")
        return self.summary.model_dump(mode="json")
