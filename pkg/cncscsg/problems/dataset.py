import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from cncscsg.core.exceptions import DimensionError
from cncscsg.services.sampling import Rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DimensionError(f"features must be an n x d matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionError("labels must hold one entry per feature row")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DimensionError("labels must be 0 or 1")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def generate_dataset(n: int, d: int, seed: int) -> Dataset:
    """Two Gaussian classes: N(0, I) with label 0, then N(1, I) with label 1."""
    if n < 1 or d < 1 or n % 2:
        raise DimensionError(f"need an even n >= 2 and d >= 1, got n={n}, d={d}")
    gen = Rng(seed).stream("dataset")
    half = n // 2
    class0 = gen.standard_normal((half, d))
    class1 = 1.0 + gen.standard_normal((half, d))
    features = np.vstack([class0, class1])
    labels = np.concatenate([np.zeros(half), np.ones(half)])
    logger.debug(f"Generated dataset n={n}, d={d}, seed={seed}")
    return Dataset(features=features, labels=labels, seed=seed)


def _columns(d: int):
    return ["y"] + [f"z_{j}" for j in range(1, d + 1)]


def write_dataset_csv(data: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(np.column_stack([data.labels, data.features]), columns=_columns(data.d))
    frame["y"] = data.labels.astype(np.int64)
    frame.to_csv(path, index=False)
    logger.info(f"Dataset written: {path} ({data.n} rows)")
    return path


def read_dataset_csv(path: Union[str, Path], seed: Optional[int] = None) -> Dataset:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != _columns(frame.shape[1] - 1):
        raise DimensionError(f"{path}: expected header y,z_1,...,z_d")
    labels = frame["y"].to_numpy(dtype=np.float64)
    features = frame.drop(columns=["y"]).to_numpy(dtype=np.float64)
    return Dataset(features=features, labels=labels, seed=seed)
