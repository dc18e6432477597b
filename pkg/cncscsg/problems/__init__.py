from .base_problem import FiniteSumProblem, ProblemMetadata
from .dataset import Dataset, generate_dataset, read_dataset_csv, write_dataset_csv
from .saddle_problem import (QuadraticSaddleProblem, QuadraticSaddleSpec,
                             make_quadratic_saddle, saddle_noise)
from .sigmoid_problem import SigmoidProblem, make_sigmoid_problem

__all__ = [
    "FiniteSumProblem", "ProblemMetadata", "Dataset", "generate_dataset",
    "read_dataset_csv", "write_dataset_csv", "QuadraticSaddleProblem",
    "QuadraticSaddleSpec", "make_quadratic_saddle", "saddle_noise",
    "SigmoidProblem", "make_sigmoid_problem",
]
