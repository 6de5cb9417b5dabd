"""Constrained decoding of linear-chain CRFs under non-local label constraints."""

from .constrained_ilp import ConstrainedProblem, ConstrainedSolution, solve_min_violation, solve_unconstrained
from .constraints import ConstraintSystem, ConstraintTemplate, check_violation, encode, mine, violation_cost
from .crf_model import CrfModel, FeatureTemplate, build_trellis, log_partition, sequence_log_probability, train_perceptron
from .dataset import Corpus, SyntheticSpec, generate_synthetic, load, save, split
from .decoding import DecoderSettings, compare, decode
from .errors import DataError, DimensionError, EdgeIndexError, EnumerationCapError, InfeasibleError, RelCrfError
from .evaluation import EvaluationReport, evaluate
from .lagrangian import DualResult, dual_value, solve_dual, subgradient
from .trellis import LabelAlphabet, PathAssignment, Trellis, edge_index, enumerate_paths, path_score, viterbi

__version__ = "0.1.0"

__all__ = [
    "ConstrainedProblem",
    "ConstrainedSolution",
    "ConstraintSystem",
    "ConstraintTemplate",
    "Corpus",
    "CrfModel",
    "DataError",
    "DecoderSettings",
    "DimensionError",
    "DualResult",
    "EdgeIndexError",
    "EnumerationCapError",
    "EvaluationReport",
    "FeatureTemplate",
    "InfeasibleError",
    "LabelAlphabet",
    "PathAssignment",
    "RelCrfError",
    "SyntheticSpec",
    "Trellis",
    "build_trellis",
    "check_violation",
    "compare",
    "decode",
    "dual_value",
    "edge_index",
    "encode",
    "enumerate_paths",
    "evaluate",
    "generate_synthetic",
    "load",
    "log_partition",
    "mine",
    "path_score",
    "save",
    "sequence_log_probability",
    "solve_dual",
    "solve_min_violation",
    "solve_unconstrained",
    "split",
    "subgradient",
    "train_perceptron",
    "violation_cost",
    "viterbi",
]
