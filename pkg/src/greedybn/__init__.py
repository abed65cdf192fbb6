"""Greedy structure learning for discrete, Gaussian and conditional linear
Gaussian Bayesian networks, with an incremental score cache, closed-form
low-order estimators and a predictive train/test score."""

from .complexity import CostParams, naive_move_count, node_cost, total_cost
from .dataset import Column, Dataset, Schema, SplitSpec, load_csv, write_csv
from .graph import Cpdag, Dag, Move, MoveKind, cpdag_of, shd
from .kernels import BACKEND
from .localfit import BnModel, FitMethod, fit_model, load_model, save_model
from .sampling import SampleSpec, random_reference_model, sample, topological_order
from .scoring import ScoreKind, ScoreSpec, cache_init, cache_refresh, enumerate_moves, score_graph, score_node
from .search import SearchParams, SearchTrace, greedy_search, hill_climb, naive_hill_climb

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BnModel", "Column", "CostParams", "Cpdag", "Dag", "Dataset", "FitMethod",
    "Move", "MoveKind", "SampleSpec", "Schema", "ScoreKind", "ScoreSpec", "SearchParams",
    "SearchTrace", "SplitSpec", "cache_init", "cache_refresh", "cpdag_of", "enumerate_moves",
    "fit_model", "greedy_search", "hill_climb", "load_csv", "load_model", "naive_hill_climb",
    "naive_move_count", "node_cost", "random_reference_model", "sample", "save_model",
    "score_graph", "score_node", "shd", "topological_order", "total_cost", "write_csv",
]
