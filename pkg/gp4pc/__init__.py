"""
gp4pc: generalized pose-and-scale estimation from four point pairs.
"""
from .core_types import (AffineTransform, Correspondence, GeneralizedCamera, PinholeCamera, Ray,
                         SimilarityTransform, backproject, project)
from .errors import EstimationFailure, Gp4pcError, NoHypothesis
from .pipeline import Alignment, Hypothesis, Permutations, SolverVariant, count_valid_solutions, solve_minimal
from .robust import RansacConfig, RansacResult, estimate
from .synthbench import SceneRecipe, SyntheticProblem, error_report, generate

__version__ = "0.1.0"
