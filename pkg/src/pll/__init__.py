"""Partial-label learning with candidate-set generation, RC/CC training and exact oracles."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    CandidateSet,
    LabelSpace,
    PartialDataset,
    RunConfig,
    SupervisedDataset,
    candidate_set_from_indices,
    enumerate_candidate_sets,
    enumerate_C,
)
from .generate import (  # noqa: E402
    TransitionMatrixModel,
    UniformGenerationModel,
    entropy_of_T,
    generate_partial_dataset,
    sample_tmatrix_candidate_set,
    sample_uniform_candidate_set,
)
from .model import Model, forward  # noqa: E402
from .train import evaluate, train_cc, train_rc, train_supervised, validate_partial  # noqa: E402
