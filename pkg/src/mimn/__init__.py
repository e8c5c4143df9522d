"""Multiple-instance learning with cardinality-potential Markov networks."""
from .core import (
    NEGATIVE,
    POSITIVE,
    Bag,
    DimensionError,
    Finite,
    Gmimn,
    InfeasibleError,
    Labeling,
    Mimn,
    MimnError,
    Model,
    Rmimn,
    clique_indicator,
    clique_value,
    feasible_counts,
    instance_potential,
    score,
)
from .data import Dataset, DataFormatError, SynthParams, kfold_split, parse_mil_csv, synthesize, write_mil_csv
from .features import Homogeneous, Identity, Quadratic, Scaler, apply_scaler, exact_kernel, fit_scaler
from .inference import brute_force_map, loss_augmented, map_labeling, predict
from .learning import TrainConfig, TrainingError, joint_feature, objective, subgradient, train

__version__ = "0.1.0"
