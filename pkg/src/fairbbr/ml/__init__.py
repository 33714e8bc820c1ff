from .artifacts import ArtifactError, ModelArtifact
from .evaluation import EmptyTestSet, accuracy, evaluate, majority_baseline, within_tolerance
from .mlp import Adam, Mlp, MlpClassifier, MlpRegressor, NonFiniteTarget
from .preprocessing import (
    CvReport,
    EmptyInput,
    InvalidK,
    SplitSpec,
    Standardizer,
    TooFewRows,
    derive_seed,
    kfold_cv,
    standardize_apply,
    standardize_fit,
    train_test_split,
)
from .svm import LinearSvm, SingleClassData
from .tree import DecisionTree, gini
