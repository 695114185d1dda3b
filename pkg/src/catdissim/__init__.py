"""Dissimilarities and distances for categorical data.

A measure is a block-diagonal ``Delta`` (one block of category
dissimilarities per variable); distances between rows follow from it.
"""
__version__ = "0.1.0"

from .errors import CatDissimError, DataError, DomainError, SchemaMismatchError, UnseenCategoryError, UsageError
from .dataset import (
    CategoricalDataset,
    FoldPlan,
    VariableSchema,
    append_response,
    parse_csv,
    read_csv,
    split_folds,
    split_response,
    subset,
)
from .cooccur import CooccurrenceModel, MarginalTable, build_cooccurrence
from .delta import MEASURES, BlockDiagonalDelta, DeltaBlock, MeasureSpec
from .association import (
    CustomDivergence,
    ahmad_dey_oracle,
    build_delta_association,
    build_delta_supervised,
    phi_chisq,
    phi_kl,
    phi_tvd,
)
from .measures import build_delta
from .distance import (
    DistanceMatrix,
    check_metric_properties,
    cross_distances,
    naive_pairwise_dense,
    pairwise_distances,
    symmetrize,
)
from .learners import (
    Labeling,
    accuracy,
    adjusted_rand_index,
    cross_validate,
    knn_predict,
    pam_assign,
    pam_fit,
)
