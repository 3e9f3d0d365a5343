"""Query-log driven diversification of search results."""

from qldiv.corpus import (
    DocVector,
    ResultList,
    UtilityMatrix,
    build_utility_matrix,
    distance,
    harmonic,
    normalized_utility,
    utility,
    vectorize,
)
from qldiv.diversify import (
    ALGORITHMS,
    DiversificationInput,
    DiversifiedList,
    iaselect,
    optselect,
    overall_utility,
    xquad,
)
from qldiv.logmining import SpecializationModel, load_model, save_model
from qldiv.metrics import SubtopicJudgments, alpha_ndcg, ia_precision, utility_ratio

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "DiversificationInput",
    "DiversifiedList",
    "DocVector",
    "ResultList",
    "SpecializationModel",
    "SubtopicJudgments",
    "UtilityMatrix",
    "alpha_ndcg",
    "build_utility_matrix",
    "distance",
    "harmonic",
    "ia_precision",
    "iaselect",
    "load_model",
    "normalized_utility",
    "optselect",
    "overall_utility",
    "save_model",
    "utility",
    "utility_ratio",
    "vectorize",
    "xquad",
]
