"""Discrete graphical models of marginal independence.

The package represents multivariate categorical distributions through
log-mean linear interactions: log-linear expansions of the logarithms of
marginal cell probabilities.  Setting a graph-determined collection of
these interactions to zero yields models where missing edges encode
marginal (not conditional) independence, including refinements that tie
independences to individual levels of a variable.  The main entry points
are the transform maps (``prob_to_lml`` and friends), graph constraint
generation (``constraints_of``), the constrained maximum-likelihood
fitter (``fit_mle``), the structure search (``search``), and the
scikit-learn wrappers (``LmlGraphModel``, ``GraphSearch``).
"""

from .errors import (
    BudgetExceededError,
    DataError,
    LmlError,
    NonPositiveTableError,
    SchemaError,
    UndefinedInteractionError,
)
from .estimators import GraphSearch, LmlGraphModel
from .fit import (
    FitOptions,
    FitResult,
    ModelSpec,
    bic,
    chisq_upper_tail,
    deviance_of,
    fit_mle,
    loglik_gradient,
)
from .graphs import (
    BExpandedGraph,
    BidirectedGraph,
    ConstraintSet,
    PrimarySubset,
    complete_expanded_graph,
    complete_graph,
    connected_components,
    constraints_for_expanded,
    constraints_for_graph,
    constraints_of,
    disconnected_sets,
    export_dot,
    graph_from_dict,
    graph_to_dict,
    holds_markov,
    import_dot,
    load_graph,
    primary_subsets,
    save_graph,
)
from .search import SearchConfig, SearchTrace, criterion, pairwise_step, search
from .tables import (
    CountTable,
    ProbTable,
    TableSchema,
    VariableSpec,
    b_expand_table,
    dichotomize,
    dichotomize_around,
    empirical_prob,
    load_counts,
    load_schema,
    marginalize,
    sample_counts,
    schema_to_dict,
)
from .transform import (
    GammaIndex,
    LmlParam,
    MoebiusParam,
    canonical_indices,
    index_census,
    lml_to_moebius,
    lml_to_prob,
    moebius_to_lml,
    moebius_to_prob,
    param_from_dict,
    param_to_dict,
    prob_to_lml,
    prob_to_moebius,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BExpandedGraph",
    "BidirectedGraph",
    "BudgetExceededError",
    "ConstraintSet",
    "CountTable",
    "DataError",
    "FitOptions",
    "FitResult",
    "GammaIndex",
    "GraphSearch",
    "LmlError",
    "LmlGraphModel",
    "LmlParam",
    "ModelSpec",
    "MoebiusParam",
    "NonPositiveTableError",
    "PrimarySubset",
    "ProbTable",
    "SchemaError",
    "SearchConfig",
    "SearchTrace",
    "TableSchema",
    "UndefinedInteractionError",
    "VariableSpec",
    "b_expand_table",
    "bic",
    "canonical_indices",
    "chisq_upper_tail",
    "complete_expanded_graph",
    "complete_graph",
    "connected_components",
    "constraints_for_expanded",
    "constraints_for_graph",
    "constraints_of",
    "criterion",
    "deviance_of",
    "dichotomize",
    "dichotomize_around",
    "disconnected_sets",
    "empirical_prob",
    "export_dot",
    "fit_mle",
    "graph_from_dict",
    "graph_to_dict",
    "holds_markov",
    "import_dot",
    "index_census",
    "lml_to_moebius",
    "lml_to_prob",
    "load_counts",
    "load_graph",
    "load_schema",
    "loglik_gradient",
    "marginalize",
    "moebius_to_lml",
    "moebius_to_prob",
    "pairwise_step",
    "param_from_dict",
    "param_to_dict",
    "primary_subsets",
    "prob_to_lml",
    "prob_to_moebius",
    "sample_counts",
    "save_graph",
    "schema_to_dict",
    "search",
]
