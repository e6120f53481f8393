"""MSO/CMSO model checking of bounded-height labelled trees by kernelization,
plus graph front-ends through tree-depth and tree-model interpretations."""

from .formula import (
    Signature, Formula, ParseError, FormulaError, PrenexFormula,
    parse, to_text, to_prenex, lcm_moduli, free_vars, is_sentence,
)
from .tree import (
    LabelledTree, TreeFormatError, load_tree, dump_tree,
    canonical_code, canonical_codes, limb_classes, l_isomorphic, star,
)
from .kernelize import (
    CappedNat, ThresholdFn, BitBudgetError,
    threshold_N, threshold_R, threshold_N_exact, threshold_R_exact,
    tower, kernel_size_bound,
    paper_thresholds, cmso_thresholds, explicit_thresholds,
    reduce, reduce_cmso, reduce_tree,
)
from .checker import (
    Budget, BudgetExceeded, EvalError, FiniteStructure, KernelReport,
    eval_formula, model_check, check_with_kernel, check_with_kernel_report,
)
from .interpret import (
    Graph, EliminationForest, Interpretation, TreeModel,
    GraphFormatError, WitnessError, GraphCheckReport,
    graph_from_edges, tree_depth_exact, td_interpret,
    represented_graph, shrub_interpret, translate,
    check_graph, check_graph_report,
    load_graph, load_forest, load_tree_model,
)

__version__ = "0.1.0"
