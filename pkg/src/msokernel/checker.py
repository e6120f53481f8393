"""Brute-force MSO/CMSO evaluation over finite structures.

The evaluator expands element quantifiers over the domain and set
quantifiers over all subsets (Gray-code order, short-circuited), so it is
exponential by design and guarded by budgets: structures larger than
`max_set_domain` are refused outright when the sentence quantifies over
sets, and a visit counter bounds the total number of quantifier branches.

Formulas are compiled once per structure into closures over an environment
of integer slots (element values are domain indices, set values bitmasks),
which keeps the inner loops cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import formula as F
from .formula import Formula, Signature
from .kernelize import ThresholdFn, paper_thresholds, reduce_cmso, reduce_tree
from .tree import LabelledTree


class BudgetExceeded(RuntimeError):
    """The expansion would overrun the configured budget; kernelize first."""


class EvalError(ValueError):
    """Structure/formula mismatch: unbound variable, wrong relation."""


@dataclass(frozen=True)
class Budget:
    """Limits for quantifier expansion."""

    max_set_domain: int = 20
    max_visits: int = 10_000_000


@dataclass
class FiniteStructure:
    """Evaluation target: a domain with unary label predicates and one
    binary relation (functional `parent` or irreflexive symmetric `edge`)."""

    domain: tuple
    label_sets: dict[str, frozenset]
    relation: str
    pairs: frozenset
    kind: str  # "tree" | "graph"

    def __post_init__(self):
        dom = set(self.domain)
        if len(dom) != len(self.domain):
            raise EvalError("duplicate domain elements")
        for name, members in self.label_sets.items():
            if not members <= dom:
                raise EvalError(f"label {name!r} marks elements outside the domain")
        for a, b in self.pairs:
            if a not in dom or b not in dom:
                raise EvalError("relation pair outside the domain")
        if self.relation == F.TREE_RELATION:
            child_count: dict = {}
            for p, c in self.pairs:
                child_count[c] = child_count.get(c, 0) + 1
            if any(n > 1 for n in child_count.values()):
                raise EvalError("parent relation must be functional on children")
        elif self.relation == F.GRAPH_RELATION:
            if any(a == b for a, b in self.pairs):
                raise EvalError("edge relation must be irreflexive")
        else:
            raise EvalError(f"unknown relation {self.relation!r}")

    @property
    def size(self) -> int:
        return len(self.domain)

    @classmethod
    def from_tree(cls, tree: LabelledTree) -> "FiniteStructure":
        labels: dict[str, set] = {}
        for v, labs in tree.labels.items():
            for l in labs:
                labels.setdefault(l, set()).add(v)
        pairs = frozenset((p, v) for v, p in tree.parent.items() if p is not None)
        return cls(tuple(sorted(tree.parent)), {k: frozenset(v) for k, v in labels.items()},
                   F.TREE_RELATION, pairs, "tree")

    @classmethod
    def from_graph(cls, graph) -> "FiniteStructure":
        labels = {name: frozenset(vs) for name, vs in graph.label_sets().items()}
        pairs = frozenset((u, v) for e in graph.edges for u, v in (tuple(e), tuple(e)[::-1]))
        return cls(tuple(sorted(graph.vertices)), labels, F.GRAPH_RELATION, pairs, "graph")


# ---------------------------------------------------------------------------
# Compilation


class _Compiler:
    """Compile a formula to a closure over a slot environment.

    Slots are allocated lexically, so shadowing resolves at compile time.
    Element slots hold domain indices, set slots bitmasks over the domain.
    """

    def __init__(self, structure: FiniteStructure, budget: Budget, free: dict[str, int]):
        self.n = structure.size
        self.index = {e: i for i, e in enumerate(structure.domain)}
        self.structure = structure
        self.budget = budget
        self.visits = [0]
        self.scope: dict[str, int] = dict(free)
        self.next_slot = len(free)
        self.label_masks = {
            name: sum(1 << self.index[e] for e in members)
            for name, members in structure.label_sets.items()}
        if structure.relation == F.TREE_RELATION:
            self.parent_of = [-1] * self.n
            for p, c in structure.pairs:
                self.parent_of[self.index[c]] = self.index[p]
        else:
            self.adj = [0] * self.n
            for a, b in structure.pairs:
                self.adj[self.index[a]] |= 1 << self.index[b]

    def slot(self, name: str) -> int:
        if name not in self.scope:
            raise EvalError(f"unbound variable {name!r}")
        return self.scope[name]

    def compile(self, f: Formula):
        if isinstance(f, F.Top):
            return lambda env: True
        if isinstance(f, F.Bottom):
            return lambda env: False
        if isinstance(f, F.Eq):
            a, b = self.slot(f.left), self.slot(f.right)
            return lambda env: env[a] == env[b]
        if isinstance(f, F.Rel):
            if f.relation != self.structure.relation:
                raise EvalError(
                    f"relation {f.relation!r} does not match the structure's "
                    f"{self.structure.relation!r}")
            a, b = self.slot(f.left), self.slot(f.right)
            if f.relation == F.TREE_RELATION:
                parent_of = self.parent_of
                return lambda env: parent_of[env[b]] == env[a]
            adj = self.adj
            return lambda env: adj[env[a]] >> env[b] & 1
        if isinstance(f, F.Label):
            mask = self.label_masks.get(f.label, 0)
            a = self.slot(f.var)
            return lambda env: mask >> env[a] & 1
        if isinstance(f, F.Member):
            a, b = self.slot(f.element), self.slot(f.set_var)
            return lambda env: env[b] >> env[a] & 1
        if isinstance(f, F.Mod):
            a = self.slot(f.set_var)
            res, mod = f.residue, f.modulus
            return lambda env: env[a].bit_count() % mod == res
        if isinstance(f, F.Not):
            body = self.compile(f.body)
            return lambda env: not body(env)
        if isinstance(f, F.And):
            left, right = self.compile(f.left), self.compile(f.right)
            return lambda env: left(env) and right(env)
        if isinstance(f, F.Or):
            left, right = self.compile(f.left), self.compile(f.right)
            return lambda env: left(env) or right(env)
        if isinstance(f, F.Implies):
            left, right = self.compile(f.left), self.compile(f.right)
            return lambda env: (not left(env)) or right(env)
        if isinstance(f, (F.Exists, F.Forall)):
            return self.compile_quantifier(f)
        raise TypeError(f"not a formula node: {f!r}")

    def compile_quantifier(self, f: Formula):
        outer = self.scope.get(f.var)
        slot = self.next_slot
        self.scope[f.var] = slot
        self.next_slot += 1
        body = self.compile(f.body)
        self.next_slot -= 1
        if outer is None:
            del self.scope[f.var]
        else:
            self.scope[f.var] = outer

        n = self.n
        visits = self.visits
        max_visits = self.budget.max_visits
        existential = isinstance(f, F.Exists)

        if F.var_sort(f.var) == F.ELEMENT:
            def run(env, _n=n, _slot=slot, _body=body, _ex=existential):
                for v in range(_n):
                    visits[0] += 1
                    if visits[0] > max_visits:
                        raise BudgetExceeded(f"visit budget {max_visits} exceeded")
                    env[_slot] = v
                    if _body(env) == _ex:
                        return _ex
                return not _ex
            return run

        def run_set(env, _slot=slot, _body=body, _ex=existential):
            for i in range(1 << n):
                visits[0] += 1
                if visits[0] > max_visits:
                    raise BudgetExceeded(f"visit budget {max_visits} exceeded")
                env[_slot] = i ^ (i >> 1)  # Gray-code order
                if _body(env) == _ex:
                    return _ex
            return not _ex
        return run_set


def eval_formula(structure: FiniteStructure, f: Formula,
                 assignment: dict | None = None, budget: Budget | None = None) -> bool:
    """Tarskian evaluation of `f` with free variables bound by `assignment`
    (element ids and element-id collections, keyed by variable name)."""
    budget = budget or Budget()
    assignment = assignment or {}
    missing = F.free_vars(f) - set(assignment)
    if missing:
        raise EvalError(f"unbound free variables: {sorted(missing)}")
    free_slots = {name: i for i, name in enumerate(sorted(assignment))}
    comp = _Compiler(structure, budget, free_slots)
    compiled = comp.compile(f)
    env: list = [0] * (len(free_slots) + F.quantifier_count(f) + 1)
    for name, value in assignment.items():
        if F.var_sort(name) == F.ELEMENT:
            env[free_slots[name]] = comp.index[value]
        else:
            env[free_slots[name]] = sum(1 << comp.index[e] for e in value)
    return bool(compiled(env))


def model_check(structure: FiniteStructure, sentence: Formula,
                budget: Budget | None = None) -> bool:
    """Decide a sentence by exhaustive quantifier expansion, within budgets."""
    budget = budget or Budget()
    if not F.is_sentence(sentence):
        raise EvalError(f"not a sentence, free: {sorted(F.free_vars(sentence))}")
    has_set = any(isinstance(node, F.QUANTIFIERS) and F.var_sort(node.var) == F.SET
                  for node in F.walk(sentence))
    if has_set and structure.size > budget.max_set_domain:
        raise BudgetExceeded(
            f"structure has {structure.size} elements > {budget.max_set_domain} "
            f"and the sentence quantifies over sets; kernelize first")
    return eval_formula(structure, sentence, {}, budget)


# ---------------------------------------------------------------------------
# Kernelization pipeline


@dataclass(frozen=True)
class KernelReport:
    """Verdict plus the kernelization statistics behind it."""

    verdict: bool
    original_size: int
    kernel_size: int
    q: int
    s: int
    t: int
    m: int
    deletions_per_level: dict[int, int] = field(default_factory=dict)


def check_with_kernel_report(tree: LabelledTree, sentence: Formula, sig: Signature,
                             mode: str = "mso", budget: Budget | None = None,
                             thresholds: ThresholdFn | None = None) -> KernelReport:
    """Prenex the sentence for its quantifier counts, reduce the tree with the
    matching thresholds, then model-check the kernel."""
    if mode not in ("mso", "cmso"):
        raise ValueError(f"mode must be 'mso' or 'cmso', not {mode!r}")
    pf = F.to_prenex(sentence)
    q, s, t = pf.q, pf.s, sig.label_count
    m = F.lcm_moduli(sentence)
    if mode == "mso" and m > 1:
        raise ValueError("sentence uses mod predicates; run in cmso mode")
    stats: dict[int, int] = {}
    cap = tree.size() + 1
    if thresholds is not None:
        kernel = reduce_tree(tree, thresholds, sig, stats)
    elif mode == "cmso":
        kernel = reduce_cmso(tree, m, q, s, t, cap=cap, sig=sig, stats=stats)
    else:
        kernel = reduce_tree(tree, paper_thresholds(q, s, t + 3 * q + s, cap), sig, stats)
    verdict = model_check(FiniteStructure.from_tree(kernel), sentence, budget)
    return KernelReport(verdict, tree.size(), kernel.size(), q, s, t,
                        m if mode == "cmso" else 1, stats)


def check_with_kernel(tree: LabelledTree, sentence: Formula, sig: Signature,
                      mode: str = "mso", budget: Budget | None = None,
                      thresholds: ThresholdFn | None = None) -> bool:
    return check_with_kernel_report(tree, sentence, sig, mode, budget, thresholds).verdict
