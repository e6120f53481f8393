import random

import pytest

from msokernel import formula as F
from msokernel.checker import (Budget, BudgetExceeded, EvalError,
                               FiniteStructure, check_with_kernel,
                               check_with_kernel_report, eval_formula,
                               model_check)
from msokernel.formula import Signature
from msokernel.interpret import graph_from_edges
from msokernel.tree import LabelledTree, load_tree, star

import helpers

SIG0 = Signature("parent")
SIG1 = Signature("parent", ("a",))
GSIG = Signature("edge")


def tree_structure(text, sig):
    return FiniteStructure.from_tree(load_tree(text, sig))


class TestEval:
    def test_single_labelled_node(self):
        A = tree_structure("(node [a])", SIG1)
        assert model_check(A, F.parse("E x. lab_a(x)", SIG1))

    def test_mod_full_domain(self):
        A = FiniteStructure.from_tree(star(3))  # 4 elements
        f = F.parse("ES X. (mod[0,2](X) & (A y. in(y, X)))", SIG0)
        assert model_check(A, f)
        A5 = FiniteStructure.from_tree(star(4))  # 5 elements
        assert not model_check(A5, f)

    def test_false_everywhere(self):
        for n in (1, 3, 6):
            assert not model_check(FiniteStructure.from_tree(star(n - 1)),
                                   F.parse("false", SIG0))

    def test_free_variable_assignment(self):
        t = load_tree("(node [] (node [a]))", SIG1)
        A = FiniteStructure.from_tree(t)
        leaf = [v for v in t.nodes() if v != t.root][0]
        assert eval_formula(A, F.Label("a", "x"), {"x": leaf})
        assert not eval_formula(A, F.Label("a", "x"), {"x": t.root})
        assert eval_formula(A, F.Member("x", "X"), {"x": leaf, "X": {leaf}})
        assert not eval_formula(A, F.Member("x", "X"), {"x": leaf, "X": set()})

    def test_unbound_variable_rejected(self):
        A = FiniteStructure.from_tree(star(2))
        with pytest.raises(EvalError):
            eval_formula(A, F.Label("a", "x"), {})

    def test_parent_direction(self):
        # parent(p, c): first argument is the parent
        t = LabelledTree({0: None, 1: 0, 2: 1}, {i: frozenset() for i in range(3)}, 0)
        A = FiniteStructure.from_tree(t)
        assert model_check(A, F.parse("E x. E y. E z. (parent(x,y) & parent(y,z))", SIG0))
        assert not model_check(A, F.parse("E x. parent(x, x)", SIG0))

    def test_edge_symmetric(self):
        A = FiniteStructure.from_graph(graph_from_edges(2, [(1, 2)]))
        assert model_check(A, F.parse("E x. E y. (edge(x,y) & edge(y,x))", GSIG))

    def test_relation_mismatch(self):
        A = FiniteStructure.from_tree(star(2))
        with pytest.raises(EvalError):
            model_check(A, F.parse("E x. E y. edge(x,y)", GSIG))


class TestBudgets:
    def test_set_quantifier_domain_refusal(self):
        A = FiniteStructure.from_tree(star(24))  # 25 elements
        with pytest.raises(BudgetExceeded):
            model_check(A, F.parse("ES X. E x. in(x, X)", SIG0))

    def test_element_only_not_refused(self):
        A = FiniteStructure.from_tree(star(24))
        assert model_check(A, F.parse("E x. E y. parent(x, y)", SIG0))

    def test_visit_budget(self):
        A = FiniteStructure.from_tree(star(15))
        f = F.parse("ES X. (false & in(x, X))", SIG0) if False else \
            F.parse("ES X. (E x. (in(x,X) & !in(x,X)))", SIG0)
        with pytest.raises(BudgetExceeded):
            model_check(A, f, Budget(max_set_domain=20, max_visits=1000))

    def test_monotone_budget(self):
        rng = random.Random(51)
        A = FiniteStructure.from_tree(star(6))
        for _ in range(100):
            f = helpers.random_prenex_sentence(rng, SIG0, q=1, s=1)
            low = Budget(max_set_domain=20, max_visits=50)
            high = Budget(max_set_domain=20, max_visits=10 ** 7)
            try:
                verdict_low = model_check(A, f, low)
            except BudgetExceeded:
                continue
            assert verdict_low == model_check(A, f, high)


class TestSemantics:
    def test_de_morgan(self):
        rng = random.Random(53)
        A = FiniteStructure.from_tree(star(4))
        for _ in range(150):
            f = helpers.random_formula(rng, SIG0, max_quantifiers=2)
            assert model_check(A, F.Not(f)) == (not model_check(A, f))

    def test_gray_code_matches_naive_subsets(self):
        # same verdicts as an independent frozenset-based evaluator
        rng = random.Random(59)
        sig = SIG1
        for _ in range(60):
            t = helpers.random_tree(rng, max_nodes=6, max_height=2, labels=("a",))
            A = FiniteStructure.from_tree(t)
            f = helpers.random_prenex_sentence(rng, sig, q=rng.randint(0, 1),
                                               s=rng.randint(1, 2), mod_atoms=1)
            assert model_check(A, f) == naive_eval(t, f, {})


class TestCheckWithKernel:
    def test_star_40_set_membership(self):
        rep = check_with_kernel_report(star(40), F.parse("ES X. E x. in(x, X)", SIG0),
                                       SIG0)
        assert rep.verdict is True
        assert rep.kernel_size == 18
        assert (rep.q, rep.s, rep.t) == (1, 1, 0)

    def test_single_node_true(self):
        assert check_with_kernel(star(0), F.parse("true", SIG0), SIG0)

    def test_star40_everyone_touches_edge(self):
        f = F.parse("A x. (E y. (parent(y,x) | parent(x,y)))", SIG0)
        s40 = star(40)
        assert check_with_kernel(s40, f, SIG0)
        assert model_check(FiniteStructure.from_tree(s40), f, Budget(50, 10 ** 7))

    def test_mso_mode_rejects_mod(self):
        with pytest.raises(ValueError):
            check_with_kernel(star(3), F.parse("ES X. mod[1,2](X)", SIG0), SIG0,
                              mode="mso")

    def test_cmso_pipeline_fires(self):
        # q=0, s=1, t=0, M=2: threshold R0 = (2+0) * 3 = 6, so the 15-leaf
        # class shrinks in pairs down to 5, preserving its parity
        f = F.parse("ES X. (mod[1,2](X) & !mod[0,2](X))", SIG0)
        rep = check_with_kernel_report(star(15), f, SIG0, mode="cmso")
        assert rep.kernel_size == 6
        assert rep.deletions_per_level == {0: 10}
        direct = model_check(FiniteStructure.from_tree(star(15)), f)
        assert rep.verdict == direct is True

    def test_cmso_pipeline_agreement_without_firing(self):
        f = F.parse("ES X. (mod[1,2](X) & (A y. in(y, X)))", SIG0)
        # true iff the domain is odd-sized; thresholds exceed these sizes so
        # the kernel is the input itself
        for leaves in (8, 11):
            rep = check_with_kernel_report(star(leaves), f, SIG0, mode="cmso")
            direct = model_check(FiniteStructure.from_tree(star(leaves)), f)
            assert rep.kernel_size == leaves + 1
            assert rep.verdict == direct == (leaves % 2 == 0)

    def test_budget_propagates(self):
        # paper thresholds exceed the input size, so the kernel stays large
        f = F.parse("ES X. ES Y. E x. (in(x,X) & in(x,Y))", SIG0)
        with pytest.raises(BudgetExceeded):
            check_with_kernel(star(30), f, SIG0,
                              budget=Budget(max_set_domain=20))


def naive_eval(tree, f, env):
    """Independent reference evaluator: frozensets, no compilation."""
    nodes = sorted(tree.parent)

    def rec(node, env):
        if isinstance(node, F.Top):
            return True
        if isinstance(node, F.Bottom):
            return False
        if isinstance(node, F.Eq):
            return env[node.left] == env[node.right]
        if isinstance(node, F.Rel):
            return tree.parent[env[node.right]] == env[node.left]
        if isinstance(node, F.Label):
            return node.label in tree.labels[env[node.var]]
        if isinstance(node, F.Member):
            return env[node.element] in env[node.set_var]
        if isinstance(node, F.Mod):
            return len(env[node.set_var]) % node.modulus == node.residue
        if isinstance(node, F.Not):
            return not rec(node.body, env)
        if isinstance(node, F.And):
            return rec(node.left, env) and rec(node.right, env)
        if isinstance(node, F.Or):
            return rec(node.left, env) or rec(node.right, env)
        if isinstance(node, F.Implies):
            return (not rec(node.left, env)) or rec(node.right, env)
        if isinstance(node, (F.Exists, F.Forall)):
            want = isinstance(node, F.Exists)
            values = (nodes if F.var_sort(node.var) == F.ELEMENT
                      else list(_subsets(nodes)))
            for v in values:
                if rec(node.body, {**env, node.var: v}) == want:
                    return want
            return not want
        raise TypeError(node)

    return rec(f, env)


def _subsets(nodes):
    for mask in range(1 << len(nodes)):
        yield frozenset(n for i, n in enumerate(nodes) if mask >> i & 1)
