"""Graph front-ends: exact tree-depth, interpretation of bounded-tree-depth
graphs into labelled trees, tree-models, and the generic formula translation.

An interpretation carries a domain formula nu(x) and an edge formula
eta(x, y) over the tree signature; translating a graph sentence relativizes
its quantifiers by nu and replaces edge atoms by eta, so the sentence holds
on the graph iff the translation holds on the tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import formula as F
from .formula import Formula, Signature, _FreshNames
from .checker import Budget, check_with_kernel_report
from .tree import LabelledTree


class GraphFormatError(ValueError):
    """Malformed graph, forest, or tree-model input."""


class WitnessError(ValueError):
    """A supplied elimination forest does not witness the graph."""


@dataclass(frozen=True)
class Graph:
    """Finite simple undirected graph with optional vertex labels."""

    vertices: tuple[int, ...]
    edges: frozenset[frozenset[int]]
    labels: dict[int, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise GraphFormatError("duplicate vertices")
        for e in self.edges:
            if len(e) != 2 or not e <= vs:
                raise GraphFormatError(f"bad edge {sorted(e)}")
        for v in self.labels:
            if v not in vs:
                raise GraphFormatError(f"label on unknown vertex {v}")

    @property
    def size(self) -> int:
        return len(self.vertices)

    def label_sets(self) -> dict[str, set[int]]:
        out: dict[str, set[int]] = {}
        for v, labs in self.labels.items():
            for l in labs:
                out.setdefault(l, set()).add(v)
        return out

    def label_alphabet(self) -> tuple[str, ...]:
        return tuple(sorted(self.label_sets()))

    def has_edge(self, u: int, v: int) -> bool:
        return frozenset((u, v)) in self.edges


def graph_from_edges(n_or_vertices, edge_list, labels=None) -> Graph:
    vertices = (tuple(range(1, n_or_vertices + 1))
                if isinstance(n_or_vertices, int) else tuple(n_or_vertices))
    edges = frozenset(frozenset(e) for e in edge_list)
    labels = {v: frozenset(ls) for v, ls in (labels or {}).items()}
    return Graph(vertices, edges, labels)


@dataclass(frozen=True)
class EliminationForest:
    """Rooted forest on a graph's vertices; its closure must contain the graph."""

    parent: dict[int, int | None]

    def roots(self) -> list[int]:
        return sorted(v for v, p in self.parent.items() if p is None)

    def depth(self, v: int) -> int:
        d = 0
        while self.parent[v] is not None:
            v = self.parent[v]
            d += 1
        return d

    def height(self) -> int:
        return max(self.depth(v) for v in self.parent)

    def ancestors(self, v: int) -> list[int]:
        out = []
        while self.parent[v] is not None:
            v = self.parent[v]
            out.append(v)
        return out

    def validate(self, graph: Graph):
        if set(self.parent) != set(graph.vertices):
            raise WitnessError("forest vertices differ from the graph's")
        for v in self.parent:  # cycle check via depth computation
            seen = {v}
            u = v
            while self.parent[u] is not None:
                u = self.parent[u]
                if u in seen:
                    raise WitnessError(f"cycle in forest through {u}")
                seen.add(u)
        for e in graph.edges:
            u, v = tuple(e)
            if u not in self.ancestors(v) and v not in self.ancestors(u):
                raise WitnessError(
                    f"edge {u}-{v} joins vertices unrelated in the forest")


@dataclass(frozen=True)
class Interpretation:
    """Domain formula nu, edge formula eta, and the labelling carried by the
    target tree.  Graph labels pass through `label_map`."""

    tag: str  # "td" | "shrub"
    nu: Formula
    nu_var: str
    eta: Formula
    eta_vars: tuple[str, str]
    signature: Signature
    label_map: dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Exact tree-depth (bitmask subset dynamic program)


def tree_depth_exact(graph: Graph, max_vertices: int = 20) -> tuple[int, EliminationForest]:
    """Exact tree-depth with a witnessing forest.

    td of a connected graph is 1 + min over v of td(G - v); of a disconnected
    one, the max over components.  Computed over all vertex subsets, so the
    budget refuses graphs beyond `max_vertices` (supply a forest instead).
    """
    verts = sorted(graph.vertices)
    n = len(verts)
    if n > max_vertices:
        raise GraphFormatError(
            f"{n} vertices exceed the exact tree-depth budget {max_vertices}")
    if n == 0:
        return 0, EliminationForest({})
    index = {v: i for i, v in enumerate(verts)}
    adj = [0] * n
    for e in graph.edges:
        u, v = tuple(e)
        adj[index[u]] |= 1 << index[v]
        adj[index[v]] |= 1 << index[u]

    def components(mask: int) -> list[int]:
        out = []
        rem = mask
        while rem:
            comp = rem & -rem
            frontier = comp
            while frontier:
                grow = 0
                f = frontier
                while f:
                    b = f & -f
                    grow |= adj[b.bit_length() - 1]
                    f ^= b
                frontier = grow & mask & ~comp
                comp |= frontier
            out.append(comp)
            rem &= ~comp
        return out

    full = (1 << n) - 1
    depth_of = [0] * (full + 1)
    pick = [-1] * (full + 1)
    for m in range(1, full + 1):
        comps = components(m)
        if len(comps) > 1:
            depth_of[m] = max(depth_of[c] for c in comps)
        else:
            best, best_v = None, -1
            mm = m
            while mm:
                b = mm & -mm
                v = b.bit_length() - 1
                d = depth_of[m ^ b]
                if best is None or d < best:
                    best, best_v = d, v
                mm ^= b
            depth_of[m] = 1 + best
            pick[m] = best_v

    parent: dict[int, int | None] = {}

    def build(mask: int, above: int | None):
        for comp in components(mask):
            v = pick[comp]
            parent[verts[v]] = above
            rest = comp ^ (1 << v)
            if rest:
                build(rest, verts[v])

    build(full, None)
    forest = EliminationForest(parent)
    forest.validate(graph)
    return depth_of[full], forest


# ---------------------------------------------------------------------------
# Tree-depth interpretation


def _chain(top: str, bottom: str, steps: int, fresh: _FreshNames) -> Formula:
    """top is the `steps`-fold parent of bottom, via an existential chain."""
    if steps == 1:
        return F.Rel(F.TREE_RELATION, top, bottom)
    names = [fresh.fresh("w") for _ in range(steps - 1)]
    below = [bottom] + names  # from the bottom upwards
    atoms = [F.Rel(F.TREE_RELATION, names[i], below[i]) for i in range(steps - 1)]
    atoms.append(F.Rel(F.TREE_RELATION, top, names[-1]))
    body = atoms[0]
    for a in atoms[1:]:
        body = F.And(body, a)
    for name in reversed(names):
        body = F.Exists(name, body)
    return body


def _or_all(parts: list[Formula]) -> Formula:
    if not parts:
        return F.Bottom()
    out = parts[0]
    for p in parts[1:]:
        out = F.Or(out, p)
    return out


def _and_all(parts: list[Formula]) -> Formula:
    if not parts:
        return F.Top()
    out = parts[0]
    for p in parts[1:]:
        out = F.And(out, p)
    return out


def td_interpret(graph: Graph, forest: EliminationForest) -> tuple[LabelledTree, Interpretation]:
    """Attach the elimination forest under a fresh common root and label each
    vertex with its root-distance, plus the distance of every forest ancestor
    it is adjacent to.  nu excludes the fresh root; eta decodes adjacencies
    from the labels, guarded by an ancestor chain (of fixed length, since the
    height is fixed)."""
    forest.validate(graph)
    root = 0 if 0 not in set(graph.vertices) else max(graph.vertices) + 1
    parent: dict[int, int | None] = {root: None}
    labels: dict[int, frozenset[str]] = {root: frozenset({"L0"})}
    depth_t = {v: forest.depth(v) + 1 for v in graph.vertices}
    height = max(depth_t.values(), default=0)
    for v in graph.vertices:
        p = forest.parent[v]
        parent[v] = root if p is None else p
        labs = {f"L{depth_t[v]}"}
        for u in forest.ancestors(v):
            if graph.has_edge(u, v):
                labs.add(f"L{depth_t[u]}")
        labs.update(graph.labels.get(v, frozenset()))
        labels[v] = frozenset(labs)

    depth_labels = [f"L{j}" for j in range(height + 1)]
    graph_labels = graph.label_alphabet()
    clash = set(depth_labels) & set(graph_labels)
    if clash:
        raise GraphFormatError(f"graph labels {sorted(clash)} collide with depth labels")
    sig = Signature(F.TREE_RELATION, tuple(depth_labels) + graph_labels)
    tree = LabelledTree(parent, labels, root)

    x, y = "x", "y"
    fresh = _FreshNames({x, y})

    def alpha(a: str, b: str) -> Formula:
        anc = _or_all([_chain(a, b, k, fresh) for k in range(1, height + 1)])
        cases = []
        for j in range(1, height + 1):
            deepest = [F.Not(F.Label(f"L{i}", a)) for i in range(j + 1, height + 1)]
            cases.append(_and_all([F.Label(f"L{j}", a)] + deepest + [F.Label(f"L{j}", b)]))
        return F.And(anc, _or_all(cases))

    eta = F.And(F.Not(F.Eq(x, y)), F.Or(alpha(x, y), alpha(y, x)))
    interp = Interpretation(
        tag="td",
        nu=F.Not(F.Label("L0", x)), nu_var=x,
        eta=eta, eta_vars=(x, y),
        signature=sig,
        label_map={l: l for l in graph_labels})
    return tree, interp


# ---------------------------------------------------------------------------
# Tree-models


@dataclass(frozen=True)
class TreeModel:
    """Bounded-depth coloured tree whose leaf colours and leaf distances
    determine the edges of the graph it represents."""

    parent: dict[int, int | None]
    colour: dict[int, str]  # leaves only
    signature: dict[tuple[str, str, int], bool]  # (colour, colour, even distance)

    def __post_init__(self):
        tree = LabelledTree(dict(self.parent), {v: frozenset() for v in self.parent})
        object.__setattr__(self, "_tree", tree)
        leaves = [v for v in tree.nodes() if not tree.children(v)]
        d = tree.height
        for v in leaves:
            if tree.depth(v) != d:
                raise GraphFormatError(
                    f"leaf {v} at depth {tree.depth(v)}, expected exactly {d}")
            if v not in self.colour:
                raise GraphFormatError(f"leaf {v} has no colour")
        if set(self.colour) != set(leaves):
            raise GraphFormatError("colour map must cover exactly the leaves")
        for (c1, c2, dist), val in self.signature.items():
            if dist % 2 or not 2 <= dist <= 2 * max(d, 1):
                raise GraphFormatError(f"signature distance {dist} out of range")
            mirrored = self.signature.get((c2, c1, dist))
            if mirrored is not None and mirrored != val:
                raise GraphFormatError(f"signature asymmetric on {(c1, c2, dist)}")

    @property
    def tree(self) -> LabelledTree:
        return self._tree

    @property
    def depth(self) -> int:
        return self.tree.height

    def colours(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.colour.values())))

    def leaves(self) -> list[int]:
        return sorted(self.colour)

    def adjacent(self, c1: str, c2: str, dist: int) -> bool:
        return self.signature.get((c1, c2, dist), self.signature.get((c2, c1, dist), False))

    def leaf_distance(self, u: int, v: int) -> int:
        anc_u = {}
        node, d = u, 0
        while node is not None:
            anc_u[node] = d
            node = self.parent[node]
            d += 1
        node, d = v, 0
        while node not in anc_u:
            node = self.parent[node]
            d += 1
        return d + anc_u[node]


def represented_graph(tm: TreeModel) -> Graph:
    """The graph a tree-model defines: leaves, edges by colour and distance."""
    leaves = tm.leaves()
    edges = set()
    for i, u in enumerate(leaves):
        for v in leaves[i + 1:]:
            if tm.adjacent(tm.colour[u], tm.colour[v], tm.leaf_distance(u, v)):
                edges.add(frozenset((u, v)))
    labels = {v: frozenset({f"c_{tm.colour[v]}"}) for v in leaves}
    return Graph(tuple(leaves), frozenset(edges), labels)


def shrub_interpret(tm: TreeModel,
                    label_mode: str = "realized") -> tuple[LabelledTree, Interpretation]:
    """Inherit the tree-model's tree; each leaf keeps its colour label and
    gains a label (i, c) when a colour-c vertex at tree-distance 2i is
    adjacent to it (`realized`), or whenever the signature alone says so
    (`signature`).  nu selects leaves; eta reads the unique split level of two
    leaves off parent chains and checks the matching (i, c) label."""
    if label_mode not in ("realized", "signature"):
        raise ValueError(f"unknown label mode {label_mode!r}")
    d = tm.depth
    leaves = tm.leaves()
    colours = tm.colours()
    labels: dict[int, frozenset[str]] = {v: frozenset() for v in tm.parent}
    for v in leaves:
        labs = {f"c_{tm.colour[v]}"}
        for i in range(1, d + 1):
            for c in colours:
                if label_mode == "signature":
                    if tm.adjacent(tm.colour[v], c, 2 * i):
                        labs.add(f"p_{i}_{c}")
                else:
                    if any(u != v and tm.colour[u] == c and tm.leaf_distance(u, v) == 2 * i
                           and tm.adjacent(tm.colour[v], c, 2 * i) for u in leaves):
                        labs.add(f"p_{i}_{c}")
        labels[v] = frozenset(labs)
    tree = LabelledTree(dict(tm.parent), labels)
    alphabet = tuple(sorted({f"c_{c}" for c in colours} |
                            {f"p_{i}_{c}" for i in range(1, d + 1) for c in colours}))
    sig = Signature(F.TREE_RELATION, alphabet)

    x, y = "x", "y"
    fresh = _FreshNames({x, y})
    child = fresh.fresh("z")
    nu = F.Not(F.Exists(child, F.Rel(F.TREE_RELATION, x, child)))

    def common_at(a: str, b: str, steps: int) -> Formula:
        if steps == 0:
            return F.Eq(a, b)
        top = fresh.fresh("a")
        return F.Exists(top, F.And(_chain(top, a, steps, fresh),
                                   _chain(top, b, steps, fresh)))

    cases = []
    for i in range(1, d + 1):
        split = F.And(common_at(x, y, i), F.Not(common_at(x, y, i - 1)))
        carry = _or_all([F.And(F.Label(f"c_{c}", y), F.Label(f"p_{i}_{c}", x))
                         for c in colours])
        cases.append(F.And(split, carry))
    eta = F.And(F.Not(F.Eq(x, y)), _or_all(cases))

    interp = Interpretation(
        tag="shrub",
        nu=nu, nu_var=x,
        eta=eta, eta_vars=(x, y),
        signature=sig,
        label_map={f"c_{c}": f"c_{c}" for c in colours})
    return tree, interp


# ---------------------------------------------------------------------------
# Formula translation


def _freshen_bound(f: Formula, fresh: _FreshNames, mapping: dict[str, str]) -> Formula:
    if isinstance(f, F.QUANTIFIERS):
        new = fresh.fresh(f.var)
        return type(f)(new, _freshen_bound(f.body, fresh, {**mapping, f.var: new}))
    if isinstance(f, F.Not):
        return F.Not(_freshen_bound(f.body, fresh, mapping))
    if isinstance(f, (F.And, F.Or, F.Implies)):
        return type(f)(_freshen_bound(f.left, fresh, mapping),
                       _freshen_bound(f.right, fresh, mapping))
    return F.substitute_var(f, mapping)


def _instantiate(template: Formula, params: dict[str, str], fresh: _FreshNames) -> Formula:
    """Template with its bound variables renamed fresh, then parameters filled in."""
    return F.substitute_var(_freshen_bound(template, fresh, {}), params)


def translate(f: Formula, interp: Interpretation) -> Formula:
    """Relativize quantifiers by nu and replace graph atoms; the result is a
    tree-signature formula equivalent to `f` under the interpretation."""
    taken = {name for node in F.walk(f) for name in F.atom_vars(node)}
    for template in (interp.nu, interp.eta):
        taken |= {name for node in F.walk(template) for name in F.atom_vars(node)}
    fresh = _FreshNames(taken)

    def nu_at(var: str) -> Formula:
        return _instantiate(interp.nu, {interp.nu_var: var}, fresh)

    def go(node: Formula) -> Formula:
        if isinstance(node, (F.Exists, F.Forall)):
            body = go(node.body)
            if F.var_sort(node.var) == F.ELEMENT:
                guard = nu_at(node.var)
                wrapped = (F.And(guard, body) if isinstance(node, F.Exists)
                           else F.Implies(guard, body))
                return type(node)(node.var, wrapped)
            member = fresh.fresh("y")
            guard = F.Forall(member, F.Implies(F.Member(member, node.var), nu_at(member)))
            wrapped = (F.And(guard, body) if isinstance(node, F.Exists)
                       else F.Implies(guard, body))
            return type(node)(node.var, wrapped)
        if isinstance(node, F.Rel):
            if node.relation != F.GRAPH_RELATION:
                raise F.FormulaError(
                    f"interpretation does not define relation {node.relation!r}")
            ex, ey = interp.eta_vars
            return _instantiate(interp.eta, {ex: node.left, ey: node.right}, fresh)
        if isinstance(node, F.Label):
            target = interp.label_map.get(node.label)
            if target is None:
                raise F.FormulaError(
                    f"interpretation does not carry label {node.label!r}")
            return F.Label(target, node.var)
        if isinstance(node, F.Not):
            return F.Not(go(node.body))
        if isinstance(node, (F.And, F.Or, F.Implies)):
            return type(node)(go(node.left), go(node.right))
        return node

    return go(f)


# ---------------------------------------------------------------------------
# End-to-end graph checking


@dataclass(frozen=True)
class GraphCheckReport:
    verdict: bool
    front_end: str
    tree_size: int
    kernel_size: int
    translated_q: int
    translated_s: int


def check_graph_report(graph_or_tm, sentence: Formula, front_end: str = "td",
                       forest: EliminationForest | None = None,
                       budget: Budget | None = None,
                       td_budget: int = 20) -> GraphCheckReport:
    """Interpret, translate, kernelize, and check.  `front_end` is "td"
    (forest computed or supplied) or "shrub" (a TreeModel as first argument)."""
    if front_end == "td":
        graph = graph_or_tm
        if forest is None:
            _, forest = tree_depth_exact(graph, td_budget)
        tree, interp = td_interpret(graph, forest)
    elif front_end == "shrub":
        tree, interp = shrub_interpret(graph_or_tm)
    else:
        raise ValueError(f"unknown front end {front_end!r}")
    translated = translate(sentence, interp)
    mode = "cmso" if F.lcm_moduli(translated) > 1 else "mso"
    report = check_with_kernel_report(tree, translated, interp.signature, mode, budget)
    return GraphCheckReport(report.verdict, front_end, tree.size(),
                            report.kernel_size, report.q, report.s)


def check_graph(graph_or_tm, sentence: Formula, front_end: str = "td",
                forest: EliminationForest | None = None,
                budget: Budget | None = None, td_budget: int = 20) -> bool:
    return check_graph_report(graph_or_tm, sentence, front_end, forest,
                              budget, td_budget).verdict


# ---------------------------------------------------------------------------
# File formats


def load_graph(text: str) -> Graph:
    """Header "p <n> <m>", then "e u v" edge lines (1-based) and optional
    "l v NAME" label lines; "c" lines are comments."""
    n = m = None
    edges = []
    labels: dict[int, set[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if n is not None:
                raise GraphFormatError(f"line {lineno}: duplicate header")
            if len(parts) != 3:
                raise GraphFormatError(f"line {lineno}: expected 'p <n> <m>'")
            n, m = int(parts[1]), int(parts[2])
        elif parts[0] == "e":
            if n is None:
                raise GraphFormatError(f"line {lineno}: edge before header")
            if len(parts) != 3:
                raise GraphFormatError(f"line {lineno}: expected 'e <u> <v>'")
            u, v = int(parts[1]), int(parts[2])
            if not (1 <= u <= n and 1 <= v <= n) or u == v:
                raise GraphFormatError(f"line {lineno}: bad edge {u} {v}")
            edges.append((u, v))
        elif parts[0] == "l":
            if len(parts) != 3:
                raise GraphFormatError(f"line {lineno}: expected 'l <v> <NAME>'")
            labels.setdefault(int(parts[1]), set()).add(parts[2])
        else:
            raise GraphFormatError(f"line {lineno}: unknown line kind {parts[0]!r}")
    if n is None:
        raise GraphFormatError("missing 'p <n> <m>' header")
    if m is not None and m != len(edges):
        raise GraphFormatError(f"header announces {m} edges, found {len(edges)}")
    return graph_from_edges(n, edges, labels)


def load_forest(text: str, graph: Graph) -> EliminationForest:
    """One line per vertex: "v parent" with parent 0 meaning a root."""
    parent: dict[int, int | None] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected '<v> <parent-or-0>'")
        v, p = int(parts[0]), int(parts[1])
        parent[v] = None if p == 0 else p
    forest = EliminationForest(parent)
    forest.validate(graph)
    return forest


def load_tree_model(text: str) -> TreeModel:
    """An S-expression tree whose leaves carry "c_<colour>" labels, followed
    by signature lines "s <c1> <c2> <distance> <0|1>"."""
    depth = 0
    end = None
    start = text.find("(")
    if start < 0:
        raise GraphFormatError("no tree S-expression found")
    for i in range(start, len(text)):
        if text[i] == "(":
            depth += 1
        elif text[i] == ")":
            depth -= 1
            if depth == 0:
                end = i + 1
                break
    if end is None:
        raise GraphFormatError("unbalanced parentheses in tree-model")

    from .tree import _SEXPR_TOKEN  # reuse the tokenizer, labels free-form here

    tokens = []
    pos = start
    while pos < end:
        mt = _SEXPR_TOKEN.match(text, pos)
        if mt is None:
            raise GraphFormatError("bad character in tree-model S-expression")
        tokens.append(mt.group(1))
        pos = mt.end()

    parent: dict[int, int | None] = {}
    node_labels: dict[int, list[str]] = {}
    counter = [0]

    def node(i: int, par: int | None) -> int:
        if tokens[i:i + 3] != ["(", "node", "["]:
            raise GraphFormatError("expected '(node ['")
        i += 3
        labs = []
        while i < len(tokens) and tokens[i] != "]":
            if tokens[i] != ",":
                labs.append(tokens[i])
            i += 1
        i += 1
        vid = counter[0]
        counter[0] += 1
        parent[vid] = par
        node_labels[vid] = labs
        while i < len(tokens) and tokens[i] == "(":
            i = node(i, vid)
        if i >= len(tokens) or tokens[i] != ")":
            raise GraphFormatError("expected ')'")
        return i + 1

    node(0, None)

    colour: dict[int, str] = {}
    children = set(p for p in parent.values() if p is not None)
    for v, labs in node_labels.items():
        is_leaf = v not in children
        if is_leaf:
            cl = [l for l in labs if l.startswith("c_")]
            if len(cl) != 1:
                raise GraphFormatError(f"leaf {v} needs exactly one c_<colour> label")
            colour[v] = cl[0][2:]
        elif labs:
            raise GraphFormatError(f"internal node {v} must not carry labels")

    signature: dict[tuple[str, str, int], bool] = {}
    for lineno, raw in enumerate(text[end:].splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c "):
            continue
        parts = line.split()
        if parts[0] != "s" or len(parts) != 5:
            raise GraphFormatError(f"signature line {lineno}: expected 's c1 c2 dist 0|1'")
        c1, c2, dist, val = parts[1], parts[2], int(parts[3]), parts[4]
        if val not in ("0", "1"):
            raise GraphFormatError(f"signature line {lineno}: value must be 0 or 1")
        signature[(c1, c2, dist)] = val == "1"
        signature[(c2, c1, dist)] = val == "1"

    return TreeModel(parent, colour, signature)
