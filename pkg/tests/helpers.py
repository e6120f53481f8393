"""Test apparatus: random generators and independent oracles.

The oracles here deliberately avoid the package's own algorithms: tree
isomorphism is decided by backtracking over child matchings, longest paths
by a subset dynamic program, so soundness tests compare two unrelated
computations.
"""

import itertools
from functools import lru_cache

from msokernel import formula as F
from msokernel.formula import Signature
from msokernel.interpret import Graph
from msokernel.tree import LabelledTree


# ---------------------------------------------------------------------------
# Random structures


def random_tree(rng, max_nodes=40, max_height=2, labels=(), min_nodes=1,
                bushiness=0.5) -> LabelledTree:
    """Random rooted tree; `bushiness` biases attachment toward the root,
    which produces the large isomorphism classes that make reductions fire."""
    n = rng.randint(min_nodes, max_nodes)
    parent = {0: None}
    labs = {0: _random_labels(rng, labels)}
    depth = {0: 0}
    for i in range(1, n):
        candidates = [v for v in parent if depth[v] < max_height]
        if rng.random() < bushiness:
            shallowest = min(depth[v] for v in candidates)
            candidates = [v for v in candidates if depth[v] == shallowest]
        p = rng.choice(candidates)
        parent[i] = p
        depth[i] = depth[p] + 1
        labs[i] = _random_labels(rng, labels)
    return LabelledTree(parent, labs, 0)


def _random_labels(rng, labels):
    return frozenset(l for l in labels if rng.random() < 0.5)


def random_graph(rng, n, p=0.4, labels=()) -> Graph:
    vertices = tuple(range(1, n + 1))
    edges = frozenset(frozenset((u, v))
                      for u in vertices for v in vertices
                      if u < v and rng.random() < p)
    labmap = {v: _random_labels(rng, labels) for v in vertices}
    return Graph(vertices, edges, {v: l for v, l in labmap.items() if l})


def permute_arena(rng, tree: LabelledTree) -> LabelledTree:
    ids = tree.nodes()
    shuffled = ids[:]
    rng.shuffle(shuffled)
    return tree.relabelled(dict(zip(ids, shuffled)))


# ---------------------------------------------------------------------------
# Random prenex sentences


def random_prenex_sentence(rng, sig: Signature, q: int, s: int,
                           mod_atoms=0, max_depth=3) -> F.Formula:
    """Prenex sentence with exactly q element and s set quantifiers and a
    random quantifier-free matrix over the variables in scope."""
    evars = [f"x{i}" for i in range(q)]
    svars = [f"X{i}" for i in range(s)]
    entries = ([("e", v) for v in evars] + [("s", v) for v in svars])
    rng.shuffle(entries)
    matrix = _random_matrix(rng, sig, evars, svars, max_depth)
    for _ in range(mod_atoms):
        if not svars:
            break
        b = rng.choice((2, 3))
        atom = F.Mod(rng.randrange(b), b, rng.choice(svars))
        matrix = rng.choice((F.And, F.Or))(matrix, atom) if rng.random() < 0.5 \
            else rng.choice((F.And, F.Or))(atom, matrix)
    out = matrix
    for kind, var in reversed(entries):
        out = F.Exists(var, out) if rng.random() < 0.5 else F.Forall(var, out)
    return out


def _random_matrix(rng, sig, evars, svars, depth):
    if depth <= 0 or rng.random() < 0.4:
        return _random_atom(rng, sig, evars, svars)
    r = rng.random()
    if r < 0.25:
        return F.Not(_random_matrix(rng, sig, evars, svars, depth - 1))
    op = rng.choice((F.And, F.Or, F.Implies))
    return op(_random_matrix(rng, sig, evars, svars, depth - 1),
              _random_matrix(rng, sig, evars, svars, depth - 1))


def _random_atom(rng, sig, evars, svars):
    options = []
    if evars:
        options += ["rel", "eq"]
        if sig.labels:
            options.append("label")
        if svars:
            options.append("member")
    options.append("const")
    kind = rng.choice(options)
    if kind == "rel":
        return F.Rel(sig.relation, rng.choice(evars), rng.choice(evars))
    if kind == "eq":
        return F.Eq(rng.choice(evars), rng.choice(evars))
    if kind == "label":
        return F.Label(rng.choice(sig.labels), rng.choice(evars))
    if kind == "member":
        return F.Member(rng.choice(evars), rng.choice(svars))
    return F.Top() if rng.random() < 0.5 else F.Bottom()


def random_formula(rng, sig: Signature, max_quantifiers=3, max_depth=4):
    """Arbitrarily shaped (non-prenex) sentence, quantifiers anywhere."""
    counter = itertools.count()

    def go(evars, svars, depth, budget):
        if depth <= 0 or (budget <= 0 and rng.random() < 0.6):
            return _random_atom(rng, sig, evars, svars)
        r = rng.random()
        if budget > 0 and r < 0.35:
            i = next(counter)
            if rng.random() < 0.6:
                var = f"v{i}"
                body = go(evars + [var], svars, depth - 1, budget - 1)
            else:
                var = f"V{i}"
                body = go(evars, svars + [var], depth - 1, budget - 1)
            return F.Exists(var, body) if rng.random() < 0.5 else F.Forall(var, body)
        if r < 0.5:
            return F.Not(go(evars, svars, depth - 1, budget))
        op = rng.choice((F.And, F.Or, F.Implies))
        return op(go(evars, svars, depth - 1, budget),
                  go(evars, svars, depth - 1, budget))

    return go([], [], max_depth, max_quantifiers)


# ---------------------------------------------------------------------------
# Independent oracles


def iso_oracle(t1: LabelledTree, v1: int, t2: LabelledTree, v2: int) -> bool:
    """Backtracking label-preserving rooted-tree isomorphism."""
    if t1.labels[v1] != t2.labels[v2]:
        return False
    kids1, kids2 = t1.children(v1), t2.children(v2)
    if len(kids1) != len(kids2):
        return False

    def match(i, used):
        if i == len(kids1):
            return True
        for j, w in enumerate(kids2):
            if j not in used and iso_oracle(t1, kids1[i], t2, w):
                used.add(j)
                if match(i + 1, used):
                    return True
                used.discard(j)
        return False

    return match(0, set())


def trees_l_isomorphic(t1: LabelledTree, t2: LabelledTree) -> bool:
    return iso_oracle(t1, t1.root, t2, t2.root)


def longest_path_edges(graph: Graph) -> int:
    """Length (in edges) of a longest simple path, by subset DP."""
    verts = sorted(graph.vertices)
    n = len(verts)
    if n == 0:
        return 0
    index = {v: i for i, v in enumerate(verts)}
    adj = [0] * n
    for e in graph.edges:
        u, v = tuple(e)
        adj[index[u]] |= 1 << index[v]
        adj[index[v]] |= 1 << index[u]
    reach = [0] * (1 << n)
    for i in range(n):
        reach[1 << i] = 1 << i
    best = 0
    for mask in range(1, 1 << n):
        ends = reach[mask]
        if not ends:
            continue
        best = max(best, mask.bit_count() - 1)
        e = ends
        while e:
            b = e & -e
            end = b.bit_length() - 1
            grow = adj[end] & ~mask
            while grow:
                g = grow & -grow
                reach[mask | g] |= g
                grow ^= g
            e ^= b
    return best


# ---------------------------------------------------------------------------
# Exhaustive tree enumeration (ordered presentations)


@lru_cache(maxsize=None)
def _ordered_forests(n: int) -> tuple:
    if n == 0:
        return ((),)
    out = []
    for first in range(1, n + 1):
        for t in _ordered_trees(first):
            for rest in _ordered_forests(n - first):
                out.append((t,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def _ordered_trees(n: int) -> tuple:
    # a tree is the tuple of its child subtrees
    return tuple(_ordered_forests(n - 1))


def all_labelled_presentations(max_nodes: int, labels: tuple[str, ...]):
    """Every ordered presentation of every tree with <= max_nodes nodes, each
    node carrying any subset of `labels`.  Yields LabelledTree instances."""
    subsets = [frozenset(c) for r in range(len(labels) + 1)
               for c in itertools.combinations(labels, r)]
    for n in range(1, max_nodes + 1):
        for shape in _ordered_trees(n):
            slots = _count_nodes(shape)
            for assignment in itertools.product(subsets, repeat=slots):
                yield _tree_from_shape(shape, assignment)


def _count_nodes(shape) -> int:
    return 1 + sum(_count_nodes(c) for c in shape)


def _tree_from_shape(shape, assignment) -> LabelledTree:
    parent: dict[int, int | None] = {}
    labels: dict[int, frozenset] = {}
    counter = [0]

    def build(node, par):
        vid = counter[0]
        counter[0] += 1
        parent[vid] = par
        labels[vid] = assignment[vid]
        for child in node:
            build(child, vid)

    build(shape, None)
    return LabelledTree(parent, labels, 0)


# ---------------------------------------------------------------------------
# Named sentences


def colourability(k: int, sig: Signature) -> F.Formula:
    """k-colourability: k set variables covering the vertices with no
    monochromatic edge."""
    xs = [f"X{i}" for i in range(k)]
    cover = F.Forall("x", _or_all([F.Member("x", X) for X in xs]))
    mono = _or_all([F.And(F.Member("x", X), F.Member("y", X)) for X in xs])
    proper = F.Forall("x", F.Forall("y", F.Implies(
        F.Rel(sig.relation, "x", "y"), F.Not(mono))))
    out = F.And(cover, proper)
    for X in reversed(xs):
        out = F.Exists(X, out)
    return out


def _or_all(parts):
    out = parts[0]
    for p in parts[1:]:
        out = F.Or(out, p)
    return out
