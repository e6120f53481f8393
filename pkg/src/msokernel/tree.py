"""Rooted, unordered, multi-labelled trees with canonical subtree codes.

Node ids live in an arena (a dict); children order is storage detail only
and never observable through the public operations.  Canonical codes are
length-prefixed byte strings computed bottom-up; two subtrees get equal
codes exactly when they are l-isomorphic (root- and label-preserving).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .formula import Signature


class TreeFormatError(ValueError):
    """Malformed tree text or arena: cycles, multiple roots, unknown labels."""


@dataclass
class LabelledTree:
    """Arena of nodes: parent links, label sets, one root."""

    parent: dict[int, int | None] = field(default_factory=dict)
    labels: dict[int, frozenset[str]] = field(default_factory=dict)
    root: int = 0

    def __post_init__(self):
        if not self.parent:
            self.parent = {self.root: None}
            self.labels = {self.root: frozenset()}
        self._validate()
        self._refresh()

    def _validate(self):
        roots = [v for v, p in self.parent.items() if p is None]
        if len(roots) != 1:
            raise TreeFormatError(f"expected exactly one root, found {len(roots)}")
        self.root = roots[0]
        for v, p in self.parent.items():
            if p is not None and p not in self.parent:
                raise TreeFormatError(f"node {v} has unknown parent {p}")
            if v not in self.labels:
                self.labels[v] = frozenset()
        # Walk up from every node; revisiting a node on the same walk is a cycle.
        seen_depth: dict[int, int] = {self.root: 0}
        for v in self.parent:
            path = []
            u = v
            while u not in seen_depth:
                path.append(u)
                u = self.parent[u]
                if u in path:
                    raise TreeFormatError(f"cycle through node {u}")
            base = seen_depth[u]
            for i, w in enumerate(reversed(path)):
                seen_depth[w] = base + i + 1
        self._depth = seen_depth

    def _refresh(self):
        self._children: dict[int, list[int]] = {v: [] for v in self.parent}
        for v, p in self.parent.items():
            if p is not None:
                self._children[p].append(v)
        self._depth = {}
        stack = [(self.root, 0)]
        while stack:
            v, d = stack.pop()
            self._depth[v] = d
            for c in self._children[v]:
                stack.append((c, d + 1))
        self.height = max(self._depth.values())
        self._codes: dict[int, bytes] | None = None

    # -- read interface -----------------------------------------------------

    def nodes(self) -> list[int]:
        return list(self.parent)

    def children(self, v: int) -> list[int]:
        return list(self._children[v])

    def depth(self, v: int) -> int:
        return self._depth[v]

    def level(self, v: int) -> int:
        """Level of a node: height minus depth (leaves on a longest path sit at 0)."""
        return self.height - self._depth[v]

    def size(self) -> int:
        return len(self.parent)

    def subtree_ids(self, v: int) -> list[int]:
        out = []
        stack = [v]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self._children[u])
        return out

    def nodes_by_depth(self) -> list[list[int]]:
        buckets: list[list[int]] = [[] for _ in range(self.height + 1)]
        for v, d in self._depth.items():
            buckets[d].append(v)
        return buckets

    # -- mutation (load/reduce only) ----------------------------------------

    def delete_subtree(self, v: int):
        if v == self.root:
            raise TreeFormatError("cannot delete the root")
        for u in self.subtree_ids(v):
            del self.parent[u]
            del self.labels[u]
        self._refresh()

    def copy(self) -> "LabelledTree":
        return LabelledTree(dict(self.parent), dict(self.labels), self.root)

    def relabelled(self, mapping: dict[int, int]) -> "LabelledTree":
        """Arena with node ids permuted by `mapping` (must be a bijection)."""
        parent = {mapping[v]: (None if p is None else mapping[p])
                  for v, p in self.parent.items()}
        labels = {mapping[v]: l for v, l in self.labels.items()}
        return LabelledTree(parent, labels, mapping[self.root])


# ---------------------------------------------------------------------------
# Canonical codes (labelled AHU)


def _encode(label_set: frozenset[str], sig: Signature, child_codes: list[bytes]) -> bytes:
    idx = sorted(sig.labels.index(l) for l in label_set)
    parts = [bytes([len(idx)]), bytes(idx)]
    for code in sorted(child_codes):
        parts.append(len(code).to_bytes(4, "big"))
        parts.append(code)
    return b"".join(parts)


def canonical_codes(tree: LabelledTree, sig: Signature) -> dict[int, bytes]:
    """Codes for every node's subtree, computed in one bottom-up pass."""
    codes: dict[int, bytes] = {}
    for bucket in reversed(tree.nodes_by_depth()):
        for v in bucket:
            unknown = tree.labels[v] - set(sig.labels)
            if unknown:
                raise TreeFormatError(f"labels {sorted(unknown)} not in signature")
            codes[v] = _encode(tree.labels[v], sig,
                               [codes[c] for c in tree.children(v)])
    return codes


def canonical_code(tree: LabelledTree, v: int, sig: Signature) -> bytes:
    """Code of the subtree rooted at v; equal codes == l-isomorphic subtrees."""
    return canonical_codes(tree, sig)[v]


def limb_classes(tree: LabelledTree, v: int, sig: Signature,
                 codes: dict[int, bytes] | None = None) -> dict[bytes, list[int]]:
    """Children of v grouped by subtree code, groups ordered by code."""
    if codes is None:
        codes = canonical_codes(tree, sig)
    groups: dict[bytes, list[int]] = {}
    for c in sorted(tree.children(v), key=lambda c: (codes[c], c)):
        groups.setdefault(codes[c], []).append(c)
    return groups


def l_isomorphic(t1: LabelledTree, t2: LabelledTree, sig: Signature) -> bool:
    return (canonical_code(t1, t1.root, sig) == canonical_code(t2, t2.root, sig))


# ---------------------------------------------------------------------------
# S-expression format: (node [a,b] (node []) ...)


_SEXPR_TOKEN = re.compile(r"\s*(\(|\)|\[|\]|,|[A-Za-z0-9_]+)")


def load_tree(text: str, sig: Signature) -> LabelledTree:
    """Parse the S-expression tree format; exactly one root per input."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _SEXPR_TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise TreeFormatError(f"unexpected character {rest[0]!r} in tree text")
        tokens.append(m.group(1))
        pos = m.end()

    parent: dict[int, int | None] = {}
    labels: dict[int, frozenset[str]] = {}
    counter = [0]

    def node(i: int, par: int | None) -> int:
        if i >= len(tokens) or tokens[i] != "(":
            raise TreeFormatError("expected '('")
        if i + 1 >= len(tokens) or tokens[i + 1] != "node":
            raise TreeFormatError("expected 'node'")
        if i + 2 >= len(tokens) or tokens[i + 2] != "[":
            raise TreeFormatError("expected '[' after 'node'")
        i += 3
        labs = []
        while i < len(tokens) and tokens[i] != "]":
            if tokens[i] == ",":
                i += 1
                continue
            labs.append(tokens[i])
            i += 1
        if i >= len(tokens):
            raise TreeFormatError("unterminated label list")
        i += 1  # ']'
        for l in labs:
            if l not in sig.labels:
                raise TreeFormatError(f"unknown label {l!r}")
        vid = counter[0]
        counter[0] += 1
        parent[vid] = par
        labels[vid] = frozenset(labs)
        while i < len(tokens) and tokens[i] == "(":
            i = node(i, vid)
        if i >= len(tokens) or tokens[i] != ")":
            raise TreeFormatError("expected ')'")
        return i + 1

    if not tokens:
        raise TreeFormatError("empty tree text")
    end = node(0, None)
    if end != len(tokens):
        raise TreeFormatError("multiple roots in tree text")
    return LabelledTree(parent, labels, 0)


def dump_tree(tree: LabelledTree, sig: Signature) -> str:
    """Serialize to the S-expression format, children in canonical-code order."""
    codes = canonical_codes(tree, sig)

    def rec(v: int) -> str:
        labs = ",".join(sorted(tree.labels[v]))
        kids = "".join(" " + rec(c)
                       for c in sorted(tree.children(v), key=lambda c: (codes[c], c)))
        return f"(node [{labs}]{kids})"

    return rec(tree.root)


# ---------------------------------------------------------------------------
# Construction helpers


def star(leaf_count: int, leaf_labels: frozenset[str] = frozenset(),
         root_labels: frozenset[str] = frozenset()) -> LabelledTree:
    """Root with `leaf_count` identically labelled leaf children."""
    parent: dict[int, int | None] = {0: None}
    labels: dict[int, frozenset[str]] = {0: root_labels}
    for i in range(1, leaf_count + 1):
        parent[i] = 0
        labels[i] = leaf_labels
    return LabelledTree(parent, labels, 0)
