"""Threshold functions and the limb-deletion reduction producing kernels.

The threshold recurrence, with k an integer parameter:

    N(0)   = 2^k + 1
    R(i)   = q * N(i)^s
    N(i+1) = 2^k * (R(i) + 1)^N(i)

Values explode immediately, so all threshold arithmetic saturates at a cap;
class counts never exceed the tree size, so capping at size+1 is exact for
every comparison the reduction makes.  The saturation flag means the true
value strictly exceeds the returned one.  Exact big-integer variants exist
for desk-scale checks and are guarded by a bit budget.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formula import Signature
from .tree import LabelledTree


class BitBudgetError(ArithmeticError):
    """An exact value would exceed the configured bit budget."""


DEFAULT_BIT_BUDGET = 1 << 22


@dataclass(frozen=True)
class CappedNat:
    """A natural number saturated at a cap; `saturated` means truncated."""

    value: int
    saturated: bool = False

    def __int__(self):
        return self.value


# Saturating arithmetic on (value, above) pairs, where `above` records that
# the true value strictly exceeds `value` (only possible at value == cap).

def _sat_add(a, c, cap):
    t = a[0] + c
    return (cap, True) if t > cap else (t, a[1])


def _sat_mul(a, b, cap):
    t = a[0] * b[0]
    if t > cap:
        return (cap, True)
    return (t, a[1] or b[1]) if t == cap else (t, False)


def _sat_pow(base, exp, cap):
    bv, ev = base[0], exp[0]
    if bv == 0:
        return (1, False) if ev == 0 else (0, False)
    if bv == 1:
        # a capped-to-1 base (cap == 1) still exceeds the cap when raised
        if base[1] and (ev >= 1 or exp[1]):
            return (cap, True)
        return (1, False)
    if ev >= cap.bit_length():  # bv >= 2, so bv**ev >= 2**ev > cap
        return (cap, True)
    t = bv ** ev
    if t > cap:
        return (cap, True)
    return (t, base[1] or exp[1]) if t == cap else (t, False)


def _sat_N(i, q, s, k, cap):
    two_k = _sat_pow((2, False), (k, False), cap)
    n = _sat_add(two_k, 1, cap)
    for _ in range(i):
        r = _sat_mul((q, False), _sat_pow(n, (s, False), cap), cap)
        n = _sat_mul(two_k, _sat_pow(_sat_add(r, 1, cap), n, cap), cap)
    return n


def threshold_N(i: int, q: int, s: int, k: int, cap: int) -> CappedNat:
    """N(i) saturated at `cap` (cap >= 2)."""
    if cap < 2:
        raise ValueError("cap must be at least 2")
    return CappedNat(*_sat_N(i, q, s, k, cap))


def threshold_R(i: int, q: int, s: int, k: int, cap: int) -> CappedNat:
    """R(i) = q * N(i)^s saturated at `cap` (cap >= 1)."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    n = _sat_N(i, q, s, k, max(cap, 2))
    if n[0] > cap:
        n = (cap, True)
    return CappedNat(*_sat_mul((q, False), _sat_pow(n, (s, False), cap), cap))


# ---------------------------------------------------------------------------
# Exact values under a bit budget


def _check_bits(x: int, budget: int):
    if x.bit_length() > budget:
        raise BitBudgetError(f"value needs {x.bit_length()} bits, budget is {budget}")


def _pow_budget(base: int, exp: int, budget: int) -> int:
    if base <= 1:
        return base ** min(exp, 1) if exp else 1
    if exp * (base.bit_length() - 1) > budget:
        raise BitBudgetError(f"power needs over {exp * (base.bit_length() - 1)} bits")
    result = base ** exp
    _check_bits(result, budget)
    return result


def threshold_N_exact(i: int, q: int, s: int, k: int,
                      bit_budget: int = DEFAULT_BIT_BUDGET) -> int:
    n = (1 << k) + 1
    _check_bits(n, bit_budget)
    for _ in range(i):
        r = q * _pow_budget(n, s, bit_budget)
        _check_bits(r, bit_budget)
        n = (1 << k) * _pow_budget(r + 1, n, bit_budget)
        _check_bits(n, bit_budget)
    return n


def threshold_R_exact(i: int, q: int, s: int, k: int,
                      bit_budget: int = DEFAULT_BIT_BUDGET) -> int:
    n = threshold_N_exact(i, q, s, k, bit_budget)
    r = q * _pow_budget(n, s, bit_budget)
    _check_bits(r, bit_budget)
    return r


def tower(i: int, x: int, bit_budget: int = DEFAULT_BIT_BUDGET) -> int:
    """i-fold exponential: tower(0, x) = x, tower(i+1, x) = 2^tower(i, x)."""
    v = x
    for _ in range(i):
        if v > bit_budget:
            raise BitBudgetError(f"2^{v} exceeds the {bit_budget}-bit budget")
        v = 1 << v
    return v


def kernel_size_bound(h: int, t: int, q: int, s: int,
                      bit_budget: int = DEFAULT_BIT_BUDGET) -> int:
    """Worst-case reduced-tree size at height h with t labels: an h-fold
    exponential in (t+q+s)(q+s)."""
    if h < 1:
        raise ValueError("bound is defined for height h >= 1")
    return tower(h, ((1 << (h + 5)) - 12) * (t + q + s) * (q + s), bit_budget)


# ---------------------------------------------------------------------------
# Threshold functions as level-indexed tables


@dataclass(frozen=True)
class ThresholdFn:
    """Per-level limb-count thresholds.

    `value(i)` is the maximal number of limbs kept per l-isomorphism class at
    threshold index i; `step` is the deletion granularity (m for the counting
    variant, 1 otherwise).  Explicit tables extend past their end with the
    last entry.
    """

    mode: str  # "paper" | "paper-cmso" | "explicit"
    q: int = 0
    s: int = 0
    k: int = 0
    m: int = 1
    table: tuple[int, ...] = ()
    cap: int = 1 << 62

    def __post_init__(self):
        if self.mode not in ("paper", "paper-cmso", "explicit"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")
        if self.mode == "explicit" and (not self.table or min(self.table) < 1):
            raise ValueError("explicit thresholds must be a non-empty table of values >= 1")
        if self.m < 1:
            raise ValueError("deletion granularity must be >= 1")
        if self.mode == "paper" and self.m != 1:
            raise ValueError("paper mode deletes one limb at a time")

    @property
    def step(self) -> int:
        return self.m

    def value(self, i: int) -> int:
        if self.mode == "explicit":
            return self.table[min(i, len(self.table) - 1)]
        q = self.q + self.m if self.mode == "paper-cmso" else self.q
        return threshold_R(i, q, self.s, self.k, self.cap).value


def paper_thresholds(q: int, s: int, k: int, cap: int = 1 << 62) -> ThresholdFn:
    return ThresholdFn("paper", q=q, s=s, k=k, cap=cap)


def cmso_thresholds(m: int, q: int, s: int, k: int, cap: int = 1 << 62) -> ThresholdFn:
    return ThresholdFn("paper-cmso", q=q, s=s, k=k, m=m, cap=cap)


def explicit_thresholds(values) -> ThresholdFn:
    return ThresholdFn("explicit", table=tuple(values))


# ---------------------------------------------------------------------------
# Reduction


def reduce_tree(tree: LabelledTree, f: ThresholdFn, sig: Signature,
                stats: dict[int, int] | None = None) -> LabelledTree:
    """Truncate every l-isomorphism class of limbs to the per-level threshold.

    Single bottom-up pass; levels are fixed from the ORIGINAL height, and
    deleting a limb never changes a survivor's depth.  A node at level l has
    its limb classes cut to at most f(l-1) members, `f.step` limbs at a time,
    largest node ids first.  Returns a new tree; the input is left untouched.
    """
    h = tree.height
    alive = set(tree.parent)
    codes: dict[int, bytes] = {}
    step = f.step
    label_index = {l: i for i, l in enumerate(sig.labels)}

    for depth_bucket in reversed(tree.nodes_by_depth()):
        for v in depth_bucket:
            if v not in alive:
                continue
            kids = [c for c in tree.children(v) if c in alive]
            if kids:
                index = h - tree.depth(v) - 1
                threshold = f.value(index)
                groups: dict[bytes, list[int]] = {}
                for c in kids:
                    groups.setdefault(codes[c], []).append(c)
                for code in sorted(groups):
                    members = sorted(groups[code])
                    kept = len(members)
                    while kept > threshold:
                        kept -= step
                    for victim in members[kept:]:
                        for u in tree.subtree_ids(victim):
                            alive.discard(u)
                    if stats is not None and kept < len(members):
                        stats[index] = stats.get(index, 0) + len(members) - kept
                kids = [c for c in kids if c in alive]
            try:
                idx = sorted(label_index[l] for l in tree.labels[v])
            except KeyError:
                missing = sorted(tree.labels[v] - set(label_index))
                raise ValueError(f"tree labels {missing} not in signature") from None
            parts = [bytes([len(idx)]), bytes(idx)]
            for code in sorted(codes[c] for c in kids):
                parts.append(len(code).to_bytes(4, "big"))
                parts.append(code)
            codes[v] = b"".join(parts)

    parent = {v: p for v, p in tree.parent.items() if v in alive}
    labels = {v: l for v, l in tree.labels.items() if v in alive}
    return LabelledTree(parent, labels, tree.root)


def reduce(tree: LabelledTree, f: ThresholdFn, sig: Signature,
           stats: dict[int, int] | None = None) -> LabelledTree:
    """Reduction with one-at-a-time deletion: keep at most f(i) limbs per class."""
    if f.mode == "paper-cmso":
        raise ValueError("use reduce_cmso for counting-logic thresholds")
    return reduce_tree(tree, f, sig, stats)


def reduce_cmso(tree: LabelledTree, m: int, q: int, s: int, t: int,
                cap: int | None = None, sig: Signature | None = None,
                stats: dict[int, int] | None = None) -> LabelledTree:
    """Counting-logic reduction: while a class exceeds R(i) taken for q+m
    element quantifiers, delete exactly m of its limbs at once, so the
    surviving count keeps its residue modulo m.
    """
    if m < 1:
        raise ValueError("modulus lcm must be >= 1")
    if sig is None:
        sig = Signature("parent", tuple(set().union(frozenset(), *tree.labels.values())))
    if cap is None:
        cap = tree.size() + 1
    f = cmso_thresholds(m, q, s, t + 3 * q + s, cap)
    return reduce_tree(tree, f, sig, stats)
