"""MSO/CMSO formulas over tree and graph signatures.

The two signatures used throughout carry exactly one binary relation
(``parent`` for rooted trees, ``edge`` for graphs) plus a finite label
alphabet.  Element variables are lowercase identifiers, set variables
uppercase; the case of the first character is the sort tag.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

ELEMENT = "element"
SET = "set"

TREE_RELATION = "parent"
GRAPH_RELATION = "edge"

RESERVED = {"E", "A", "ES", "AS", "true", "false", "in", "mod", "parent", "edge"}


class FormulaError(ValueError):
    """Malformed formula: sort mismatch, unknown label, bad modulus."""


class ParseError(FormulaError):
    """Syntax error, with the offset into the input text."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


def var_sort(name: str) -> str:
    """Sort of a variable name: uppercase initial means set-sort."""
    return SET if name[:1].isupper() else ELEMENT


@dataclass(frozen=True)
class Signature:
    """One binary relation plus a label alphabet, kept in lexicographic order."""

    relation: str
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.relation not in (TREE_RELATION, GRAPH_RELATION):
            raise FormulaError(f"unsupported relation {self.relation!r}")
        labels = tuple(sorted(self.labels))
        if len(set(labels)) != len(labels):
            raise FormulaError("duplicate label symbols in alphabet")
        object.__setattr__(self, "labels", labels)

    @property
    def label_count(self) -> int:
        return len(self.labels)


TREE_SIG = Signature(TREE_RELATION)
GRAPH_SIG = Signature(GRAPH_RELATION)


class Formula:
    """Base class of AST nodes.  Nodes are immutable and shareable."""

    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class Bottom(Formula):
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class Eq(Formula):
    left: str
    right: str

    def __post_init__(self):
        if var_sort(self.left) != ELEMENT or var_sort(self.right) != ELEMENT:
            raise FormulaError("equality takes element variables")

    def __str__(self):
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class Rel(Formula):
    """Binary relation atom: parent(p, c) / edge(u, v)."""

    relation: str
    left: str
    right: str

    def __post_init__(self):
        if self.relation not in (TREE_RELATION, GRAPH_RELATION):
            raise FormulaError(f"unknown relation {self.relation!r}")
        if var_sort(self.left) != ELEMENT or var_sort(self.right) != ELEMENT:
            raise FormulaError("relation atoms take element variables")

    def __str__(self):
        return f"{self.relation}({self.left}, {self.right})"


@dataclass(frozen=True)
class Label(Formula):
    label: str
    var: str

    def __post_init__(self):
        if var_sort(self.var) != ELEMENT:
            raise FormulaError("label atoms take an element variable")

    def __str__(self):
        return f"lab_{self.label}({self.var})"


@dataclass(frozen=True)
class Member(Formula):
    element: str
    set_var: str

    def __post_init__(self):
        if var_sort(self.element) != ELEMENT or var_sort(self.set_var) != SET:
            raise FormulaError("in(x, X) takes an element and a set variable")

    def __str__(self):
        return f"in({self.element}, {self.set_var})"


@dataclass(frozen=True)
class Mod(Formula):
    """Counting predicate: the set has `residue` modulo `modulus` elements."""

    residue: int
    modulus: int
    set_var: str

    def __post_init__(self):
        if self.modulus < 1 or not 0 <= self.residue < self.modulus:
            raise FormulaError(
                f"mod[{self.residue},{self.modulus}] requires 0 <= a < b, b >= 1")
        if var_sort(self.set_var) != SET:
            raise FormulaError("mod takes a set variable")

    def __str__(self):
        return f"mod[{self.residue},{self.modulus}]({self.set_var})"


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


QUANTIFIERS = (Exists, Forall)
ATOMS = (Top, Bottom, Eq, Rel, Label, Member, Mod)


# ---------------------------------------------------------------------------
# Parsing


_TOKEN_RE = re.compile(r"\s*(->|[A-Za-z_][A-Za-z0-9_]*|\d+|[()\[\],.=&|!])")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", len(text) - len(rest))
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive-descent parser for the sentence grammar.

    sentence := expr
    expr     := quant | binary
    quant    := ("E"|"A") var "." expr | ("ES"|"AS") setvar "." expr
    binary   := unary (("&" | "|" | "->") unary)*   (precedence ! > & > | > ->)
    unary    := "!" unary | atom
    atom     := "parent(" ev "," ev ")" | "edge(" ev "," ev ")"
              | "lab_" NAME "(" ev ")" | ev "=" ev | "in(" ev "," sv ")"
              | "mod[" nat "," nat "](" sv ")" | "true" | "false" | "(" expr ")"

    E and A accept a variable of either sort (the variable's case decides);
    ES and AS insist on a set variable.
    """

    def __init__(self, text: str, sig: Signature):
        self.text = text
        self.sig = sig
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def pos(self):
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise ParseError(f"unexpected end of input, expected {expected!r}", len(self.text))
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, found {tok!r}", self.pos())
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.expr()
        if self.peek() is not None:
            raise ParseError(f"trailing input {self.peek()!r}", self.pos())
        return f

    def expr(self) -> Formula:
        if self.peek() in ("E", "A", "ES", "AS"):
            return self.quant()
        return self.implies()

    def quant(self) -> Formula:
        kw = self.take()
        at = self.pos()
        var = self.take()
        if not var.replace("_", "").isalnum() or var[0].isdigit() or var in RESERVED:
            raise ParseError(f"expected a variable after {kw!r}, found {var!r}", at)
        if kw in ("ES", "AS") and var_sort(var) != SET:
            raise ParseError(f"{kw} requires a set variable (uppercase), found {var!r}", at)
        self.take(".")
        body = self.expr()
        return Exists(var, body) if kw in ("E", "ES") else Forall(var, body)

    def implies(self) -> Formula:
        f = self.disj()
        while self.peek() == "->":
            self.take()
            f = Implies(f, self.disj())
        return f

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        if self.peek() == "!":
            self.take()
            return Not(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        at = self.pos()
        if tok is None:
            raise ParseError("unexpected end of input", len(self.text))
        if tok == "(":
            self.take()
            f = self.expr()
            self.take(")")
            return f
        if tok == "true":
            self.take()
            return Top()
        if tok == "false":
            self.take()
            return Bottom()
        if tok in (TREE_RELATION, GRAPH_RELATION):
            if tok != self.sig.relation:
                raise ParseError(f"relation {tok!r} is not in the signature", at)
            self.take()
            self.take("(")
            x = self.variable(ELEMENT)
            self.take(",")
            y = self.variable(ELEMENT)
            self.take(")")
            return Rel(tok, x, y)
        if tok == "in":
            self.take()
            self.take("(")
            x = self.variable(ELEMENT)
            self.take(",")
            X = self.variable(SET)
            self.take(")")
            return Member(x, X)
        if tok == "mod":
            self.take()
            self.take("[")
            a = self.nat()
            self.take(",")
            b = self.nat()
            self.take("]")
            self.take("(")
            X = self.variable(SET)
            self.take(")")
            if b < 1 or a >= b:
                raise ParseError(f"mod[{a},{b}] requires 0 <= a < b", at)
            return Mod(a, b, X)
        if tok.startswith("lab_"):
            name = tok[4:]
            if not name:
                raise ParseError("empty label name", at)
            if name not in self.sig.labels:
                raise ParseError(f"unknown label {name!r}", at)
            self.take()
            self.take("(")
            x = self.variable(ELEMENT)
            self.take(")")
            return Label(name, x)
        # bare variable: must be the left side of an equality
        x = self.variable(ELEMENT)
        self.take("=")
        y = self.variable(ELEMENT)
        return Eq(x, y)

    def variable(self, sort: str) -> str:
        at = self.pos()
        tok = self.take()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok) or tok in RESERVED:
            raise ParseError(f"expected a variable, found {tok!r}", at)
        if var_sort(tok) != sort:
            raise ParseError(
                f"expected a {sort} variable, found {tok!r}", at)
        return tok

    def nat(self) -> int:
        at = self.pos()
        tok = self.take()
        if not tok.isdigit():
            raise ParseError(f"expected a number, found {tok!r}", at)
        return int(tok)


def parse(text: str, sig: Signature) -> Formula:
    """Parse `text` against the grammar; raises ParseError with a position."""
    return _Parser(text, sig).parse()


# ---------------------------------------------------------------------------
# Printing (inverse of parse: parse(to_text(f), sig) == f)


def to_text(f: Formula) -> str:
    if isinstance(f, ATOMS):
        return str(f)
    if isinstance(f, Not):
        return "!" + _wrapped(f.body)
    if isinstance(f, And):
        return f"({_operand(f.left)} & {_operand(f.right)})"
    if isinstance(f, Or):
        return f"({_operand(f.left)} | {_operand(f.right)})"
    if isinstance(f, Implies):
        return f"({_operand(f.left)} -> {_operand(f.right)})"
    if isinstance(f, Exists):
        kw = "ES" if var_sort(f.var) == SET else "E"
        return f"{kw} {f.var}. {to_text(f.body)}"
    if isinstance(f, Forall):
        kw = "AS" if var_sort(f.var) == SET else "A"
        return f"{kw} {f.var}. {to_text(f.body)}"
    raise TypeError(f"not a formula node: {f!r}")


def _operand(f: Formula) -> str:
    # the grammar requires parentheses around a quantifier under a connective
    if isinstance(f, QUANTIFIERS):
        return "(" + to_text(f) + ")"
    return to_text(f)


def _wrapped(f: Formula) -> str:
    if isinstance(f, ATOMS) and not isinstance(f, Eq):
        return to_text(f)
    if isinstance(f, Not):
        return to_text(f)
    return "(" + to_text(f) + ")"


# ---------------------------------------------------------------------------
# Structure queries


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Not):
        return (f.body,)
    if isinstance(f, (And, Or, Implies)):
        return (f.left, f.right)
    if isinstance(f, QUANTIFIERS):
        return (f.body,)
    return ()


def walk(f: Formula):
    """Yield every node of the AST, preorder."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def atom_vars(f: Formula) -> tuple[str, ...]:
    if isinstance(f, Eq):
        return (f.left, f.right)
    if isinstance(f, Rel):
        return (f.left, f.right)
    if isinstance(f, Label):
        return (f.var,)
    if isinstance(f, Member):
        return (f.element, f.set_var)
    if isinstance(f, Mod):
        return (f.set_var,)
    return ()


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, QUANTIFIERS):
        return free_vars(f.body) - {f.var}
    if isinstance(f, ATOMS):
        return frozenset(atom_vars(f))
    return frozenset().union(*(free_vars(c) for c in children(f))) if children(f) else frozenset()


def is_sentence(f: Formula) -> bool:
    return not free_vars(f)


def quantifier_count(f: Formula) -> int:
    return sum(1 for node in walk(f) if isinstance(node, QUANTIFIERS))


def lcm_moduli(f: Formula) -> int:
    """Least common multiple of the `b` values of all mod predicates (1 if none)."""
    values = [node.modulus for node in walk(f) if isinstance(node, Mod)]
    return math.lcm(*values) if values else 1


def substitute_var(f: Formula, mapping: dict[str, str]) -> Formula:
    """Rename variables throughout; quantifiers binding a renamed source shadow it."""
    if isinstance(f, QUANTIFIERS):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        return type(f)(f.var, substitute_var(f.body, inner)) if inner else f
    if isinstance(f, Eq):
        return Eq(mapping.get(f.left, f.left), mapping.get(f.right, f.right))
    if isinstance(f, Rel):
        return Rel(f.relation, mapping.get(f.left, f.left), mapping.get(f.right, f.right))
    if isinstance(f, Label):
        return Label(f.label, mapping.get(f.var, f.var))
    if isinstance(f, Member):
        return Member(mapping.get(f.element, f.element), mapping.get(f.set_var, f.set_var))
    if isinstance(f, Mod):
        return Mod(f.residue, f.modulus, mapping.get(f.set_var, f.set_var))
    if isinstance(f, Not):
        return Not(substitute_var(f.body, mapping))
    if isinstance(f, (And, Or, Implies)):
        return type(f)(substitute_var(f.left, mapping), substitute_var(f.right, mapping))
    return f


# ---------------------------------------------------------------------------
# Prenex normal form


@dataclass(frozen=True)
class PrenexFormula:
    """Quantifier prefix plus a quantifier-free matrix.

    q counts element-sort prefix entries, s set-sort ones.
    """

    prefix: tuple[tuple[str, str, str], ...]  # (quant "E"/"A", sort, var)
    matrix: Formula
    q: int
    s: int

    def as_formula(self) -> Formula:
        f = self.matrix
        for quant, _sort, var in reversed(self.prefix):
            f = Exists(var, f) if quant == "E" else Forall(var, f)
        return f

    def __str__(self):
        return to_text(self.as_formula())


def eliminate_implies(f: Formula) -> Formula:
    """Rewrite a -> b as !a | b everywhere."""
    if isinstance(f, Implies):
        return Or(Not(eliminate_implies(f.left)), eliminate_implies(f.right))
    if isinstance(f, Not):
        return Not(eliminate_implies(f.body))
    if isinstance(f, (And, Or)):
        return type(f)(eliminate_implies(f.left), eliminate_implies(f.right))
    if isinstance(f, QUANTIFIERS):
        return type(f)(f.var, eliminate_implies(f.body))
    return f


class _FreshNames:
    """Deterministic fresh-name allocation: keep the base if unused, else suffix it."""

    def __init__(self, taken):
        self.taken = set(taken)

    def fresh(self, base: str) -> str:
        if base not in self.taken:
            self.taken.add(base)
            return base
        k = 1
        while f"{base}{k}" in self.taken:
            k += 1
        name = f"{base}{k}"
        self.taken.add(name)
        return name


def to_prenex(f: Formula) -> PrenexFormula:
    """Convert a sentence to an equivalent prenex form, renaming variables apart.

    Implications are eliminated first; negation flips quantifiers as it is
    pushed past them.  Vacuous quantifiers are kept, so the prefix is never
    shorter than the quantifier count of the input.
    """
    if not is_sentence(f):
        raise FormulaError(f"free variables in sentence: {sorted(free_vars(f))}")
    # Only names actually placed in the prefix are reserved, so the first
    # binder of each name keeps it and later clashes get suffixed.
    names = _FreshNames(free_vars(f))

    def go(node: Formula, subst: dict[str, str]):
        if isinstance(node, QUANTIFIERS):
            new = names.fresh(node.var)
            prefix, matrix = go(node.body, {**subst, node.var: new})
            quant = "E" if isinstance(node, Exists) else "A"
            return [(quant, var_sort(new), new)] + prefix, matrix
        if isinstance(node, Not):
            prefix, matrix = go(node.body, subst)
            flipped = [("A" if q == "E" else "E", srt, v) for q, srt, v in prefix]
            return flipped, Not(matrix)
        if isinstance(node, (And, Or)):
            lp, lm = go(node.left, subst)
            rp, rm = go(node.right, subst)
            return lp + rp, type(node)(lm, rm)
        return [], substitute_var(node, subst)

    prefix, matrix = go(eliminate_implies(f), {})
    prefix = tuple(prefix)
    q = sum(1 for _, srt, _ in prefix if srt == ELEMENT)
    s = len(prefix) - q
    return PrenexFormula(prefix, matrix, q, s)
