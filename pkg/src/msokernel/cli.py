"""Command-line interface.

Exit codes: 0 for a TRUE verdict, 1 for FALSE, 2 for any error (including
budget refusals).  Output is deterministic; --format jsonl emits one JSON
object per command for harness consumption.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

from . import formula as F
from .checker import Budget, BudgetExceeded, check_with_kernel_report
from .interpret import (check_graph_report, load_forest, load_graph,
                        load_tree_model, tree_depth_exact)
from .kernelize import (BitBudgetError, cmso_thresholds, explicit_thresholds,
                        kernel_size_bound, paper_thresholds, reduce_tree,
                        threshold_N, threshold_R)
from .tree import _SEXPR_TOKEN, dump_tree, load_tree


class CliError(Exception):
    """Reported to stderr; exits with status 2."""


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _sentence_labels(sentence_text: str) -> set[str]:
    return {m[4:] for m in re.findall(r"lab_[A-Za-z0-9_]+", sentence_text)}


def _tree_file_labels(tree_text: str) -> set[str]:
    tokens = set()
    pos = 0
    while pos < len(tree_text):
        m = _SEXPR_TOKEN.match(tree_text, pos)
        if m is None:
            break
        tokens.add(m.group(1))
        pos = m.end()
    return tokens - {"node", "(", ")", "[", "]", ","}


def _load_tree_inputs(tree_path: str, sentence_text: str):
    """Tree and sentence under their union label alphabet (sorted, so the
    label count t is deterministic for identical inputs)."""
    tree_text = _read(tree_path)
    alphabet = sorted(_tree_file_labels(tree_text) | _sentence_labels(sentence_text))
    sig = F.Signature(F.TREE_RELATION, tuple(alphabet))
    tree = load_tree(tree_text, sig)
    sentence = F.parse(sentence_text, sig)
    return tree, sentence, sig


def _budget(args) -> Budget:
    if args.budget_n0 < 1 or args.budget_visits < 1:
        raise CliError("budgets must be positive")
    return Budget(max_set_domain=args.budget_n0, max_visits=args.budget_visits)


def _thresholds(args):
    if args.thresholds_file is None:
        return None
    values = [int(tok) for tok in _read(args.thresholds_file).split()]
    if not values:
        raise CliError("thresholds file is empty")
    return explicit_thresholds(values)


def _emit(args, record: dict, text_lines: list[str]):
    if args.format == "jsonl":
        print(json.dumps(record, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def cmd_check_tree(args) -> int:
    tree, sentence, sig = _load_tree_inputs(args.tree, args.sentence)
    report = check_with_kernel_report(tree, sentence, sig, args.mode,
                                      _budget(args), _thresholds(args))
    record = {
        "verdict": report.verdict,
        "original_size": report.original_size,
        "kernel_size": report.kernel_size,
        "q": report.q, "s": report.s, "t": report.t, "m": report.m,
        "deletions_per_level": {str(k): v for k, v in
                                sorted(report.deletions_per_level.items())},
    }
    lines = ["TRUE" if report.verdict else "FALSE",
             f"original size: {report.original_size}",
             f"kernel size: {report.kernel_size}",
             f"q: {report.q}  s: {report.s}  t: {report.t}  m: {report.m}"]
    for level, count in sorted(report.deletions_per_level.items()):
        lines.append(f"level {level}: {count} limbs deleted")
    _emit(args, record, lines)
    return 0 if report.verdict else 1


def cmd_kernelize(args) -> int:
    tree, sentence, sig = _load_tree_inputs(args.tree, args.sentence)
    pf = F.to_prenex(sentence)
    m = F.lcm_moduli(sentence)
    thresholds = _thresholds(args)
    if thresholds is None:
        k = sig.label_count + 3 * pf.q + pf.s
        cap = tree.size() + 1
        if args.mode == "cmso":
            thresholds = cmso_thresholds(m, pf.q, pf.s, k, cap)
        elif m > 1:
            raise CliError("sentence uses mod predicates; pass --mode cmso")
        else:
            thresholds = paper_thresholds(pf.q, pf.s, k, cap)
    stats: dict[int, int] = {}
    kernel = reduce_tree(tree, thresholds, sig, stats)
    out_text = dump_tree(kernel, sig)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(out_text + "\n")
    record = {"original_size": tree.size(), "kernel_size": kernel.size(),
              "q": pf.q, "s": pf.s, "t": sig.label_count,
              "deletions_per_level": {str(k): v for k, v in sorted(stats.items())},
              "out": args.out}
    lines = [f"original size: {tree.size()}", f"kernel size: {kernel.size()}"]
    for level, count in sorted(stats.items()):
        lines.append(f"level {level}: {count} limbs deleted")
    if not args.out:
        lines.append(out_text)
    _emit(args, record, lines)
    return 0


def cmd_thresholds(args) -> int:
    rows = []
    for i in range(args.levels + 1):
        n = threshold_N(i, args.q, args.s, args.k, max(args.cap, 2))
        r = threshold_R(i, args.q, args.s, args.k, args.cap)
        rows.append((i, n.value, r.value, int(n.saturated or r.saturated)))
    record = {"rows": [{"i": i, "N": n, "R": r, "saturated": bool(sat)}
                       for i, n, r, sat in rows]}
    lines = ["i\tN\tR\tsaturated"]
    lines += [f"{i}\t{n}\t{r}\t{sat}" for i, n, r, sat in rows]
    _emit(args, record, lines)
    return 0


def cmd_bound(args) -> int:
    value = kernel_size_bound(args.height, args.labels, args.q, args.s)
    _emit(args, {"bound": str(value)}, [f"bound: {value}"])
    return 0


def cmd_check_graph(args) -> int:
    graph = load_graph(_read(args.graph))
    alphabet = sorted(set(graph.label_alphabet()) | _sentence_labels(args.sentence))
    sentence = F.parse(args.sentence, F.Signature(F.GRAPH_RELATION, tuple(alphabet)))
    forest = load_forest(_read(args.forest), graph) if args.forest else None
    report = check_graph_report(graph, sentence, "td", forest, _budget(args),
                                td_budget=max(args.budget_n0, graph.size if forest else 0))
    record = {"verdict": report.verdict, "tree_size": report.tree_size,
              "kernel_size": report.kernel_size,
              "q": report.translated_q, "s": report.translated_s}
    lines = ["TRUE" if report.verdict else "FALSE",
             f"tree size: {report.tree_size}",
             f"kernel size: {report.kernel_size}",
             f"translated q: {report.translated_q}  s: {report.translated_s}"]
    _emit(args, record, lines)
    return 0 if report.verdict else 1


def cmd_tree_depth(args) -> int:
    graph = load_graph(_read(args.graph))
    d, forest = tree_depth_exact(graph, args.budget_n0)
    record = {"tree_depth": d,
              "forest": {str(v): (0 if p is None else p)
                         for v, p in sorted(forest.parent.items())}}
    lines = [f"td = {d}"]
    for v in sorted(forest.parent):
        p = forest.parent[v]
        lines.append(f"{v} {0 if p is None else p}")
    _emit(args, record, lines)
    return 0


def cmd_shrub_check(args) -> int:
    tm = load_tree_model(_read(args.model))
    labels = {f"c_{c}" for c in tm.colours()} | _sentence_labels(args.sentence)
    sentence = F.parse(args.sentence,
                       F.Signature(F.GRAPH_RELATION, tuple(sorted(labels))))
    report = check_graph_report(tm, sentence, "shrub", None, _budget(args))
    record = {"verdict": report.verdict, "tree_size": report.tree_size,
              "kernel_size": report.kernel_size,
              "q": report.translated_q, "s": report.translated_s}
    lines = ["TRUE" if report.verdict else "FALSE",
             f"tree size: {report.tree_size}",
             f"kernel size: {report.kernel_size}",
             f"translated q: {report.translated_q}  s: {report.translated_s}"]
    _emit(args, record, lines)
    return 0 if report.verdict else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msokernel",
        description="Decide MSO/CMSO properties of bounded-height labelled "
                    "trees by kernelization; check graphs via tree-depth or "
                    "tree-model interpretations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--mode", choices=("mso", "cmso"), default="mso")
        p.add_argument("--budget-n0", type=int, default=20,
                       help="max domain size for set-quantifier expansion")
        p.add_argument("--budget-visits", type=int, default=10_000_000,
                       help="max quantifier branches visited")
        p.add_argument("--thresholds-file", default=None,
                       help="explicit per-level threshold values, whitespace separated")
        p.add_argument("--format", choices=("text", "jsonl"), default="text")

    p = sub.add_parser("check-tree", help="kernelize a tree and decide a sentence on it")
    p.add_argument("tree")
    p.add_argument("sentence")
    common(p)
    p.set_defaults(func=cmd_check_tree)

    p = sub.add_parser("kernelize", help="write the reduced tree for a sentence's parameters")
    p.add_argument("tree")
    p.add_argument("sentence")
    p.add_argument("--out", default=None, help="kernel output path (default: stdout)")
    common(p)
    p.set_defaults(func=cmd_kernelize)

    p = sub.add_parser("thresholds", help="print the N/R table up to a level")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--levels", type=int, default=0)
    p.add_argument("--cap", type=int, default=1 << 62)
    common(p)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("bound", help="print the kernel size bound")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--labels", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("check-graph", help="decide a sentence on a graph via tree-depth")
    p.add_argument("graph")
    p.add_argument("sentence")
    p.add_argument("--forest", default=None, help="elimination forest file")
    common(p)
    p.set_defaults(func=cmd_check_graph)

    p = sub.add_parser("tree-depth", help="exact tree-depth with a witness forest")
    p.add_argument("graph")
    common(p)
    p.set_defaults(func=cmd_tree_depth)

    p = sub.add_parser("shrub-check", help="decide a sentence on a tree-model's graph")
    p.add_argument("model")
    p.add_argument("sentence")
    common(p)
    p.set_defaults(func=cmd_shrub_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, BudgetExceeded, BitBudgetError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
