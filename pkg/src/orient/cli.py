"""Command-line interface: ``orient {build,eval-edges,eval-lca,sweep,power,cut}``.

Exit status is 0 on success, 1 on a usage error and 2 on bad input data.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .builder import build_arborescence, extract_subtrees
from .core import BuildConfig, EmbeddingSet, RelationSet
from .evaluation import (
    DEFAULT_P_GRID,
    accuracy_by_edge_length,
    accuracy_by_node_power,
    accuracy_by_tree_level,
    edge_accuracy,
    sweep_p,
    synonym_accuracy,
)
from .exceptions import OrientError

log = logging.getLogger("orient")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_embedding_args(sp, power=True):
    sp.add_argument("--embedding", required=True, help="text embedding file")
    sp.add_argument("--format", default="glove_text", choices=sorted(io.EMBEDDING_FORMATS))
    sp.add_argument("--rank-file", help="labels one per line, most frequent first")
    sp.add_argument("--restrict-to-truth", action="store_true",
                    help="keep only entities named in --truth")
    if power:
        sp.add_argument("--power", default="zipf",
                        help="zipf | pca | degree | pagerank | file:PATH")
        sp.add_argument("--pca-k", type=int, default=3)
        sp.add_argument("--pca-inclusive", action="store_true",
                        help="project k+1 components instead of k")
        sp.add_argument("--no-debias", action="store_true",
                        help="with --power pca, keep the raw vectors for tree building")
        sp.add_argument("--graph", help="relation file for degree/pagerank power (default: --truth)")
        sp.add_argument("--zipf-exponent", type=float, default=1.0)


def _add_build_args(sp):
    sp.add_argument("--distance", default="l2", choices=["l2", "euclidean", "cosine"])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-accel", action="store_true", help="exhaustive parent search")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="orient", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("build", help="build an arborescence")
    _add_embedding_args(sp)
    _add_build_args(sp)
    sp.add_argument("--truth", help="relation file (for --restrict-to-truth or degree power)")
    sp.add_argument("--p", type=float, default=0.6)
    sp.add_argument("--order", default="desc", choices=["desc", "rand", "asc",
                                                         "descending", "random", "ascending"])
    sp.add_argument("--parent-rule", default="score", choices=["score", "random"])
    sp.add_argument("--out", required=True, help="tree file (.json, .tsv or .dot)")

    sp = sub.add_parser("eval-edges", help="edge accuracy of a tree")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--synonyms")
    sp.add_argument("--buckets", type=int, default=100)
    sp.add_argument("--smooth", type=int, default=0, help="moving-average window for curves")
    sp.add_argument("--curves", help="directory for CSV curves")

    sp = sub.add_parser("eval-lca", help="LCA hit-rate of a tree")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--embedding", required=True)
    sp.add_argument("--format", default="glove_text", choices=sorted(io.EMBEDDING_FORMATS))
    sp.add_argument("--lch", required=True)
    sp.add_argument("--truth", help="hypernym relations used to widen LCH sets by --closure")
    sp.add_argument("--pairs", type=int, default=10000)
    sp.add_argument("--knn", type=int, default=20)
    sp.add_argument("--closure", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("sweep", help="accuracy over a grid of p and insertion orders")
    _add_embedding_args(sp)
    _add_build_args(sp)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--synonyms")
    sp.add_argument("--p-grid", default="0:1:0.1", help="start:stop:step or comma list")
    sp.add_argument("--orders", default="desc,rand,asc")
    sp.add_argument("--random-baseline", action="store_true",
                    help="add random parent selection rows")
    sp.add_argument("--lch", help="LCH file: adds a hit-rate column")
    sp.add_argument("--pairs", type=int, default=10000)
    sp.add_argument("--knn", type=int, default=20)
    sp.add_argument("--closure", type=int, default=2)
    sp.add_argument("--out", help="CSV output (default: stdout)")

    sp = sub.add_parser("power", help="export entity power")
    _add_embedding_args(sp)
    sp.add_argument("--truth", help="hypernym relations (hypernym-rank scatter, degree power)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--diagnostics", help="directory for norm/power/hypernym rank CSVs")
    sp.add_argument("--window", type=int, default=50)

    sp = sub.add_parser("cut", help="split a tree at long edges")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--percentile", type=float, default=90.0)
    sp.add_argument("--out", required=True)
    return parser


def _load_inputs(args):
    E = io.load_embedding(args.embedding, args.format)
    if getattr(args, "rank_file", None):
        ranked = io.load_rank_file(args.rank_file)
        pos = {lab: i for i, lab in enumerate(ranked)}
        rows = sorted(range(E.n), key=lambda i: (pos.get(E.labels[i], len(pos)), i))
        E = E.subset(rows)
    truth = io.load_relations(args.truth) if getattr(args, "truth", None) else None
    if getattr(args, "restrict_to_truth", False):
        if truth is None:
            raise UsageError("--restrict-to-truth needs --truth")
        named = {lab for pair in truth.pairs for lab in pair}
        E = E.subset([i for i, lab in enumerate(E.labels) if lab in named])
    return E, truth


def _power(args, E: EmbeddingSet, truth):
    """Return (embedding used for building, PowerAssignment)."""
    from . import power as pw

    spec = args.power
    if spec == "zipf":
        return E, pw.zipf_power(E.n, args.zipf_exponent)
    if spec == "pca":
        est = pw.PCAPower(args.pca_k, inclusive=args.pca_inclusive).fit(E.vectors)
        P = est.power_assignment(E.vectors)
        return (E if args.no_debias else E.with_vectors(est.transform(E.vectors))), P
    if spec in ("degree", "pagerank"):
        graph = io.load_relations(args.graph) if args.graph else truth
        if graph is None:
            raise UsageError(f"--power {spec} needs --graph or --truth")
        fn = pw.degree_power if spec == "degree" else pw.pagerank_power
        return E, fn(graph, E)
    if spec.startswith("file:"):
        return E, pw.external_power(io.load_power_file(spec[5:]), E)
    raise UsageError(f"unknown --power {spec!r}")


def _config(args, **kw) -> BuildConfig:
    return BuildConfig(distance=args.distance, seed=args.seed,
                       accelerated=not args.no_accel, **kw)


def cmd_build(args):
    E, truth = _load_inputs(args)
    E_build, P = _power(args, E, truth)
    cfg = _config(args, p=args.p, order=args.order, parent_rule=args.parent_rule)
    T = build_arborescence(E_build, P, cfg)
    io.export_tree(T, args.out)
    print(f"nodes\t{T.n}\nmax_level\t{int(T.node_level.max())}\n"
          f"root_children\t{int((T.parent == 0).sum())}")


def _curve_rows(curve):
    smooth_d = curve.smoothed("directed")
    smooth_u = curve.smoothed("undirected")
    for i in range(len(curve.centers)):
        yield (curve.centers[i], int(curve.sizes[i]), int(curve.directed_hits[i]),
               int(curve.undirected_hits[i]), curve.directed[i], curve.undirected[i],
               smooth_d[i], smooth_u[i])


_CURVE_HEADER = ["bucket", "size", "directed_hits", "undirected_hits", "directed_acc",
                 "undirected_acc", "directed_smoothed", "undirected_smoothed"]


def cmd_eval_edges(args):
    T = io.load_tree(args.tree)
    G = io.load_relations(args.truth)
    report = edge_accuracy(T, G)
    if args.synonyms:
        report.synonym_acc = synonym_accuracy(T, io.load_relations(args.synonyms, "synonym"))
    for key, value in report.as_dict().items():
        if value is not None:
            print(f"{key}\t{value!r}")
    if args.curves:
        out = Path(args.curves)
        out.mkdir(parents=True, exist_ok=True)
        smooth = args.smooth or None
        curves = {
            "edge_length": accuracy_by_edge_length(T, G, args.buckets, smooth),
            "node_power": accuracy_by_node_power(T, G, args.buckets, smooth),
            "tree_level": accuracy_by_tree_level(T, G),
        }
        for name, curve in curves.items():
            io.write_csv(out / f"{name}.csv", _CURVE_HEADER, _curve_rows(curve))


def _lca_inputs(args, E, T, hypernyms):
    from .lca import sample_pairs
    from .nnindex import BallTree

    # neighbours are sampled in the tree's own entity order
    rows = [E.index[lab] for lab in T.labels if lab in E.index]
    if len(rows) != T.n:
        raise OrientError("embedding does not cover every tree entity")
    E = E.subset(rows)
    kind = T.distance or "euclidean"
    pairs = sample_pairs(E, BallTree(E.vectors), args.pairs, args.knn, args.seed, kind)
    return {"pairs": pairs, "lch_of": io.load_lch(args.lch), "closure": args.closure,
            "hypernyms": hypernyms}


def cmd_eval_lca(args):
    from .lca import lca_hit_rate

    T = io.load_tree(args.tree)
    E = io.load_embedding(args.embedding, args.format)
    hypernyms = io.load_relations(args.truth) if args.truth else None
    inputs = _lca_inputs(args, E, T, hypernyms)
    res = lca_hit_rate(T, inputs["pairs"], inputs["lch_of"], args.closure, hypernyms)
    print(f"hit_rate\t{res.hit_rate!r}\npairs\t{res.n_pairs}\nscorable\t{res.n_scorable}")


def _p_grid(text):
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            count = int(round((stop - start) / step)) + 1
            return [round(start + i * step, 10) for i in range(count)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad --p-grid {text!r}") from None


def cmd_sweep(args):
    E, truth = _load_inputs(args)
    E_build, P = _power(args, E, truth)
    grid = _p_grid(args.p_grid) if args.p_grid else list(DEFAULT_P_GRID)
    orders = [o.strip() for o in args.orders.split(",") if o.strip()]
    rules = ["score", "random"] if args.random_baseline else ["score"]
    synonyms = io.load_relations(args.synonyms, "synonym") if args.synonyms else None
    lca_inputs = None
    if args.lch:
        probe = build_arborescence(E_build, P, _config(args, p=grid[0]))
        lca_inputs = _lca_inputs(args, E, probe, truth)
    result = sweep_p(E_build, P, _config(args), grid, truth, orders, rules, synonyms, lca_inputs)
    header = ["order", "parent_rule", "p", "undirected_acc", "directed_acc", "reversed_acc",
              "synonym_acc", "hit_rate", "n_edges"]
    rows = [(r.order, r.parent_rule, r.p, r.report.undirected_acc, r.report.directed_acc,
             r.report.reversed_acc, r.report.synonym_acc, r.hit_rate, r.report.n_edges_scored)
            for r in result.rows]
    if args.out:
        io.write_csv(args.out, header, rows)
    else:
        import csv

        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([io._fmt(v) for v in row] for row in rows)
    for (order, rule), best in result.best.items():
        fields = "\t".join(f"{k}={v!r}" for k, v in sorted(best.items()))
        print(f"# best\t{order}\t{rule}\t{fields}")


def cmd_power(args):
    from . import power as pw

    E, truth = _load_inputs(args)
    _, P = _power(args, E, truth)
    io.write_csv(args.out, ["rank", "label", "raw_power", "power"],
                 ((i, lab, P.raw[i], P.powers[i]) for i, lab in enumerate(E.labels)))
    if args.diagnostics:
        out = Path(args.diagnostics)
        out.mkdir(parents=True, exist_ok=True)
        nc = pw.norm_rank_curve(E, args.window)
        io.write_csv(out / "norm_rank.csv", ["rank", "norm", "smoothed"],
                     zip(nc.ranks, nc.values, nc.smoothed))
        pc = pw.power_rank_curve(P, args.window)
        io.write_csv(out / "power_rank.csv", ["rank", "power", "smoothed"],
                     zip(pc.ranks, pc.values, pc.smoothed))
        with open(out / "power_rank_spearman.txt", "w", encoding="utf-8") as fh:
            fh.write(f"{pc.spearman!r}\n")
        if truth is not None:
            points, frac = pw.hypernym_rank_scatter(truth, E.index)
            io.write_csv(out / "hypernym_rank.csv", ["hyponym_rank", "hypernym_rank"], points)
            with open(out / "hypernym_rank_below_diagonal.txt", "w", encoding="utf-8") as fh:
                fh.write(f"{frac!r}\n")


def cmd_cut(args):
    T = io.load_tree(args.tree)
    clusters = extract_subtrees(T, args.percentile)
    doc = {
        "percentile": args.percentile,
        "clusters": [
            {"root": T.labels[c["root"] - 1], "size": len(c["members"]),
             "members": [T.labels[m - 1] for m in c["members"]]}
            for c in clusters
        ],
    }
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, indent=1) + "\n")
    print(f"clusters\t{len(clusters)}")


COMMANDS = {
    "build": cmd_build,
    "eval-edges": cmd_eval_edges,
    "eval-lca": cmd_eval_lca,
    "sweep": cmd_sweep,
    "power": cmd_power,
    "cut": cmd_cut,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"orient: error: {exc}", file=sys.stderr)
        return 1
    except (OrientError, ValueError, KeyError, OSError) as exc:
        print(f"orient: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
