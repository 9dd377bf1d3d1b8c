"""Command-line interface.

Subcommands: ``diversity``, ``stats``, ``train``, ``decode``, ``group``,
``sighist``.  Exit status is 0 on success, 1 for invalid input (a JSON
error object is printed to stderr) and 2 for internal errors.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .corpuslab import SAMPLE_METHODS, SampleSpec, corpus_stats, neologisms, sample_groups, vocabulary
from .decodelab import (STRATEGIES, DecoderConfig, NGramModel, builtin_corpus_lines, generate_candidates,
                        tokenize_corpus, train_ngram_model)
from .formats import (ValidationError, atomic_write, canonical_json, mean_of, read_candidate_groups,
                      read_group_trees, read_lines, render_report, report_header, write_candidate_groups)
from .grouper import (MERGE_RULES, FinetuneSetSpec, build_finetune_sets, compare_histograms,
                      partition_by_signature, signature_counts)
from .lexdiv import BleuConfig, ChrfConfig, i_score
from .synkernel import KernelConfig, kernel_difference
from .treebank import parse_tree_lines
from .textnorm import tokenize_13a

logger = logging.getLogger("btdiversity")

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2

METRIC_COLUMNS = {"bleu": "i_bleu", "chrf": "i_chrf", "kernel": "kernel_diff"}

# Defaults for options that may also come from a --config file.
DEFAULTS = {
    "diversity": {"metrics": None, "sample_n": 30000, "seed": 0, "sample_method": "keyed",
                  "format": "tsv", "workers": 1, "label": None, "chrf_word_order": 0,
                  "kernel_lambda": 1.0},
    "decode": {"strategy": "nucleus", "beam_size": 5, "p": 0.95, "k": 3, "max_len": 50, "seed": 0,
               "workers": 1, "prefix_tokens": None, "num_groups": None},
    "train": {"order": 3, "alpha": 0.1},
    "group": {"num_sets": 3, "min_size": 10000, "merge_rule": "merge_next_until_min"},
    "sighist": {"top_n": 10},
}

# Settings that never change the output and stay out of the echoed config.
NON_SEMANTIC = {"workers", "label"}


def _effective(args, command):
    """Merge defaults < config file < command-line flags."""
    settings = dict(DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(settings)
        if unknown:
            raise ValidationError(f"unknown config key(s) for {command}: {sorted(unknown)}")
        settings.update(loaded)
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _semantic(settings):
    return {k: v for k, v in settings.items() if k not in NON_SEMANTIC}


# -- diversity ----------------------------------------------------------------------

def _group_scores(job):
    group, trees, metrics, bleu_cfg, chrf_cfg, kernel_cfg = job
    values, errors = {}, {}
    for metric in metrics:
        column = METRIC_COLUMNS[metric]
        try:
            if metric == "bleu":
                values[column] = i_score(group, "bleu", bleu_cfg)
            elif metric == "chrf":
                values[column] = i_score(group, "chrf", chrf_cfg)
            else:
                if trees is None or any(t is None for t in trees):
                    raise ValueError("missing or unparseable tree in group")
                values[column] = kernel_difference(trees, kernel_cfg, group.group_id).difference
        except ValueError as exc:
            values[column] = None
            errors[column] = str(exc)
    return group.group_id, values, errors


def cmd_diversity(args) -> int:
    settings = _effective(args, "diversity")
    metrics = settings["metrics"] or (["bleu", "chrf", "kernel"] if args.trees else ["bleu", "chrf"])
    if isinstance(metrics, str):
        metrics = [m.strip() for m in metrics.split(",") if m.strip()]
    bad = [m for m in metrics if m not in METRIC_COLUMNS]
    if bad:
        raise ValidationError(f"unknown metric(s) {bad}; choose from {sorted(METRIC_COLUMNS)}")
    if "kernel" in metrics and not args.trees:
        raise ValidationError("kernel difference requested but no --trees file given")
    settings["metrics"] = metrics

    groups = read_candidate_groups(args.candidates)
    if not groups:
        raise ValidationError("candidate file contains no groups")
    trees = read_group_trees(args.trees, groups) if args.trees else {}
    try:
        spec = SampleSpec(settings["sample_n"], settings["seed"], settings["sample_method"]) \
            if settings["sample_n"] else None
        bleu_cfg = BleuConfig()
        chrf_cfg = ChrfConfig(word_order=settings["chrf_word_order"])
        kernel_cfg = KernelConfig(lam=settings["kernel_lambda"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if settings["workers"] < 1:
        raise ValidationError("workers must be >= 1")
    groups = sample_groups(groups, spec) if spec else sorted(groups, key=lambda g: g.group_id)
    jobs = [(g, trees.get(g.group_id), metrics, bleu_cfg, chrf_cfg, kernel_cfg) for g in groups]
    workers = settings["workers"]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_group_scores, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_group_scores(job) for job in jobs]

    columns = [METRIC_COLUMNS[m] for m in metrics]
    rows = [(gid, values) for gid, values, _ in results]
    aggregate = {}
    for column in columns:
        failed = sum(1 for _, values, errors in results if column in errors)
        aggregate[column] = {"mean": mean_of(v[column] for _, v in rows),
                             "n": len(rows) - failed, "failed": failed}
    aggregate["groups"] = len(rows)
    if "bleu" in metrics:
        aggregate["bleu_signature"] = bleu_cfg.signature()

    inputs = [args.candidates] + ([args.trees] if args.trees else [])
    header = report_header("diversity", _semantic(settings), inputs)
    text = render_report(header, columns, rows, aggregate, settings["format"])
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)

    if args.plot_data:
        label = settings["label"] or Path(args.candidates).stem
        lines = ["dataset\tmetric\tvalue"]
        lines += [f"{label}\t{c}\t{'NA' if aggregate[c]['mean'] is None else repr(aggregate[c]['mean'])}"
                  for c in columns]
        atomic_write(args.plot_data, "\n".join(lines) + "\n")
    for column in columns:
        if aggregate[column]["failed"]:
            logger.warning("%s: %d group(s) could not be scored", column, aggregate[column]["failed"])
    return EXIT_OK


# -- stats ------------------------------------------------------------------------

def cmd_stats(args) -> int:
    lines = read_lines(args.text)
    stats = corpus_stats(lines)
    result = {"input": Path(args.text).name, **stats.as_dict()}
    reference = None
    if args.vocab:
        reference = {w for line in read_lines(args.vocab) for w in line.split()}
    elif args.reference_corpus:
        reference = vocabulary(read_lines(args.reference_corpus))
    if reference is not None:
        report = neologisms(lines, reference, args.sample_size)
        result["neologisms"] = {"count": report.count, "sample": report.sample}
    text = json.dumps(result, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- train / decode ---------------------------------------------------------------

def cmd_train(args) -> int:
    settings = _effective(args, "train")
    lines = read_lines(args.corpus) if args.corpus else builtin_corpus_lines()
    try:
        model = train_ngram_model(tokenize_corpus(lines), settings["order"], settings["alpha"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    text = json.dumps(model.to_dict(), separators=(",", ":")) + "\n"
    atomic_write(args.output, text)
    return EXIT_OK


def cmd_decode(args) -> int:
    settings = _effective(args, "decode")
    try:
        config = DecoderConfig(strategy=settings["strategy"], beam_size=settings["beam_size"], p=settings["p"],
                               max_len=settings["max_len"], n_best=settings["k"], seed=settings["seed"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    try:
        model = NGramModel.load(args.model)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"cannot load model {args.model}: {exc}") from None

    if args.prefix_file:
        contexts = []
        for line in read_lines(args.prefix_file):
            tokens = tokenize_13a(line).tokens
            if settings["prefix_tokens"] is not None:
                tokens = tokens[:settings["prefix_tokens"]]
            contexts.append(model.encode(tokens))
    elif settings["num_groups"]:
        contexts = [()] * settings["num_groups"]
    else:
        raise ValidationError("give --prefix-file or --num-groups")

    failures = {}
    groups = list(generate_candidates(model, config, contexts, workers=settings["workers"],
                                      on_error=failures.__setitem__))
    write_candidate_groups(groups, args.output)
    if failures:
        logger.warning("%d group(s) failed to decode", len(failures))
    return EXIT_OK


# -- grouping ---------------------------------------------------------------------

def cmd_group(args) -> int:
    settings = _effective(args, "group")
    sources, targets, trees = read_lines(args.source), read_lines(args.target), read_lines(args.trees)
    if not len(sources) == len(targets) == len(trees):
        raise ValidationError(f"line counts differ: source={len(sources)} target={len(targets)} "
                              f"trees={len(trees)}")
    parsed, errors = parse_tree_lines(trees)
    partition = partition_by_signature(sources, targets, parsed)
    try:
        spec = FinetuneSetSpec(settings["num_sets"], settings["min_size"], settings["merge_rule"])
        sets = build_finetune_sets(partition, spec)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {"tool": "btdiversity", "version": __version__, "config": settings,
                "total_pairs": partition.total_pairs, "unparsed": partition.unparsed,
                "parse_errors": len(errors), "sets": []}
    for n, fset in enumerate(sets, start=1):
        stem = f"set{n}"
        atomic_write(outdir / f"{stem}.src", "".join(sources[i] + "\n" for i in fset.indices))
        atomic_write(outdir / f"{stem}.tgt", "".join(targets[i] + "\n" for i in fset.indices))
        manifest["sets"].append({"name": stem, "signatures": fset.signatures, "size": fset.size,
                                 "source": f"{stem}.src", "target": f"{stem}.tgt"})
    manifest["groups"] = [{"signature": sig, "size": len(idx)} for sig, idx in partition.ranked()]
    atomic_write(outdir / "manifest.json", json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")
    return EXIT_OK


def cmd_sighist(args) -> int:
    settings = _effective(args, "sighist")
    if settings["top_n"] < 1:
        raise ValidationError("top_n must be >= 1")
    counts = [signature_counts(parse_tree_lines(read_lines(path))[0]) for path in args.trees]
    rows = compare_histograms(counts, settings["top_n"])
    names = [Path(p).name for p in args.trees]
    lines = ["\t".join(["rank", "signature", *names])]
    lines += ["\t".join([str(rank), sig, *map(str, vals)]) for rank, (sig, vals) in enumerate(rows, start=1)]
    text = "\n".join(lines) + "\n"
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------

def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btdiv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diversity", help="i-BLEU / i-chrF / tree kernel difference report")
    p.add_argument("candidates", help="candidate-group JSONL file")
    p.add_argument("--trees", help="parses: flat file (one tree per candidate) or JSONL keyed by id")
    p.add_argument("--metrics", help="comma-separated subset of bleu,chrf,kernel")
    p.add_argument("--sample-n", type=int, help="groups to sample (0 = all; default 30000)")
    p.add_argument("--seed", type=int)
    p.add_argument("--sample-method", choices=SAMPLE_METHODS)
    p.add_argument("--format", choices=("tsv", "jsonl"))
    p.add_argument("--chrf-word-order", type=int)
    p.add_argument("--kernel-lambda", type=float)
    p.add_argument("--workers", type=_positive_int)
    p.add_argument("--plot-data", help="also write (dataset, metric, value) triples here")
    p.add_argument("--label", help="dataset name for --plot-data")
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("stats", help="summary statistics and neologisms")
    p.add_argument("text")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--vocab", help="reference vocabulary, one word per line")
    g.add_argument("--reference-corpus", help="text whose words form the reference vocabulary")
    p.add_argument("--sample-size", type=int, default=20)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train an n-gram model for the decoding lab")
    p.add_argument("--corpus", help="one sentence per line (default: bundled corpus)")
    p.add_argument("--order", type=_positive_int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--config")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="generate candidate groups with beam search or sampling")
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--beam-size", type=_positive_int)
    p.add_argument("--p", type=float)
    p.add_argument("-k", "--k", type=_positive_int, help="candidates per group")
    p.add_argument("--max-len", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--prefix-file", help="one conditioning prefix per line")
    p.add_argument("--prefix-tokens", type=int, help="truncate each prefix to this many tokens")
    p.add_argument("--num-groups", type=_positive_int, help="unconditioned groups to generate")
    p.add_argument("--workers", type=_positive_int)
    p.add_argument("--config")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("group", help="build syntax-group fine-tuning sets")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--trees", required=True, help="parses of the English side, line-aligned")
    p.add_argument("--num-sets", type=_positive_int)
    p.add_argument("--min-size", type=int)
    p.add_argument("--merge-rule", choices=MERGE_RULES)
    p.add_argument("--config")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("sighist", help="top first-split signatures, compared across tree files")
    p.add_argument("trees", nargs="+")
    p.add_argument("--top-n", type=int)
    p.add_argument("--config")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sighist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write(canonical_json({"error": exc.to_dict()}) + "\n")
        return EXIT_INVALID
    except (FileNotFoundError, IsADirectoryError, PermissionError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        sys.stderr.write(canonical_json({"error": {"kind": "validation", "message": str(exc)}}) + "\n")
        return EXIT_INVALID
    except Exception as exc:  # last resort: report and use the internal-error status
        logger.debug("internal error", exc_info=True)
        sys.stderr.write(canonical_json({"error": {"kind": "internal",
                                                   "message": f"{type(exc).__name__}: {exc}"}}) + "\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
