"""Command-line front end.

Exit codes: 0 success, 1 validation error (bad flags, malformed inputs,
configuration), 2 I/O error. Diagnostics go to stderr; machine-readable
output (JSON reports, VEMB matrices, token counts) goes to the declared
paths or stdout only. Reports are emitted with sorted keys so identical
commands reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import efficiency, initializers, tokenizers
from .aux_vectors import load_aux_model, load_word_vectors
from .embedding_store import (
    ModelBundle,
    load_matrix,
    load_vocab,
    save_matrix,
    sniff_vocab_format,
    validate_bundle,
)
from .errors import ValidationError, VocabportError
from .overlap import compute_overlap, overlap_stats


class _UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad arguments; flag problems are
    # validation errors here, so re-route them to exit code 1.
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="parallelism hint (>= 1)")
    common.add_argument("--verbose", action="store_true", help="chatty diagnostics on stderr")

    parser = _Parser(prog="vocabport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", parents=[common], help="initialize target embeddings")
    p_init.add_argument("--method", required=True, choices=initializers.METHODS)
    p_init.add_argument("--source-vocab", required=True)
    p_init.add_argument("--source-emb", required=True)
    p_init.add_argument("--source-out-emb", help="source output matrix (untied models)")
    p_init.add_argument("--target-vocab", required=True)
    p_init.add_argument("--aux-vocab", help="auxiliary model vocabulary (clp, clp-plus)")
    p_init.add_argument("--aux-emb", help="auxiliary model VEMB matrix (clp, clp-plus)")
    p_init.add_argument("--word-vecs", help="static word-vector text file (focus)")
    p_init.add_argument("--seed", type=int, required=True)
    p_init.add_argument("--temperature", type=float, default=1.0)
    p_init.add_argument("--min-group-size", type=int, default=10)
    p_init.add_argument(
        "--missing-aux-policy",
        choices=initializers.MISSING_AUX_POLICIES,
        default="random-fallback",
    )
    p_init.add_argument("--clp-raw-weights", action="store_true")
    p_init.add_argument("--canon", choices=("exact", "marker-normalized"), default="exact")
    p_init.add_argument("--out-emb", required=True)
    p_init.add_argument("--out-out-emb", help="target output matrix path (untied models)")
    p_init.add_argument("--report", help="write the init report JSON here")

    p_overlap = sub.add_parser("overlap", parents=[common], help="report vocabulary overlap")
    p_overlap.add_argument("--source-vocab", required=True)
    p_overlap.add_argument("--target-vocab", required=True)
    p_overlap.add_argument("--canon", choices=("exact", "marker-normalized"), default="exact")
    p_overlap.add_argument("--out", help="report path (default: stdout)")

    p_tok = sub.add_parser("tokenize", parents=[common], help="encode text with a spec")
    p_tok.add_argument("--spec-kind", required=True, choices=("bpe", "unigram"))
    p_tok.add_argument("--vocab", required=True, help="JSON map (bpe) or TSV scores (unigram)")
    p_tok.add_argument("--merges", help="merges file (bpe only)")
    p_tok.add_argument("--text")
    p_tok.add_argument("--file", help="read the text from this file")
    p_tok.add_argument("--count-only", action="store_true")

    p_an = sub.add_parser("analyze", parents=[common], help="compare two tokenizers on a corpus")
    p_an.add_argument("--source-vocab", help="BPE vocab JSON for the source tokenizer")
    p_an.add_argument("--source-merges", help="BPE merges for the source tokenizer")
    p_an.add_argument("--source-scores", help="Unigram TSV for the source tokenizer")
    p_an.add_argument("--target-vocab", help="BPE vocab JSON for the target tokenizer")
    p_an.add_argument("--target-merges", help="BPE merges for the target tokenizer")
    p_an.add_argument("--target-scores", help="Unigram TSV for the target tokenizer")
    p_an.add_argument("--corpus", required=True)
    p_an.add_argument("--format", choices=efficiency.CORPUS_FORMATS, default="txt")
    p_an.add_argument("--per-sample", action="store_true", help="include per-sample counts")
    p_an.add_argument("--out", help="report path (default: stdout)")

    p_stats = sub.add_parser("stats", parents=[common], help="analysis statistics")
    stats_sub = p_stats.add_subparsers(dest="stat", required=True)
    p_kendall = stats_sub.add_parser("kendall", parents=[common])
    p_kendall.add_argument("--x", required=True, help="file with one number per line")
    p_kendall.add_argument("--y", required=True, help="file with one number per line")

    return parser


def emit_report(report, path: str) -> None:
    """Write a report as stable-key-ordered JSON (byte-identical reruns)."""
    payload = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    with open(path, "w", encoding="utf-8") as f:
        f.write(payload)


def _print_json(obj, path: str | None) -> None:
    payload = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(payload)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(payload)


def _load_any_vocab(path: str):
    return load_vocab(path, sniff_vocab_format(path))


def _check_paths(inputs, outputs) -> None:
    # Validate every referenced path before any work starts, so a bad
    # output location cannot leave partial results behind.
    for path in inputs:
        if path and not os.path.isfile(path):
            raise FileNotFoundError(f"input file not found: {path}")
    for path in outputs:
        if not path:
            continue
        parent = os.path.dirname(os.path.abspath(path)) or "."
        if not os.path.isdir(parent):
            raise FileNotFoundError(f"output directory does not exist: {parent}")
        if os.path.isdir(path):
            raise IsADirectoryError(f"output path is a directory: {path}")


def _cmd_init(args) -> int:
    # Flag-combination validation first, then path validation, then work.
    if args.method in ("clp", "clp-plus"):
        for flag in ("--aux-vocab", "--aux-emb"):
            if getattr(args, flag[2:].replace("-", "_")) is None:
                raise ValidationError(f"{flag} is required for --method {args.method}")
    elif args.method == "focus" and args.word_vecs is None:
        raise ValidationError("--word-vecs is required for --method focus")
    if args.source_out_emb and not args.out_out_emb:
        raise ValidationError("--out-out-emb is required when --source-out-emb is given")
    if args.out_out_emb and not args.source_out_emb:
        raise ValidationError("--out-out-emb given but the source model is tied")
    _check_paths(
        [args.source_vocab, args.source_emb, args.source_out_emb, args.target_vocab,
         args.aux_vocab, args.aux_emb, args.word_vecs],
        [args.out_emb, args.out_out_emb, args.report],
    )

    source_vocab = _load_any_vocab(args.source_vocab)
    input_emb = load_matrix(args.source_emb)
    output_emb = load_matrix(args.source_out_emb) if args.source_out_emb else None
    source = ModelBundle(
        vocab=source_vocab,
        input_emb=input_emb,
        output_emb=output_emb,
        tied=output_emb is None,
    )
    problems = validate_bundle(source)
    if problems:
        raise ValidationError("invalid source bundle: " + "; ".join(problems))
    target_vocab = _load_any_vocab(args.target_vocab)

    aux = None
    if args.method in ("clp", "clp-plus"):
        aux = load_aux_model(args.aux_vocab, args.aux_emb, target_vocab)
    elif args.method == "focus":
        aux = load_word_vectors(args.word_vecs, target_vocab)

    cfg = initializers.InitConfig(
        method=args.method,
        seed=args.seed,
        sparsemax_temperature=args.temperature,
        min_group_size=args.min_group_size,
        missing_aux_policy=args.missing_aux_policy,
        clp_raw_weights=args.clp_raw_weights,
        overlap_canon=args.canon,
    )
    bundle, report = initializers.init_target_bundle(
        source, target_vocab, cfg, aux=aux, threads=args.threads
    )
    save_matrix(bundle.input_emb, args.out_emb)
    if bundle.output_emb is not None:
        save_matrix(bundle.output_emb, args.out_out_emb)
    if args.report:
        emit_report(report, args.report)
    if args.verbose:
        print(
            f"initialized {len(target_vocab)} rows: {report.copied} copied, "
            f"{report.similarity_initialized} similarity, "
            f"{report.group_sampled} group-sampled, "
            f"{report.random_fallback} random",
            file=sys.stderr,
        )
    return 0


def _cmd_overlap(args) -> int:
    source = _load_any_vocab(args.source_vocab)
    target = _load_any_vocab(args.target_vocab)
    m = compute_overlap(source, target, args.canon)
    stats = overlap_stats(m)
    stats["sample_pairs"] = [
        [target.tokens[t], source.tokens[s]] for t, s in sorted(m.pairs.items())[:10]
    ]
    _print_json(stats, args.out)
    return 0


def _build_spec(kind: str, vocab: str | None, merges: str | None, scores: str | None, side: str):
    if kind == "bpe":
        if not vocab or not merges:
            raise ValidationError(f"--{side}-vocab and --{side}-merges are required for a BPE spec")
        return tokenizers.load_bpe_spec(vocab, merges)
    if not scores:
        raise ValidationError(f"--{side}-scores is required for a Unigram spec")
    return tokenizers.load_unigram_spec(scores)


def _infer_kind(merges: str | None, scores: str | None, side: str) -> str:
    if merges and scores:
        raise ValidationError(f"give either --{side}-merges or --{side}-scores, not both")
    if scores:
        return "unigram"
    if merges:
        return "bpe"
    raise ValidationError(f"--{side}-merges (bpe) or --{side}-scores (unigram) is required")


def _cmd_tokenize(args) -> int:
    if (args.text is None) == (args.file is None):
        raise ValidationError("exactly one of --text or --file is required")
    if args.spec_kind == "bpe":
        if not args.merges:
            raise ValidationError("--merges is required for --spec-kind bpe")
        spec = tokenizers.load_bpe_spec(args.vocab, args.merges)
    else:
        spec = tokenizers.load_unigram_spec(args.vocab)
    if args.text is not None:
        text = args.text
    else:
        with open(args.file, "rb") as f:
            raw = f.read()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ValidationError(f"{args.file}: invalid UTF-8 at byte offset {e.start}") from e
    if args.count_only:
        print(tokenizers.count_tokens(spec, text))
    else:
        if isinstance(spec, tokenizers.BpeSpec):
            ids = tokenizers.bpe_encode(spec, text)
        else:
            ids = tokenizers.unigram_encode(spec, text)
        print(json.dumps(ids))
    return 0


def _cmd_analyze(args) -> int:
    source_kind = _infer_kind(args.source_merges, args.source_scores, "source")
    target_kind = _infer_kind(args.target_merges, args.target_scores, "target")
    _check_paths(
        [args.source_vocab, args.source_merges, args.source_scores,
         args.target_vocab, args.target_merges, args.target_scores, args.corpus],
        [args.out],
    )
    source_spec = _build_spec(
        source_kind, args.source_vocab, args.source_merges, args.source_scores, "source"
    )
    target_spec = _build_spec(
        target_kind, args.target_vocab, args.target_merges, args.target_scores, "target"
    )
    corpus = efficiency.load_corpus(args.corpus, args.format)
    report = efficiency.analyze_corpus(
        source_spec,
        target_spec,
        corpus,
        corpus_id=args.corpus,
        include_per_sample=args.per_sample,
    )
    if args.out:
        emit_report(report, args.out)
    else:
        _print_json(report.to_dict(), None)
    if args.verbose:
        print(
            f"{report.n_samples} samples: {report.avg_tokens_source:.3f} -> "
            f"{report.avg_tokens_target:.3f} tokens ({report.speedup_pct:+.2f}%)",
            file=sys.stderr,
        )
    return 0


def _read_numbers(path: str) -> list[float]:
    values = []
    with open(path, "rb") as f:
        raw = f.read()
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: {line!r} is not a number") from None
    return values


def _cmd_stats(args) -> int:
    tau = efficiency.kendall_tau(_read_numbers(args.x), _read_numbers(args.y))
    print(repr(tau))
    return 0


_COMMANDS = {
    "init": _cmd_init,
    "overlap": _cmd_overlap,
    "tokenize": _cmd_tokenize,
    "analyze": _cmd_analyze,
    "stats": _cmd_stats,
}


def run(argv: list[str]) -> int:
    """Parse argv and execute; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise ValidationError("--threads must be >= 1")
        return _COMMANDS[args.command](args)
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)
    except (VocabportError, ValueError) as e:
        print(f"vocabport: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"vocabport: i/o error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
