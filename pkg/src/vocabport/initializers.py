"""Target-embedding initialization methods.

Five ways to fill a target-vocabulary embedding matrix from a source model:

  random      every row ~ Normal(mean, std) of the source matrix elements
  clp         copy overlapping rows; others = cosine-weighted average of
              overlap rows, similarities from an auxiliary model
  heuristics  copy overlapping rows; others sampled from the per-(script,
              position) statistics of the source rows
  focus       copy overlapping rows; others = sparsemax-weighted sum of
              overlap rows, similarities from static word vectors
  clp-plus    focus pipeline with auxiliary-model similarities

Untied source models get their output matrix built with the same per-token
weights and decisions as the input matrix; recomputing similarities in
output space would double the cost and let the two matrices drift apart.

Determinism contract: every token draws from its own RNG stream derived
from (seed, target id), and each worker thread owns a disjoint range of
output rows, so results never depend on scheduling or thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aux_vectors import AUX_MODEL, WORD_VECTORS, AuxEmbeddings
from .embedding_store import EmbeddingMatrix, ModelBundle, Vocabulary, validate_bundle
from .errors import ValidationError, VocabportError
from .kernels import WeightVector, convex_combine, sparsemax
from .overlap import CANON_MODES, OverlapMap, compute_overlap
from .script_groups import (
    DEFAULT_CONVENTIONS,
    TokenConventions,
    classify_token,
    group_statistics,
)

METHODS = ("random", "clp", "heuristics", "focus", "clp-plus")
MISSING_AUX_POLICIES = ("random-fallback", "error")


@dataclass(frozen=True)
class InitConfig:
    """Knobs shared by all initialization methods.

    The seed is mandatory and must be fixed before any sampling; there is
    no wall-clock default anywhere in the package.
    """

    method: str
    seed: int
    sparsemax_temperature: float = 1.0
    min_group_size: int = 10
    missing_aux_policy: str = "random-fallback"
    clp_raw_weights: bool = False
    overlap_canon: str = "exact"
    conventions: TokenConventions = DEFAULT_CONVENTIONS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if not self.sparsemax_temperature > 0:
            raise ValidationError("sparsemax temperature must be > 0")
        if self.min_group_size < 1:
            raise ValidationError("min group size must be >= 1")
        if self.missing_aux_policy not in MISSING_AUX_POLICIES:
            raise ValidationError(
                f"unknown missing-aux policy {self.missing_aux_policy!r}"
            )
        if self.overlap_canon not in CANON_MODES:
            raise ValidationError(f"unknown canonicalization mode {self.overlap_canon!r}")


@dataclass
class InitReport:
    """Where each target row came from; counters sum to |target vocab|."""

    method: str
    copied: int = 0
    similarity_initialized: int = 0
    group_sampled: int = 0
    random_fallback: int = 0
    warnings: list[str] = field(default_factory=list)

    def counter_total(self) -> int:
        return (
            self.copied
            + self.similarity_initialized
            + self.group_sampled
            + self.random_fallback
        )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "copied": self.copied,
            "similarity_initialized": self.similarity_initialized,
            "group_sampled": self.group_sampled,
            "random_fallback": self.random_fallback,
            "warnings": list(self.warnings),
        }


def _token_rng(seed: int, target_id: int) -> np.random.Generator:
    # Hash-derived per-token stream: sampling is independent of iteration
    # order, which is what makes parallel execution deterministic.
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(target_id)]))


def _element_stats(m: EmbeddingMatrix) -> tuple[float, float]:
    if m.data.size == 0:
        raise ValidationError("source matrix has no elements to estimate statistics from")
    a = m.data.astype(np.float64)
    return float(a.mean()), float(a.std())


def _check_source(source: ModelBundle) -> None:
    problems = validate_bundle(source)
    if problems:
        raise ValidationError("invalid source bundle: " + "; ".join(problems))


def _check_overlap(overlap: OverlapMap, n: int) -> None:
    in_pairs = set(overlap.pairs)
    in_rest = set(overlap.non_overlap)
    if in_pairs & in_rest or (in_pairs | in_rest) != set(range(n)):
        raise ValidationError("overlap map does not partition the target ids")


def _alloc(source: ModelBundle, n: int) -> tuple[np.ndarray, np.ndarray | None]:
    cols = source.input_emb.cols
    out_in = np.empty((n, cols), dtype=np.float32)
    out_out = (
        np.empty((n, cols), dtype=np.float32) if source.output_emb is not None else None
    )
    return out_in, out_out


def _copy_overlap(out_in, out_out, source: ModelBundle, overlap: OverlapMap) -> None:
    if not overlap.pairs:
        return
    t_ids = np.fromiter(overlap.pairs.keys(), dtype=np.int64, count=len(overlap.pairs))
    s_ids = np.fromiter(overlap.pairs.values(), dtype=np.int64, count=len(overlap.pairs))
    out_in[t_ids] = source.input_emb.data[s_ids]
    if out_out is not None:
        out_out[t_ids] = source.output_emb.data[s_ids]


def _assemble(source: ModelBundle, target_vocab: Vocabulary, out_in, out_out) -> ModelBundle:
    return ModelBundle(
        vocab=target_vocab,
        input_emb=EmbeddingMatrix(out_in),
        output_emb=EmbeddingMatrix(out_out) if out_out is not None else None,
        tied=source.tied,
    )


def _run_tokens(ids, worker, threads: int) -> list:
    """Run worker over every id; workers write disjoint rows, results come
    back in id order regardless of scheduling."""
    if threads < 1:
        raise ValidationError("thread count must be >= 1")
    ids = list(ids)
    results = [None] * len(ids)

    def run_range(lo: int, hi: int) -> None:
        for k in range(lo, hi):
            results[k] = worker(ids[k])

    if threads == 1 or len(ids) <= 1:
        run_range(0, len(ids))
    else:
        workers = min(threads, len(ids))
        step = -(-len(ids) // workers)
        bounds = [(lo, min(lo + step, len(ids))) for lo in range(0, len(ids), step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_range, lo, hi) for lo, hi in bounds]
            for f in futures:
                f.result()
    return results


def _tally(report: InitReport, results) -> InitReport:
    for label, warns in results:
        if label == "similarity":
            report.similarity_initialized += 1
        elif label == "group":
            report.group_sampled += 1
        else:
            report.random_fallback += 1
        report.warnings.extend(warns)
    return report


def init_random(
    source: ModelBundle, target_vocab: Vocabulary, cfg: InitConfig, threads: int = 1
) -> tuple[ModelBundle, InitReport]:
    """Sample every target row from the source matrix's element statistics."""
    _check_source(source)
    n = len(target_vocab)
    cols = source.input_emb.cols
    out_in, out_out = _alloc(source, n)
    mu_in, sd_in = _element_stats(source.input_emb)
    if out_out is not None:
        mu_out, sd_out = _element_stats(source.output_emb)

    def worker(t: int):
        rng = _token_rng(cfg.seed, t)
        out_in[t] = rng.normal(mu_in, sd_in, cols)
        if out_out is not None:
            out_out[t] = rng.normal(mu_out, sd_out, cols)
        return ("fallback", ())

    report = _tally(InitReport(method="random"), _run_tokens(range(n), worker, threads))
    return _assemble(source, target_vocab, out_in, out_out), report


def _similarity_init(
    source: ModelBundle,
    target_vocab: Vocabulary,
    overlap: OverlapMap,
    aux: AuxEmbeddings,
    cfg: InitConfig,
    threads: int,
    method: str,
    weight_mode: str,
) -> tuple[ModelBundle, InitReport]:
    _check_source(source)
    n = len(target_vocab)
    _check_overlap(overlap, n)
    cols = source.input_emb.cols
    out_in, out_out = _alloc(source, n)
    _copy_overlap(out_in, out_out, source, overlap)

    report = InitReport(method=method, copied=len(overlap.pairs))
    report.warnings.extend(overlap.warnings)

    # Support = overlap tokens that actually have an auxiliary vector;
    # fabricating zero similarities for the rest would still let them
    # compete inside sparsemax.
    support = [(t, s) for t, s in sorted(overlap.pairs.items()) if t in aux.vocab_alignment]
    dropped = len(overlap.pairs) - len(support)
    if dropped:
        report.warnings.append(
            f"{dropped} overlapping tokens lack auxiliary vectors and are "
            "excluded from the similarity support"
        )
    n_supp = len(support)
    supp_src = np.array([s for _, s in support], dtype=np.int64)
    if n_supp:
        aux_ids = np.array([aux.vocab_alignment[t] for t, _ in support], dtype=np.int64)
        supp_aux = aux.matrix.data[aux_ids].astype(np.float64)
        norms = np.linalg.norm(supp_aux, axis=1)
        zero_support = int(np.count_nonzero(norms == 0.0))
        if zero_support:
            report.warnings.append(
                f"{zero_support} support vectors have zero norm and contribute "
                "zero similarity"
            )
        safe = np.where(norms == 0.0, 1.0, norms)
        supp_unit = supp_aux / safe[:, None]

    needs_support = any(t in aux.vocab_alignment for t in overlap.non_overlap)
    if needs_support and n_supp == 0:
        raise ValidationError(
            "no overlapping token has an auxiliary vector; cannot form a "
            "similarity support"
        )

    mu_in, sd_in = _element_stats(source.input_emb)
    if out_out is not None:
        mu_out, sd_out = _element_stats(source.output_emb)

    uniform = np.full(n_supp, 1.0 / n_supp) if n_supp else None

    def make_weights(sims: np.ndarray) -> tuple[np.ndarray, bool]:
        if weight_mode == "sparsemax":
            return sparsemax(sims / cfg.sparsemax_temperature), True
        if weight_mode == "raw":
            total = float(sims.sum())
            if abs(total) < 1e-12:
                return uniform, True
            w = sims / total
            return w, bool(np.all(w >= 0.0))
        clamped = np.maximum(sims, 0.0)
        total = float(clamped.sum())
        if total > 0.0:
            return clamped / total, True
        return uniform, True

    def worker(t: int):
        aux_id = aux.vocab_alignment.get(t)
        if aux_id is None:
            if cfg.missing_aux_policy == "error":
                raise ValidationError(
                    f"token {target_vocab.tokens[t]!r} (id {t}) has no auxiliary vector"
                )
            rng = _token_rng(cfg.seed, t)
            out_in[t] = rng.normal(mu_in, sd_in, cols)
            if out_out is not None:
                out_out[t] = rng.normal(mu_out, sd_out, cols)
            return ("fallback", ())
        warns = ()
        query = aux.matrix.data[aux_id].astype(np.float64)
        qnorm = np.linalg.norm(query)
        if qnorm == 0.0:
            sims = np.zeros(n_supp)
            warns = (
                f"zero-norm auxiliary vector for target id {t}; weights fall "
                "back toward uniform",
            )
        else:
            sims = np.clip(supp_unit @ (query / qnorm), -1.0, 1.0)
        weights, convex = make_weights(sims)
        if convex:
            out_in[t] = convex_combine(WeightVector(supp_src, weights), source.input_emb)
            if out_out is not None:
                out_out[t] = convex_combine(
                    WeightVector(supp_src, weights), source.output_emb
                )
        else:
            # clp_raw_weights escape hatch: normalized raw cosines may be
            # negative, so this is not a convex combination.
            out_in[t] = weights @ source.input_emb.data[supp_src].astype(np.float64)
            if out_out is not None:
                out_out[t] = weights @ source.output_emb.data[supp_src].astype(np.float64)
        return ("similarity", warns)

    results = _run_tokens(overlap.non_overlap, worker, threads)
    report = _tally(report, results)
    return _assemble(source, target_vocab, out_in, out_out), report


def init_clp(
    source: ModelBundle,
    target_vocab: Vocabulary,
    overlap: OverlapMap,
    aux: AuxEmbeddings,
    cfg: InitConfig,
    threads: int = 1,
) -> tuple[ModelBundle, InitReport]:
    """Copy overlap rows; weight the rest by clamped, normalized cosines.

    Negative cosines clamp to zero before normalization so the combination
    stays convex; if everything clamps away the weights fall back to
    uniform. `cfg.clp_raw_weights` switches to normalizing the raw cosines
    by their sum instead.
    """
    _require_kind(aux, AUX_MODEL, "clp")
    mode = "raw" if cfg.clp_raw_weights else "clamp"
    return _similarity_init(
        source, target_vocab, overlap, aux, cfg, threads, method="clp", weight_mode=mode
    )


def init_focus(
    source: ModelBundle,
    target_vocab: Vocabulary,
    overlap: OverlapMap,
    vectors: AuxEmbeddings,
    cfg: InitConfig,
    threads: int = 1,
) -> tuple[ModelBundle, InitReport]:
    """Copy overlap rows; weight the rest by sparsemax over word-vector cosines."""
    _require_kind(vectors, WORD_VECTORS, "focus")
    return _similarity_init(
        source,
        target_vocab,
        overlap,
        vectors,
        cfg,
        threads,
        method="focus",
        weight_mode="sparsemax",
    )


def init_clp_plus(
    source: ModelBundle,
    target_vocab: Vocabulary,
    overlap: OverlapMap,
    aux: AuxEmbeddings,
    cfg: InitConfig,
    threads: int = 1,
) -> tuple[ModelBundle, InitReport]:
    """The focus pipeline with similarities taken from an auxiliary model."""
    _require_kind(aux, AUX_MODEL, "clp-plus")
    return _similarity_init(
        source,
        target_vocab,
        overlap,
        aux,
        cfg,
        threads,
        method="clp-plus",
        weight_mode="sparsemax",
    )


def init_heuristics(
    source: ModelBundle,
    target_vocab: Vocabulary,
    overlap: OverlapMap,
    cfg: InitConfig,
    threads: int = 1,
) -> tuple[ModelBundle, InitReport]:
    """Copy overlap rows; sample the rest from per-group source statistics.

    Groups with fewer than `cfg.min_group_size` source members, and tokens
    classified Unknown, fall back to whole-matrix statistics (counted as
    random-fallback).
    """
    _check_source(source)
    n = len(target_vocab)
    _check_overlap(overlap, n)
    cols = source.input_emb.cols
    out_in, out_out = _alloc(source, n)
    _copy_overlap(out_in, out_out, source, overlap)

    conv = cfg.conventions
    stats_in = group_statistics(source.vocab, source.input_emb, conv)
    stats_out = (
        group_statistics(source.vocab, source.output_emb, conv)
        if out_out is not None
        else None
    )
    mu_in, sd_in = _element_stats(source.input_emb)
    if out_out is not None:
        mu_out, sd_out = _element_stats(source.output_emb)

    def worker(t: int):
        group = classify_token(target_vocab.tokens[t], conv)
        st = stats_in.get(group)
        rng = _token_rng(cfg.seed, t)
        if group.script != "Unknown" and st is not None and st.count >= cfg.min_group_size:
            out_in[t] = rng.normal(st.mean, st.std)
            if out_out is not None:
                so = stats_out[group]
                out_out[t] = rng.normal(so.mean, so.std)
            return ("group", ())
        out_in[t] = rng.normal(mu_in, sd_in, cols)
        if out_out is not None:
            out_out[t] = rng.normal(mu_out, sd_out, cols)
        return ("fallback", ())

    report = InitReport(method="heuristics", copied=len(overlap.pairs))
    report.warnings.extend(overlap.warnings)
    report = _tally(report, _run_tokens(overlap.non_overlap, worker, threads))
    return _assemble(source, target_vocab, out_in, out_out), report


def _require_kind(aux: AuxEmbeddings | None, kind: str, method: str) -> None:
    if aux is None:
        raise ValidationError(f"method {method!r} requires {kind} auxiliary vectors")
    if aux.source_kind != kind:
        raise ValidationError(
            f"method {method!r} requires {kind} auxiliary vectors, got {aux.source_kind!r}"
        )


def init_target_bundle(
    source: ModelBundle,
    target_vocab: Vocabulary,
    cfg: InitConfig,
    aux: AuxEmbeddings | None = None,
    threads: int = 1,
) -> tuple[ModelBundle, InitReport]:
    """Dispatch to the configured method and build the full target bundle.

    Tied sources produce tied targets (no output matrix); untied sources
    get an output matrix built with the same per-token decisions.
    """
    _check_source(source)
    method = cfg.method
    if method == "random":
        bundle, report = init_random(source, target_vocab, cfg, threads)
    else:
        overlap = compute_overlap(source.vocab, target_vocab, cfg.overlap_canon)
        if method == "heuristics":
            bundle, report = init_heuristics(source, target_vocab, overlap, cfg, threads)
        elif method == "clp":
            _require_kind(aux, AUX_MODEL, method)
            bundle, report = init_clp(source, target_vocab, overlap, aux, cfg, threads)
        elif method == "focus":
            _require_kind(aux, WORD_VECTORS, method)
            bundle, report = init_focus(source, target_vocab, overlap, aux, cfg, threads)
        else:
            _require_kind(aux, AUX_MODEL, method)
            bundle, report = init_clp_plus(source, target_vocab, overlap, aux, cfg, threads)
    if report.counter_total() != len(target_vocab):
        raise VocabportError(
            f"internal error: report counters cover {report.counter_total()} of "
            f"{len(target_vocab)} tokens"
        )
    return bundle, report
