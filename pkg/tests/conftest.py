"""Shared builders: toy tokenizer specs and a synthetic source/target instance."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pytest

from vocabport.aux_vectors import load_aux_model, load_word_vectors
from vocabport.embedding_store import (
    EmbeddingMatrix,
    ModelBundle,
    Vocabulary,
    save_matrix,
)
from vocabport.tokenizers import BYTE_TO_UNICODE, BpeSpec, UnigramSpec

G = BYTE_TO_UNICODE[ord(" ")]  # "Ġ"

ASCII_BYTE_SYMBOLS = [BYTE_TO_UNICODE[b] for b in range(256)]


def sparsemax_oracle(z):
    """Brute-force simplex projection: enumerate every support set and keep
    the feasible candidate closest to z in Euclidean distance."""
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    best, best_dist = None, None
    for mask in range(1, 2**n):
        sel = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        tau = (z[sel].sum() - 1.0) / sel.sum()
        p = np.zeros(n)
        p[sel] = z[sel] - tau
        if (p[sel] < -1e-12).any():
            continue
        dist = float(((p - z) ** 2).sum())
        if best_dist is None or dist < best_dist:
            best, best_dist = p, dist
    return best


def bpe_merge_oracle(symbols, ranks):
    """Scan every applicable merge, apply the globally lowest rank at its
    leftmost occurrence, repeat until none applies."""
    symbols = list(symbols)
    while True:
        applicable = [
            (rank, i)
            for i, pair in enumerate(zip(symbols, symbols[1:]))
            if (rank := ranks.get(pair)) is not None
        ]
        if not applicable:
            return symbols
        _, i = min(applicable)
        symbols = symbols[:i] + [symbols[i] + symbols[i + 1]] + symbols[i + 2 :]


def bpe_oracle_encode(spec, text):
    from vocabport.tokenizers import byte_level_pretokenize, split_pretokens

    pretokens = byte_level_pretokenize(text) if spec.byte_level else split_pretokens(text)
    ids = []
    for pre in pretokens:
        for sym in bpe_merge_oracle(list(pre), spec.ranks):
            if sym in spec.vocab.index:
                ids.append(spec.vocab.index[sym])
            else:
                ids.extend(spec.vocab.index[c] for c in sym)
    return ids


def unigram_oracle(spec, s):
    """Enumerate every segmentation into vocab tokens or single-char unks;
    maximize (score, fewer tokens, leftmost-longest, real-over-unk)."""
    best = None

    def rec(i, ids, segs, score):
        nonlocal best
        if i == len(s):
            key = (score, -len(ids), tuple(segs))
            if best is None or key > best[0]:
                best = (key, list(ids))
            return
        for j in range(i + 1, len(s) + 1):
            tid = spec.vocab.index.get(s[i:j])
            if tid is not None:
                ids.append(tid)
                segs.append((j - i, 1))
                rec(j, ids, segs, score + float(spec.log_probs[tid]))
                ids.pop()
                segs.pop()
        ids.append(spec.unk_id)
        segs.append((1, 0))
        rec(i + 1, ids, segs, score + spec.unk_penalty)
        ids.pop()
        segs.pop()

    rec(0, [], [], 0.0)
    return best[1], best[0][0]


def unigram_score(spec, ids):
    # Recompute a segmentation's score, charging unk emissions the penalty.
    return sum(
        spec.unk_penalty if tid == spec.unk_id else float(spec.log_probs[tid])
        for tid in ids
    )


def make_bpe_spec(extra_tokens, merges, byte_level=True, full_byte_vocab=False):
    base = ASCII_BYTE_SYMBOLS if full_byte_vocab else sorted(
        {c for tok in extra_tokens for c in tok}
        | {c for pair in merges for c in pair[0] + pair[1]}
        | {G}
    )
    tokens = list(dict.fromkeys(list(base) + list(extra_tokens)))
    return BpeSpec(vocab=Vocabulary(tokens), merges=list(merges), byte_level=byte_level)


@pytest.fixture
def toy_bpe() -> BpeSpec:
    # vocab {a, b, c, ab, abc} plus byte symbols; merges (a,b) then (ab,c)
    return make_bpe_spec(["ab", "abc"], [("a", "b"), ("ab", "c")])


def make_unigram_spec(scored: dict[str, float], unk_token="<unk>", unk_penalty=-16.0,
                      space_marker=None) -> UnigramSpec:
    tokens = list(scored)
    if unk_token not in scored:
        tokens.append(unk_token)
    log_probs = np.array([scored.get(t, -99.0) for t in tokens], dtype=np.float64)
    return UnigramSpec(
        vocab=Vocabulary(tokens),
        log_probs=log_probs,
        unk_token=unk_token,
        unk_penalty=unk_penalty,
        space_marker=space_marker,
    )


@dataclass
class Instance:
    """A synthetic source model, target vocabulary, and auxiliary inputs."""

    source: ModelBundle
    target_vocab: Vocabulary
    aux_dir: object  # path holding serialized forms
    aux_model_files: tuple[str, str]  # (vocab path, matrix path)
    word_vec_file: str
    source_files: dict  # vocab/emb/out-emb paths
    target_vocab_file: str
    n_overlap: int
    missing_word_vec_ids: set[int]


def build_instance(
    tmp_path,
    n_source=1000,
    n_target=800,
    n_overlap=300,
    dim=16,
    aux_dim=12,
    untied=True,
    seed=20240501,
    n_missing_vecs=25,
) -> Instance:
    rng = np.random.default_rng(seed)
    shared = [f"{G}shared{i:04d}" for i in range(n_overlap)]
    source_only = [f"{G}src{i:04d}" for i in range(n_source - n_overlap)]
    target_only = [f"{G}tgt{i:04d}" for i in range(n_target - n_overlap)]

    source_tokens = shared + source_only
    order = rng.permutation(len(source_tokens))
    source_tokens = [source_tokens[i] for i in order]
    target_tokens = shared + target_only
    order = rng.permutation(len(target_tokens))
    target_tokens = [target_tokens[i] for i in order]

    source_vocab = Vocabulary(source_tokens)
    target_vocab = Vocabulary(target_tokens)

    input_emb = EmbeddingMatrix(rng.normal(0.1, 1.2, (n_source, dim)).astype(np.float32))
    output_emb = (
        EmbeddingMatrix(rng.normal(-0.2, 0.9, (n_source, dim)).astype(np.float32))
        if untied
        else None
    )
    source = ModelBundle(
        vocab=source_vocab, input_emb=input_emb, output_emb=output_emb, tied=not untied
    )

    # Auxiliary model shares the target vocabulary (plus a few extras).
    aux_tokens = list(target_tokens) + [f"{G}extra{i}" for i in range(7)]
    aux_matrix = EmbeddingMatrix(
        rng.normal(0.0, 1.0, (len(aux_tokens), aux_dim)).astype(np.float32)
    )

    # Word vectors cover all but a deterministic subset of target tokens.
    missing_ids = set(range(0, n_target, max(1, n_target // max(n_missing_vecs, 1)))) if n_missing_vecs else set()
    missing_ids = set(sorted(missing_ids)[:n_missing_vecs])
    vec_tokens = [t for i, t in enumerate(target_tokens) if i not in missing_ids]
    vec_values = rng.normal(0.0, 1.0, (len(vec_tokens), aux_dim)).astype(np.float32)

    # Serialize everything for the CLI-facing tests.
    src_vocab_path = tmp_path / "source_vocab.json"
    src_vocab_path.write_text(
        json.dumps({t: i for i, t in enumerate(source_tokens)}, ensure_ascii=False)
    )
    tgt_vocab_path = tmp_path / "target_vocab.json"
    tgt_vocab_path.write_text(
        json.dumps({t: i for i, t in enumerate(target_tokens)}, ensure_ascii=False)
    )
    src_emb_path = tmp_path / "source_emb.vemb"
    save_matrix(input_emb, str(src_emb_path))
    src_out_path = None
    if untied:
        src_out_path = tmp_path / "source_out_emb.vemb"
        save_matrix(output_emb, str(src_out_path))
    aux_vocab_path = tmp_path / "aux_vocab.json"
    aux_vocab_path.write_text(
        json.dumps({t: i for i, t in enumerate(aux_tokens)}, ensure_ascii=False)
    )
    aux_emb_path = tmp_path / "aux_emb.vemb"
    save_matrix(aux_matrix, str(aux_emb_path))
    vec_path = tmp_path / "word_vectors.vec"
    lines = [f"{len(vec_tokens)} {aux_dim}"]
    for tok, row in zip(vec_tokens, vec_values):
        lines.append(tok + " " + " ".join(repr(float(v)) for v in row))
    vec_path.write_text("\n".join(lines) + "\n")

    return Instance(
        source=source,
        target_vocab=target_vocab,
        aux_dir=tmp_path,
        aux_model_files=(str(aux_vocab_path), str(aux_emb_path)),
        word_vec_file=str(vec_path),
        source_files={
            "vocab": str(src_vocab_path),
            "emb": str(src_emb_path),
            "out_emb": str(src_out_path) if src_out_path else None,
        },
        target_vocab_file=str(tgt_vocab_path),
        n_overlap=n_overlap,
        missing_word_vec_ids=missing_ids,
    )


@pytest.fixture
def instance(tmp_path) -> Instance:
    return build_instance(tmp_path)


@pytest.fixture
def aux_model(instance):
    return load_aux_model(*instance.aux_model_files, instance.target_vocab)


@pytest.fixture
def word_vecs(instance):
    return load_word_vectors(instance.word_vec_file, instance.target_vocab)
