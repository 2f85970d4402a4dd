"""Auxiliary per-token representations used to score similarity.

Two sources: the embedding matrix of an auxiliary target-language model
that shares the target tokenizer, or static word vectors in the usual
text format (header "count dim", then "token v1 ... v_dim" per line).
A target token with no auxiliary vector is not an error here; the
initializer decides the fallback.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .embedding_store import EmbeddingMatrix, Vocabulary, load_matrix, load_vocab, sniff_vocab_format
from .errors import FormatError, ValidationError

AUX_MODEL = "aux-model"
WORD_VECTORS = "word-vectors"

_MARKERS = ("Ġ", "▁")


@dataclass
class AuxEmbeddings:
    """Target-id-aligned auxiliary vectors.

    `vocab_alignment` maps target id -> row of `matrix`; ids with no
    auxiliary vector are in `missing`. The two partition the target ids.
    """

    source_kind: str
    vocab_alignment: dict[int, int]
    matrix: EmbeddingMatrix
    missing: set[int] = field(default_factory=set)

    def row(self, target_id: int) -> np.ndarray | None:
        aux_id = self.vocab_alignment.get(target_id)
        return None if aux_id is None else self.matrix.data[aux_id]


def _align(
    target: Vocabulary, lookup: dict[str, int], marker_fallback: bool
) -> tuple[dict[int, int], set[int]]:
    alignment: dict[int, int] = {}
    missing: set[int] = set()
    for tid, token in enumerate(target.tokens):
        row = lookup.get(token)
        if row is None and marker_fallback and token[:1] in _MARKERS:
            row = lookup.get(token[1:])
        if row is None:
            missing.add(tid)
        else:
            alignment[tid] = row
    return alignment, missing


def load_aux_model(
    vocab_path: str,
    matrix_path: str,
    target: Vocabulary,
    vocab_format: str | None = None,
) -> AuxEmbeddings:
    """Load an auxiliary model's vocabulary and VEMB matrix, aligned by token string."""
    fmt = vocab_format or sniff_vocab_format(vocab_path)
    aux_vocab = load_vocab(vocab_path, fmt)
    matrix = load_matrix(matrix_path)
    if matrix.rows != len(aux_vocab):
        raise ValidationError(
            f"aux matrix has {matrix.rows} rows for {len(aux_vocab)} tokens"
        )
    alignment, missing = _align(target, aux_vocab.index, marker_fallback=False)
    return AuxEmbeddings(
        source_kind=AUX_MODEL,
        vocab_alignment=alignment,
        matrix=matrix,
        missing=missing,
    )


def load_word_vectors(
    path: str, target: Vocabulary, marker_fallback: bool = False
) -> AuxEmbeddings:
    """Load static word vectors and align them to the target vocabulary.

    Lookup uses the raw token string; with `marker_fallback` a token that
    misses is retried with its leading word-boundary marker stripped.
    Duplicate tokens keep the first occurrence (with a warning); a line
    whose value count disagrees with the header dimension is an error.
    """
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: invalid UTF-8 at byte offset {e.start}") from e
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty word-vector file")
    header = lines[0].split(" ")
    if len(header) != 2:
        raise FormatError(f"{path}:1: expected header 'count dim'")
    try:
        declared_count, dim = int(header[0]), int(header[1])
    except ValueError:
        raise FormatError(f"{path}:1: header fields must be integers") from None
    if dim <= 0:
        raise FormatError(f"{path}:1: dimension must be positive")

    lookup: dict[str, int] = {}
    vectors: list[np.ndarray] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(" ")
        if len(fields) != dim + 1:
            raise FormatError(
                f"{path}:{lineno}: {len(fields) - 1} values, header declares dim {dim}"
            )
        token = fields[0]
        try:
            vec = np.array([float(v) for v in fields[1:]], dtype=np.float32)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric vector value") from None
        if token in lookup:
            warnings.warn(
                f"{path}:{lineno}: duplicate token {token!r}; keeping the first",
                RuntimeWarning,
            )
            continue
        lookup[token] = len(vectors)
        vectors.append(vec)
    if declared_count != len(vectors):
        warnings.warn(
            f"{path}: header declares {declared_count} vectors, file has {len(vectors)}",
            RuntimeWarning,
        )
    matrix = EmbeddingMatrix(
        np.vstack(vectors) if vectors else np.empty((0, dim), dtype=np.float32)
    )
    alignment, missing = _align(target, lookup, marker_fallback)
    return AuxEmbeddings(
        source_kind=WORD_VECTORS,
        vocab_alignment=alignment,
        matrix=matrix,
        missing=missing,
    )


def aux_row(a: AuxEmbeddings, target_id: int) -> np.ndarray | None:
    """The aligned auxiliary vector for a target id, or None if missing."""
    if not 0 <= target_id < len(a.vocab_alignment) + len(a.missing):
        raise IndexError(f"target id {target_id} out of range")
    return a.row(target_id)
