"""Vocabularies, embedding matrices, and their on-disk formats.

Embedding matrices are stored in the VEMB container, a self-describing
little-endian binary format:

    magic   4 bytes   b"VEMB"
    version u32       1
    rows    u64
    cols    u64
    dtype   u32       0 = float32
    data    rows*cols little-endian float32 values, row-major

Vocabularies come in three text formats:

    json-map        JSON object mapping token -> id (ids must be dense,
                    0-based; sparse id spaces are rejected, not compacted)
    line-per-token  UTF-8 text, one token per line, ids by line order
    tsv-scored      "token<TAB>score" per line; the score column is parsed
                    for validation but ignored here (Unigram specs use it)

Values are stored as 32-bit floats; arithmetic elsewhere in the package
accumulates in 64-bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FormatError, ValidationError

VEMB_MAGIC = b"VEMB"
VEMB_VERSION = 1
VEMB_DTYPE_F32 = 0
_VEMB_HEADER = struct.Struct("<4sIQQI")

VOCAB_FORMATS = ("json-map", "line-per-token", "tsv-scored")


class Vocabulary:
    """Ordered token strings with a dense 0-based token -> id index."""

    __slots__ = ("tokens", "index")

    def __init__(self, tokens: Sequence[str]):
        toks = tuple(tokens)
        index: dict[str, int] = {}
        for i, tok in enumerate(toks):
            if tok in index:
                raise ValidationError(
                    f"duplicate token {tok!r} (ids {index[tok]} and {i})"
                )
            index[tok] = i
        self.tokens = toks
        self.index = index

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self) -> str:
        return f"Vocabulary({len(self.tokens)} tokens)"


class EmbeddingMatrix:
    """Dense |V| x H float32 matrix; row i is the embedding of token id i."""

    __slots__ = ("data",)

    def __init__(self, values):
        arr = np.ascontiguousarray(values, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"embedding matrix must be 2-D, got ndim={arr.ndim}")
        bad = _first_nonfinite(arr)
        if bad is not None:
            raise ValidationError(f"non-finite value at row {bad[0]}, col {bad[1]}")
        self.data = arr

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.data[i]

    def __eq__(self, other: object) -> bool:
        # Bitwise equality; matrices are the unit of round-trip contracts.
        return (
            isinstance(other, EmbeddingMatrix)
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    def __repr__(self) -> str:
        return f"EmbeddingMatrix({self.rows}x{self.cols})"


@dataclass
class ModelBundle:
    """A vocabulary plus its input embedding and optional output matrix.

    `tied` means the output projection reuses the input matrix, in which
    case `output_emb` must be absent.
    """

    vocab: Vocabulary
    input_emb: EmbeddingMatrix
    output_emb: EmbeddingMatrix | None = None
    tied: bool = True


def _first_nonfinite(arr: np.ndarray) -> tuple[int, int] | None:
    finite = np.isfinite(arr)
    if finite.all():
        return None
    flat = int(np.argmin(finite))
    return flat // arr.shape[1], flat % arr.shape[1]


def _decode_utf8(raw: bytes, path: str) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: invalid UTF-8 at byte offset {e.start}") from e


def load_vocab(path: str, fmt: str) -> Vocabulary:
    """Load a vocabulary file in one of the formats named in VOCAB_FORMATS.

    Raises FormatError with position info on duplicate tokens, non-dense
    ids (json-map), malformed lines, or bad encoding.
    """
    if fmt not in VOCAB_FORMATS:
        raise ValidationError(f"unknown vocabulary format {fmt!r}")
    with open(path, "rb") as f:
        raw = f.read()
    text = _decode_utf8(raw, path)

    if fmt == "json-map":
        return _vocab_from_json_map(text, path)
    if fmt == "tsv-scored":
        tokens = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(
                    f"{path}:{lineno}: expected 'token<TAB>score', got {len(fields)} fields"
                )
            try:
                float(fields[1])
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: score {fields[1]!r} is not a number"
                ) from None
            tokens.append(fields[0])
        return _vocab_from_lines(tokens, path)
    # line-per-token
    return _vocab_from_lines(text.splitlines(), path)


def _vocab_from_lines(tokens: list[str], path: str) -> Vocabulary:
    seen: dict[str, int] = {}
    for lineno, tok in enumerate(tokens, start=1):
        if tok in seen:
            raise FormatError(
                f"{path}:{lineno}: duplicate token {tok!r} (first at line {seen[tok]})"
            )
        seen[tok] = lineno
    return Vocabulary(tokens)


def _vocab_from_json_map(text: str, path: str) -> Vocabulary:
    dup: list[str] = []

    def pairs_hook(pairs):
        keys = set()
        for k, _ in pairs:
            if k in keys:
                dup.append(k)
            keys.add(k)
        return pairs

    try:
        pairs = json.loads(text, object_pairs_hook=pairs_hook)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON at line {e.lineno}, col {e.colno}") from e
    if dup:
        raise FormatError(f"{path}: duplicate token {dup[0]!r}")
    if not isinstance(pairs, list):
        raise FormatError(f"{path}: expected a JSON object mapping token -> id")

    by_id: dict[int, str] = {}
    for tok, tid in pairs:
        if isinstance(tid, bool) or not isinstance(tid, int):
            raise FormatError(f"{path}: id for token {tok!r} is not an integer")
        if tid in by_id:
            raise FormatError(
                f"{path}: non-dense ids: id {tid} assigned to both "
                f"{by_id[tid]!r} and {tok!r}"
            )
        by_id[tid] = tok
    n = len(by_id)
    missing = [i for i in range(n) if i not in by_id]
    if missing:
        raise FormatError(
            f"{path}: non-dense ids: expected 0..{n - 1}, missing id {missing[0]}"
        )
    return Vocabulary([by_id[i] for i in range(n)])


def sniff_vocab_format(path: str) -> str:
    """Guess a vocabulary file's format from its extension and first line.

    ".json" -> json-map, ".tsv" -> tsv-scored; otherwise a leading "{"
    means json-map and a tab in the first line means tsv-scored; anything
    else is line-per-token.
    """
    lower = path.lower()
    if lower.endswith(".json"):
        return "json-map"
    if lower.endswith(".tsv"):
        return "tsv-scored"
    with open(path, "rb") as f:
        head = f.read(4096)
    if head.lstrip()[:1] == b"{":
        return "json-map"
    if b"\t" in head.split(b"\n", 1)[0]:
        return "tsv-scored"
    return "line-per-token"


def load_matrix(path: str) -> EmbeddingMatrix:
    """Read a VEMB file; rejects bad magic, truncation, and non-finite values."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _VEMB_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, rows, cols, dtype = _VEMB_HEADER.unpack_from(raw)
    if magic != VEMB_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VEMB_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != VEMB_DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    expected = rows * cols * 4
    payload = len(raw) - _VEMB_HEADER.size
    if payload < expected:
        raise FormatError(
            f"{path}: truncated payload ({payload} bytes, expected {expected})"
        )
    if payload > expected:
        raise FormatError(
            f"{path}: {payload - expected} trailing bytes after payload"
        )
    arr = np.frombuffer(raw, dtype="<f4", offset=_VEMB_HEADER.size).reshape(rows, cols)
    bad = _first_nonfinite(arr) if rows and cols else None
    if bad is not None:
        raise FormatError(f"{path}: non-finite value at row {bad[0]}, col {bad[1]}")
    return EmbeddingMatrix(arr.copy())


def save_matrix(m: EmbeddingMatrix, path: str) -> None:
    """Write a VEMB file; load_matrix(save_matrix(m)) is bit-identical."""
    header = _VEMB_HEADER.pack(VEMB_MAGIC, VEMB_VERSION, m.rows, m.cols, VEMB_DTYPE_F32)
    data = np.ascontiguousarray(m.data, dtype="<f4")
    with open(path, "wb") as f:
        f.write(header)
        f.write(data.tobytes())


def validate_bundle(b: ModelBundle) -> list[str]:
    """Return a list of violated bundle invariants (empty means valid)."""
    problems: list[str] = []
    if b.input_emb.rows != len(b.vocab):
        problems.append(
            f"input matrix has {b.input_emb.rows} rows for {len(b.vocab)} tokens"
        )
    if b.tied and b.output_emb is not None:
        problems.append("bundle marked tied but an output matrix is present")
    if not b.tied and b.output_emb is None:
        problems.append("bundle marked untied but the output matrix is absent")
    if b.output_emb is not None:
        if (b.output_emb.rows, b.output_emb.cols) != (b.input_emb.rows, b.input_emb.cols):
            problems.append(
                f"output matrix is {b.output_emb.rows}x{b.output_emb.cols}, "
                f"input is {b.input_emb.rows}x{b.input_emb.cols}"
            )
    return problems
