"""Deterministic byte-level BPE and Unigram encoders.

These engines exist to measure fragmentation, so determinism matters more
than parity with any particular upstream implementation: the same input
must produce the same ids on every run and thread count.

Pretokenization follows a fixed, documented boundary rule rather than a
configurable regex:

  * runs of letters, numerics, and other non-space characters form
    pretokens, split wherever the character class changes;
  * a whitespace run followed by a visible character splits off its last
    character; if that character is a plain space it folds into the
    following pretoken ("hi there" -> ["hi", " there"]);
  * a trailing whitespace run is one pretoken.

Byte-level specs then map each UTF-8 byte through the fixed 256-entry
byte-to-unicode table (space becomes "Ġ"), so any byte sequence round-trips
losslessly through encode/decode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding_store import Vocabulary
from .errors import FormatError, MalformedSpecError, ValidationError


def _build_byte_maps() -> tuple[dict[int, str], dict[str, int]]:
    # Printable bytes map to themselves; the rest shift into 0x100+.
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    enc = {b: chr(c) for b, c in zip(bs, cs)}
    dec = {c: b for b, c in enc.items()}
    return enc, dec


BYTE_TO_UNICODE, UNICODE_TO_BYTE = _build_byte_maps()


def _char_class(c: str) -> str:
    if c.isspace():
        return "space"
    if c.isalpha():
        return "letter"
    if c.isnumeric():
        return "numeric"
    return "other"


def split_pretokens(text: str) -> list[str]:
    """Split text by the documented boundary rule, without byte mapping."""
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == " " and i + 1 < n and not text[i + 1].isspace():
            cls = _char_class(text[i + 1])
            j = i + 1
            while j < n and _char_class(text[j]) == cls:
                j += 1
            out.append(text[i:j])
            i = j
        elif c.isspace():
            j = i
            while j < n and text[j].isspace():
                j += 1
            if j == n:
                out.append(text[i:j])
                i = j
            else:
                # Split off the run's last char; a plain space folds into
                # the next pretoken, any other whitespace stands alone.
                if j - 1 > i:
                    out.append(text[i : j - 1])
                if text[j - 1] == " ":
                    i = j - 1
                else:
                    out.append(text[j - 1 : j])
                    i = j
        else:
            cls = _char_class(c)
            j = i
            while j < n and _char_class(text[j]) == cls:
                j += 1
            out.append(text[i:j])
            i = j
    return out


def map_bytes(s: str) -> str:
    """Encode a string's UTF-8 bytes through the byte-to-unicode table."""
    return "".join(BYTE_TO_UNICODE[b] for b in s.encode("utf-8"))


def unmap_bytes(s: str) -> str:
    """Invert map_bytes; raises on symbols outside the byte alphabet."""
    try:
        raw = bytes(UNICODE_TO_BYTE[c] for c in s)
    except KeyError as e:
        raise ValidationError(f"symbol {e.args[0]!r} is not in the byte alphabet") from e
    return raw.decode("utf-8")


def byte_level_pretokenize(text: str) -> list[str]:
    """Pretokenize and map each pretoken through the byte table."""
    return [map_bytes(tok) for tok in split_pretokens(text)]


@dataclass
class BpeSpec:
    """Byte-level (or plain) BPE encoder definition.

    Merge priority is list position: lower index merges first. Every merge
    result (left+right) must already be a vocabulary token.
    """

    vocab: Vocabulary
    merges: list[tuple[str, str]]
    byte_level: bool = True
    ranks: dict[tuple[str, str], int] = field(init=False, repr=False)

    def __post_init__(self):
        ranks: dict[tuple[str, str], int] = {}
        for i, pair in enumerate(self.merges):
            left, right = pair
            if left + right not in self.vocab:
                raise MalformedSpecError(
                    f"merge #{i} result {left + right!r} is not in the vocabulary"
                )
            ranks.setdefault((left, right), i)
        self.ranks = ranks


@dataclass(eq=False)
class UnigramSpec:
    """Unigram encoder definition: per-token log-probabilities plus unk.

    `unk_penalty` is the log-score charged per unknown character; when the
    text cannot be covered by vocabulary tokens the encoder emits the unk
    token one character at a time instead of aborting. A leading space in
    a pretoken is rewritten to `space_marker` before segmentation (set it
    to None to disable).
    """

    vocab: Vocabulary
    log_probs: np.ndarray
    unk_token: str
    unk_penalty: float
    space_marker: str | None = "▁"
    unk_id: int = field(init=False, repr=False)
    _max_len: int = field(init=False, repr=False)

    def __post_init__(self):
        self.log_probs = np.asarray(self.log_probs, dtype=np.float64)
        if self.log_probs.shape != (len(self.vocab),):
            raise MalformedSpecError(
                f"{self.log_probs.size} log-probs for {len(self.vocab)} tokens"
            )
        if not np.all(np.isfinite(self.log_probs)):
            raise MalformedSpecError("log-probs must be finite")
        if not np.isfinite(self.unk_penalty):
            raise MalformedSpecError("unk penalty must be finite")
        if self.unk_token not in self.vocab:
            raise MalformedSpecError(f"unk token {self.unk_token!r} is not in the vocabulary")
        self.unk_id = self.vocab.index[self.unk_token]
        self._max_len = max((len(t) for t in self.vocab.tokens), default=0)


TokenizerSpec = BpeSpec | UnigramSpec


def _merge_symbols(symbols: list[str], ranks: dict[tuple[str, str], int]) -> list[str]:
    # One step = the lowest-rank applicable merge at its leftmost
    # occurrence; repeat until nothing applies.
    while len(symbols) > 1:
        best_rank = None
        best_pos = -1
        for pos in range(len(symbols) - 1):
            rank = ranks.get((symbols[pos], symbols[pos + 1]))
            if rank is not None and (best_rank is None or rank < best_rank):
                best_rank = rank
                best_pos = pos
        if best_rank is None:
            break
        symbols[best_pos : best_pos + 2] = [symbols[best_pos] + symbols[best_pos + 1]]
    return symbols


def bpe_encode(spec: BpeSpec, text: str) -> list[int]:
    """Encode text with iterative pair merging, one pretoken at a time.

    Symbols left without a vocabulary id after merging are emitted
    character by character; a missing single-character symbol means the
    spec itself is broken (a byte-level vocab must cover its alphabet).
    """
    pretokens = (
        byte_level_pretokenize(text) if spec.byte_level else split_pretokens(text)
    )
    index = spec.vocab.index
    ids: list[int] = []
    for pre in pretokens:
        for sym in _merge_symbols(list(pre), spec.ranks):
            tid = index.get(sym)
            if tid is not None:
                ids.append(tid)
                continue
            for ch in sym:
                cid = index.get(ch)
                if cid is None:
                    raise MalformedSpecError(
                        f"symbol {ch!r} has no id and cannot be split further"
                    )
                ids.append(cid)
    return ids


def bpe_decode(spec: BpeSpec, ids: list[int]) -> str:
    """Concatenate token strings and, for byte-level specs, invert the byte map."""
    tokens = spec.vocab.tokens
    for tid in ids:
        if not 0 <= tid < len(tokens):
            raise ValidationError(f"token id {tid} out of range")
    joined = "".join(tokens[tid] for tid in ids)
    return unmap_bytes(joined) if spec.byte_level else joined


def _viterbi(spec: UnigramSpec, s: str) -> list[int]:
    # Right-to-left DP; picking the longest first token among ties makes
    # the segmentation leftmost-longest after maximizing score and
    # minimizing token count.
    n = len(s)
    best_score = [0.0] * (n + 1)
    best_count = [0] * (n + 1)
    step: list[tuple[int, int]] = [(0, 0)] * (n + 1)  # (next position, token id)
    index = spec.vocab.index
    log_probs = spec.log_probs
    for i in range(n - 1, -1, -1):
        # Unknown characters are consumed one at a time at unk_penalty.
        best = (spec.unk_penalty + best_score[i + 1], -(1 + best_count[i + 1]), i + 1, 0)
        choice = (i + 1, spec.unk_id)
        limit = min(n, i + spec._max_len)
        for j in range(i + 1, limit + 1):
            tid = index.get(s[i:j])
            if tid is None:
                continue
            cand = (log_probs[tid] + best_score[j], -(1 + best_count[j]), j, 1)
            if cand > best:
                best = cand
                choice = (j, tid)
        best_score[i] = best[0]
        best_count[i] = -best[1]
        step[i] = choice
    ids: list[int] = []
    i = 0
    while i < n:
        j, tid = step[i]
        ids.append(tid)
        i = j
    return ids


def unigram_encode(spec: UnigramSpec, text: str) -> list[int]:
    """Segment each pretoken to maximize the summed token log-probability.

    Ties break toward fewer tokens, then leftmost-longest; a real token is
    preferred over an unk emission with an identical score.
    """
    ids: list[int] = []
    for pre in split_pretokens(text):
        if spec.space_marker is not None:
            pre = pre.replace(" ", spec.space_marker)
        ids.extend(_viterbi(spec, pre))
    return ids


def count_tokens(spec: TokenizerSpec, text: str) -> int:
    """Number of tokens the spec produces for the text."""
    if isinstance(spec, BpeSpec):
        return len(bpe_encode(spec, text))
    if isinstance(spec, UnigramSpec):
        return len(unigram_encode(spec, text))
    raise ValidationError(f"unknown tokenizer spec type {type(spec).__name__}")


def load_bpe_spec(vocab_path: str, merges_path: str, byte_level: bool = True) -> BpeSpec:
    """Load a BPE spec from a JSON vocab map and a merges text file.

    Merges format: one "left right" pair per line, space-separated; a
    first line starting with "#" is a header and is skipped.
    """
    from .embedding_store import load_vocab

    vocab = load_vocab(vocab_path, "json-map")
    merges: list[tuple[str, str]] = []
    with open(merges_path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{merges_path}: invalid UTF-8 at byte offset {e.start}") from e
    lines = text.splitlines()
    start = 1 if lines and lines[0].startswith("#") else 0
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line:
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise FormatError(
                f"{merges_path}:{lineno}: expected 'left right', got {len(parts)} fields"
            )
        merges.append((parts[0], parts[1]))
    return BpeSpec(vocab=vocab, merges=merges, byte_level=byte_level)


def load_unigram_spec(
    path: str,
    unk_token: str = "<unk>",
    unk_penalty: float | None = None,
    space_marker: str | None = "▁",
) -> UnigramSpec:
    """Load a Unigram spec from a "token<TAB>logprob" TSV.

    Ids follow line order. When `unk_penalty` is None it defaults to the
    lowest log-prob in the file minus 10, so unk is always a last resort.
    """
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: invalid UTF-8 at byte offset {e.start}") from e
    tokens: list[str] = []
    scores: list[float] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split("\t")
        if len(fields) != 2:
            raise FormatError(
                f"{path}:{lineno}: expected 'token<TAB>logprob', got {len(fields)} fields"
            )
        tok, score_s = fields
        if tok in seen:
            raise FormatError(
                f"{path}:{lineno}: duplicate token {tok!r} (first at line {seen[tok]})"
            )
        seen[tok] = lineno
        try:
            score = float(score_s)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: log-prob {score_s!r} is not a number") from None
        tokens.append(tok)
        scores.append(score)
    if unk_penalty is None:
        unk_penalty = (min(scores) if scores else 0.0) - 10.0
    return UnigramSpec(
        vocab=Vocabulary(tokens),
        log_probs=np.array(scores, dtype=np.float64),
        unk_token=unk_token,
        unk_penalty=unk_penalty,
        space_marker=space_marker,
    )
