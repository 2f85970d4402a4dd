"""Token classification into (script, position) groups, plus group statistics.

The script label is assigned by majority vote over the letter characters'
Unicode block, approximated by the fixed ranges below; splitting one
writing system across many tiny blocks would fragment the groups, so the
ranges are grouped at script granularity. Tokens without letters (digits,
punctuation, undecodable byte-fallback strings) classify as Unknown.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .embedding_store import EmbeddingMatrix, Vocabulary
from .errors import ValidationError
from .tokenizers import UNICODE_TO_BYTE

SCRIPT_LABELS = (
    "Latin",
    "Cyrillic",
    "Greek",
    "Arabic",
    "Hebrew",
    "Devanagari",
    "Hiragana",
    "Katakana",
    "Han",
    "Hangul",
    "Common",
    "Unknown",
)

WORD_INITIAL = "word-initial"
WORD_INTERNAL = "word-internal"

_RANGES: list[tuple[int, int, str]] = [
    (0x0041, 0x005A, "Latin"),
    (0x0061, 0x007A, "Latin"),
    (0x00C0, 0x00FF, "Latin"),
    (0x0100, 0x024F, "Latin"),
    (0x0250, 0x02AF, "Latin"),
    (0x0370, 0x03FF, "Greek"),
    (0x0400, 0x052F, "Cyrillic"),
    (0x0590, 0x05FF, "Hebrew"),
    (0x0600, 0x06FF, "Arabic"),
    (0x0750, 0x077F, "Arabic"),
    (0x08A0, 0x08FF, "Arabic"),
    (0x0900, 0x097F, "Devanagari"),
    (0x1100, 0x11FF, "Hangul"),
    (0x1E00, 0x1EFF, "Latin"),
    (0x1F00, 0x1FFF, "Greek"),
    (0x2C60, 0x2C7F, "Latin"),
    (0x2DE0, 0x2DFF, "Cyrillic"),
    (0x3040, 0x309F, "Hiragana"),
    (0x30A0, 0x30FF, "Katakana"),
    (0x3130, 0x318F, "Hangul"),
    (0x31F0, 0x31FF, "Katakana"),
    (0x3400, 0x4DBF, "Han"),
    (0x4E00, 0x9FFF, "Han"),
    (0xA640, 0xA69F, "Cyrillic"),
    (0xA720, 0xA7FF, "Latin"),
    (0xA8E0, 0xA8FF, "Devanagari"),
    (0xA960, 0xA97F, "Hangul"),
    (0xAC00, 0xD7FF, "Hangul"),
    (0xF900, 0xFAFF, "Han"),
    (0xFB1D, 0xFB4F, "Hebrew"),
    (0xFB50, 0xFDFF, "Arabic"),
    (0xFE70, 0xFEFF, "Arabic"),
    (0xFF66, 0xFF9D, "Katakana"),
    (0x20000, 0x2A6DF, "Han"),
    (0x2A700, 0x2B73F, "Han"),
]
_RANGE_STARTS = [lo for lo, _, _ in _RANGES]

WORD_MARKERS = ("Ġ", "▁")  # "Ġ", "▁"


@dataclass(frozen=True)
class ScriptGroup:
    script: str
    position: str

    def label(self) -> str:
        return f"{self.script}/{self.position}"


@dataclass(frozen=True)
class TokenConventions:
    """How to read token strings before classification.

    With `byte_level` set, tokens made entirely of byte-alphabet symbols
    are decoded through the byte-to-unicode table first (GPT-2-style
    vocabularies store bytes, not characters); tokens containing other
    characters are classified as-is, so SentencePiece-style vocabularies
    work under the same setting.
    """

    markers: tuple[str, ...] = WORD_MARKERS
    byte_level: bool = True


DEFAULT_CONVENTIONS = TokenConventions()


@dataclass
class GroupStats:
    """Per-coordinate population mean/std over a group's embedding rows."""

    group: ScriptGroup
    count: int
    mean: np.ndarray
    std: np.ndarray


def _script_of(codepoint: int) -> str:
    k = bisect_right(_RANGE_STARTS, codepoint) - 1
    if k >= 0:
        lo, hi, label = _RANGES[k]
        if lo <= codepoint <= hi:
            return label
    return "Unknown"


def _decode_if_byte_level(token: str) -> str | None:
    # None means the token is byte-alphabet data that is not valid UTF-8.
    if not all(c in UNICODE_TO_BYTE for c in token):
        return token
    try:
        return bytes(UNICODE_TO_BYTE[c] for c in token).decode("utf-8")
    except UnicodeDecodeError:
        return None


def classify_token(
    token: str, conventions: TokenConventions = DEFAULT_CONVENTIONS
) -> ScriptGroup:
    """Assign a (script, position) group; total and deterministic.

    A leading word-boundary marker sets position=word-initial and is
    stripped before the script vote.
    """
    position = WORD_INTERNAL
    if token[:1] in conventions.markers:
        position = WORD_INITIAL
        token = token[1:]
    if conventions.byte_level:
        decoded = _decode_if_byte_level(token)
        if decoded is None:
            return ScriptGroup("Unknown", position)
        token = decoded
    votes = Counter(_script_of(ord(c)) for c in token if c.isalpha())
    if not votes:
        return ScriptGroup("Unknown", position)
    ranked = votes.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return ScriptGroup("Unknown", position)
    return ScriptGroup(ranked[0][0], position)


def group_statistics(
    vocab: Vocabulary,
    emb: EmbeddingMatrix,
    conventions: TokenConventions = DEFAULT_CONVENTIONS,
) -> dict[ScriptGroup, GroupStats]:
    """Population mean/std per group over the matrix rows of its members."""
    if emb.rows != len(vocab):
        raise ValidationError(
            f"matrix has {emb.rows} rows for {len(vocab)} tokens"
        )
    members: dict[ScriptGroup, list[int]] = {}
    for tid, token in enumerate(vocab.tokens):
        members.setdefault(classify_token(token, conventions), []).append(tid)
    stats: dict[ScriptGroup, GroupStats] = {}
    for group, ids in members.items():
        rows = emb.data[np.array(ids, dtype=np.int64)].astype(np.float64)
        stats[group] = GroupStats(
            group=group,
            count=len(ids),
            mean=rows.mean(axis=0),
            std=rows.std(axis=0),
        )
    return stats
