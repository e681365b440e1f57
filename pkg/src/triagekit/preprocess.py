"""Text cleaning and bag-of-words tokenization for ticket content.

Cleaning strips machine noise (code blocks, HTML tables and tags, URLs,
brace-delimited metadata), then lowercases and normalizes whitespace.
Stopword removal happens only at tokenization time so that encoder
backends still see full sentences.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

__all__ = [
    "CleanText",
    "RemovalCounts",
    "clean",
    "is_short",
    "load_stopwords",
    "tokenize_for_bag",
]

# Brace/bracket spans longer than this, or containing sentence punctuation,
# are treated as natural-language asides and kept.
_MAX_BRACE_SPAN = 200
_SENTENCE_PUNCT = (".", "!", "?")

FENCED_CODE_RE = re.compile(r"```.*?```|~~~.*?~~~", re.DOTALL)
INDENTED_CODE_RE = re.compile(r"(?:^(?:[ ]{4,}|\t).*\n?)+", re.MULTILINE)
TABLE_RE = re.compile(r"<table\b.*?</table\s*>", re.IGNORECASE | re.DOTALL)
TAG_RE = re.compile(r"</?[a-zA-Z][^>]*>|<!--.*?-->", re.DOTALL)
URL_RE = re.compile(r"(?:[a-zA-Z][a-zA-Z0-9+.-]*://|www\.)\S+", re.IGNORECASE)
BRACE_RE = re.compile(r"\{[^{}]*\}|\[[^\[\]]*\]")

_WS_RE = re.compile(r"\s+")
_TOKEN_SPLIT_RE = re.compile(r"[^a-z0-9]+")


@dataclass(frozen=True)
class RemovalCounts:
    """Number of spans removed by each cleaning rule."""

    urls: int = 0
    code_blocks: int = 0
    html_tags: int = 0
    tables: int = 0
    braces: int = 0

    def total(self) -> int:
        return self.urls + self.code_blocks + self.html_tags + self.tables + self.braces


@dataclass(frozen=True)
class CleanText:
    """Cleaned, lowercase, single-spaced text plus an audit of what was removed."""

    text: str
    removed: RemovalCounts = field(default_factory=RemovalCounts)

    def __len__(self) -> int:
        return len(self.text)


def _strippable_brace_span(span: str) -> bool:
    if len(span) > _MAX_BRACE_SPAN:
        return False
    return not any(p in span for p in _SENTENCE_PUNCT)


def _strip_once(text: str, counts: dict[str, int]) -> str:
    """One pass of code -> tables -> tags -> URLs -> braces, each span -> space."""
    for pattern, key in (
        (FENCED_CODE_RE, "code_blocks"),
        (INDENTED_CODE_RE, "code_blocks"),
        (TABLE_RE, "tables"),
        (TAG_RE, "html_tags"),
        (URL_RE, "urls"),
    ):
        text, n = pattern.subn(" ", text)
        counts[key] += n

    def brace_repl(match: re.Match[str]) -> str:
        span = match.group(0)
        if _strippable_brace_span(span):
            counts["braces"] += 1
            return " "
        return span

    return BRACE_RE.sub(brace_repl, text)


def clean(raw: str) -> CleanText:
    """Clean raw ticket text.

    Removal rules run in order (code blocks, HTML tables, remaining HTML
    tags, URLs, brace-delimited metadata) and the sequence is repeated
    until a fixpoint, since removing one span can expose another (e.g. a
    URL split by markup). The survivor is NFC-normalized, lowercased,
    whitespace-collapsed, and trimmed. Empty input is allowed.
    """
    counts = {"urls": 0, "code_blocks": 0, "html_tags": 0, "tables": 0, "braces": 0}
    text = unicodedata.normalize("NFC", raw)
    while True:
        before = text
        text = _strip_once(text, counts)
        if text == before:
            break
    text = _WS_RE.sub(" ", text.lower()).strip()
    return CleanText(text=text, removed=RemovalCounts(**counts))


@lru_cache(maxsize=1)
def load_stopwords() -> frozenset[str]:
    """Load the stopword list shipped with the package."""
    data = resources.files("triagekit.data").joinpath("stopwords.txt").read_text("utf-8")
    words = set()
    for line in data.splitlines():
        word = line.strip()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)


def tokenize_for_bag(cleaned: CleanText | str) -> list[str]:
    """Split cleaned text into bag-of-words tokens.

    Splits on non-alphanumeric boundaries, drops tokens shorter than two
    characters, and drops stopwords.
    """
    text = cleaned.text if isinstance(cleaned, CleanText) else cleaned
    stopwords = load_stopwords()
    return [
        token
        for token in _TOKEN_SPLIT_RE.split(text)
        if len(token) >= 2 and token not in stopwords
    ]


def is_short(cleaned: CleanText | str, min_chars: int) -> bool:
    """True when the cleaned text has fewer than ``min_chars`` characters."""
    if min_chars < 0:
        raise ValueError(f"min_chars must be >= 0, got {min_chars}")
    text = cleaned.text if isinstance(cleaned, CleanText) else cleaned
    return len(text) < min_chars
