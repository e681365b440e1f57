"""Prompt-prefix template composition and BoW / TF-IDF featurization.

Templates prepend structured prefixes to the update description:

    1: [CLS] <description>
    2: [CLS] <title> [SEP] <description>
    3: [CLS] <title> [SEP] <summary> [SEP] <description>

Composition operates on already-cleaned fields; the literal markers appear
for every model family. Bag tokenization discards them (uppercase and
bracketed), the hashing encoder hashes them as constants, so neither
representation is perturbed by the choice.

Vocabularies are built from training documents only: the ``cap`` tokens
with highest document frequency are kept (frequency ties broken
lexicographically) and the survivors are indexed in lexicographic order,
so feature indices are reproducible and artifacts diff cleanly.

Encoders return sparse (index, weight) pairs sorted by index; a document
with no in-vocabulary tokens encodes to the empty vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyDescription, EmptyTrainingSet
from .preprocess import tokenize_for_bag

__all__ = [
    "FeatureKind",
    "SparseVector",
    "Template",
    "Vocabulary",
    "bow_encode",
    "build_vocabulary",
    "compose",
    "encode_matrix",
    "tfidf_encode",
    "to_dense",
]

CLS = "[CLS]"
SEP = "[SEP]"

DEFAULT_VOCAB_CAP = 1024

# (feature index, weight) pairs, index-ascending, indices unique.
SparseVector = list[tuple[int, float]]


class Template(IntEnum):
    DESCRIPTION = 1
    TITLE_DESCRIPTION = 2
    TITLE_SUMMARY_DESCRIPTION = 3


class FeatureKind(str, Enum):
    BOW = "bow"
    TFIDF = "tfidf"


def compose(title: str, summary: str, description: str, template: Template | int) -> str:
    """Join cleaned fields under the given template.

    The description must be non-empty (the pipeline drops tickets whose
    selected update cleans to nothing before this point). Empty title or
    summary fields keep their separators, so the description always ends
    the composed string whatever the template.
    """
    template = Template(template)
    if description == "":
        raise EmptyDescription("composed input requires a non-empty description")
    if template is Template.DESCRIPTION:
        parts = [CLS, description]
    elif template is Template.TITLE_DESCRIPTION:
        parts = [CLS, title, SEP, description]
    else:
        parts = [CLS, title, SEP, summary, SEP, description]
    return " ".join(p for p in parts if p != "")


@dataclass(frozen=True)
class Vocabulary:
    """Fixed token-to-index mapping plus the stats TF-IDF needs.

    ``tokens`` is lexicographically sorted; ``doc_freq[i]`` counts training
    documents containing ``tokens[i]``; ``corpus_size`` is N, the number of
    training documents. ``idf[i] = ln((1 + N) / (1 + df_i)) + 1``.
    """

    tokens: tuple[str, ...]
    doc_freq: tuple[int, ...]
    corpus_size: int
    cap: int = DEFAULT_VOCAB_CAP
    _index: dict = field(init=False, repr=False, compare=False)
    idf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})
        df = np.asarray(self.doc_freq, dtype=np.float64)
        idf = np.log((1.0 + self.corpus_size) / (1.0 + df)) + 1.0
        idf.setflags(write=False)
        object.__setattr__(self, "idf", idf)

    def __len__(self) -> int:
        return len(self.tokens)

    def index_of(self, token: str) -> int | None:
        return self._index.get(token)

    def to_dict(self) -> dict:
        return {
            "cap": self.cap,
            "N": self.corpus_size,
            "tokens": [{"t": t, "df": d} for t, d in zip(self.tokens, self.doc_freq)],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Vocabulary":
        return cls(
            tokens=tuple(e["t"] for e in obj["tokens"]),
            doc_freq=tuple(int(e["df"]) for e in obj["tokens"]),
            corpus_size=int(obj["N"]),
            cap=int(obj["cap"]),
        )


def build_vocabulary(
    documents: Iterable[Sequence[str]], cap: int = DEFAULT_VOCAB_CAP
) -> Vocabulary:
    """Build a capped vocabulary from tokenized training documents."""
    if cap < 1:
        raise ValueError(f"vocab cap must be positive, got {cap}")
    df: dict[str, int] = {}
    n_docs = 0
    for tokens in documents:
        n_docs += 1
        for token in set(tokens):
            df[token] = df.get(token, 0) + 1
    if n_docs == 0:
        raise EmptyTrainingSet("cannot build a vocabulary from zero documents")
    if not df:
        raise EmptyTrainingSet("no tokens survive cleaning and stopword removal")
    kept = sorted(df.items(), key=lambda item: (-item[1], item[0]))[:cap]
    kept.sort(key=lambda item: item[0])
    return Vocabulary(
        tokens=tuple(t for t, _ in kept),
        doc_freq=tuple(c for _, c in kept),
        corpus_size=n_docs,
        cap=cap,
    )


def _term_counts(doc: Sequence[str], vocab: Vocabulary) -> dict[int, float]:
    counts: dict[int, float] = {}
    for token in doc:
        idx = vocab.index_of(token)
        if idx is not None:
            counts[idx] = counts.get(idx, 0.0) + 1.0
    return counts


def bow_encode(doc: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """Binary presence encoding; duplicates collapse, OOV tokens drop."""
    return [(idx, 1.0) for idx in sorted(_term_counts(doc, vocab))]


def tfidf_encode(doc: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """L2-normalized tf * idf; an all-OOV document encodes to the empty vector."""
    counts = _term_counts(doc, vocab)
    if not counts:
        return []
    items = sorted((idx, tf * vocab.idf[idx]) for idx, tf in counts.items())
    norm = float(np.hypot.reduce([w for _, w in items]))
    return [(idx, w / norm) for idx, w in items]


def to_dense(vector: SparseVector, dim: int) -> np.ndarray:
    dense = np.zeros(dim, dtype=np.float64)
    for idx, weight in vector:
        dense[idx] = weight
    return dense


def encode_matrix(
    texts: Iterable[str], vocab: Vocabulary, kind: FeatureKind | str
) -> np.ndarray:
    """Tokenize and encode cleaned texts into a dense (n, |V|) matrix."""
    kind = FeatureKind(kind)
    encode = bow_encode if kind is FeatureKind.BOW else tfidf_encode
    rows = [to_dense(encode(tokenize_for_bag(text), vocab), len(vocab)) for text in texts]
    if not rows:
        return np.zeros((0, len(vocab)), dtype=np.float64)
    return np.stack(rows)
