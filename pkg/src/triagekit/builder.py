"""Representative-update selection and dataset assembly.

Each ticket carries a chain of description updates T1..Tm. The dataset keeps
exactly one: the first update whose cleaned text reaches ``min_chars``
characters (default 50), which skips short acknowledgments while still
labeling tickets early in their life. Tickets are then routed into
human-only, machine-only, or mixed datasets by the author of that selected
update, composed into template text, shuffled, and partitioned.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Author, LabelRegistry, RawTicket
from .errors import EmptyDataset, MissingLabel, NoEligibleUpdate
from .features import Template, compose
from .preprocess import CleanText, clean

__all__ = [
    "DatasetKind",
    "DatasetSplit",
    "Example",
    "SelectionConfig",
    "UpdateFrequencyReport",
    "build_dataset",
    "load_split",
    "report_to_csv",
    "save_split",
    "select_representative",
    "update_frequency_report",
]

DEFAULT_MIN_CHARS = 50
DEFAULT_SPLIT_RATIOS = (0.72, 0.08, 0.20)

# Table rows tabulate T1..T5 individually; later updates pool into "others".
_REPORT_BUCKETS = 5


class DatasetKind(str, Enum):
    HUMAN = "human"
    MACHINE = "machine"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class SelectionConfig:
    min_chars: int = DEFAULT_MIN_CHARS
    dataset_kind: DatasetKind = DatasetKind.MIXTURE
    template: Template = Template.DESCRIPTION
    split_ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.min_chars < 1:
            raise ValueError(f"min_chars must be >= 1, got {self.min_chars}")
        if len(self.split_ratios) != 3 or any(r <= 0 for r in self.split_ratios):
            raise ValueError(f"split_ratios must be three positive fractions, got {self.split_ratios}")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError(f"split_ratios must sum to 1, got {sum(self.split_ratios)}")
        object.__setattr__(self, "dataset_kind", DatasetKind(self.dataset_kind))
        object.__setattr__(self, "template", Template(self.template))


@dataclass(frozen=True)
class Example:
    ticket_id: str
    input_text: str
    label: int
    drawn_update_index: int
    author: Author


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Example, ...]
    val: tuple[Example, ...]
    test: tuple[Example, ...]
    seed: int
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.train) + len(self.val) + len(self.test)


@dataclass(frozen=True)
class UpdateFrequencyReport:
    """Per-threshold percentage of tickets drawn from T1..T5 or later."""

    thresholds: tuple[int, ...]
    rows: tuple[tuple[float, ...], ...]  # each row: (T1..T5, others), sums to 100
    eligible: tuple[int, ...]  # denominator per threshold (dropped excluded)


def select_representative(ticket: RawTicket, n: int = DEFAULT_MIN_CHARS) -> tuple[int, CleanText]:
    """Return (index, cleaned text) of the first update cleaning to >= n chars."""
    for update in ticket.updates:
        cleaned = clean(update.description)
        if len(cleaned) >= n:
            return update.index, cleaned
    raise NoEligibleUpdate(ticket.ticket_id, n)


def build_dataset(
    corpus: Sequence[RawTicket], cfg: SelectionConfig, registry: LabelRegistry
) -> DatasetSplit:
    """Select, filter, compose, shuffle, and partition the corpus.

    Tickets with no eligible update are dropped (counted); tickets whose
    selected update fails the author filter are excluded without counting.
    Every surviving ticket must carry a gold label.
    """
    examples: list[Example] = []
    dropped = 0
    for ticket in corpus:
        try:
            index, cleaned = select_representative(ticket, cfg.min_chars)
        except NoEligibleUpdate:
            dropped += 1
            continue
        author = ticket.updates[index - 1].author
        if cfg.dataset_kind is DatasetKind.HUMAN and author is not Author.HUMAN:
            continue
        if cfg.dataset_kind is DatasetKind.MACHINE and author is not Author.MACHINE:
            continue
        if ticket.gold_label is None:
            raise MissingLabel(ticket.ticket_id)
        text = compose(clean(ticket.title).text, clean(ticket.summary).text, cleaned.text, cfg.template)
        examples.append(
            Example(
                ticket_id=ticket.ticket_id,
                input_text=text,
                label=ticket.gold_label,
                drawn_update_index=index,
                author=author,
            )
        )
    if not examples:
        raise EmptyDataset(f"no ticket survives selection for {cfg.dataset_kind.value}")

    random.Random(cfg.seed).shuffle(examples)
    n_total = len(examples)
    n_train = math.floor(n_total * cfg.split_ratios[0])
    n_val = math.floor(n_total * cfg.split_ratios[1])
    return DatasetSplit(
        train=tuple(examples[:n_train]),
        val=tuple(examples[n_train : n_train + n_val]),
        test=tuple(examples[n_train + n_val :]),
        seed=cfg.seed,
        dropped=dropped,
    )


def update_frequency_report(
    corpus: Sequence[RawTicket], thresholds: Sequence[int]
) -> UpdateFrequencyReport:
    """Tabulate which update gets drawn at each length threshold.

    Percentages are over tickets that have an eligible update at that
    threshold; tickets with none are excluded from the denominator.
    """
    if not thresholds:
        raise ValueError("thresholds must be non-empty")
    # Clean every update once; thresholds only compare against the lengths.
    lengths = [[len(clean(u.description)) for u in t.updates] for t in corpus]
    rows = []
    eligible_counts = []
    for n in thresholds:
        counts = [0] * (_REPORT_BUCKETS + 1)
        eligible = 0
        for ticket_lengths in lengths:
            drawn = next((i for i, ln in enumerate(ticket_lengths, start=1) if ln >= n), None)
            if drawn is None:
                continue
            eligible += 1
            counts[min(drawn, _REPORT_BUCKETS + 1) - 1] += 1
        if eligible:
            rows.append(tuple(100.0 * c / eligible for c in counts))
        else:
            rows.append(tuple(0.0 for _ in counts))
        eligible_counts.append(eligible)
    return UpdateFrequencyReport(
        thresholds=tuple(thresholds), rows=tuple(rows), eligible=tuple(eligible_counts)
    )


def report_to_csv(report: UpdateFrequencyReport) -> str:
    """Render the report with one decimal place, like the published table."""
    lines = ["n,T1,T2,T3,T4,T5,others"]
    for n, row in zip(report.thresholds, report.rows):
        lines.append(f"{n}," + ",".join(f"{p:.1f}" for p in row))
    return "\n".join(lines) + "\n"


def _example_record(example: Example, registry: LabelRegistry) -> dict:
    return {
        "ticket_id": example.ticket_id,
        "text": example.input_text,
        "label": registry.name_of(example.label),
        "drawn_update": example.drawn_update_index,
        "author": example.author.value,
    }


def save_split(
    split: DatasetSplit,
    directory: str | Path,
    registry: LabelRegistry,
    cfg: SelectionConfig,
) -> None:
    """Persist a split as train/val/test.jsonl plus meta.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, examples in (("train", split.train), ("val", split.val), ("test", split.test)):
        with open(directory / f"{name}.jsonl", "w", encoding="utf-8") as handle:
            for example in examples:
                handle.write(json.dumps(_example_record(example, registry)) + "\n")
    meta = {
        "format_version": 1,
        "seed": split.seed,
        "dropped": split.dropped,
        "min_chars": cfg.min_chars,
        "dataset_kind": cfg.dataset_kind.value,
        "template": int(cfg.template),
        "split_ratios": list(cfg.split_ratios),
        "labels": list(registry.entries),
        "counts": {"train": len(split.train), "val": len(split.val), "test": len(split.test)},
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", "utf-8")


def _load_examples(path: Path, registry: LabelRegistry) -> tuple[Example, ...]:
    examples = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            examples.append(
                Example(
                    ticket_id=obj["ticket_id"],
                    input_text=obj["text"],
                    label=registry.id_of(obj["label"]),
                    drawn_update_index=int(obj["drawn_update"]),
                    author=Author.from_str(obj["author"]),
                )
            )
    return tuple(examples)


def load_split(directory: str | Path) -> tuple[DatasetSplit, dict, LabelRegistry]:
    """Load a persisted split; the registry is rebuilt from meta.json."""
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text("utf-8"))
    registry = LabelRegistry(entries=tuple(meta["labels"]))
    split = DatasetSplit(
        train=_load_examples(directory / "train.jsonl", registry),
        val=_load_examples(directory / "val.jsonl", registry),
        test=_load_examples(directory / "test.jsonl", registry),
        seed=int(meta.get("seed", 0)),
        dropped=int(meta.get("dropped", 0)),
    )
    return split, meta, registry
