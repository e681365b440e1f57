"""Pool-based active learning with least-confidence querying.

State lives in an immutable PoolState: labeled set L, unlabeled pool U, the
iteration counter, the current model M(i), and a generation counter that
invalidates query batches computed against an older pool (the queue-backed
oracle can be slow; a batch must not be applied after the pool moved on).

One al_step is the full cycle from the loop diagram: query the k
least-confident pool instances (or a seeded random control batch), ask the
oracle, move answered instances from U to L (abstentions stay), retrain
from scratch on the grown L, and evaluate on a fixed validation set.
Everything downstream of a seed is deterministic, so whole multi-round
trajectories reproduce exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from .errors import EmptyPool, InvalidBatchSize, StaleBatch, UnknownInstance

__all__ = [
    "LabeledInstance",
    "Oracle",
    "PoolInstance",
    "PoolState",
    "QueryBatch",
    "QueryItem",
    "RoundRecord",
    "SimulatedOracle",
    "al_step",
    "apply_labels",
    "query_least_confident",
    "query_random",
    "run_rounds",
]


@dataclass(frozen=True)
class PoolInstance:
    instance_id: str
    text: str


@dataclass(frozen=True)
class LabeledInstance:
    instance_id: str
    text: str
    label: int


@dataclass(frozen=True)
class PoolState:
    labeled: tuple[LabeledInstance, ...]
    unlabeled: tuple[PoolInstance, ...]
    iteration: int = 0
    artifact: object = None  # ClassifierArtifact once a model exists
    generation: int = 0

    def __post_init__(self) -> None:
        labeled_ids = {x.instance_id for x in self.labeled}
        unlabeled_ids = {x.instance_id for x in self.unlabeled}
        if len(labeled_ids) != len(self.labeled) or len(unlabeled_ids) != len(self.unlabeled):
            raise ValueError("duplicate instance ids in pool")
        if labeled_ids & unlabeled_ids:
            raise ValueError("labeled and unlabeled sets share instance ids")

    def labeled_pairs(self) -> list[tuple[str, int]]:
        return [(x.text, x.label) for x in self.labeled]


@dataclass(frozen=True)
class QueryItem:
    instance_id: str
    confidence: float  # max-label probability under the querying model
    predicted: int


@dataclass(frozen=True)
class QueryBatch:
    items: tuple[QueryItem, ...]
    k: int
    sampler: str
    generation: int = 0


class Oracle(Protocol):
    def label(self, instance_id: str) -> int | None:
        """A label id, or None to abstain (instance stays unlabeled)."""
        ...


@dataclass(frozen=True)
class SimulatedOracle:
    """Oracle backed by a held-out gold-label store; can abstain on request."""

    gold: Mapping[str, int]
    abstain: frozenset[str] = frozenset()

    def label(self, instance_id: str) -> int | None:
        if instance_id in self.abstain:
            return None
        return self.gold.get(instance_id)


# Trainer contract: (labeled pairs, iteration, previous artifact) -> artifact.
Trainer = Callable[[list[tuple[str, int]], int, object], object]


def _score_pool(artifact, pool: Sequence[PoolInstance]) -> list[QueryItem]:
    probs = artifact.predict_proba([x.text for x in pool])
    return [
        QueryItem(
            instance_id=x.instance_id,
            confidence=float(p.max()),
            predicted=int(p.argmax()),
        )
        for x, p in zip(pool, probs)
    ]


def query_least_confident(
    artifact, unlabeled: Sequence[PoolInstance], k: int, generation: int = 0
) -> QueryBatch:
    """The k pool instances whose top predicted probability is lowest.

    Ascending confidence; equal confidences break by instance id ascending.
    """
    if not unlabeled:
        raise EmptyPool("no unlabeled instances to query")
    if k < 1:
        raise InvalidBatchSize(f"batch size must be >= 1, got {k}")
    scored = _score_pool(artifact, unlabeled)
    scored.sort(key=lambda item: (item.confidence, item.instance_id))
    return QueryBatch(
        items=tuple(scored[:k]), k=k, sampler="least_confident", generation=generation
    )


def query_random(
    artifact, unlabeled: Sequence[PoolInstance], k: int, seed: int, generation: int = 0
) -> QueryBatch:
    """Seeded uniform control batch; confidences still come from the model."""
    if not unlabeled:
        raise EmptyPool("no unlabeled instances to query")
    if k < 1:
        raise InvalidBatchSize(f"batch size must be >= 1, got {k}")
    chosen = random.Random(seed).sample(range(len(unlabeled)), min(k, len(unlabeled)))
    subset = [unlabeled[i] for i in chosen]
    return QueryBatch(
        items=tuple(_score_pool(artifact, subset)), k=k, sampler="random", generation=generation
    )


def apply_labels(state: PoolState, batch: QueryBatch, oracle: Oracle) -> PoolState:
    """Move answered instances from U to L; abstentions stay in U."""
    if batch.generation != state.generation:
        raise StaleBatch(
            f"batch generation {batch.generation} != pool generation {state.generation}"
        )
    labeled_ids = {x.instance_id for x in state.labeled}
    unlabeled_by_id = {x.instance_id: x for x in state.unlabeled}
    for item in batch.items:
        if item.instance_id in labeled_ids:
            raise StaleBatch(f"instance {item.instance_id} is already labeled")
        if item.instance_id not in unlabeled_by_id:
            raise UnknownInstance(item.instance_id)

    answered: list[LabeledInstance] = []
    moved: set[str] = set()
    for item in batch.items:
        label = oracle.label(item.instance_id)
        if label is None:
            continue
        instance = unlabeled_by_id[item.instance_id]
        answered.append(
            LabeledInstance(instance_id=instance.instance_id, text=instance.text, label=label)
        )
        moved.add(instance.instance_id)
    return replace(
        state,
        labeled=state.labeled + tuple(answered),
        unlabeled=tuple(x for x in state.unlabeled if x.instance_id not in moved),
        generation=state.generation + 1,
    )


@dataclass(frozen=True)
class RoundRecord:
    iteration: int
    labeled: int
    queried: tuple[str, ...]
    sampler: str
    val_macro_f1: float | None
    artifact_path: str = ""

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "iteration": self.iteration,
                "labeled": self.labeled,
                "queried": list(self.queried),
                "sampler": self.sampler,
                "val_macro_f1": self.val_macro_f1,
                "artifact_path": self.artifact_path,
            }
        )


def _ensure_model(state: PoolState, trainer: Trainer) -> PoolState:
    if state.artifact is not None:
        return state
    if not state.labeled:
        raise EmptyPool("cannot bootstrap a model from an empty labeled set")
    artifact = trainer(state.labeled_pairs(), state.iteration, None)
    return replace(state, artifact=artifact)


def al_step(
    state: PoolState,
    trainer: Trainer,
    sampler: str,
    k: int,
    oracle: Oracle,
    val_examples: Sequence[tuple[str, int]] | None = None,
    seed: int = 0,
) -> tuple[PoolState, RoundRecord]:
    """One full cycle: query, ask the oracle, augment L, retrain, evaluate."""
    from .evalkit import evaluate  # local import: evalkit has no active dep

    state = _ensure_model(state, trainer)
    if sampler == "least_confident":
        batch = query_least_confident(state.artifact, state.unlabeled, k, state.generation)
    elif sampler == "random":
        batch = query_random(
            state.artifact, state.unlabeled, k, seed + state.iteration, state.generation
        )
    else:
        raise ValueError(f"sampler must be least_confident or random, got {sampler!r}")
    state = apply_labels(state, batch, oracle)
    artifact = trainer(state.labeled_pairs(), state.iteration + 1, state.artifact)
    state = replace(state, artifact=artifact, iteration=state.iteration + 1)
    val_f1 = None
    if val_examples is not None:
        val_f1 = evaluate(artifact, val_examples).macro_f1
    record = RoundRecord(
        iteration=state.iteration,
        labeled=len(state.labeled),
        queried=tuple(item.instance_id for item in batch.items),
        sampler=batch.sampler,
        val_macro_f1=val_f1,
    )
    return state, record


def run_rounds(
    state: PoolState,
    trainer: Trainer,
    sampler: str,
    k: int,
    oracle: Oracle,
    rounds: int,
    val_examples: Sequence[tuple[str, int]] | None = None,
    target_f1: float | None = None,
    seed: int = 0,
    log_path: str | Path | None = None,
    artifact_dir: str | Path | None = None,
) -> tuple[PoolState, list[RoundRecord]]:
    """Run AL rounds until the budget, an empty pool, or the F1 target.

    Optionally appends one JSONL record per round to ``log_path`` and saves
    ``artifact-{iteration}.json`` files under ``artifact_dir``.
    """
    from .artifacts import save_artifact

    records: list[RoundRecord] = []
    for _ in range(rounds):
        if not state.unlabeled:
            break
        state, record = al_step(state, trainer, sampler, k, oracle, val_examples, seed)
        if artifact_dir is not None:
            path = Path(artifact_dir) / f"artifact-{state.iteration}.json"
            save_artifact(state.artifact, path)
            record = replace(record, artifact_path=str(path))
        records.append(record)
        if log_path is not None:
            with open(log_path, "a", encoding="utf-8") as handle:
                handle.write(record.to_json_line() + "\n")
        if (
            target_f1 is not None
            and record.val_macro_f1 is not None
            and record.val_macro_f1 >= target_f1
        ):
            break
    return state, records
