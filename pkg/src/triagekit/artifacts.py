"""Trained-model artifacts: one JSON file, loadable anywhere, bit-stable.

An artifact bundles everything prediction needs: the model parameters, the
vocabulary (bag models) or encoder backend spec (MLP), the prompt template
the training texts were composed with, the label registry snapshot, the
active-learning iteration that produced it, and a fingerprint of the
training configuration plus data.

Parameters are stored as base64 little-endian float64 blocks and the JSON
is dumped with sorted keys and fixed separators, so identical training
inputs produce byte-identical files.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import (
    LrConfig,
    LrSchedule,
    MlpHead,
    NaiveBayesModel,
    OvRLogisticModel,
    init_mlp_head,
    lr_predict_matrix,
    lr_train,
    mlp_predict_matrix,
    mlp_train,
    nb_predict_matrix,
    nb_train,
)
from .corpus import LabelRegistry
from .errors import CorruptArtifact, IncompatibleVersion
from .features import (
    FeatureKind,
    Template,
    Vocabulary,
    bow_encode,
    build_vocabulary,
    encode_matrix,
    tfidf_encode,
    to_dense,
)
from .backends import resolve_backend
from .preprocess import tokenize_for_bag

__all__ = [
    "ClassifierArtifact",
    "FORMAT_VERSION",
    "TrainConfig",
    "artifact_bytes",
    "load_artifact",
    "save_artifact",
    "train_artifact",
]

FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run besides the data."""

    model: str = "nb"  # nb | lr | mlp
    features: FeatureKind = FeatureKind.BOW  # bag models only
    template: Template = Template.DESCRIPTION
    vocab_cap: int = 1024
    alpha: float = 1.0
    lr: LrConfig = LrConfig()
    hidden: int = 256
    schedule: LrSchedule = LrSchedule()
    batch_size: int = 16
    epochs: int = 12
    backend: str = "hashing:256"
    seed: int = 0
    warm_start: bool = False
    # Reserved: full encoder fine-tuning needs a gradient-capable backend.
    full_finetune: bool = False

    def __post_init__(self) -> None:
        if self.model not in ("nb", "lr", "mlp"):
            raise ValueError(f"model must be nb, lr, or mlp, got {self.model!r}")
        object.__setattr__(self, "features", FeatureKind(self.features))
        object.__setattr__(self, "template", Template(self.template))
        if self.full_finetune:
            raise NotImplementedError(
                "full encoder fine-tuning requires a gradient-capable external backend"
            )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["features"] = self.features.value
        out["template"] = int(self.template)
        out["schedule"]["boundaries"] = list(self.schedule.boundaries)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        obj["lr"] = LrConfig(**obj["lr"])
        schedule = dict(obj["schedule"])
        schedule["boundaries"] = tuple(schedule["boundaries"])
        obj["schedule"] = LrSchedule(**schedule)
        return cls(**obj)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _fingerprint(config: TrainConfig, examples: Sequence[tuple[str, int]]) -> str:
    data_digest = hashlib.sha256()
    for text, label in examples:
        data_digest.update(f"{label}\t{text}\n".encode("utf-8"))
    body = _canonical({"config": config.to_dict(), "data": data_digest.hexdigest()})
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ClassifierArtifact:
    kind: str
    model: NaiveBayesModel | OvRLogisticModel | MlpHead
    config: TrainConfig
    registry: LabelRegistry
    iteration: int
    fingerprint: str
    vocab: Vocabulary | None = None
    format_version: int = FORMAT_VERSION
    _backend: object = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        backend = resolve_backend(self.config.backend) if self.kind == "mlp" else None
        object.__setattr__(self, "_backend", backend)

    @property
    def n_classes(self) -> int:
        return len(self.registry)

    @property
    def template(self) -> Template:
        return self.config.template

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        """Per-class probabilities for composed, cleaned input texts."""
        if self.kind == "mlp":
            embedded = self._backend.embed_batch(list(texts))
            return mlp_predict_matrix(self.model, embedded)
        X = encode_matrix(texts, self.vocab, self.config.features)
        if self.kind == "nb":
            return nb_predict_matrix(self.model, X)
        return lr_predict_matrix(self.model, X)

    def predict(self, texts: Sequence[str]) -> list[int]:
        return [int(i) for i in self.predict_proba(texts).argmax(axis=1)]


def train_artifact(
    examples: Sequence[tuple[str, int]],
    config: TrainConfig,
    registry: LabelRegistry,
    iteration: int = 0,
    warm_from: ClassifierArtifact | None = None,
) -> ClassifierArtifact:
    """Train one model on (composed text, label id) pairs.

    ``warm_from`` only applies to the MLP head with ``config.warm_start``;
    everything else retrains from scratch. Identical (examples, config,
    registry) always yield an identical artifact.
    """
    n_classes = len(registry)
    fingerprint = _fingerprint(config, examples)
    if config.model == "mlp":
        backend = resolve_backend(config.backend)
        if (
            config.warm_start
            and warm_from is not None
            and warm_from.kind == "mlp"
            and warm_from.model.input_dim == backend.dim
            and warm_from.model.n_classes == n_classes
        ):
            head = warm_from.model
        else:
            head = init_mlp_head(backend.dim, n_classes, hidden=config.hidden, seed=config.seed)
        model = mlp_train(
            head,
            backend,
            examples,
            schedule=config.schedule,
            batch_size=config.batch_size,
            epochs=config.epochs,
            seed=config.seed,
        )
        vocab = None
    else:
        docs = [tokenize_for_bag(text) for text, _ in examples]
        vocab = build_vocabulary(docs, cap=config.vocab_cap)
        encode = bow_encode if config.features is FeatureKind.BOW else tfidf_encode
        rows = [(to_dense(encode(doc, vocab), len(vocab)), label) for doc, (_, label) in zip(docs, examples)]
        if config.model == "nb":
            model = nb_train(rows, n_classes, dim=len(vocab), alpha=config.alpha)
        else:
            model = lr_train(rows, n_classes, dim=len(vocab), config=config.lr)
    return ClassifierArtifact(
        kind=config.model,
        model=model,
        config=config,
        registry=registry,
        iteration=iteration,
        fingerprint=fingerprint,
        vocab=vocab,
    )


def _encode_array(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"].encode("ascii"), validate=True)
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    expected = int(np.prod(obj["shape"])) if obj["shape"] else 1
    if arr.size != expected:
        raise ValueError(f"parameter block has {arr.size} values, shape wants {expected}")
    return arr.reshape(obj["shape"])


def _model_params(artifact: ClassifierArtifact) -> dict:
    model = artifact.model
    if artifact.kind == "nb":
        return {
            "class_log_prior": _encode_array(model.class_log_prior),
            "feature_log_prob": _encode_array(model.feature_log_prob),
            "alpha": model.alpha,
        }
    if artifact.kind == "lr":
        return {
            "weights": _encode_array(model.weights),
            "bias": _encode_array(model.bias),
        }
    return {
        "w1": _encode_array(model.w1),
        "b1": _encode_array(model.b1),
        "w2": _encode_array(model.w2),
        "b2": _encode_array(model.b2),
    }


def artifact_bytes(artifact: ClassifierArtifact) -> bytes:
    """Canonical serialized form; equal artifacts give equal bytes."""
    doc = {
        "format_version": artifact.format_version,
        "kind": artifact.kind,
        "iteration": artifact.iteration,
        "fingerprint": artifact.fingerprint,
        "config": artifact.config.to_dict(),
        "registry": {
            "labels": list(artifact.registry.entries),
            "frozen_at": artifact.registry.frozen_at,
        },
        "vocab": artifact.vocab.to_dict() if artifact.vocab is not None else None,
        "params": _model_params(artifact),
    }
    return (_canonical(doc) + "\n").encode("utf-8")


def save_artifact(artifact: ClassifierArtifact, path: str | Path) -> None:
    Path(path).write_bytes(artifact_bytes(artifact))


def _rebuild_model(kind: str, params: dict, config: TrainConfig):
    if kind == "nb":
        return NaiveBayesModel(
            class_log_prior=_decode_array(params["class_log_prior"]),
            feature_log_prob=_decode_array(params["feature_log_prob"]),
            alpha=float(params["alpha"]),
        )
    if kind == "lr":
        return OvRLogisticModel(
            weights=_decode_array(params["weights"]),
            bias=_decode_array(params["bias"]),
            config=config.lr,
        )
    return MlpHead(
        w1=_decode_array(params["w1"]),
        b1=_decode_array(params["b1"]),
        w2=_decode_array(params["w2"]),
        b2=_decode_array(params["b2"]),
    )


def load_artifact(path: str | Path) -> ClassifierArtifact:
    """Load an artifact; predictions match the saved model bit for bit."""
    try:
        doc = json.loads(Path(path).read_bytes().decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptArtifact(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptArtifact(f"{path}: not a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise IncompatibleVersion(f"{path}: format_version {version}, expected {FORMAT_VERSION}")
    try:
        config = TrainConfig.from_dict(doc["config"])
        registry = LabelRegistry(
            entries=tuple(doc["registry"]["labels"]),
            frozen_at=int(doc["registry"]["frozen_at"]),
        )
        vocab = Vocabulary.from_dict(doc["vocab"]) if doc["vocab"] is not None else None
        model = _rebuild_model(doc["kind"], doc["params"], config)
        return ClassifierArtifact(
            kind=doc["kind"],
            model=model,
            config=config,
            registry=registry,
            iteration=int(doc["iteration"]),
            fingerprint=doc["fingerprint"],
            vocab=vocab,
        )
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        raise CorruptArtifact(f"{path}: {exc}") from exc
