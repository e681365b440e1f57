"""Incident ticket labeling: cleaning, baselines, prompt-prefix MLP, active learning."""

from .active import (
    LabeledInstance,
    PoolInstance,
    PoolState,
    QueryBatch,
    QueryItem,
    RoundRecord,
    SimulatedOracle,
    apply_labels,
    query_least_confident,
    query_random,
    run_rounds,
)
from .artifacts import ClassifierArtifact, TrainConfig, load_artifact, save_artifact, train_artifact
from .backends import ExternalBackend, HashingBackend, backend_spec, resolve_backend
from .builder import (
    DatasetKind,
    DatasetSplit,
    Example,
    SelectionConfig,
    build_dataset,
    load_split,
    save_split,
    select_representative,
    update_frequency_report,
)
from .classifiers import LrConfig, LrSchedule, MlpHead, init_mlp_head, mlp_train
from .corpus import (
    DEFAULT_LABELS,
    Author,
    LabelRegistry,
    RawTicket,
    TicketUpdate,
    default_registry,
    extend_registry,
    load_corpus,
    load_registry,
    save_corpus,
    save_registry,
)
from .errors import TriageError
from .evalkit import EvalReport, evaluate, macro_prf, roc_auc_ovr
from .features import FeatureKind, Template, Vocabulary, bow_encode, build_vocabulary, compose, tfidf_encode
from .preprocess import CleanText, clean, is_short, tokenize_for_bag
from .service import ServiceConfig, ServiceCore, create_server
from .synthgen import SignalPlacement, SynthConfig, generate

__version__ = "0.1.0"
