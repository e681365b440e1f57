"""HTTP annotation service: prediction, human labeling queue, AL control.

State of record is a set of append-only journals in the data directory:

    labels.txt            label registry, one name per line
    tickets.jsonl         input corpus (labeled rows seed L0 and the
                          validation set; unlabeled rows form the pool)
    gold.jsonl            optional {"ticket_id", "label"} sidecar backing
                          the simulated oracle
    service.json          pinned config (training setup, oracle kind, seed)
    tasks.jsonl           annotation-task journal (created/resolved events)
    rounds.jsonl          one record per completed AL round
    artifact-{i}.json     model after round i
    metrics-{i}.json      validation EvalReport for model i

Every boot replays the journals, so killing the process at any point and
restarting reproduces /queue and /metrics exactly: training is
deterministic, partially-finished rounds are finished during replay, and
completed work is recognized by the files it already wrote.

An AL step with the queued oracle parks: it journals pending tasks and
returns immediately; the round completes inline when the last task is
resolved through POST /queue/{id}/label. The simulated oracle resolves the
same task records synchronously, so both paths leave identical journals.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping
from urllib.parse import parse_qs, urlparse

from .active import (
    LabeledInstance,
    PoolInstance,
    PoolState,
    QueryBatch,
    QueryItem,
    RoundRecord,
    apply_labels,
    query_least_confident,
    query_random,
)
from .artifacts import TrainConfig, load_artifact, save_artifact, train_artifact
from .builder import select_representative
from .corpus import LabelRegistry, default_registry, load_corpus, load_registry, save_registry
from .errors import (
    AlreadyResolved,
    EmptyDescription,
    EmptyPool,
    InvalidBatchSize,
    NoEligibleUpdate,
    NoModelLoaded,
    StepInProgress,
    TriageError,
    UnknownLabel,
    UnknownTask,
)
from .evalkit import EvalReport, evaluate
from .features import compose
from .preprocess import clean

__all__ = ["AnnotationTask", "ServiceConfig", "ServiceCore", "create_server"]

DEFAULT_K = 32

_STATUS_FOR = {
    NoModelLoaded: 409,
    StepInProgress: 409,
    AlreadyResolved: 409,
    EmptyPool: 409,
    UnknownTask: 404,
    EmptyDescription: 400,
    UnknownLabel: 400,
    InvalidBatchSize: 400,
}


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _error_payload(exc: Exception) -> tuple[int, dict]:
    status = _STATUS_FOR.get(type(exc), 400 if isinstance(exc, (TriageError, ValueError)) else 500)
    return status, {"error": type(exc).__name__, "detail": str(exc)}


@dataclass
class AnnotationTask:
    task_id: str
    instance_id: str
    round: int
    text: str
    raw_title: str
    raw_summary: str
    raw_description: str
    predicted: int
    predicted_name: str
    confidence: float
    sampler: str = "least_confident"
    status: str = "pending"  # pending | labeled | skipped
    label: int | None = None
    label_name: str | None = None
    note: str | None = None
    created_at: str = ""
    updated_at: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ServiceConfig:
    train: TrainConfig = TrainConfig()
    oracle: str = "queued"  # queued | simulated
    min_chars: int = 50
    val_fraction: float = 0.2
    seed: int = 0
    default_k: int = DEFAULT_K

    def __post_init__(self) -> None:
        if self.oracle not in ("queued", "simulated"):
            raise ValueError(f"oracle must be queued or simulated, got {self.oracle!r}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must be in [0, 1), got {self.val_fraction}")

    def to_dict(self) -> dict:
        return {
            "train": self.train.to_dict(),
            "oracle": self.oracle,
            "min_chars": self.min_chars,
            "val_fraction": self.val_fraction,
            "seed": self.seed,
            "default_k": self.default_k,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ServiceConfig":
        obj = dict(obj)
        obj["train"] = TrainConfig.from_dict(obj["train"])
        return cls(**obj)


class ServiceCore:
    """All endpoint logic, callable in-process; the HTTP layer is a shim.

    Every public method returns (http status, json payload).
    """

    def __init__(self, data_dir: str | Path, config: ServiceConfig | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._step_lock = threading.Lock()

        config_path = self.data_dir / "service.json"
        if config_path.exists():
            self.config = ServiceConfig.from_dict(json.loads(config_path.read_text("utf-8")))
        else:
            self.config = config or ServiceConfig()
            config_path.write_text(json.dumps(self.config.to_dict(), indent=2) + "\n", "utf-8")

        labels_path = self.data_dir / "labels.txt"
        if labels_path.exists():
            self.registry = load_registry(labels_path)
        else:
            self.registry = default_registry()
            save_registry(self.registry, labels_path)

        self._trainer_config = self.config.train
        self.tasks: dict[str, AnnotationTask] = {}
        self._task_order: list[str] = []
        self.round_records: list[RoundRecord] = []
        self._raw_by_instance: dict[str, dict] = {}
        self._gold: dict[str, int] = {}
        self.latest_report: EvalReport | None = None

        self._boot()

    # -- boot and journal replay -------------------------------------------

    def _boot(self) -> None:
        labeled, unlabeled = self._build_pool_instances()
        seed_set, self.val_examples = self._split_validation(labeled)
        self.state = PoolState(labeled=tuple(seed_set), unlabeled=tuple(unlabeled))

        gold_path = self.data_dir / "gold.jsonl"
        if gold_path.exists():
            for line in gold_path.read_text("utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    self._gold[obj["ticket_id"]] = self.registry.id_of(obj["label"])

        self._replay_tasks()
        completed = self._replay_rounds()

        artifact_path = self.data_dir / f"artifact-{self.state.iteration}.json"
        if artifact_path.exists():
            self.state = replace(self.state, artifact=load_artifact(artifact_path))
        elif self.state.labeled:
            artifact = self._train(self.state.labeled_pairs(), self.state.iteration, None)
            self.state = replace(self.state, artifact=artifact)
            save_artifact(artifact, artifact_path)
        self._load_or_compute_metrics()

        # A crash can leave the last round's tasks fully resolved but the
        # round itself uncommitted; finish it now (training is deterministic,
        # so this reproduces exactly what the dead process would have done).
        parked = self._parked_tasks(completed)
        if parked and all(t.status != "pending" for t in parked):
            self._complete_round(parked)

    def _build_pool_instances(self) -> tuple[list[LabeledInstance], list[PoolInstance]]:
        labeled: list[LabeledInstance] = []
        unlabeled: list[PoolInstance] = []
        tickets_path = self.data_dir / "tickets.jsonl"
        if not tickets_path.exists():
            return labeled, unlabeled
        for ticket in load_corpus(tickets_path, self.registry):
            try:
                index, cleaned = select_representative(ticket, self.config.min_chars)
            except NoEligibleUpdate:
                continue
            text = compose(
                clean(ticket.title).text,
                clean(ticket.summary).text,
                cleaned.text,
                self._trainer_config.template,
            )
            self._raw_by_instance[ticket.ticket_id] = {
                "title": ticket.title,
                "summary": ticket.summary,
                "description": ticket.updates[index - 1].description,
                "drawn_update": index,
            }
            if ticket.gold_label is not None:
                labeled.append(
                    LabeledInstance(instance_id=ticket.ticket_id, text=text, label=ticket.gold_label)
                )
            else:
                unlabeled.append(PoolInstance(instance_id=ticket.ticket_id, text=text))
        return labeled, unlabeled

    def _split_validation(
        self, labeled: list[LabeledInstance]
    ) -> tuple[list[LabeledInstance], list[tuple[str, int]]]:
        import random as _random

        order = list(range(len(labeled)))
        _random.Random(self.config.seed).shuffle(order)
        val_count = int(len(labeled) * self.config.val_fraction)
        val_idx = set(order[:val_count])
        seed_set = [x for i, x in enumerate(labeled) if i not in val_idx]
        val = [(labeled[i].text, labeled[i].label) for i in order[:val_count]]
        return seed_set, val

    def _replay_tasks(self) -> None:
        tasks_path = self.data_dir / "tasks.jsonl"
        if not tasks_path.exists():
            return
        for line in tasks_path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["event"] == "created":
                task = AnnotationTask(**event["task"])
                self.tasks[task.task_id] = task
                self._task_order.append(task.task_id)
            elif event["event"] == "resolved":
                task = self.tasks[event["task_id"]]
                task.status = event["status"]
                task.label = event["label"]
                task.label_name = (
                    self.registry.name_of(event["label"]) if event["label"] is not None else None
                )
                task.note = event.get("note")
                task.updated_at = event["updated_at"]

    def _replay_rounds(self) -> int:
        rounds_path = self.data_dir / "rounds.jsonl"
        completed = 0
        if not rounds_path.exists():
            return completed
        for line in rounds_path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            record = RoundRecord(
                iteration=obj["iteration"],
                labeled=obj["labeled"],
                queried=tuple(obj["queried"]),
                sampler=obj["sampler"],
                val_macro_f1=obj["val_macro_f1"],
                artifact_path=obj.get("artifact_path", ""),
            )
            round_tasks = [
                self.tasks[tid]
                for tid in self._task_order
                if self.tasks[tid].round == record.iteration
            ]
            batch = QueryBatch(
                items=tuple(
                    QueryItem(
                        instance_id=t.instance_id, confidence=t.confidence, predicted=t.predicted
                    )
                    for t in round_tasks
                ),
                k=len(round_tasks),
                sampler=record.sampler,
                generation=self.state.generation,
            )
            answers = {
                t.instance_id: (t.label if t.status == "labeled" else None) for t in round_tasks
            }
            self.state = apply_labels(self.state, batch, _MappingOracle(answers))
            self.state = replace(self.state, iteration=record.iteration)
            self.round_records.append(record)
            completed = record.iteration
        return completed

    def _parked_tasks(self, completed: int | None = None) -> list[AnnotationTask]:
        last = completed if completed is not None else (
            self.round_records[-1].iteration if self.round_records else 0
        )
        return [self.tasks[tid] for tid in self._task_order if self.tasks[tid].round > last]

    def _load_or_compute_metrics(self) -> None:
        metrics_path = self.data_dir / f"metrics-{self.state.iteration}.json"
        if metrics_path.exists():
            self.latest_report = EvalReport.from_dict(
                json.loads(metrics_path.read_text("utf-8"))["report"]
            )
        elif self.state.artifact is not None and self.val_examples:
            self.latest_report = evaluate(self.state.artifact, self.val_examples)
            self._write_metrics(self.state.iteration, self.latest_report)

    # -- shared plumbing ----------------------------------------------------

    def _train(self, pairs, iteration, warm_from):
        return train_artifact(
            pairs, self._trainer_config, self.registry, iteration=iteration, warm_from=warm_from
        )

    def _append(self, name: str, obj: dict) -> None:
        with open(self.data_dir / name, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(obj) + "\n")

    def _write_metrics(self, iteration: int, report: EvalReport) -> None:
        payload = {"iteration": iteration, "report": report.to_dict()}
        (self.data_dir / f"metrics-{iteration}.json").write_text(
            json.dumps(payload, indent=2) + "\n", "utf-8"
        )

    def _complete_round(self, round_tasks: list[AnnotationTask]) -> RoundRecord:
        """Apply resolved labels, retrain, persist; call with lock held."""
        batch = QueryBatch(
            items=tuple(
                QueryItem(instance_id=t.instance_id, confidence=t.confidence, predicted=t.predicted)
                for t in round_tasks
            ),
            k=len(round_tasks),
            sampler="least_confident",
            generation=self.state.generation,
        )
        answers = {
            t.instance_id: (t.label if t.status == "labeled" else None) for t in round_tasks
        }
        state = apply_labels(self.state, batch, _MappingOracle(answers))
        iteration = state.iteration + 1
        artifact = self._train(state.labeled_pairs(), iteration, state.artifact)
        state = replace(state, artifact=artifact, iteration=iteration)
        save_artifact(artifact, self.data_dir / f"artifact-{iteration}.json")
        val_f1 = None
        if self.val_examples:
            report = evaluate(artifact, self.val_examples)
            self._write_metrics(iteration, report)
            self.latest_report = report
            val_f1 = report.macro_f1
        record = RoundRecord(
            iteration=iteration,
            labeled=len(state.labeled),
            queried=tuple(t.instance_id for t in round_tasks),
            sampler=round_tasks[0].sampler,
            val_macro_f1=val_f1,
            artifact_path=str(self.data_dir / f"artifact-{iteration}.json"),
        )
        self._append("rounds.jsonl", json.loads(record.to_json_line()))
        self.state = state
        self.round_records.append(record)
        return record

    # -- endpoints -----------------------------------------------------------

    def predict(self, body: dict) -> tuple[int, dict]:
        with self._lock:
            artifact = self.state.artifact
            if artifact is None:
                return _error_payload(NoModelLoaded("no trained model is loaded"))
            try:
                template = body.get("template", int(artifact.template))
                text = compose(
                    clean(body.get("title", "")).text,
                    clean(body.get("summary", "")).text,
                    clean(body.get("description", "")).text,
                    template,
                )
            except (TriageError, ValueError) as exc:
                return _error_payload(exc)
            probs = artifact.predict_proba([text])[0]
            top = int(probs.argmax())
            return 200, {
                "label": self.registry.name_of(top),
                "label_id": top,
                "probabilities": {
                    self.registry.name_of(k): float(p) for k, p in enumerate(probs)
                },
                "iteration": artifact.iteration,
            }

    def queue(self, status: str = "pending") -> tuple[int, dict]:
        with self._lock:
            tasks = [self.tasks[tid] for tid in self._task_order]
            if status != "all":
                tasks = [t for t in tasks if t.status == status]
            tasks.sort(key=lambda t: (t.confidence, t.task_id))
            return 200, {"tasks": [t.to_dict() for t in tasks]}

    def submit_label(self, task_id: str, body: dict) -> tuple[int, dict]:
        with self._lock:
            task = self.tasks.get(task_id)
            if task is None:
                return _error_payload(UnknownTask(task_id))
            if task.status != "pending":
                return _error_payload(AlreadyResolved(f"{task_id} is {task.status}"))
            note = body.get("note")
            if body.get("skip"):
                status, label_id = "skipped", None
            else:
                name = body.get("label")
                if not isinstance(name, str) or name not in self.registry:
                    return _error_payload(UnknownLabel(str(name)))
                status, label_id = "labeled", self.registry.id_of(name)
            task.status = status
            task.label = label_id
            task.label_name = self.registry.name_of(label_id) if label_id is not None else None
            task.note = note
            task.updated_at = _now()
            self._append(
                "tasks.jsonl",
                {
                    "event": "resolved",
                    "task_id": task_id,
                    "status": status,
                    "label": label_id,
                    "note": note,
                    "updated_at": task.updated_at,
                },
            )
            round_done = None
            parked = self._parked_tasks()
            if parked and all(t.status != "pending" for t in parked):
                round_done = self._complete_round(parked)
            payload = {"task": task.to_dict()}
            if round_done is not None:
                payload["round_completed"] = {
                    "iteration": round_done.iteration,
                    "labeled": round_done.labeled,
                    "val_macro_f1": round_done.val_macro_f1,
                }
            return 200, payload

    def al_step(self, body: dict) -> tuple[int, dict]:
        if not self._step_lock.acquire(blocking=False):
            return _error_payload(StepInProgress("another step is executing"))
        try:
            with self._lock:
                if any(t.status == "pending" for t in self._parked_tasks()):
                    return _error_payload(
                        StepInProgress("a queued round is awaiting annotations")
                    )
                if self.state.artifact is None:
                    return _error_payload(
                        NoModelLoaded("no model; seed the pool with labeled tickets")
                    )
                sampler = str(body.get("sampler", "lc"))
                sampler = {"lc": "least_confident"}.get(sampler, sampler)
                k = int(body.get("k", self.config.default_k))
                try:
                    if sampler == "least_confident":
                        batch = query_least_confident(
                            self.state.artifact, self.state.unlabeled, k, self.state.generation
                        )
                    elif sampler == "random":
                        batch = query_random(
                            self.state.artifact,
                            self.state.unlabeled,
                            k,
                            self.config.seed + self.state.iteration,
                            self.state.generation,
                        )
                    else:
                        raise ValueError(f"unknown sampler {sampler!r}")
                except (TriageError, ValueError) as exc:
                    return _error_payload(exc)
                round_number = self.state.iteration + 1
                created = self._create_tasks(batch, round_number)
                if self.config.oracle == "simulated":
                    for task in created:
                        gold = self._gold.get(task.instance_id)
                        self._resolve_inline(task, gold)
                    record = self._complete_round(created)
                    return 200, {
                        "status": "completed",
                        "iteration": record.iteration,
                        "labeled": record.labeled,
                        "val_macro_f1": record.val_macro_f1,
                        "sampler": batch.sampler,
                        "queried": len(created),
                    }
                return 200, {
                    "status": "awaiting_annotations",
                    "round": round_number,
                    "sampler": batch.sampler,
                    "task_count": len(created),
                }
        finally:
            self._step_lock.release()

    def _create_tasks(self, batch: QueryBatch, round_number: int) -> list[AnnotationTask]:
        created = []
        for seq, item in enumerate(batch.items):
            raw = self._raw_by_instance.get(item.instance_id, {})
            text = next(
                (x.text for x in self.state.unlabeled if x.instance_id == item.instance_id), ""
            )
            task = AnnotationTask(
                task_id=f"task-{round_number:04d}-{seq:03d}",
                instance_id=item.instance_id,
                round=round_number,
                text=text,
                raw_title=raw.get("title", ""),
                raw_summary=raw.get("summary", ""),
                raw_description=raw.get("description", ""),
                predicted=item.predicted,
                predicted_name=self.registry.name_of(item.predicted),
                confidence=item.confidence,
                sampler=batch.sampler,
                created_at=_now(),
                updated_at=_now(),
            )
            self.tasks[task.task_id] = task
            self._task_order.append(task.task_id)
            self._append("tasks.jsonl", {"event": "created", "task": task.to_dict()})
            created.append(task)
        return created

    def _resolve_inline(self, task: AnnotationTask, label: int | None) -> None:
        task.status = "labeled" if label is not None else "skipped"
        task.label = label
        task.label_name = self.registry.name_of(label) if label is not None else None
        task.note = None if label is not None else "no gold label; simulated oracle abstained"
        task.updated_at = _now()
        self._append(
            "tasks.jsonl",
            {
                "event": "resolved",
                "task_id": task.task_id,
                "status": task.status,
                "label": task.label,
                "note": task.note,
                "updated_at": task.updated_at,
            },
        )

    def metrics(self) -> tuple[int, dict]:
        with self._lock:
            if self.latest_report is None:
                return 404, {"error": "NoMetrics", "detail": "no evaluation has run yet"}
            return 200, {
                "iteration": self.state.iteration,
                "report": self.latest_report.to_dict(),
            }

    def labels(self) -> tuple[int, dict]:
        return 200, {
            "labels": [{"id": i, "name": n} for i, n in enumerate(self.registry.entries)],
            "frozen_at": self.registry.frozen_at,
        }

    def health(self) -> tuple[int, dict]:
        with self._lock:
            has_model = self.state.artifact is not None
            return 200, {
                "status": "ok" if has_model else "no_model",
                "iteration": self.state.iteration if has_model else None,
                "labeled": len(self.state.labeled),
                "unlabeled": len(self.state.unlabeled),
                "pending_tasks": sum(1 for t in self.tasks.values() if t.status == "pending"),
            }

    def rounds(self) -> tuple[int, dict]:
        with self._lock:
            return 200, {
                "rounds": [json.loads(r.to_json_line()) for r in self.round_records]
            }


class _MappingOracle:
    def __init__(self, answers: Mapping[str, int | None]):
        self._answers = answers

    def label(self, instance_id: str) -> int | None:
        return self._answers.get(instance_id)


# -- HTTP layer --------------------------------------------------------------

_TASK_LABEL_RE = re.compile(r"^/queue/([^/]+)/label$")


def create_server(
    core: ServiceCore, host: str = "127.0.0.1", port: int = 8321, static_dir: str | Path | None = None
) -> ThreadingHTTPServer:
    """Bind the core to a threading HTTP server (call serve_forever on it)."""
    static_root = Path(static_dir).resolve() if static_dir else None

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet by default; tests parse stdout
            pass

        def _send(self, status: int, payload: dict | list | bytes, content_type="application/json"):
            body = (
                payload
                if isinstance(payload, bytes)
                else json.dumps(payload).encode("utf-8")
            )
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict | None:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b"{}"
            try:
                body = json.loads(raw or b"{}")
            except json.JSONDecodeError:
                return None
            return body if isinstance(body, dict) else None

        def do_OPTIONS(self):
            self._send(204, b"", content_type="text/plain")

        def do_GET(self):
            url = urlparse(self.path)
            if url.path == "/health":
                self._send(*core.health())
            elif url.path == "/labels":
                self._send(*core.labels())
            elif url.path == "/metrics":
                self._send(*core.metrics())
            elif url.path == "/rounds":
                self._send(*core.rounds())
            elif url.path == "/queue":
                status = parse_qs(url.query).get("status", ["pending"])[0]
                self._send(*core.queue(status))
            elif static_root is not None:
                self._send_static(url.path)
            else:
                self._send(404, {"error": "NotFound", "detail": url.path})

        def _send_static(self, path: str):
            rel = path.lstrip("/") or "index.html"
            target = (static_root / rel).resolve()
            if not str(target).startswith(str(static_root)) or not target.is_file():
                self._send(404, {"error": "NotFound", "detail": path})
                return
            types = {
                ".html": "text/html; charset=utf-8",
                ".js": "text/javascript; charset=utf-8",
                ".css": "text/css; charset=utf-8",
                ".json": "application/json",
                ".svg": "image/svg+xml",
            }
            self._send(200, target.read_bytes(), types.get(target.suffix, "application/octet-stream"))

        def do_POST(self):
            body = self._read_body()
            if body is None:
                self._send(400, {"error": "MalformedRecord", "detail": "body must be a JSON object"})
                return
            url = urlparse(self.path)
            match = _TASK_LABEL_RE.match(url.path)
            if url.path == "/predict":
                self._send(*core.predict(body))
            elif url.path == "/al/step":
                self._send(*core.al_step(body))
            elif match:
                self._send(*core.submit_label(match.group(1), body))
            else:
                self._send(404, {"error": "NotFound", "detail": url.path})

    return ThreadingHTTPServer((host, port), Handler)
