"""Command line interface.

Exit codes: 0 success, 1 validation error (bad flags, bad config file,
malformed input data), 2 runtime error (unreadable files, unreachable
encoder backend, corrupt artifacts).

Every subcommand accepts --config pointing at a JSON object whose keys
mirror the long flag names (dashes as underscores). Unknown keys are
rejected by name. Explicit flags win over config file values, which win
over built-in defaults. --seed fully determines all randomized output.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

from .active import LabeledInstance, PoolInstance, PoolState, SimulatedOracle, run_rounds
from .artifacts import TrainConfig, load_artifact, save_artifact, train_artifact
from .builder import (
    DatasetKind,
    SelectionConfig,
    build_dataset,
    load_split,
    report_to_csv,
    save_split,
    select_representative,
    update_frequency_report,
)
from .classifiers import LrConfig, LrSchedule
from .corpus import (
    LabelRegistry,
    default_registry,
    load_corpus,
    load_registry,
    save_corpus,
    save_registry,
)
from .errors import (
    BackendTimeout,
    BackendUnreachable,
    CorruptArtifact,
    IncompatibleVersion,
    TriageError,
)
from .evalkit import evaluate, report_csv
from .features import FeatureKind, Template, compose
from .preprocess import clean, is_short
from .service import ServiceConfig, ServiceCore, create_server
from .synthgen import SignalPlacement, SynthConfig, generate

_RUNTIME_ERRORS = (
    BackendUnreachable,
    BackendTimeout,
    CorruptArtifact,
    IncompatibleVersion,
    OSError,
)


class _ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits 2; we want 1
        raise _ValidationError(message)


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with defaults for this subcommand")


def _merge(args: argparse.Namespace, defaults: dict) -> SimpleNamespace:
    """Resolve each option: explicit flag > config file > default."""
    from_file: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise _ValidationError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise _ValidationError("config file must hold a JSON object")
        for key in loaded:
            if key not in defaults:
                raise _ValidationError(f"unknown config key {key!r}")
        from_file = loaded
    merged = {}
    for key, default in defaults.items():
        explicit = getattr(args, key, None)
        merged[key] = explicit if explicit is not None else from_file.get(key, default)
    return SimpleNamespace(**merged)


def _registry_for(path: str | None) -> LabelRegistry:
    return load_registry(path) if path else default_registry()


def _parse_ratios(raw: str) -> tuple[float, float, float]:
    parts = [float(x) for x in raw.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated ratios, got {raw!r}")
    return parts[0], parts[1], parts[2]


def _train_config(opts: SimpleNamespace) -> TrainConfig:
    return TrainConfig(
        model=opts.model,
        features=FeatureKind(opts.features),
        template=Template(int(opts.template)),
        vocab_cap=int(opts.vocab_cap),
        alpha=float(opts.alpha),
        lr=LrConfig(lr=float(opts.lr_rate), epochs=int(opts.lr_epochs), l2=float(opts.l2)),
        hidden=int(opts.hidden),
        schedule=LrSchedule(base_lr=float(opts.base_lr)),
        batch_size=int(opts.batch_size),
        epochs=int(opts.epochs),
        backend=opts.backend,
        seed=int(opts.seed),
    )


_TRAIN_DEFAULTS = {
    "model": "nb",
    "features": "bow",
    "template": 1,
    "vocab_cap": 1024,
    "alpha": 1.0,
    "lr_rate": 0.5,
    "lr_epochs": 200,
    "l2": 1e-4,
    "hidden": 256,
    "base_lr": 1e-4,
    "batch_size": 16,
    "epochs": 12,
    "backend": "hashing:256",
    "seed": 0,
}


def _add_train_flags(parser: argparse.ArgumentParser, with_template: bool = True) -> None:
    parser.add_argument("--model", choices=["nb", "lr", "mlp"])
    parser.add_argument("--features", choices=["bow", "tfidf"])
    if with_template:
        parser.add_argument("--template", type=int, choices=[1, 2, 3])
    parser.add_argument("--vocab-cap", type=int, dest="vocab_cap")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--lr-rate", type=float, dest="lr_rate")
    parser.add_argument("--lr-epochs", type=int, dest="lr_epochs")
    parser.add_argument("--l2", type=float)
    parser.add_argument("--hidden", type=int)
    parser.add_argument("--base-lr", type=float, dest="base_lr")
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--backend")
    parser.add_argument("--seed", type=int)


# -- subcommands --------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    defaults = {
        "out": None,
        "count": 2000,
        "labels": 10,
        "machine_fraction": 0.3,
        "short_first_prob": 0.7,
        "placement": "description",
        "noise": 0.0,
        "keep_labels": None,
        "seed": 0,
    }
    opts = _merge(args, defaults)
    if not opts.out:
        raise _ValidationError("--out is required")
    placement = SignalPlacement(opts.placement)
    cfg = SynthConfig(
        ticket_count=int(opts.count),
        label_count=int(opts.labels),
        machine_fraction=float(opts.machine_fraction),
        short_first_update_prob=float(opts.short_first_prob),
        signal_placement=placement,
        noise_token_rate=float(opts.noise),
        seed=int(opts.seed),
    )
    registry = LabelRegistry(tuple(default_registry().entries[: cfg.label_count]))
    tickets = generate(cfg, registry)

    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)
    hidden_gold: list[tuple[str, int]] = []
    if opts.keep_labels is not None:
        keep = int(opts.keep_labels)
        visible = []
        for i, ticket in enumerate(tickets):
            if i < keep:
                visible.append(ticket)
            else:
                hidden_gold.append((ticket.ticket_id, ticket.gold_label))
                visible.append(replace(ticket, gold_label=None))
        tickets = visible
    save_corpus(tickets, out / "tickets.jsonl", registry)
    save_registry(registry, out / "labels.txt")
    if hidden_gold:
        with open(out / "gold.jsonl", "w", encoding="utf-8") as handle:
            for ticket_id, label in hidden_gold:
                handle.write(
                    json.dumps({"ticket_id": ticket_id, "label": registry.name_of(label)}) + "\n"
                )
    print(
        json.dumps(
            {
                "tickets": len(tickets),
                "labels": cfg.label_count,
                "hidden": len(hidden_gold),
                "out": str(out),
            }
        )
    )
    return 0


def cmd_clean(args: argparse.Namespace) -> int:
    if args.text is not None:
        raw = args.text
    elif getattr(args, "infile", None):
        raw = Path(args.infile).read_text("utf-8")
    else:
        raw = sys.stdin.read()
    result = clean(raw)
    if args.counts:
        print(
            json.dumps(
                {
                    "text": result.text,
                    "short": is_short(result, 30),
                    "removed": {
                        "code_blocks": result.removed.code_blocks,
                        "tables": result.removed.tables,
                        "html_tags": result.removed.html_tags,
                        "urls": result.removed.urls,
                        "braces": result.removed.braces,
                    },
                }
            )
        )
    else:
        print(result.text)
    return 0


def cmd_report_updates(args: argparse.Namespace) -> int:
    defaults = {"corpus": None, "labels": None, "thresholds": "10,20,50,100,200", "out": None}
    opts = _merge(args, defaults)
    if not opts.corpus:
        raise _ValidationError("--corpus is required")
    registry = _registry_for(opts.labels)
    tickets = load_corpus(opts.corpus, registry)
    thresholds = tuple(int(x) for x in str(opts.thresholds).split(","))
    report = update_frequency_report(tickets, thresholds)
    csv_text = report_to_csv(report)
    if opts.out:
        Path(opts.out).parent.mkdir(parents=True, exist_ok=True)
        Path(opts.out).write_text(csv_text, "utf-8")
    else:
        print(csv_text, end="")
    return 0


def cmd_build(args: argparse.Namespace) -> int:
    defaults = {
        "corpus": None,
        "labels": None,
        "out": None,
        "kind": "mixture",
        "template": 1,
        "min_chars": 50,
        "ratios": "0.72,0.08,0.20",
        "seed": 0,
    }
    opts = _merge(args, defaults)
    if not opts.corpus or not opts.out:
        raise _ValidationError("--corpus and --out are required")
    registry = _registry_for(opts.labels)
    tickets = load_corpus(opts.corpus, registry)
    config = SelectionConfig(
        min_chars=int(opts.min_chars),
        dataset_kind=DatasetKind(opts.kind),
        template=Template(int(opts.template)),
        split_ratios=_parse_ratios(str(opts.ratios)),
        seed=int(opts.seed),
    )
    split = build_dataset(tickets, config, registry)
    save_split(split, opts.out, registry, config)
    print(
        json.dumps(
            {
                "train": len(split.train),
                "val": len(split.val),
                "test": len(split.test),
                "dropped": split.dropped,
                "out": str(opts.out),
            }
        )
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    defaults = dict(_TRAIN_DEFAULTS)
    defaults.update({"split": None, "out": None})
    del defaults["template"]  # the split's meta.json pins the template
    opts = _merge(args, defaults)
    if not opts.split or not opts.out:
        raise _ValidationError("--split and --out are required")
    split, meta, registry = load_split(opts.split)
    opts.template = meta["template"]
    config = _train_config(opts)
    train_pairs = [(ex.input_text, ex.label) for ex in split.train]
    artifact = train_artifact(train_pairs, config, registry)
    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)
    save_artifact(artifact, out / "artifact.json")
    summary = {"out": str(out / "artifact.json"), "train_examples": len(train_pairs)}
    if split.val:
        report = evaluate(artifact, [(ex.input_text, ex.label) for ex in split.val])
        (out / "report-val.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", "utf-8")
        (out / "report-val.csv").write_text(report_csv(report, registry.entries), "utf-8")
        summary["val_macro_f1"] = round(report.macro_f1, 4)
    print(json.dumps(summary))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    defaults = {"artifact": None, "split": None, "subset": "test", "out": None}
    opts = _merge(args, defaults)
    if not opts.artifact or not opts.split:
        raise _ValidationError("--artifact and --split are required")
    artifact = load_artifact(opts.artifact)
    split, _, registry = load_split(opts.split)
    examples = {"train": split.train, "val": split.val, "test": split.test}[opts.subset]
    report = evaluate(artifact, [(ex.input_text, ex.label) for ex in examples])
    payload = json.dumps(report.to_dict(), indent=2) + "\n"
    csv_text = report_csv(report, registry.entries)
    if opts.out:
        out = Path(opts.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"report-{opts.subset}.json").write_text(payload, "utf-8")
        (out / f"report-{opts.subset}.csv").write_text(csv_text, "utf-8")
    print(
        json.dumps(
            {
                "subset": opts.subset,
                "count": report.count,
                "macro_f1": round(report.macro_f1, 4),
                "macro_auc": None if report.macro_auc is None else round(report.macro_auc, 4),
            }
        )
    )
    return 0


def cmd_al_run(args: argparse.Namespace) -> int:
    defaults = dict(_TRAIN_DEFAULTS)
    defaults.update(
        {
            "corpus": None,
            "labels": None,
            "out": None,
            "sampler": "lc",
            "k": 32,
            "rounds": 10,
            "seed_size": 100,
            "val_fraction": 0.2,
            "target_f1": None,
            "min_chars": 50,
        }
    )
    opts = _merge(args, defaults)
    if not opts.corpus or not opts.out:
        raise _ValidationError("--corpus and --out are required")
    registry = _registry_for(opts.labels)
    tickets = load_corpus(opts.corpus, registry)
    config = _train_config(opts)

    instances: list[tuple[str, str, int]] = []
    for ticket in tickets:
        if ticket.gold_label is None:
            raise _ValidationError(f"ticket {ticket.ticket_id} has no label; al-run needs gold labels")
        try:
            index, cleaned = select_representative(ticket, int(opts.min_chars))
        except TriageError:
            continue
        text = compose(
            clean(ticket.title).text, clean(ticket.summary).text, cleaned.text, config.template
        )
        instances.append((ticket.ticket_id, text, ticket.gold_label))

    import random as _random

    order = list(range(len(instances)))
    _random.Random(int(opts.seed)).shuffle(order)
    n_val = int(len(instances) * float(opts.val_fraction))
    val_idx = order[:n_val]
    seed_idx = order[n_val : n_val + int(opts.seed_size)]
    pool_idx = order[n_val + int(opts.seed_size) :]
    val_examples = [(instances[i][1], instances[i][2]) for i in val_idx]
    labeled = tuple(
        LabeledInstance(instance_id=instances[i][0], text=instances[i][1], label=instances[i][2])
        for i in seed_idx
    )
    unlabeled = tuple(
        PoolInstance(instance_id=instances[i][0], text=instances[i][1]) for i in pool_idx
    )
    oracle = SimulatedOracle({instances[i][0]: instances[i][2] for i in pool_idx})
    state = PoolState(labeled=labeled, unlabeled=unlabeled)

    def trainer(pairs, iteration, prev):
        return train_artifact(pairs, config, registry, iteration=iteration, warm_from=prev)

    sampler = {"lc": "least_confident"}.get(opts.sampler, opts.sampler)
    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)
    final_state, records = run_rounds(
        state,
        trainer,
        sampler,
        int(opts.k),
        oracle,
        int(opts.rounds),
        val_examples=val_examples or None,
        target_f1=None if opts.target_f1 is None else float(opts.target_f1),
        seed=int(opts.seed),
        log_path=out / "rounds.jsonl",
        artifact_dir=out,
    )
    last_f1 = records[-1].val_macro_f1 if records else None
    print(
        json.dumps(
            {
                "rounds": len(records),
                "labeled": len(final_state.labeled),
                "unlabeled": len(final_state.unlabeled),
                "val_macro_f1": None if last_f1 is None else round(last_f1, 4),
                "out": str(out),
            }
        )
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    defaults = dict(_TRAIN_DEFAULTS)
    defaults.update(
        {
            "data": None,
            "host": "127.0.0.1",
            "port": 8321,
            "static": None,
            "oracle": "queued",
            "min_chars": 50,
            "val_fraction": 0.2,
            "default_k": 32,
        }
    )
    opts = _merge(args, defaults)
    if not opts.data:
        raise _ValidationError("--data is required")
    service_config = ServiceConfig(
        train=_train_config(opts),
        oracle=opts.oracle,
        min_chars=int(opts.min_chars),
        val_fraction=float(opts.val_fraction),
        seed=int(opts.seed),
        default_k=int(opts.default_k),
    )
    core = ServiceCore(opts.data, service_config)
    server = create_server(core, host=opts.host, port=int(opts.port), static_dir=opts.static)
    host, port = server.server_address[0], server.server_address[1]
    print(json.dumps({"listening": f"http://{host}:{port}", "data": str(opts.data)}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# -- parser wiring -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triagekit", description="Incident ticket labeling toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic ticket corpus")
    _add_config_flag(p)
    p.add_argument("--out")
    p.add_argument("--count", type=int)
    p.add_argument("--labels", type=int)
    p.add_argument("--machine-fraction", type=float, dest="machine_fraction")
    p.add_argument("--short-first-prob", type=float, dest="short_first_prob")
    p.add_argument("--placement", choices=["description", "title", "split"])
    p.add_argument("--noise", type=float)
    p.add_argument("--keep-labels", type=int, dest="keep_labels")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("clean", help="clean raw ticket text")
    p.add_argument("--text")
    p.add_argument("--in", dest="infile")
    p.add_argument("--counts", action="store_true")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("report-updates", help="drawn-update frequency table by length threshold")
    _add_config_flag(p)
    p.add_argument("--corpus")
    p.add_argument("--labels")
    p.add_argument("--thresholds")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report_updates)

    p = sub.add_parser("build", help="build train/val/test splits from a corpus")
    _add_config_flag(p)
    p.add_argument("--corpus")
    p.add_argument("--labels")
    p.add_argument("--out")
    p.add_argument("--kind", choices=["human", "machine", "mixture"])
    p.add_argument("--template", type=int, choices=[1, 2, 3])
    p.add_argument("--min-chars", type=int, dest="min_chars")
    p.add_argument("--ratios")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train a classifier on a built split")
    _add_config_flag(p)
    p.add_argument("--split")
    p.add_argument("--out")
    _add_train_flags(p, with_template=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved artifact on a split subset")
    _add_config_flag(p)
    p.add_argument("--artifact")
    p.add_argument("--split")
    p.add_argument("--subset", choices=["train", "val", "test"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("al-run", help="run simulated active learning rounds")
    _add_config_flag(p)
    p.add_argument("--corpus")
    p.add_argument("--labels")
    p.add_argument("--out")
    p.add_argument("--sampler", choices=["lc", "least_confident", "random"])
    p.add_argument("--k", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed-size", type=int, dest="seed_size")
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.add_argument("--target-f1", type=float, dest="target_f1")
    p.add_argument("--min-chars", type=int, dest="min_chars")
    _add_train_flags(p)
    p.set_defaults(func=cmd_al_run)

    p = sub.add_parser("serve", help="serve the annotation and prediction API")
    _add_config_flag(p)
    p.add_argument("--data")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--static")
    p.add_argument("--oracle", choices=["queued", "simulated"])
    p.add_argument("--min-chars", type=int, dest="min_chars")
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.add_argument("--default-k", type=int, dest="default_k")
    _add_train_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help()
            return 1
        return args.func(args)
    except _ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _RUNTIME_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (TriageError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything unforeseen is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
