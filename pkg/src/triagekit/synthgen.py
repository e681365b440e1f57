"""Synthetic labeled ticket corpora with controllable difficulty.

Stands in for the proprietary incident store in every test. The generator
gives each label a disjoint set of five signal keywords and plants them in
titles and/or descriptions per ``signal_placement``; ``noise_token_rate``
is the probability that an emitted keyword is swapped for another label's,
so zero noise makes the corpus exactly separable and moderate noise
produces a tunable error floor.

Style follows the observed contrast between human and machine updates:
machine tickets cycle through six fixed "[automated]" patterns with field
fills, human tickets sample a phrase grammar with synonym slots and
transition words. With probability ``short_first_update_prob`` a ticket
opens with a short acknowledgment (< 30 characters), pushing the
representative update to T2 the way real corpora do.

Label frequencies follow a 1/(1+k) profile, so later label ids are rarer.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum

from .corpus import Author, LabelRegistry, RawTicket, TicketUpdate

__all__ = [
    "SignalPlacement",
    "SynthConfig",
    "generate",
    "label_keywords",
]

_SIGNAL_WORDS = ("alpha", "bravo", "charlie", "delta", "echo")

# Short first updates: all clean to < 30 characters.
_ACKS = (
    "Ack.",
    "Acknowledging incident.",
    "Incident acknowledged.",
    "Triage started.",
    "Looking into it.",
    "On it.",
)

# Low-variability machine patterns. The "[automated]" tag and any trailing
# URL are stripped by cleaning; the remaining body stays >= 50 characters.
_MACHINE_PATTERNS = (
    "[automated] Update: node {node} moved to repair by policy. Monitor tracking {kw}; validation pending for {kw} before close.",
    "[automated] Update: incident idle for {days} days. Escalation policy fired; pending {kw} validation, monitor tracking {kw} impact.",
    "[automated] Update: severity inherited from the parent incident. Monitor tracking {kw} impact until close; validation scope {kw}.",
    "[automated] Update: monitor {monitor} fired for {kw} on cluster {cluster}; threshold exceeded {mins} minutes, tracking {kw} impact.",
    "[automated] Update: health probe recovered on node {node}. Validation scheduled for the {kw} pipeline; monitor tracking {kw}.",
    "[automated] Update: state moved to {state} by policy. Pending {kw} validation before automatic close; monitor scope {kw}.",
)

_STATES = ("mitigated", "investigating", "pending-vendor", "resolved-pending-review")
_MONITORS = ("hb-loss", "thermal-watch", "link-flap", "smart-scan")

_OPENINGS = (
    "Assigning to {assignee} to begin {invest} into this issue.",
    "Picking this up from the {shift} rotation.",
    "Following up after the {adj} triage pass.",
    "Quick status note before the {shift} handoff.",
    "Spent some time with {assignee} digging through the history here.",
)
_OBSERVATIONS = (
    "We are seeing {kw} errors on the {where} nodes; {kw} counters keep climbing and {kw} retries are backing up.",
    "Telemetry points at {kw} regressions across the {where}; the {kw} graph is still rising after the last {kw} spike.",
    "The {where} dashboard shows {kw} failures climbing, with {kw} retries saturating and {kw} queues backing up.",
    "Logs correlate the impact with {kw} events in the {where}, mostly {kw} timeouts chained to {kw} resets.",
    "Probe history suggests the {kw} path is involved on the {where}, pointing at {kw} drift since the last {kw} rollout.",
)
_ACTIONS = (
    "Will {act} and report back shortly.",
    "Planning to {act} before the next sync.",
    "Next step is to {act} and confirm recovery.",
    "Holding the ticket open while we {act}.",
)
_TRANSITIONS = ("Meanwhile,", "In the meantime,", "Separately,", "After that,")

_ASSIGNEES = ("you", "the network team", "the capacity crew", "facilities")
_INVESTIGATIONS = ("investigation", "analysis", "diagnostics")
_SHIFTS = ("on-call", "weekend", "overnight")
_ADJS = ("initial", "second", "latest")
_WHERES = ("rack", "pod", "cluster", "region", "lab")
_ACTS = (
    "rerun the validation suite",
    "drain and reimage the node",
    "recheck the inventory snapshot",
    "compare against the baseline run",
)
_TITLE_ISSUES = ("capacity alarms", "boot failures", "probe flaps", "rate spikes", "config drift")
_NEUTRAL_FILL = ("routine", "standard", "scheduled")


class SignalPlacement(str, Enum):
    DESCRIPTION_ONLY = "description"
    TITLE_ONLY = "title"
    SPLIT_TITLE_DESCRIPTION = "split"


@dataclass(frozen=True)
class SynthConfig:
    ticket_count: int
    label_count: int = 10
    machine_fraction: float = 0.3
    short_first_update_prob: float = 0.7
    signal_placement: SignalPlacement = SignalPlacement.DESCRIPTION_ONLY
    noise_token_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.label_count < 1:
            raise ValueError(f"label_count must be >= 1, got {self.label_count}")
        if self.ticket_count < self.label_count:
            raise ValueError(
                f"ticket_count ({self.ticket_count}) must be >= label_count ({self.label_count})"
            )
        for name in ("machine_fraction", "short_first_update_prob", "noise_token_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        object.__setattr__(self, "signal_placement", SignalPlacement(self.signal_placement))


def label_keywords(label: int) -> tuple[str, ...]:
    """The five signal keywords owned by a label; disjoint across labels."""
    return tuple(f"{w}{label}" for w in _SIGNAL_WORDS)


def _draw_keyword(rng: random.Random, label: int, cfg: SynthConfig, position: int) -> str:
    source = label
    if cfg.noise_token_rate > 0.0 and rng.random() < cfg.noise_token_rate:
        other = rng.randrange(cfg.label_count - 1)
        source = other + 1 if other >= label else other
    return label_keywords(source)[position]


def _draw_keywords(rng: random.Random, label: int, cfg: SynthConfig, count: int) -> list[str]:
    # Distinct positions so a document names several related components,
    # each noised independently.
    positions = rng.sample(range(len(_SIGNAL_WORDS)), min(count, len(_SIGNAL_WORDS)))
    return [_draw_keyword(rng, label, cfg, p) for p in positions]


def _human_update(rng: random.Random, keywords: list[str]) -> str:
    opening = rng.choice(_OPENINGS).format(
        assignee=rng.choice(_ASSIGNEES),
        invest=rng.choice(_INVESTIGATIONS),
        shift=rng.choice(_SHIFTS),
        adj=rng.choice(_ADJS),
    )
    sentences = [opening]
    for i, kw in enumerate(keywords):
        obs = rng.choice(_OBSERVATIONS).format(kw=kw, where=rng.choice(_WHERES))
        sentences.append(f"{rng.choice(_TRANSITIONS)} {obs.lower()}" if i > 0 else obs)
    sentences.append(rng.choice(_ACTIONS).format(act=rng.choice(_ACTS)))
    text = " ".join(sentences)
    if rng.random() < 0.15:
        text += f" Runbook: https://eng.example.test/runbook/{rng.randint(100, 999)}"
    return text


def _machine_update(rng: random.Random, keywords: list[str]) -> str:
    slot = " ".join(keywords) if keywords else rng.choice(_NEUTRAL_FILL)
    return rng.choice(_MACHINE_PATTERNS).format(
        kw=slot,
        node=rng.randint(10, 99),
        days=rng.randint(2, 14),
        monitor=rng.choice(_MONITORS),
        cluster=f"cl{rng.randint(1, 40)}",
        mins=rng.randint(10, 120),
        state=rng.choice(_STATES),
    )


def _long_update(rng: random.Random, author: Author, label: int, cfg: SynthConfig) -> str:
    if cfg.signal_placement is SignalPlacement.TITLE_ONLY:
        n_kw = 0
    elif cfg.signal_placement is SignalPlacement.SPLIT_TITLE_DESCRIPTION:
        n_kw = 1
    else:
        n_kw = rng.randint(3, 5)
    keywords = _draw_keywords(rng, label, cfg, n_kw)
    if author is Author.MACHINE:
        return _machine_update(rng, keywords)
    return _human_update(rng, keywords)


def _title(rng: random.Random, label: int, cfg: SynthConfig) -> str:
    base = f"{rng.choice(_TITLE_ISSUES)} in {rng.choice(_WHERES)} {rng.randint(1, 30)}"
    if cfg.signal_placement is SignalPlacement.TITLE_ONLY:
        n_kw = rng.randint(2, 3)
    elif cfg.signal_placement is SignalPlacement.SPLIT_TITLE_DESCRIPTION:
        n_kw = 2
    else:
        n_kw = 0
    keywords = _draw_keywords(rng, label, cfg, n_kw) if n_kw else []
    return " ".join(keywords + [base]) if keywords else base


def _label_sequence(rng: random.Random, cfg: SynthConfig) -> list[int]:
    # First K tickets cover every label once, the rest follow a 1/(1+k)
    # frequency profile, mirroring the skew of real incident categories.
    k = cfg.label_count
    weights = [1.0 / (1 + i) for i in range(k)]
    labels = list(range(k))
    labels += rng.choices(range(k), weights=weights, k=cfg.ticket_count - k)
    return labels


def generate(cfg: SynthConfig, registry: LabelRegistry) -> list[RawTicket]:
    """Generate a labeled corpus; identical cfg and seed give identical output."""
    if len(registry) < cfg.label_count:
        raise ValueError(
            f"registry has {len(registry)} labels but config wants {cfg.label_count}"
        )
    rng = random.Random(cfg.seed)
    base_time = datetime(2020, 6, 1, tzinfo=timezone.utc)
    tickets = []
    for i, label in enumerate(_label_sequence(rng, cfg)):
        author = Author.MACHINE if rng.random() < cfg.machine_fraction else Author.HUMAN
        short_first = rng.random() < cfg.short_first_update_prob
        n_updates = rng.randint(1, 6)
        if short_first:
            n_updates = max(2, n_updates)

        when = base_time + timedelta(hours=rng.randint(0, 24 * 365))
        updates = []
        for index in range(1, n_updates + 1):
            if index == 1 and short_first:
                description = rng.choice(_ACKS)
            else:
                description = _long_update(rng, author, label, cfg)
            updates.append(
                TicketUpdate(index=index, timestamp=when, author=author, description=description)
            )
            when += timedelta(minutes=rng.randint(5, 240))

        summary = "" if rng.random() < 0.2 else (
            f"Rolling summary of mitigation steps for the affected {rng.choice(_WHERES)}."
        )
        tickets.append(
            RawTicket(
                ticket_id=f"inc-{i:06d}",
                title=_title(rng, label, cfg),
                summary=summary,
                updates=tuple(updates),
                gold_label=label,
            )
        )
    return tickets
