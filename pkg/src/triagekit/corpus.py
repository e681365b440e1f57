"""Ticket domain model, label registry, and JSONL corpus ingestion.

A corpus file holds one ticket per line:

    {"ticket_id": str, "title": str, "summary": str, "label": str|null,
     "updates": [{"index": int, "timestamp": RFC3339 str,
                  "author": "human"|"machine", "description": str}, ...]}

Gold labels are stored by name and resolved to dense integer ids against a
:class:`LabelRegistry` at load time, so label files survive registry
extension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import (
    DuplicateLabelName,
    DuplicateTicketId,
    MalformedRecord,
    UnknownLabel,
)

__all__ = [
    "Author",
    "DEFAULT_LABELS",
    "LabelRegistry",
    "RawTicket",
    "TicketUpdate",
    "default_registry",
    "extend_registry",
    "load_corpus",
    "load_registry",
    "save_corpus",
    "save_registry",
]

# The ten incident labels shipped as the default registry, in id order.
DEFAULT_LABELS: tuple[str, ...] = (
    "Buildout",
    "GDCO Escalation",
    "SKU Artifacts",
    "Customer Facing RCA",
    "CloudNet FPGA Alerts",
    "Capacity Recovery Requests",
    "ECO Request",
    "Anvil Rate",
    "Firmware Deployment",
    "Attestation",
)


class Author(Enum):
    """Who wrote a ticket update."""

    HUMAN = "human"
    MACHINE = "machine"

    @classmethod
    def from_str(cls, value: str) -> "Author":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"author must be 'human' or 'machine', got {value!r}") from None


@dataclass(frozen=True)
class TicketUpdate:
    """One description revision on a ticket; ``index`` is 1-based."""

    index: int
    timestamp: datetime
    author: Author
    description: str


@dataclass(frozen=True)
class RawTicket:
    ticket_id: str
    title: str
    summary: str
    updates: tuple[TicketUpdate, ...]
    gold_label: int | None = None


@dataclass(frozen=True)
class LabelRegistry:
    """Append-only mapping of dense label ids to names.

    Ids are assigned by position and never renumbered; ``frozen_at`` is a
    version counter bumped on every extension.
    """

    entries: tuple[str, ...]
    frozen_at: int = 0

    def __post_init__(self) -> None:
        if len(set(self.entries)) != len(self.entries):
            seen: set[str] = set()
            dup = next(e for e in self.entries if e in seen or seen.add(e))
            raise DuplicateLabelName(dup)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def name_of(self, label_id: int) -> str:
        if not 0 <= label_id < len(self.entries):
            raise UnknownLabel(str(label_id))
        return self.entries[label_id]

    def id_of(self, name: str) -> int:
        try:
            return self.entries.index(name)
        except ValueError:
            raise UnknownLabel(name) from None


def default_registry() -> LabelRegistry:
    """The ten-label default registry."""
    return LabelRegistry(entries=DEFAULT_LABELS)


def extend_registry(registry: LabelRegistry, name: str) -> LabelRegistry:
    """Return a new registry with ``name`` appended under the next free id."""
    if name in registry:
        raise DuplicateLabelName(name)
    return LabelRegistry(entries=registry.entries + (name,), frozen_at=registry.frozen_at + 1)


def load_registry(path: str | Path) -> LabelRegistry:
    """Read a label file: one name per line, line number = id."""
    names = []
    for line in Path(path).read_text("utf-8").splitlines():
        name = line.strip()
        if name:
            names.append(name)
    return LabelRegistry(entries=tuple(names))


def save_registry(registry: LabelRegistry, path: str | Path) -> None:
    Path(path).write_text("".join(f"{name}\n" for name in registry.entries), "utf-8")


def parse_rfc3339(value: str) -> datetime:
    """Parse an RFC 3339 timestamp into a UTC datetime."""
    text = value[:-1] + "+00:00" if value.endswith(("Z", "z")) else value
    parsed = datetime.fromisoformat(text)
    if parsed.tzinfo is None:
        raise ValueError(f"timestamp {value!r} has no UTC offset")
    return parsed.astimezone(timezone.utc)


def format_rfc3339(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_update(obj: object, line_number: int) -> TicketUpdate:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_number, "update is not an object")
    try:
        index = obj["index"]
        timestamp = parse_rfc3339(obj["timestamp"])
        author = Author.from_str(obj["author"])
        description = obj["description"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(line_number, f"bad update: {exc}") from exc
    if not isinstance(index, int) or index < 1:
        raise MalformedRecord(line_number, f"update index must be a positive integer, got {index!r}")
    if not isinstance(description, str):
        raise MalformedRecord(line_number, "update description must be a string")
    return TicketUpdate(index=index, timestamp=timestamp, author=author, description=description)


def _parse_ticket(obj: object, line_number: int, registry: LabelRegistry) -> RawTicket:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_number, "record is not an object")
    ticket_id = obj.get("ticket_id")
    if not isinstance(ticket_id, str) or not ticket_id:
        raise MalformedRecord(line_number, "ticket_id must be a non-empty string")
    title = obj.get("title", "")
    summary = obj.get("summary", "") or ""
    if not isinstance(title, str) or not isinstance(summary, str):
        raise MalformedRecord(line_number, "title and summary must be strings")

    raw_updates = obj.get("updates")
    if not isinstance(raw_updates, list) or not raw_updates:
        raise MalformedRecord(line_number, "updates must be a non-empty array")
    updates = sorted(
        (_parse_update(u, line_number) for u in raw_updates), key=lambda u: u.index
    )
    indices = [u.index for u in updates]
    if indices != list(range(1, len(updates) + 1)):
        raise MalformedRecord(line_number, f"update indices must be consecutive 1..m, got {indices}")
    for prev, cur in zip(updates, updates[1:]):
        if cur.timestamp < prev.timestamp:
            raise MalformedRecord(
                line_number, f"timestamps decrease between updates {prev.index} and {cur.index}"
            )

    label_name = obj.get("label")
    gold_label: int | None = None
    if label_name is not None:
        if not isinstance(label_name, str):
            raise MalformedRecord(line_number, "label must be a string or null")
        gold_label = registry.id_of(label_name)

    return RawTicket(
        ticket_id=ticket_id,
        title=title,
        summary=summary,
        updates=tuple(updates),
        gold_label=gold_label,
    )


def load_corpus(path: str | Path, registry: LabelRegistry) -> list[RawTicket]:
    """Load a JSONL ticket corpus, validating every record.

    Raises :class:`MalformedRecord` (with line number), :class:`UnknownLabel`,
    or :class:`DuplicateTicketId`. Loading is deterministic: the same file
    bytes produce the same in-memory corpus.
    """
    tickets: list[RawTicket] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_number, f"invalid JSON: {exc.msg}") from exc
            ticket = _parse_ticket(obj, line_number, registry)
            if ticket.ticket_id in seen:
                raise DuplicateTicketId(ticket.ticket_id)
            seen.add(ticket.ticket_id)
            tickets.append(ticket)
    return tickets


def ticket_to_record(ticket: RawTicket, registry: LabelRegistry) -> dict:
    return {
        "ticket_id": ticket.ticket_id,
        "title": ticket.title,
        "summary": ticket.summary,
        "label": None if ticket.gold_label is None else registry.name_of(ticket.gold_label),
        "updates": [
            {
                "index": u.index,
                "timestamp": format_rfc3339(u.timestamp),
                "author": u.author.value,
                "description": u.description,
            }
            for u in ticket.updates
        ],
    }


def save_corpus(tickets: Iterable[RawTicket], path: str | Path, registry: LabelRegistry) -> None:
    """Write tickets to a JSONL corpus file (labels stored by name)."""
    with open(path, "w", encoding="utf-8") as handle:
        for ticket in tickets:
            handle.write(json.dumps(ticket_to_record(ticket, registry)) + "\n")
