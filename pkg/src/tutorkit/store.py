"""Embedded file-backed persistence.

One directory per course holds the resource table, the retrieval index
sidecar, conversations, and an append-only analytics log. Writes go
through a temp-file-plus-rename so a reader never observes a partial
entity, and resource flags are mirrored into the index in the same
committed write so the two never disagree.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .conversation import Conversation, conversation_from_dict, conversation_to_dict
from .corpus import Resource, ResourceKind
from .errors import NotFoundError
from .retrieval import CourseIndex, load_index, save_index


class EventKind(str, Enum):
    QUERY = "Query"
    QUIZ = "Quiz"
    FLASHCARDS = "Flashcards"
    SUMMARY = "Summary"
    ABSTENTION = "Abstention"
    HOMEWORK_BLOCK = "HomeworkBlock"
    GRADE = "Grade"


@dataclass
class AnalyticsEvent:
    timestamp: float
    course_id: str
    student_hash: str
    event_kind: EventKind
    intent: str = ""
    latency_ms: float = 0.0


def hash_student_id(student_id: str, salt: str) -> str:
    """Pseudonymize a student identity; raw ids never reach analytics."""
    return hashlib.sha256((salt + ":" + student_id).encode("utf-8")).hexdigest()[:16]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _resource_to_dict(resource: Resource) -> dict:
    return {
        "id": resource.id,
        "courseId": resource.course_id,
        "kind": resource.kind.value,
        "title": resource.title,
        "body": resource.body,
        "structuredPayload": resource.structured_payload,
        "sourceUri": resource.source_uri,
        "enabled": resource.enabled,
        "protected": resource.protected,
        "createdAt": resource.created_at,
        "updatedAt": resource.updated_at,
        "priorityTier": resource.priority_tier,
    }


def _resource_from_dict(data: dict) -> Resource:
    return Resource(
        id=data["id"],
        course_id=data["courseId"],
        kind=ResourceKind(data["kind"]),
        title=data["title"],
        body=data.get("body"),
        structured_payload=data.get("structuredPayload"),
        source_uri=data.get("sourceUri"),
        enabled=data.get("enabled", True),
        protected=data.get("protected", False),
        created_at=data.get("createdAt", ""),
        updated_at=data.get("updatedAt", ""),
        priority_tier=data.get("priorityTier", 0),
    )


class FileStore:
    """Store contract over a plain directory tree.

    Analytics is append-only by construction: the only operations are
    append and read, there is no update or delete path.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # Paths

    def _course_dir(self, course_id: str, create: bool = False) -> Path:
        path = self.root / "courses" / course_id
        if create:
            path.mkdir(parents=True, exist_ok=True)
        return path

    def course_ids(self) -> list[str]:
        base = self.root / "courses"
        if not base.is_dir():
            return []
        return sorted(p.name for p in base.iterdir() if p.is_dir())

    def has_course(self, course_id: str) -> bool:
        return (self._course_dir(course_id) / "resources.json").exists()

    # Course metadata

    def save_course_meta(self, course_id: str, meta: dict) -> None:
        path = self._course_dir(course_id, create=True) / "course.json"
        _atomic_write(path, json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=1))

    def load_course_meta(self, course_id: str) -> dict:
        path = self._course_dir(course_id) / "course.json"
        if not path.exists():
            raise NotFoundError(f"course {course_id!r} not found")
        return json.loads(path.read_text(encoding="utf-8"))

    # Resources

    def save_resources(self, course_id: str, resources: Iterable[Resource]) -> None:
        items = sorted(resources, key=lambda r: r.id)
        payload = json.dumps(
            [_resource_to_dict(r) for r in items],
            ensure_ascii=False, sort_keys=True, indent=1,
        )
        path = self._course_dir(course_id, create=True) / "resources.json"
        _atomic_write(path, payload)

    def load_resources(self, course_id: str) -> dict[str, Resource]:
        path = self._course_dir(course_id) / "resources.json"
        if not path.exists():
            raise NotFoundError(f"course {course_id!r} not found")
        data = json.loads(path.read_text(encoding="utf-8"))
        return {item["id"]: _resource_from_dict(item) for item in data}

    def get_resource(self, course_id: str, resource_id: str) -> Resource:
        resources = self.load_resources(course_id)
        if resource_id not in resources:
            raise NotFoundError(f"resource {resource_id!r} not found in {course_id!r}")
        return resources[resource_id]

    def set_resource_flags(self, course_id: str, resource_id: str,
                           enabled: Optional[bool] = None,
                           protected: Optional[bool] = None) -> Resource:
        """Flip flags on the resource table and index sidecar together."""
        resources = self.load_resources(course_id)
        if resource_id not in resources:
            raise NotFoundError(f"resource {resource_id!r} not found in {course_id!r}")
        updated = resources[resource_id].with_flags(enabled=enabled, protected=protected)
        resources[resource_id] = updated
        index = self.load_course_index(course_id)
        if index is not None:
            index = index.set_resource_flags(resource_id, enabled=enabled,
                                             protected=protected)
            self.save_course_index(course_id, index)
        self.save_resources(course_id, resources.values())
        return updated

    # Index sidecar

    def _index_path(self, course_id: str) -> Path:
        return self._course_dir(course_id) / "index.json"

    def save_course_index(self, course_id: str, index: CourseIndex) -> None:
        self._course_dir(course_id, create=True)
        save_index(index, self._index_path(course_id))

    def load_course_index(self, course_id: str, expect_dim: Optional[int] = None,
                          expect_provider: Optional[str] = None) -> Optional[CourseIndex]:
        path = self._index_path(course_id)
        if not path.exists():
            return None
        return load_index(path, expect_dim=expect_dim, expect_provider=expect_provider)

    # Conversations

    def save_conversation(self, conv: Conversation) -> None:
        directory = self._course_dir(conv.course_id, create=True) / "conversations"
        directory.mkdir(exist_ok=True)
        _atomic_write(directory / f"{conv.id}.json",
                      json.dumps(conversation_to_dict(conv), ensure_ascii=False))

    def load_conversation(self, course_id: str, conversation_id: str) -> Optional[Conversation]:
        path = self._course_dir(course_id) / "conversations" / f"{conversation_id}.json"
        if not path.exists():
            return None
        return conversation_from_dict(json.loads(path.read_text(encoding="utf-8")))

    # Analytics (append-only)

    def append_event(self, event: AnalyticsEvent) -> None:
        path = self._course_dir(event.course_id, create=True) / "analytics.ndjson"
        line = json.dumps(
            {
                "timestamp": event.timestamp,
                "courseId": event.course_id,
                "studentHash": event.student_hash,
                "eventKind": event.event_kind.value,
                "intent": event.intent,
                "latencyMs": event.latency_ms,
            },
            ensure_ascii=False,
        )
        with path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")

    def load_events(self, course_id: str, start: float = 0.0,
                    end: float = float("inf")) -> list[AnalyticsEvent]:
        path = self._course_dir(course_id) / "analytics.ndjson"
        if not path.exists():
            return []
        events = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            if not start <= data["timestamp"] <= end:
                continue
            events.append(
                AnalyticsEvent(
                    timestamp=data["timestamp"],
                    course_id=data["courseId"],
                    student_hash=data["studentHash"],
                    event_kind=EventKind(data["eventKind"]),
                    intent=data.get("intent", ""),
                    latency_ms=data.get("latencyMs", 0.0),
                )
            )
        return events

    # Webhooks

    def _webhooks_path(self) -> Path:
        return self.root / "webhooks.json"

    def register_webhook(self, url: str, secret: str) -> dict:
        registrations = self.load_webhooks()
        registration = {
            "id": hashlib.sha1(f"{url}:{len(registrations)}".encode()).hexdigest()[:12],
            "url": url,
            "secret": secret,
            "flagged": False,
        }
        registrations.append(registration)
        _atomic_write(self._webhooks_path(), json.dumps(registrations, indent=1))
        return registration

    def load_webhooks(self) -> list[dict]:
        path = self._webhooks_path()
        if not path.exists():
            return []
        return json.loads(path.read_text(encoding="utf-8"))

    def flag_webhook(self, registration_id: str) -> None:
        registrations = self.load_webhooks()
        for registration in registrations:
            if registration["id"] == registration_id:
                registration["flagged"] = True
        _atomic_write(self._webhooks_path(), json.dumps(registrations, indent=1))

    def append_dead_letter(self, entry: dict) -> None:
        path = self.root / "webhook_dead_letters.ndjson"
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")

    def load_dead_letters(self) -> list[dict]:
        path = self.root / "webhook_dead_letters.ndjson"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def _percentile(sorted_values: list[float], fraction: float) -> float:
    """Nearest-rank percentile; 0.0 for an empty series."""
    if not sorted_values:
        return 0.0
    rank = max(1, int(-(-fraction * len(sorted_values) // 1)))  # ceil
    return sorted_values[min(rank, len(sorted_values)) - 1]


def aggregate_events(events: list[AnalyticsEvent]) -> dict:
    """Counts per kind, abstention rate, homework blocks, latency percentiles."""
    counts = {kind.value: 0 for kind in EventKind}
    for event in events:
        counts[event.event_kind.value] += 1
    queries = counts[EventKind.QUERY.value]
    abstentions = counts[EventKind.ABSTENTION.value]
    denominator = queries + abstentions
    latencies = sorted(e.latency_ms for e in events if e.latency_ms > 0)
    return {
        "counts": counts,
        "abstentionRate": abstentions / denominator if denominator else 0.0,
        "homeworkBlocks": counts[EventKind.HOMEWORK_BLOCK.value],
        "latencyMs": {
            "p50": _percentile(latencies, 0.50),
            "p95": _percentile(latencies, 0.95),
        },
        "eventCount": len(events),
    }


def record_event(store: FileStore, course_id: str, student_id: str, salt: str,
                 event_kind: EventKind, intent: str = "",
                 latency_ms: float = 0.0) -> AnalyticsEvent:
    event = AnalyticsEvent(
        timestamp=time.time(),
        course_id=course_id,
        student_hash=hash_student_id(student_id, salt),
        event_kind=event_kind,
        intent=intent,
        latency_ms=latency_ms,
    )
    store.append_event(event)
    return event
