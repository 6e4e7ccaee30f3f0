"""Course resources and boundary-preserving chunking.

A course is a set of resources (lectures, assignments, announcements, ...)
with a priority tier per kind and an instructor-controlled enabled flag.
Unstructured text is split into chunks of at most ``chunk_limit`` characters
that never cut through a word; structured announcement/assignment payloads
are serialized into canonical chunks instead of being re-parsed.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Optional

from .errors import UnsupportedKindError

DEFAULT_CHUNK_LIMIT = 800

# Canonical separator used when serializing structured payload fields.
FIELD_SEPARATOR = " — "


class ResourceKind(str, Enum):
    ASSIGNMENT = "Assignment"
    DISCUSSION = "Discussion"
    ANNOUNCEMENT = "Announcement"
    LECTURE = "Lecture"
    READING_MATERIAL = "ReadingMaterial"
    QUIZ = "Quiz"
    TRANSCRIPT = "Transcript"


# Lectures (and lecture-derived transcripts) outrank everything else;
# readings and discussions are secondary background material.
_PRIORITY_TIERS = {
    ResourceKind.LECTURE: 1,
    ResourceKind.TRANSCRIPT: 1,
    ResourceKind.ASSIGNMENT: 2,
    ResourceKind.ANNOUNCEMENT: 2,
    ResourceKind.QUIZ: 2,
    ResourceKind.DISCUSSION: 3,
    ResourceKind.READING_MATERIAL: 3,
}


def default_priority(kind: ResourceKind) -> int:
    """Priority tier for a resource kind, 1 = highest."""
    kind = ResourceKind(kind)
    return _PRIORITY_TIERS[kind]


@dataclass
class Resource:
    """A course artifact as stored and indexed.

    Exactly one of ``body`` / ``structured_payload`` is populated:
    announcements and assignments arriving from an LMS are structured,
    everything else carries extracted plain text.
    """

    id: str
    course_id: str
    kind: ResourceKind
    title: str
    body: Optional[str] = None
    structured_payload: Optional[dict[str, Any]] = None
    source_uri: Optional[str] = None
    enabled: bool = True
    protected: bool = False
    created_at: str = ""
    updated_at: str = ""
    priority_tier: int = 0

    def __post_init__(self) -> None:
        self.kind = ResourceKind(self.kind)
        if self.priority_tier < 1:
            self.priority_tier = default_priority(self.kind)
        if (self.body is None) == (self.structured_payload is None):
            raise ValueError(
                f"resource {self.id!r}: exactly one of body/structured_payload must be set"
            )

    def with_flags(self, enabled: bool | None = None, protected: bool | None = None) -> "Resource":
        updated = replace(self)
        if enabled is not None:
            updated.enabled = enabled
        if protected is not None:
            updated.protected = protected
        return updated


@dataclass
class Chunk:
    """A boundary-aligned text block, the unit of embedding and retrieval.

    ``char_span`` is a [start, end) offset pair into the source body
    (for structured resources, into the canonical serialization).
    ``oversized_split`` marks pieces of a single token longer than the
    chunk limit that had to be hard-cut; those pieces rejoin without a
    separator, so they are exempt from whitespace-normalized
    reconstruction.
    """

    id: str
    resource_id: str
    ordinal: int
    text: str
    char_span: tuple[int, int]
    oversized_split: bool = False


_WORD_RE = re.compile(r"\S+")
_SENTENCE_END_CHARS = ".!?"


def _chunk_id(resource_id: str, ordinal: int, text: str) -> str:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=4).hexdigest()
    return f"{resource_id}#{ordinal:04d}-{digest}"


def chunk_text(body: str, limit: int = DEFAULT_CHUNK_LIMIT, resource_id: str = "") -> list[Chunk]:
    """Split ``body`` into chunks of at most ``limit`` characters.

    Greedy packing: each chunk extends to the last sentence boundary
    (terminal ``.`` ``!`` ``?`` followed by whitespace or document end)
    that fits within ``limit``, falling back to the last word boundary
    when no sentence ends inside the window. A single token longer than
    ``limit`` is hard-split at ``limit`` and flagged rather than
    rejected, so ingestion never fails on pathological input.

    Character counts are Unicode scalar values. Deterministic: identical
    (body, limit) yields an identical chunk list.
    """
    if limit < 1:
        raise ValueError("chunk limit must be >= 1")
    words = [(m.start(), m.end()) for m in _WORD_RE.finditer(body)]
    if not words:
        return []

    chunks: list[Chunk] = []

    def emit(start: int, end: int, oversized: bool = False) -> None:
        ordinal = len(chunks)
        text = body[start:end]
        chunks.append(
            Chunk(
                id=_chunk_id(resource_id, ordinal, text),
                resource_id=resource_id,
                ordinal=ordinal,
                text=text,
                char_span=(start, end),
                oversized_split=oversized,
            )
        )

    n = len(words)
    i = 0
    while i < n:
        w_start, w_end = words[i]
        if w_end - w_start > limit:
            # Oversized single token: hard-split into limit-sized pieces.
            pos = w_start
            while pos < w_end:
                emit(pos, min(pos + limit, w_end), oversized=True)
                pos += limit
            i += 1
            continue

        start = w_start
        # Extend the window while the next word still fits.
        last_fit = i
        while last_fit + 1 < n and words[last_fit + 1][1] - start <= limit:
            last_fit += 1

        if last_fit == n - 1:
            cut = last_fit  # document end is always a valid boundary
        else:
            cut = -1
            for k in range(last_fit, i - 1, -1):
                if body[words[k][1] - 1] in _SENTENCE_END_CHARS:
                    cut = k
                    break
            if cut < 0:
                cut = last_fit  # no sentence end in window: word boundary
        emit(start, words[cut][1])
        i = cut + 1

    return chunks


# Structured payload fields serialized in canonical order. Announcements
# use "message" for their text; assignments use "description".
_STRUCTURED_FIELDS = (
    ("title", None),
    ("due_at", "Due: {}"),
    ("due_date", "Due: {}"),
    ("points_possible", "Points: {}"),
    ("points", "Points: {}"),
    ("description", None),
    ("message", None),
)


def canonical_field_strings(payload: dict[str, Any]) -> list[str]:
    """Payload fields rendered as text, in canonical order, skipping absent ones."""
    parts: list[str] = []
    for key, template in _STRUCTURED_FIELDS:
        value = payload.get(key)
        if value is None or value == "":
            continue
        text = str(value).strip()
        if not text:
            continue
        parts.append(template.format(text) if template else text)
    return parts


def canonical_body(resource: Resource, limit: int = DEFAULT_CHUNK_LIMIT) -> str:
    """The synthetic body a structured resource is chunked against.

    Field strings are packed greedily into groups of at most ``limit``
    characters, joined by the canonical separator within a group; groups
    are joined by newlines so chunk boundaries fall on whitespace.
    """
    return "\n".join(_structured_groups(resource, limit))


def _structured_groups(resource: Resource, limit: int) -> list[str]:
    return _pack_fields(canonical_field_strings(resource.structured_payload or {}), limit)


def _pack_fields(fields: list[str], limit: int) -> list[str]:
    groups: list[str] = []
    current = ""
    for text in fields:
        if len(text) > limit:
            if current:
                groups.append(current)
                current = ""
            # A single oversized field routes through the normal chunker.
            groups.extend(c.text for c in chunk_text(text, limit))
            continue
        candidate = current + FIELD_SEPARATOR + text if current else text
        if len(candidate) <= limit:
            current = candidate
        else:
            groups.append(current)
            current = text
    if current:
        groups.append(current)
    return groups


def bypass_or_parse(resource: Resource, limit: int = DEFAULT_CHUNK_LIMIT) -> list[Chunk]:
    """Chunks for a resource: canonical serialization for structured
    announcements/assignments, ``chunk_text`` for everything else."""
    if not isinstance(resource.kind, ResourceKind):
        raise UnsupportedKindError(f"unknown resource kind: {resource.kind!r}")
    if not resource.enabled:
        raise ValueError(f"resource {resource.id!r} is disabled; caller must filter")

    if resource.structured_payload is not None:
        if resource.kind not in (ResourceKind.ANNOUNCEMENT, ResourceKind.ASSIGNMENT):
            raise UnsupportedKindError(
                f"structured payloads are only supported for announcements and "
                f"assignments, not {resource.kind.value}"
            )
        chunks: list[Chunk] = []
        offset = 0
        for ordinal, group in enumerate(_structured_groups(resource, limit)):
            chunks.append(
                Chunk(
                    id=_chunk_id(resource.id, ordinal, group),
                    resource_id=resource.id,
                    ordinal=ordinal,
                    text=group,
                    char_span=(offset, offset + len(group)),
                )
            )
            offset += len(group) + 1
        return chunks

    return chunk_text(resource.body or "", limit, resource_id=resource.id)


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return " ".join(text.split())
