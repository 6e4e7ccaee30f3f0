"""Course data acquisition.

Three acquisition paths feed the same ingestion pipe: a fixture loader
over a plain directory format, a Canvas-style REST client, and a
transcription client that partitions oversized media before calling the
speech provider and merges the per-part segments back into one
time-ordered transcript.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence
from urllib.parse import urlparse

from .corpus import Resource, ResourceKind, bypass_or_parse, DEFAULT_CHUNK_LIMIT
from .embedding import EmbeddingProvider, embed_chunks
from .errors import MediaError, NotFoundError, ProviderError
from .retrieval import CourseIndex, EmbeddedChunk
from .store import FileStore

ASR_PART_LIMIT_BYTES = 25 * 1024 * 1024  # provider-imposed upload ceiling
GAP_MARKER = "[transcription gap]"


@dataclass
class TranscriptSegment:
    text: str
    start_s: Optional[float] = None
    end_s: Optional[float] = None
    speaker: Optional[str] = None

    def __post_init__(self) -> None:
        if self.start_s is not None and self.end_s is not None:
            if not self.start_s < self.end_s:
                raise ValueError("segment start must precede its end")


@dataclass
class ResourceDescriptor:
    """What an LMS lists before bodies are fetched."""

    id: str
    kind: ResourceKind
    title: str
    updated_at: str = ""
    enabled: bool = True
    protected: bool = False
    source_uri: Optional[str] = None


class LmsClient(Protocol):
    def list_courses(self) -> list[dict]: ...

    def list_resources(self, course_id: str) -> list[ResourceDescriptor]: ...

    def fetch_resource_body(self, course_id: str, descriptor: ResourceDescriptor): ...


_STRUCTURED_KINDS = (ResourceKind.ANNOUNCEMENT, ResourceKind.ASSIGNMENT)


class FileFixtureLms:
    """LMS interface over the fixture directory format.

    A fixture course is a directory holding ``course.json`` (course id,
    title, resource descriptors) plus plain-text or markdown resource
    files. Announcements and assignments carry inline structured
    payloads, mirroring how an LMS API delivers them.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_path = self.root / "course.json"
        if not manifest_path.exists():
            raise NotFoundError(f"no course.json under {self.root}")
        self.manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    def list_courses(self) -> list[dict]:
        return [{"id": self.manifest["id"], "title": self.manifest.get("title", "")}]

    def list_resources(self, course_id: str) -> list[ResourceDescriptor]:
        if course_id != self.manifest["id"]:
            raise NotFoundError(f"fixture course is {self.manifest['id']!r}, not {course_id!r}")
        descriptors = []
        for entry in self.manifest.get("resources", []):
            descriptors.append(
                ResourceDescriptor(
                    id=entry["id"],
                    kind=ResourceKind(entry["kind"]),
                    title=entry["title"],
                    updated_at=entry.get("updated_at", ""),
                    enabled=entry.get("enabled", True),
                    protected=entry.get("protected", False),
                    source_uri=entry.get("file"),
                )
            )
        return descriptors

    def fetch_resource_body(self, course_id: str, descriptor: ResourceDescriptor):
        for entry in self.manifest.get("resources", []):
            if entry["id"] == descriptor.id:
                if "payload" in entry:
                    return dict(entry["payload"])
                if "body" in entry:
                    return entry["body"]
                if "file" in entry:
                    return (self.root / entry["file"]).read_text(encoding="utf-8")
                raise NotFoundError(f"resource {descriptor.id!r} has no content")
        raise NotFoundError(f"resource {descriptor.id!r} not in manifest")


_CANVAS_KIND_MAP = [
    ("assignments", ResourceKind.ASSIGNMENT),
    ("announcements", ResourceKind.ANNOUNCEMENT),
    ("discussion_topics", ResourceKind.DISCUSSION),
    ("files", ResourceKind.READING_MATERIAL),
]


class CanvasLms:
    """Canvas-style REST client: bearer auth, Link-header pagination."""

    def __init__(self, base_url: str, token: str, client=None, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        if client is None:
            import httpx

            client = httpx.Client(timeout=timeout)
        self._client = client

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.token}"}

    def _get_paginated(self, url: str) -> list[dict]:
        items: list[dict] = []
        while url:
            response = self._client.get(url, headers=self._headers())
            if response.status_code != 200:
                raise ProviderError(f"LMS returned HTTP {response.status_code} for {url}")
            items.extend(response.json())
            url = self._next_link(response.headers.get("Link", ""))
        return items

    @staticmethod
    def _next_link(link_header: str) -> Optional[str]:
        for part in link_header.split(","):
            segment = part.split(";")
            if len(segment) >= 2 and 'rel="next"' in segment[1]:
                return segment[0].strip().strip("<>")
        return None

    def list_courses(self) -> list[dict]:
        return [
            {"id": str(c["id"]), "title": c.get("name", "")}
            for c in self._get_paginated(f"{self.base_url}/api/v1/courses")
        ]

    def list_resources(self, course_id: str) -> list[ResourceDescriptor]:
        descriptors = []
        for suffix, kind in _CANVAS_KIND_MAP:
            url = f"{self.base_url}/api/v1/courses/{course_id}/{suffix}"
            for item in self._get_paginated(url):
                descriptors.append(
                    ResourceDescriptor(
                        id=f"{suffix}-{item['id']}",
                        kind=kind,
                        title=item.get("name") or item.get("title")
                        or item.get("display_name", ""),
                        updated_at=item.get("updated_at", ""),
                        source_uri=item.get("html_url") or item.get("url"),
                    )
                )
        return descriptors

    def fetch_resource_body(self, course_id: str, descriptor: ResourceDescriptor):
        suffix, raw_id = descriptor.id.split("-", 1)
        url = f"{self.base_url}/api/v1/courses/{course_id}/{suffix}"
        for item in self._get_paginated(url):
            if str(item["id"]) == raw_id:
                if descriptor.kind is ResourceKind.ASSIGNMENT:
                    return {
                        "title": item.get("name", descriptor.title),
                        "due_at": item.get("due_at"),
                        "points_possible": item.get("points_possible"),
                        "description": _strip_html(item.get("description", "")),
                    }
                if descriptor.kind is ResourceKind.ANNOUNCEMENT:
                    return {
                        "title": item.get("title", descriptor.title),
                        "message": _strip_html(item.get("message", "")),
                    }
                if descriptor.kind is ResourceKind.DISCUSSION:
                    return _strip_html(item.get("message", ""))
                body_url = item.get("url")
                if body_url:
                    response = self._client.get(body_url, headers=self._headers())
                    if response.status_code != 200:
                        raise ProviderError(f"file download failed: HTTP {response.status_code}")
                    return response.text
                return ""
        raise NotFoundError(f"resource {descriptor.id!r} not found on LMS")


_TAG_RE = re.compile(r"<[^>]+>")


def _strip_html(text: str) -> str:
    return _TAG_RE.sub(" ", text or "").strip()


# Media partitioning and transcription


def partition_media(size_bytes: int, limit_bytes: int = ASR_PART_LIMIT_BYTES
                    ) -> list[tuple[int, int]]:
    """Contiguous [start, end) byte ranges covering [0, size).

    Every part is at most ``limit_bytes`` (a part of exactly the limit is
    legal); the final part may be smaller. Size zero means no parts.
    """
    if limit_bytes <= 0:
        raise ValueError("limit_bytes must be positive")
    if size_bytes < 0:
        raise ValueError("size_bytes must be nonnegative")
    ranges = []
    start = 0
    while start < size_bytes:
        end = min(start + limit_bytes, size_bytes)
        ranges.append((start, end))
        start = end
    return ranges


class AsrProvider(Protocol):
    name: str

    def transcribe_part(self, media: bytes, part_index: int, with_timestamps: bool,
                        diarize: bool) -> list[TranscriptSegment]: ...


class ScriptedAsr:
    """Deterministic speech provider for offline runs.

    ``script`` maps a part index to the segments that part yields, with
    timestamps relative to the part start; ``fail_parts`` simulates
    per-part provider failures.
    """

    name = "scripted"

    def __init__(self, script: Optional[dict[int, list[TranscriptSegment]]] = None,
                 fail_parts: Optional[set[int]] = None):
        self.script = script or {}
        self.fail_parts = fail_parts or set()

    def transcribe_part(self, media: bytes, part_index: int, with_timestamps: bool,
                        diarize: bool) -> list[TranscriptSegment]:
        if part_index in self.fail_parts:
            raise ProviderError(f"scripted failure on part {part_index}")
        if part_index in self.script:
            return [
                TranscriptSegment(
                    text=s.text,
                    start_s=s.start_s,
                    end_s=s.end_s,
                    speaker=s.speaker if diarize else None,
                )
                for s in self.script[part_index]
            ]
        return [
            TranscriptSegment(
                text=f"Scripted transcript for part {part_index}.",
                start_s=0.0,
                end_s=10.0,
                speaker="SPEAKER_1" if diarize else None,
            )
        ]


class RemoteAsr:
    """POST multipart {media part, flags} -> {"segments": [...]}."""

    name = "remote-http"

    def __init__(self, endpoint: str, timeout: float = 120.0, client=None):
        self.endpoint = endpoint
        self.timeout = timeout
        self._client = client

    def transcribe_part(self, media: bytes, part_index: int, with_timestamps: bool,
                        diarize: bool) -> list[TranscriptSegment]:
        import httpx

        data = {
            "part_index": str(part_index),
            "timestamps": "true" if with_timestamps else "false",
            "diarize": "true" if diarize else "false",
        }
        files = {"media": (f"part-{part_index}", media)}
        if self._client is not None:
            response = self._client.post(self.endpoint, data=data, files=files)
        else:
            response = httpx.post(self.endpoint, data=data, files=files,
                                  timeout=self.timeout)
        if response.status_code != 200:
            raise ProviderError(f"ASR service returned HTTP {response.status_code}")
        segments = []
        for item in response.json().get("segments", []):
            segments.append(
                TranscriptSegment(
                    text=item["text"],
                    start_s=item.get("start"),
                    end_s=item.get("end"),
                    speaker=item.get("speaker"),
                )
            )
        return segments


def _fetch_media(media_ref: str) -> bytes:
    parsed = urlparse(media_ref)
    if parsed.scheme in ("http", "https"):
        import httpx

        try:
            response = httpx.get(media_ref, timeout=120.0)
        except Exception as exc:
            raise MediaError(f"could not fetch {media_ref!r}: {exc}") from exc
        if response.status_code != 200:
            raise MediaError(f"media fetch failed: HTTP {response.status_code}")
        return response.content
    if parsed.scheme in ("", "file"):
        path = Path(parsed.path if parsed.scheme == "file" else media_ref)
        if not path.exists():
            raise MediaError(f"media file not found: {media_ref!r}")
        return path.read_bytes()
    raise MediaError(f"unsupported media scheme: {parsed.scheme!r}")


def transcribe(asr: AsrProvider, media_ref: str, with_timestamps: bool = True,
               diarize: bool = False,
               part_limit_bytes: int = ASR_PART_LIMIT_BYTES) -> list[TranscriptSegment]:
    """Transcribe media, partitioning it under the provider size limit.

    Per-part timestamps are offset by the end of the previous part's last
    segment so the merged transcript is monotone. Diarization merges
    adjacent same-speaker segments; without timestamps the segments come
    back untimed. A failed part becomes a gap marker, not a lost
    transcript.
    """
    media = _fetch_media(media_ref)
    ranges = partition_media(len(media), part_limit_bytes)
    merged: list[TranscriptSegment] = []
    offset = 0.0
    for part_index, (start, end) in enumerate(ranges):
        try:
            part_segments = asr.transcribe_part(
                media[start:end], part_index, with_timestamps, diarize
            )
        except Exception:
            merged.append(
                TranscriptSegment(
                    text=GAP_MARKER,
                    start_s=offset if with_timestamps else None,
                    end_s=offset + 1e-3 if with_timestamps else None,
                )
            )
            if with_timestamps:
                offset += 1e-3
            continue
        part_end = offset
        for segment in part_segments:
            if with_timestamps and segment.start_s is not None and segment.end_s is not None:
                shifted = TranscriptSegment(
                    text=segment.text,
                    start_s=segment.start_s + offset,
                    end_s=segment.end_s + offset,
                    speaker=segment.speaker,
                )
                part_end = max(part_end, shifted.end_s)
            else:
                shifted = TranscriptSegment(text=segment.text, speaker=segment.speaker)
            merged.append(shifted)
        offset = part_end
    if diarize:
        merged = _merge_adjacent_speakers(merged)
    if not with_timestamps:
        merged = [
            TranscriptSegment(text=s.text, speaker=s.speaker) for s in merged
        ]
    return merged


def _merge_adjacent_speakers(segments: list[TranscriptSegment]) -> list[TranscriptSegment]:
    merged: list[TranscriptSegment] = []
    for segment in segments:
        previous = merged[-1] if merged else None
        if (
            previous is not None
            and previous.speaker is not None
            and previous.speaker == segment.speaker
        ):
            merged[-1] = TranscriptSegment(
                text=previous.text + " " + segment.text,
                start_s=previous.start_s,
                end_s=segment.end_s if segment.end_s is not None else previous.end_s,
                speaker=previous.speaker,
            )
        else:
            merged.append(segment)
    return merged


_SLUG_RE = re.compile(r"[^a-z0-9]+")


def transcript_to_resource(course_id: str, segments: Sequence[TranscriptSegment],
                           title: str) -> Resource:
    """Fold transcript segments into one Transcript resource body."""
    if not segments:
        raise ValueError("cannot build a transcript resource from zero segments")
    lines = []
    for segment in segments:
        prefix = ""
        if segment.start_s is not None and segment.end_s is not None:
            prefix += f"[{segment.start_s:.1f}-{segment.end_s:.1f}] "
        if segment.speaker:
            prefix += f"{segment.speaker}: "
        lines.append(prefix + segment.text)
    slug = _SLUG_RE.sub("-", title.lower()).strip("-") or "untitled"
    return Resource(
        id=f"transcript-{slug}",
        course_id=course_id,
        kind=ResourceKind.TRANSCRIPT,
        title=title,
        body="\n".join(lines),
    )


# Synchronization


@dataclass
class SyncReport:
    added: int = 0
    updated: int = 0
    removed: int = 0
    failed: int = 0
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "added": self.added,
            "updated": self.updated,
            "removed": self.removed,
            "failed": self.failed,
            "failures": list(self.failures),
        }


def _build_resource(course_id: str, descriptor: ResourceDescriptor, content) -> Resource:
    structured = None
    body = None
    if isinstance(content, dict):
        if descriptor.kind not in _STRUCTURED_KINDS:
            raise ProviderError(
                f"{descriptor.kind.value} resources must arrive as text, got a payload"
            )
        structured = content
    else:
        body = str(content)
    return Resource(
        id=descriptor.id,
        course_id=course_id,
        kind=descriptor.kind,
        title=descriptor.title,
        body=body,
        structured_payload=structured,
        source_uri=descriptor.source_uri,
        enabled=descriptor.enabled,
        protected=descriptor.protected,
        updated_at=descriptor.updated_at,
    )


def sync_course(lms: LmsClient, course_id: str, store: FileStore,
                embedder: EmbeddingProvider,
                chunk_limit: int = DEFAULT_CHUNK_LIMIT) -> SyncReport:
    """Mirror a course into the store, re-embedding what changed.

    New and changed resources (by ``updated_at``) are chunked, embedded,
    and indexed; deleted resources drop out; per-resource failures are
    reported without aborting the sync. A sync with no changes rewrites
    nothing, so back-to-back syncs leave the store byte-identical.
    """
    descriptors = lms.list_resources(course_id)
    try:
        existing = store.load_resources(course_id)
    except NotFoundError:
        existing = {}
    old_index = store.load_course_index(course_id)
    index_entries: dict[str, list[EmbeddedChunk]] = {}
    if old_index is not None:
        for entry in old_index.entries:
            index_entries.setdefault(entry.chunk.resource_id, []).append(entry)

    report = SyncReport()
    resources: dict[str, Resource] = {}
    fetched_ids = set()
    changed = False

    for descriptor in descriptors:
        fetched_ids.add(descriptor.id)
        previous = existing.get(descriptor.id)
        unchanged = previous is not None and previous.updated_at == descriptor.updated_at
        if unchanged:
            resources[descriptor.id] = previous
            continue
        try:
            content = lms.fetch_resource_body(course_id, descriptor)
            resource = _build_resource(course_id, descriptor, content)
            # Disabled resources are chunked too, marked excluded, so an
            # instructor toggle takes effect without a re-sync; search
            # filters them out by the enabled mirror.
            chunk_source = (
                resource if resource.enabled else resource.with_flags(enabled=True)
            )
            chunk_vectors = embed_chunks(
                embedder, bypass_or_parse(chunk_source, chunk_limit)
            )
            failed_chunks = [cv for cv in chunk_vectors if cv.error is not None]
            if failed_chunks:
                raise ProviderError(
                    f"embedding failed for {len(failed_chunks)} chunk(s)"
                )
            index_entries[resource.id] = [
                EmbeddedChunk(
                    chunk=cv.chunk,
                    vector=cv.vector,
                    resource_kind=resource.kind,
                    resource_title=resource.title,
                    priority_tier=resource.priority_tier,
                    enabled=resource.enabled,
                    protected=resource.protected,
                )
                for cv in chunk_vectors
            ]
            resources[resource.id] = resource
            changed = True
            if previous is None:
                report.added += 1
            else:
                report.updated += 1
        except Exception as exc:
            report.failed += 1
            report.failures.append(f"{descriptor.id}: {exc}")
            if previous is not None:
                resources[descriptor.id] = previous

    for resource_id in set(existing) - fetched_ids:
        index_entries.pop(resource_id, None)
        report.removed += 1
        changed = True

    if changed or not store.has_course(course_id):
        ordered_entries: list[EmbeddedChunk] = []
        for resource_id in sorted(resources):
            ordered_entries.extend(index_entries.get(resource_id, []))
        index = CourseIndex(course_id, embedder.dim, embedder.name, ordered_entries)
        store.save_resources(course_id, resources.values())
        store.save_course_index(course_id, index)
        courses = {c["id"]: c for c in lms.list_courses()}
        meta = courses.get(course_id, {"id": course_id, "title": course_id})
        store.save_course_meta(course_id, meta)
    return report
