"""Per-course vector index and the ranking rule.

Search is exact: cosine against every enabled chunk, descending sort,
top-k cut, then a similarity threshold. Within bands of near-equal
scores, higher-priority resources (lower tier) win, with chunk id as the
final tie-break so results are fully deterministic. ``brute_force_search``
restates the same postcondition with no index structure and serves as
the equivalence oracle in tests.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Chunk, ResourceKind
from .embedding import cosine_similarity, is_degenerate
from .errors import ConfigError, DimensionMismatchError

INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SearchParams:
    top_k: int = 10
    threshold: float = 0.75
    tie_epsilon: float = 0.005

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be positive")
        if not -1.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [-1, 1]")


@dataclass
class EmbeddedChunk:
    chunk: Chunk
    vector: np.ndarray
    resource_kind: ResourceKind
    resource_title: str
    priority_tier: int
    enabled: bool = True
    protected: bool = False


@dataclass(frozen=True)
class RetrievalHit:
    chunk_id: str
    resource_id: str
    resource_title: str
    resource_kind: ResourceKind
    score: float
    rank: int


class CourseIndex:
    """Exact-search vector index over one course's embedded chunks."""

    def __init__(self, course_id: str, dim: int, provider_name: str,
                 entries: Optional[Iterable[EmbeddedChunk]] = None):
        self.course_id = course_id
        self.dim = dim
        self.provider_name = provider_name
        self.entries: list[EmbeddedChunk] = []
        for entry in entries or []:
            self.add(entry)

    def add(self, entry: EmbeddedChunk) -> None:
        if entry.vector.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"chunk {entry.chunk.id!r} has dim {entry.vector.shape[0]}, index dim {self.dim}"
            )
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def chunk_ids(self) -> set[str]:
        return {e.chunk.id for e in self.entries}

    def entry_by_chunk_id(self, chunk_id: str) -> Optional[EmbeddedChunk]:
        for entry in self.entries:
            if entry.chunk.id == chunk_id:
                return entry
        return None

    def set_resource_flags(self, resource_id: str, enabled: bool | None = None,
                           protected: bool | None = None) -> "CourseIndex":
        """A new index with updated flag mirrors; callers swap atomically."""
        updated = []
        for entry in self.entries:
            if entry.chunk.resource_id == resource_id:
                entry = replace(
                    entry,
                    enabled=entry.enabled if enabled is None else enabled,
                    protected=entry.protected if protected is None else protected,
                )
            updated.append(entry)
        return CourseIndex(self.course_id, self.dim, self.provider_name, updated)


def index_course(course_id: str, embedded_chunks: Sequence[EmbeddedChunk],
                 dim: int, provider_name: str) -> CourseIndex:
    """Build a fresh index; re-indexing a course replaces prior contents."""
    bad = [e.chunk.id for e in embedded_chunks if e.vector.shape[0] != dim]
    if bad:
        raise DimensionMismatchError(f"dim mismatch for chunks: {bad}")
    return CourseIndex(course_id, dim, provider_name, embedded_chunks)


def _tie_bands(ordered: list[tuple[float, EmbeddedChunk]], tie_epsilon: float
               ) -> list[tuple[float, EmbeddedChunk]]:
    """Reorder score-descending pairs inside epsilon bands.

    A band starts at the first unbanded element and absorbs following
    elements whose score is within ``tie_epsilon`` of the band head, so
    every band's spread is at most epsilon. Band members are ordered by
    ascending priority tier, then chunk id.
    """
    out: list[tuple[float, EmbeddedChunk]] = []
    i = 0
    while i < len(ordered):
        j = i + 1
        head = ordered[i][0]
        while j < len(ordered) and head - ordered[j][0] <= tie_epsilon:
            j += 1
        band = sorted(ordered[i:j], key=lambda p: (p[1].priority_tier, p[1].chunk.id))
        out.extend(band)
        i = j
    return out


def _to_hits(ordered: list[tuple[float, EmbeddedChunk]]) -> list[RetrievalHit]:
    return [
        RetrievalHit(
            chunk_id=e.chunk.id,
            resource_id=e.chunk.resource_id,
            resource_title=e.resource_title,
            resource_kind=e.resource_kind,
            score=score,
            rank=rank,
        )
        for rank, (score, e) in enumerate(ordered, start=1)
    ]


def search(index: CourseIndex, query_vector: np.ndarray,
           params: SearchParams = SearchParams()) -> list[RetrievalHit]:
    """Rank enabled chunks against the query.

    Zero-norm (degenerate) queries return no hits rather than erroring.
    """
    query = np.asarray(query_vector, dtype=np.float64)
    if query.shape[0] != index.dim:
        raise DimensionMismatchError(f"query dim {query.shape[0]} != index dim {index.dim}")
    if is_degenerate(query):
        return []
    scored = [
        (cosine_similarity(entry.vector, query), entry)
        for entry in index.entries
        if entry.enabled
    ]
    scored.sort(key=lambda p: (-p[0], p[1].priority_tier, p[1].chunk.id))
    kept = [p for p in scored[: params.top_k] if p[0] >= params.threshold]
    return _to_hits(_tie_bands(kept, params.tie_epsilon))


def brute_force_search(all_embedded_chunks: Sequence[EmbeddedChunk],
                       query_vector: np.ndarray,
                       params: SearchParams = SearchParams()) -> list[RetrievalHit]:
    """Literal restatement of the search postcondition, no index structure.

    Test oracle: must equal :func:`search` exactly on every input. Kept
    deliberately separate from the production path; only the cosine
    definition is shared.
    """
    query = np.asarray(query_vector, dtype=np.float64)
    dims = {e.vector.shape[0] for e in all_embedded_chunks} | {query.shape[0]}
    if len(dims) > 1:
        raise DimensionMismatchError(f"mixed dims: {sorted(dims)}")
    if is_degenerate(query):
        return []

    candidates = [e for e in all_embedded_chunks if e.enabled]
    pairs = [(cosine_similarity(e.vector, query), e) for e in candidates]

    # Top-k by repeated extraction of the best remaining candidate.
    remaining = list(range(len(pairs)))
    top: list[tuple[float, EmbeddedChunk]] = []
    while remaining and len(top) < params.top_k:
        best_pos = 0
        for pos in range(1, len(remaining)):
            score, entry = pairs[remaining[pos]]
            best_score, best_entry = pairs[remaining[best_pos]]
            better = score > best_score or (
                score == best_score
                and (entry.priority_tier, entry.chunk.id)
                < (best_entry.priority_tier, best_entry.chunk.id)
            )
            if better:
                best_pos = pos
        top.append(pairs[remaining.pop(best_pos)])

    kept = [p for p in top if p[0] >= params.threshold]

    # Band-wise priority ordering, restated.
    ordered: list[tuple[float, EmbeddedChunk]] = []
    start = 0
    while start < len(kept):
        head_score = kept[start][0]
        end = start
        while end < len(kept) and head_score - kept[end][0] <= params.tie_epsilon:
            end += 1
        band = kept[start:end]
        band.sort(key=lambda p: (p[1].priority_tier, p[1].chunk.id))
        ordered.extend(band)
        start = end

    return _to_hits(ordered)


@dataclass
class SourceRef:
    resource_id: str
    title: str
    score: float


@dataclass
class ContextPack:
    text: str
    sources: list[SourceRef] = field(default_factory=list)


def context_pack(index: CourseIndex, hits: Sequence[RetrievalHit],
                 char_budget: int = 4000) -> ContextPack:
    """Concatenate hit chunk texts in rank order, whole chunks only.

    Each chunk is prefixed with its resource title; accumulation stops
    before the block that would exceed ``char_budget``. The returned
    sources are exactly the resources whose text made it into the
    context, which is the provenance disclosed to users. Empty hits give
    an empty pack, the downstream abstention signal.
    """
    blocks: list[str] = []
    included: dict[str, SourceRef] = {}
    used = 0
    for hit in hits:
        entry = index.entry_by_chunk_id(hit.chunk_id)
        if entry is None:
            continue
        block = f"[{hit.resource_title}] {entry.chunk.text}"
        cost = len(block) + (2 if blocks else 0)  # separator "\n\n"
        if used + cost > char_budget:
            break
        blocks.append(block)
        used += cost
        ref = included.get(hit.resource_id)
        if ref is None or hit.score > ref.score:
            included[hit.resource_id] = SourceRef(hit.resource_id, hit.resource_title, hit.score)
    ordered_sources = sorted(included.values(), key=lambda s: -s.score)
    return ContextPack(text="\n\n".join(blocks), sources=ordered_sources)


def save_index(index: CourseIndex, path: str | Path) -> None:
    """Persist the index as a versioned JSON sidecar file."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "course_id": index.course_id,
        "dim": index.dim,
        "provider": index.provider_name,
        "chunk_count": len(index.entries),
        "entries": [
            {
                "chunk": {
                    "id": e.chunk.id,
                    "resource_id": e.chunk.resource_id,
                    "ordinal": e.chunk.ordinal,
                    "text": e.chunk.text,
                    "char_span": list(e.chunk.char_span),
                    "oversized_split": e.chunk.oversized_split,
                },
                "vector": e.vector.tolist(),
                "resource_kind": e.resource_kind.value,
                "resource_title": e.resource_title,
                "priority_tier": e.priority_tier,
                "enabled": e.enabled,
                "protected": e.protected,
            }
            for e in index.entries
        ],
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
    os.replace(tmp, path)


def load_index(path: str | Path, expect_dim: Optional[int] = None,
               expect_provider: Optional[str] = None) -> CourseIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise ConfigError(f"unsupported index format version: {version}")
    if expect_dim is not None and payload["dim"] != expect_dim:
        raise ConfigError(f"index dim {payload['dim']} != expected {expect_dim}")
    if expect_provider is not None and payload["provider"] != expect_provider:
        raise ConfigError(
            f"index provider {payload['provider']!r} != expected {expect_provider!r}"
        )
    entries = []
    for item in payload["entries"]:
        c = item["chunk"]
        entries.append(
            EmbeddedChunk(
                chunk=Chunk(
                    id=c["id"],
                    resource_id=c["resource_id"],
                    ordinal=c["ordinal"],
                    text=c["text"],
                    char_span=tuple(c["char_span"]),
                    oversized_split=c.get("oversized_split", False),
                ),
                vector=np.asarray(item["vector"], dtype=np.float64),
                resource_kind=ResourceKind(item["resource_kind"]),
                resource_title=item["resource_title"],
                priority_tier=item["priority_tier"],
                enabled=item["enabled"],
                protected=item.get("protected", False),
            )
        )
    return CourseIndex(payload["course_id"], payload["dim"], payload["provider"], entries)
