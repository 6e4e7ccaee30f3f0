"""Independent reference implementations used as test oracles.

These deliberately re-derive expected behavior through different code
paths than the package (character-cursor scanning instead of word-span
lists, scalar math instead of numpy) so that implementation bugs cannot
hide in shared code.
"""

from __future__ import annotations

import math


def reference_chunk_texts(body: str, limit: int) -> list[str]:
    """Greedy sentence-then-word packing, re-implemented with a cursor."""
    chunks: list[str] = []
    pos = 0
    n = len(body)
    while pos < n:
        if body[pos].isspace():
            pos += 1
            continue
        # End of the word starting at pos.
        word_end = pos
        while word_end < n and not body[word_end].isspace():
            word_end += 1
        if word_end - pos > limit:
            while word_end - pos > limit:
                chunks.append(body[pos : pos + limit])
                pos += limit
            chunks.append(body[pos:word_end])
            pos = word_end
            continue

        window_limit = pos + limit
        sentence_cut = -1
        word_cut = -1
        consumed_all_words = False
        cursor = pos
        while True:
            if cursor >= n:
                consumed_all_words = True
                break
            end = cursor
            while end < n and not body[end].isspace():
                end += 1
            if end > window_limit:
                break
            word_cut = end
            if body[end - 1] in ".!?":
                sentence_cut = end
            cursor = end
            while cursor < n and body[cursor].isspace():
                cursor += 1
        if word_cut == -1:
            raise AssertionError("first word must fit; oversized handled above")
        if consumed_all_words:
            cut = word_cut  # document end: greedy takes everything that fits
        elif sentence_cut != -1:
            cut = sentence_cut
        else:
            cut = word_cut
        chunks.append(body[pos:cut])
        pos = cut
    return chunks


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def reference_cosine(a: list[float], b: list[float]) -> float:
    """Scalar cosine, no numpy."""
    assert len(a) == len(b)
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def reference_partition(size: int, limit: int) -> list[tuple[int, int]]:
    """Partition [0, size) into ceil(size/limit) contiguous ranges."""
    if size <= 0:
        return []
    count = -(-size // limit)
    ranges = []
    for i in range(count):
        start = i * limit
        ranges.append((start, min(start + limit, size)))
    return ranges
