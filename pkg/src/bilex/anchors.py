"""Per-word average contextual anchors.

A word occurring in several sentences yields one vector per subword unit and
occurrence.  The anchor averages the subword vectors within each occurrence
first, then averages across occurrences, optionally subsampling occurrences
to a fixed budget with a seeded draw.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .io import ContextRecord, Vocabulary, load_embeddings

logger = logging.getLogger(__name__)


@dataclass
class AnchorMatrix:
    """Row-per-word anchor matrix plus the number of contexts each row averaged."""

    data: np.ndarray
    coverage: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.coverage = np.asarray(self.coverage, dtype=np.intp)
        if self.data.ndim != 2:
            raise ValueError(f"anchor matrix must be 2-d, got shape {self.data.shape}")
        if self.coverage.shape != (self.data.shape[0],):
            raise ValueError("coverage length must equal the row count")
        if not np.isfinite(self.data).all():
            raise ValueError("anchor matrix contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def covered(self) -> np.ndarray:
        """Boolean mask of rows built from at least one context."""
        return self.coverage > 0


def build_anchors(records: Iterable[ContextRecord], vocab: Vocabulary,
                  max_contexts: int = 10, rng_seed: int = 13) -> AnchorMatrix:
    """Average contextual vectors into one anchor per vocabulary word.

    Occurrence groups are keyed by (word, context_id); a group is complete
    when all of its declared subword slots are present exactly once.  Complete
    groups are averaged over their subwords, sorted by context id, subsampled
    to ``max_contexts`` with a per-word seeded draw, and averaged again.  The
    result is therefore independent of record order in the input.  Words with
    no complete group get a zero row and coverage 0.
    """
    if max_contexts < 1:
        raise ValueError(f"max_contexts must be >= 1, got {max_contexts}")

    # word position -> context_id -> {bpe_index: vector}; None marks a spoiled group
    groups: dict[int, dict[int, dict[int, np.ndarray] | None]] = {}
    counts: dict[tuple[int, int], int] = {}
    dim = None
    discarded = 0
    for rec in records:
        if dim is None:
            dim = rec.vector.shape[0]
        if rec.word not in vocab:
            continue
        pos = vocab.position(rec.word)
        per_word = groups.setdefault(pos, {})
        key = (pos, rec.context_id)
        if key not in counts:
            counts[key] = rec.bpe_count
            per_word[rec.context_id] = {}
        group = per_word[rec.context_id]
        if group is None:
            continue
        if rec.bpe_count != counts[key] or rec.bpe_index in group:
            # conflicting declarations or a duplicated slot spoil the group
            per_word[rec.context_id] = None
            discarded += 1
            continue
        group[rec.bpe_index] = rec.vector

    if dim is None:
        raise ValueError("context stream is empty, anchor dimension unknown")

    data = np.zeros((len(vocab), dim), dtype=np.float64)
    coverage = np.zeros(len(vocab), dtype=np.intp)
    for pos, per_word in groups.items():
        means = []
        for context_id in sorted(per_word):
            group = per_word[context_id]
            if group is None:
                continue
            expected = counts[(pos, context_id)]
            if len(group) != expected:
                discarded += 1
                continue
            means.append(np.mean([group[i] for i in range(expected)], axis=0))
        if not means:
            continue
        if len(means) > max_contexts:
            rng = np.random.default_rng([rng_seed, pos])
            chosen = rng.choice(len(means), size=max_contexts, replace=False)
            means = [means[i] for i in chosen]
        data[pos] = np.mean(means, axis=0)
        coverage[pos] = len(means)

    if discarded:
        logger.warning("discarded %d incomplete or inconsistent context groups", discarded)
    uncovered = int((coverage == 0).sum())
    if uncovered:
        logger.info("%d of %d words have no usable context", uncovered, len(vocab))
    return AnchorMatrix(data, coverage)


def anchor_coverage_report(anchors: AnchorMatrix) -> dict[int, int]:
    """Histogram of words by number of contexts averaged; key 0 flags uncovered words."""
    return dict(sorted(Counter(anchors.coverage.tolist()).items()))


def load_anchor_matrix(path, vocab: Vocabulary) -> AnchorMatrix:
    """Read an anchor file (embedding text format) aligned to ``vocab``.

    Words missing from the file get zero rows.  The text format does not
    carry context counts, so coverage degrades to a zero/nonzero-row flag.
    """
    file_vocab, matrix = load_embeddings(path)
    data = np.zeros((len(vocab), matrix.dim), dtype=np.float64)
    for row, word in enumerate(file_vocab.words):
        if word in vocab:
            data[vocab.position(word)] = matrix.data[row]
    coverage = (np.abs(data).sum(axis=1) > 0).astype(np.intp)
    return AnchorMatrix(data, coverage)
