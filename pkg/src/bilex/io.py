"""Readers and writers for the plain-text data formats.

Embeddings and anchor matrices use the word2vec text layout: a header line
``count dim`` followed by one ``word v1 ... v_dim`` line per word.
Dictionaries are two whitespace-separated tokens per line.  Context dumps
carry one subword-level token vector per line.  Every parser either returns
a fully validated value or raises :class:`FormatError` naming the offending
line; no partially parsed structure escapes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

logger = logging.getLogger(__name__)

# 17 significant digits guarantee an exact decimal round-trip for float64.
FLOAT_FMT = "%.17g"


class FormatError(ValueError):
    """An input file violated its format contract."""

    def __init__(self, path, message, lineno=None):
        location = f"{path}:{lineno}" if lineno is not None else str(path)
        super().__init__(f"{location}: {message}")
        self.path = str(path)
        self.lineno = lineno


@dataclass(frozen=True)
class Vocabulary:
    """Ordered unique lowercase tokens; row i of any aligned matrix is words[i]."""

    words: tuple[str, ...]

    def __post_init__(self):
        index: dict[str, int] = {}
        for pos, word in enumerate(self.words):
            if word in index:
                raise ValueError(f"duplicate token {word!r} at rows {index[word]} and {pos}")
            index[word] = pos
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def position(self, word: str) -> int:
        return self.index[word]


@dataclass
class EmbeddingMatrix:
    """Dense real matrix with one row per vocabulary word."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-d, got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValueError("embedding matrix contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.data.shape[0]


@dataclass
class BilingualDictionary:
    """Ordered (source index, target index) pairs; one source may repeat."""

    pairs: list[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.pairs)

    def src_indices(self) -> np.ndarray:
        return np.array([s for s, _ in self.pairs], dtype=np.intp)

    def tgt_indices(self) -> np.ndarray:
        return np.array([t for _, t in self.pairs], dtype=np.intp)

    def sources(self) -> list[int]:
        """Distinct source indices in first-appearance order."""
        seen: dict[int, None] = {}
        for s, _ in self.pairs:
            seen.setdefault(s)
        return list(seen)

    def targets_of(self) -> dict[int, set[int]]:
        """Gold target set per source index."""
        out: dict[int, set[int]] = {}
        for s, t in self.pairs:
            out.setdefault(s, set()).add(t)
        return out

    def as_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.pairs)

    def check_bounds(self, n_src: int, n_tgt: int) -> None:
        for s, t in self.pairs:
            if not (0 <= s < n_src and 0 <= t < n_tgt):
                raise ValueError(f"dictionary pair ({s}, {t}) out of range for "
                                 f"vocabularies of size {n_src} and {n_tgt}")


@dataclass
class ContextRecord:
    """One subword vector of one occurrence of a word."""

    word: str
    context_id: int
    bpe_index: int
    bpe_count: int
    vector: np.ndarray


@dataclass
class DictionaryStats:
    retained: int
    dropped: int


def _data_lines(path: Path, fh) -> Iterator[tuple[int, str]]:
    """Yield (lineno, stripped line) skipping blank lines."""
    for lineno, line in enumerate(fh, start=1):
        stripped = line.strip()
        if stripped:
            yield lineno, stripped


def _parse_floats(path: Path, lineno: int, tokens: list[str]) -> np.ndarray:
    try:
        values = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError:
        raise FormatError(path, f"invalid float among {tokens!r}", lineno) from None
    if not np.isfinite(values).all():
        raise FormatError(path, "non-finite vector component", lineno)
    return values


def load_embeddings(path) -> tuple[Vocabulary, EmbeddingMatrix]:
    """Read a word2vec-text embedding file.

    Words are lowercased; when lowercasing creates duplicates the first
    occurrence wins and later rows are skipped.  The header declares how many
    data rows follow and their dimension; any arity or count mismatch is an
    error naming the offending line.
    """
    path = Path(path)
    with open(path, encoding="utf-8", errors="surrogateescape") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(path, "header must be 'count dim'", 1)
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(path, f"non-integer header {header!r}", 1) from None
        if count < 1 or dim < 1:
            raise FormatError(path, f"header declares count={count}, dim={dim}", 1)

        words: list[str] = []
        rows: list[np.ndarray] = []
        seen: set[str] = set()
        n_rows = 0
        skipped = 0
        for lineno, line in _data_lines(path, fh):
            n_rows += 1
            if n_rows > count:
                raise FormatError(path, f"more than the declared {count} rows", lineno)
            parts = line.split()
            if len(parts) != dim + 1:
                raise FormatError(
                    path, f"expected {dim} components, found {len(parts) - 1}", lineno)
            word = parts[0].lower()
            vector = _parse_floats(path, lineno, parts[1:])
            if word in seen:
                skipped += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(vector)
        if n_rows != count:
            raise FormatError(path, f"expected {count} rows, found {n_rows}")
    if skipped:
        logger.info("%s: skipped %d duplicate rows after lowercasing", path, skipped)
    return Vocabulary(tuple(words)), EmbeddingMatrix(np.vstack(rows))


def save_embeddings(path, words: Iterable[str], data: np.ndarray) -> None:
    """Write a word2vec-text file at full float64 precision."""
    words = list(words)
    data = np.asarray(data, dtype=np.float64)
    if len(words) != data.shape[0]:
        raise ValueError(f"{len(words)} words for {data.shape[0]} rows")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(words)} {data.shape[1]}\n")
        for word, row in zip(words, data):
            fh.write(word + " " + " ".join(FLOAT_FMT % v for v in row) + "\n")


def load_dictionary(path, src_vocab: Vocabulary,
                    tgt_vocab: Vocabulary) -> tuple[BilingualDictionary, DictionaryStats]:
    """Read a two-token-per-line dictionary, dropping out-of-vocabulary pairs.

    Duplicated lines and multiple targets per source are legal and kept in
    file order.  Raises when no pair survives the vocabulary filter; the
    message carries the retained/dropped counts.
    """
    path = Path(path)
    retained: list[tuple[int, int]] = []
    dropped = 0
    with open(path, encoding="utf-8", errors="surrogateescape") as fh:
        for lineno, line in _data_lines(path, fh):
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(path, f"expected two tokens, found {len(parts)}", lineno)
            src, tgt = parts[0].lower(), parts[1].lower()
            if src in src_vocab and tgt in tgt_vocab:
                retained.append((src_vocab.position(src), tgt_vocab.position(tgt)))
            else:
                dropped += 1
    stats = DictionaryStats(retained=len(retained), dropped=dropped)
    if not retained:
        raise FormatError(
            path, f"no usable pairs (0 retained, {dropped} dropped against the vocabularies)")
    logger.info("%s: %d pairs retained, %d dropped", path, stats.retained, stats.dropped)
    return BilingualDictionary(retained), stats


def save_dictionary(path, pairs: BilingualDictionary, src_vocab: Vocabulary,
                    tgt_vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s, t in pairs.pairs:
            fh.write(f"{src_vocab.words[s]} {tgt_vocab.words[t]}\n")


def stream_context_records(path) -> Iterator[ContextRecord]:
    """Yield token-level context vectors from a dump file, in file order.

    The header line declares the vector dimension; each following line is
    ``word context_id bpe_index bpe_count v1 ... v_dim``.  Grouping records
    into per-occurrence sets is the consumer's job.
    """
    path = Path(path)
    with open(path, encoding="utf-8", errors="surrogateescape") as fh:
        header = fh.readline().split()
        if len(header) != 1:
            raise FormatError(path, "header must be a single dimension value", 1)
        try:
            dim = int(header[0])
        except ValueError:
            raise FormatError(path, f"non-integer dimension {header[0]!r}", 1) from None
        if dim < 1:
            raise FormatError(path, f"dimension must be positive, got {dim}", 1)

        for lineno, line in _data_lines(path, fh):
            parts = line.split()
            if len(parts) != 4 + dim:
                raise FormatError(
                    path, f"expected {4 + dim} fields, found {len(parts)}", lineno)
            word = parts[0].lower()
            try:
                context_id, bpe_index, bpe_count = (int(parts[1]), int(parts[2]),
                                                    int(parts[3]))
            except ValueError:
                raise FormatError(path, f"invalid integer fields {parts[1:4]!r}",
                                  lineno) from None
            if context_id < 0:
                raise FormatError(path, f"negative context id {context_id}", lineno)
            if bpe_count < 1:
                raise FormatError(path, f"bpe count must be >= 1, got {bpe_count}", lineno)
            if not 0 <= bpe_index < bpe_count:
                raise FormatError(
                    path, f"bpe index {bpe_index} outside [0, {bpe_count})", lineno)
            vector = _parse_floats(path, lineno, parts[4:])
            yield ContextRecord(word, context_id, bpe_index, bpe_count, vector)


def save_context_records(path, dim: int, records: Iterable[ContextRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{dim}\n")
        for rec in records:
            if rec.vector.shape != (dim,):
                raise ValueError(f"record for {rec.word!r} has dimension "
                                 f"{rec.vector.shape[0]}, dump declares {dim}")
            fh.write(f"{rec.word} {rec.context_id} {rec.bpe_index} {rec.bpe_count} "
                     + " ".join(FLOAT_FMT % v for v in rec.vector) + "\n")
