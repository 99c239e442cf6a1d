"""Orthogonal alignment of two vector spaces.

Both languages are mapped into a shared space by a pair of orthogonal
matrices fitted in closed form from dictionary-paired rows, with an optional
self-learning loop that alternates fitting with dictionary re-induction when
no training dictionary is available.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .anchors import AnchorMatrix
from .io import BilingualDictionary, EmbeddingMatrix, Vocabulary
from .retrieve import cosine_matrix, csls_scores

logger = logging.getLogger(__name__)

DEFAULT_NORMALIZE_STEPS = ("unit", "center", "unit")


@dataclass
class MappingPair:
    """Orthogonal maps taking the source and target spaces into a shared one."""

    src: np.ndarray
    tgt: np.ndarray

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.float64)
        self.tgt = np.asarray(self.tgt, dtype=np.float64)
        for name, w in (("src", self.src), ("tgt", self.tgt)):
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError(f"{name} map must be square, got shape {w.shape}")
        if self.src.shape != self.tgt.shape:
            raise ValueError("both maps must share one dimension")

    @property
    def dim(self) -> int:
        return self.src.shape[0]

    def orthogonality_defect(self) -> float:
        """max |W^T W - I| over both maps."""
        eye = np.eye(self.dim)
        return max(
            float(np.abs(self.src.T @ self.src - eye).max()),
            float(np.abs(self.tgt.T @ self.tgt - eye).max()),
        )

    def apply(self, src_matrix: np.ndarray, tgt_matrix: np.ndarray):
        return src_matrix @ self.src, tgt_matrix @ self.tgt


@dataclass
class SelfLearnResult:
    mapping: MappingPair
    dictionary: BilingualDictionary
    iterations: int
    converged: bool


def _normalize_array(data: np.ndarray, steps: Sequence[str]) -> np.ndarray:
    out = np.array(data, dtype=np.float64, copy=True)
    zero_rows = np.linalg.norm(out, axis=1) == 0
    if zero_rows.any():
        logger.info("normalize: %d all-zero rows pass through unchanged",
                    int(zero_rows.sum()))
    live = ~zero_rows
    for step in steps:
        if step == "unit":
            norms = np.linalg.norm(out, axis=1, keepdims=True)
            np.divide(out, norms, out=out, where=norms > 0)
        elif step == "center":
            if live.any():
                out[live] -= out[live].mean(axis=0)
        else:
            raise ValueError(f"unknown normalization step {step!r}")
    return out


def normalize(matrix, steps=DEFAULT_NORMALIZE_STEPS):
    """Length-normalize rows, mean-center dimensions, length-normalize again.

    ``steps`` may be a comma-separated string or a sequence drawn from
    {"unit", "center"}.  All-zero rows (e.g. uncovered anchor rows) are left
    as zero and excluded from the centering mean.  Accepts a bare array or
    the embedding/anchor wrapper types and returns the same kind.
    """
    if isinstance(steps, str):
        steps = tuple(s.strip() for s in steps.split(",") if s.strip())
    if isinstance(matrix, EmbeddingMatrix):
        return EmbeddingMatrix(_normalize_array(matrix.data, steps))
    if isinstance(matrix, AnchorMatrix):
        return AnchorMatrix(_normalize_array(matrix.data, steps), matrix.coverage.copy())
    return _normalize_array(np.asarray(matrix), steps)


def procrustes(src: np.ndarray, tgt: np.ndarray,
               pairs: BilingualDictionary) -> MappingPair:
    """Closed-form orthogonal maps maximizing summed pair cosine.

    Stacks the dictionary-selected rows of each space, unit-scales them so the
    objective is the plain cosine sum, and takes the singular vectors of the
    cross-covariance: ``src`` gets the left factor, ``tgt`` the right one.
    Rank deficiency is fine; a dimension mismatch is not.
    """
    if not pairs.pairs:
        raise ValueError("cannot fit a mapping from an empty dictionary")
    if src.shape[1] != tgt.shape[1]:
        raise ValueError(f"dimension mismatch: {src.shape[1]} vs {tgt.shape[1]}")
    pairs.check_bounds(src.shape[0], tgt.shape[0])
    sx = src[pairs.src_indices()]
    ty = tgt[pairs.tgt_indices()]
    sx = sx / np.maximum(np.linalg.norm(sx, axis=1, keepdims=True), np.finfo(float).tiny)
    ty = ty / np.maximum(np.linalg.norm(ty, axis=1, keepdims=True), np.finfo(float).tiny)
    u, _, vt = np.linalg.svd(sx.T @ ty)
    return MappingPair(src=u, tgt=vt.T)


def mapping_objective(src: np.ndarray, tgt: np.ndarray, pairs: BilingualDictionary,
                      mapping: MappingPair) -> float:
    """Summed cosine over dictionary pairs in the mapped shared space."""
    sx, ty = mapping.apply(src[pairs.src_indices()], tgt[pairs.tgt_indices()])
    sx = sx / np.maximum(np.linalg.norm(sx, axis=1, keepdims=True), np.finfo(float).tiny)
    ty = ty / np.maximum(np.linalg.norm(ty, axis=1, keepdims=True), np.finfo(float).tiny)
    return float((sx * ty).sum())


def seed_dictionary_identical_strings(src_vocab: Vocabulary,
                                      tgt_vocab: Vocabulary) -> BilingualDictionary:
    """Pair every token the two vocabularies share with itself, by source order."""
    pairs = [(i, tgt_vocab.position(w)) for i, w in enumerate(src_vocab.words)
             if w in tgt_vocab]
    if not pairs:
        raise ValueError("vocabularies share no tokens; cannot seed a dictionary")
    return BilingualDictionary(pairs)


def _induce_dictionary(src_mapped: np.ndarray, tgt_mapped: np.ndarray,
                       csls_k: int, direction: str) -> BilingualDictionary:
    """Top-1 pairs under CSLS in the mapped space, both directions combined."""
    adjusted = csls_scores(cosine_matrix(src_mapped, tgt_mapped), csls_k)
    forward = {(i, int(t)) for i, t in enumerate(np.argmax(adjusted, axis=1))}
    backward = {(int(s), j) for j, s in enumerate(np.argmax(adjusted, axis=0))}
    if direction == "union":
        combined = forward | backward
    elif direction == "intersection":
        combined = forward & backward
    elif direction == "forward":
        combined = forward
    else:
        raise ValueError(f"unknown induction direction {direction!r}")
    return BilingualDictionary(sorted(combined))


def self_learn(src: np.ndarray, tgt: np.ndarray, seed_pairs: BilingualDictionary,
               max_iters: int = 20, csls_k: int = 10,
               direction: str = "union") -> SelfLearnResult:
    """Alternate orthogonal fitting with CSLS dictionary re-induction.

    Each iteration fits the mapping on the current dictionary, then re-induces
    a dictionary from top-1 CSLS matches over the whole vocabularies (both
    directions, combined per ``direction``).  Stops as soon as the induced
    dictionary equals the one it was fitted from, or after ``max_iters``.
    """
    if not seed_pairs.pairs:
        raise ValueError("self-learning needs a non-empty seed dictionary")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    current = seed_pairs
    for iteration in range(1, max_iters + 1):
        mapping = procrustes(src, tgt, current)
        induced = _induce_dictionary(*mapping.apply(src, tgt), csls_k, direction)
        if not induced.pairs:
            raise RuntimeError("self-learning induced an empty dictionary")
        if induced.as_set() == current.as_set():
            logger.info("self-learning converged at iteration %d with %d pairs",
                        iteration, len(induced))
            return SelfLearnResult(mapping, induced, iteration, True)
        logger.info("self-learning iteration %d: %d pairs induced", iteration, len(induced))
        current = induced
    logger.warning("self-learning hit the %d-iteration cap without converging", max_iters)
    return SelfLearnResult(mapping, induced, max_iters, False)
