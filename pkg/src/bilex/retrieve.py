"""Translation retrieval: cosine and CSLS scoring, similarity interpolation,
interpolation-weight tuning, and precision evaluation.

The score of a candidate pair interpolates the unified-space similarity with
the mapped-anchor-space similarity; CSLS corrects both terms for hubness.
All rankings break ties toward the lower index so retrieval is deterministic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .io import BilingualDictionary
from .spring import UnifiedSpace

logger = logging.getLogger(__name__)


@dataclass
class SimilarityConfig:
    """How candidate pairs are scored during inference."""

    anchor_weight: float = 0.1
    csls_k: int = 10
    mode: str = "csls"              # "cosine" | "csls"
    csls_combine: str = "per-term"  # "per-term" | "after-sum"

    def __post_init__(self):
        if self.anchor_weight < 0:
            raise ValueError(f"anchor weight must be >= 0, got {self.anchor_weight}")
        if self.mode not in ("cosine", "csls"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "csls" and self.csls_k < 1:
            raise ValueError(f"CSLS neighborhood size must be >= 1, got {self.csls_k}")
        if self.csls_combine not in ("per-term", "after-sum"):
            raise ValueError(f"unknown csls_combine {self.csls_combine!r}")


@dataclass
class RetrievalSpaces:
    """Everything induce() scores against: unified space plus mapped anchors."""

    unified: UnifiedSpace
    src_anchors_mapped: np.ndarray | None = None
    tgt_anchors_mapped: np.ndarray | None = None


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine of rows; all-zero rows score 0 against everything."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    an = np.linalg.norm(a, axis=1, keepdims=True)
    bn = np.linalg.norm(b, axis=1, keepdims=True)
    a = np.divide(a, an, out=np.zeros_like(a), where=an > 0)
    b = np.divide(b, bn, out=np.zeros_like(b), where=bn > 0)
    return a @ b.T


def csls_scores(sim: np.ndarray, k: int) -> np.ndarray:
    """Hubness-corrected scores: twice the similarity minus both mean
    k-nearest-neighborhood similarities.

    Rows are sources, columns targets; the row statistic averages each
    source's k best target similarities, the column statistic each target's
    k best source similarities.
    """
    sim = np.asarray(sim, dtype=np.float64)
    n_src, n_tgt = sim.shape
    if not (1 <= k < n_src and k < n_tgt):
        raise ValueError(f"k={k} out of range for a {n_src}x{n_tgt} similarity matrix")
    r_src = np.partition(sim, n_tgt - k, axis=1)[:, n_tgt - k:].mean(axis=1)
    r_tgt = np.partition(sim, n_src - k, axis=0)[n_src - k:, :].mean(axis=0)
    return 2.0 * sim - r_src[:, None] - r_tgt[None, :]


def _combine(cos_unified: np.ndarray, cos_anchor: np.ndarray | None,
             weight: float, cfg: SimilarityConfig) -> np.ndarray:
    if weight > 0 and cos_anchor is None:
        raise ValueError("anchor weight > 0 but no mapped anchors were given")
    if cfg.mode == "cosine":
        return cos_unified if weight == 0 else cos_unified + weight * cos_anchor
    if cfg.csls_combine == "after-sum":
        total = cos_unified if weight == 0 else cos_unified + weight * cos_anchor
        return csls_scores(total, cfg.csls_k)
    adjusted = csls_scores(cos_unified, cfg.csls_k)
    if weight > 0:
        adjusted = adjusted + weight * csls_scores(cos_anchor, cfg.csls_k)
    return adjusted


def pair_score_matrix(spaces: RetrievalSpaces, cfg: SimilarityConfig) -> np.ndarray:
    """Full |V_src| x |V_tgt| score matrix under the given config.

    With anchor weight 0 this reduces exactly to the unified-space score.  In
    CSLS mode the correction is applied to each cosine term separately by
    default, or once to the interpolated sum with ``csls_combine="after-sum"``.
    """
    cos_unified = cosine_matrix(spaces.unified.src, spaces.unified.tgt)
    cos_anchor = None
    if cfg.anchor_weight > 0:
        if spaces.src_anchors_mapped is None or spaces.tgt_anchors_mapped is None:
            raise ValueError("anchor weight > 0 but no mapped anchors were given")
        cos_anchor = cosine_matrix(spaces.src_anchors_mapped, spaces.tgt_anchors_mapped)
    return _combine(cos_unified, cos_anchor, cfg.anchor_weight, cfg)


def interpolated_scores(query: int, unified: UnifiedSpace,
                        src_anchors_mapped: np.ndarray | None,
                        tgt_anchors_mapped: np.ndarray | None,
                        cfg: SimilarityConfig) -> np.ndarray:
    """Score vector of one source word against the whole target vocabulary."""
    spaces = RetrievalSpaces(unified, src_anchors_mapped, tgt_anchors_mapped)
    return pair_score_matrix(spaces, cfg)[query]


def rank_rows(scores: np.ndarray, topn: int) -> tuple[np.ndarray, np.ndarray]:
    """Descending ranking per row, ties broken by lower column index."""
    topn = min(topn, scores.shape[1])
    order = np.argsort(-scores, axis=1, kind="stable")[:, :topn]
    ranked = np.take_along_axis(scores, order, axis=1)
    return order, ranked


def induce(queries: Sequence[int], spaces: RetrievalSpaces, cfg: SimilarityConfig,
           topn: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Ranked target candidates with scores for each query source index."""
    matrix = pair_score_matrix(spaces, cfg)
    queries = np.asarray(list(queries), dtype=np.intp)
    return rank_rows(matrix[queries], topn)


def precision_at_1(predictions: Mapping[int, int], gold: BilingualDictionary) -> float:
    """Percentage of query source words whose prediction is one of its gold targets."""
    if not predictions:
        raise ValueError("precision@1 needs at least one query")
    targets = gold.targets_of()
    correct = 0
    for src, tgt in predictions.items():
        if src not in targets:
            raise ValueError(f"prediction for source index {src} absent from the gold dictionary")
        correct += int(tgt) in targets[src]
    return 100.0 * correct / len(predictions)


def top1_predictions(queries: Sequence[int], spaces: RetrievalSpaces,
                     cfg: SimilarityConfig) -> dict[int, int]:
    indices, _ = induce(queries, spaces, cfg, topn=1)
    return {int(q): int(t[0]) for q, t in zip(queries, indices)}


def default_anchor_weight_grid() -> tuple[float, ...]:
    """0.05 through 0.30 in steps of 0.01 (26 candidate weights)."""
    return tuple(round(0.05 + 0.01 * i, 2) for i in range(26))


def _sweep(spaces: RetrievalSpaces, cfg: SimilarityConfig,
           grid: Sequence[float]) -> Iterable[tuple[float, np.ndarray]]:
    """Score matrices across the weight grid, hoisting weight-independent work."""
    cos_unified = cosine_matrix(spaces.unified.src, spaces.unified.tgt)
    if spaces.src_anchors_mapped is None or spaces.tgt_anchors_mapped is None:
        raise ValueError("weight tuning needs mapped anchors on both sides")
    cos_anchor = cosine_matrix(spaces.src_anchors_mapped, spaces.tgt_anchors_mapped)
    if cfg.mode == "csls" and cfg.csls_combine == "per-term":
        cos_unified = csls_scores(cos_unified, cfg.csls_k)
        cos_anchor = csls_scores(cos_anchor, cfg.csls_k)
        for weight in grid:
            yield weight, cos_unified + weight * cos_anchor
    elif cfg.mode == "csls":
        for weight in grid:
            yield weight, csls_scores(cos_unified + weight * cos_anchor, cfg.csls_k)
    else:
        for weight in grid:
            yield weight, cos_unified + weight * cos_anchor


def tune_anchor_weight_supervised(val_pairs: BilingualDictionary,
                                  spaces: RetrievalSpaces, cfg: SimilarityConfig,
                                  grid: Sequence[float] | None = None) -> float:
    """Grid point maximizing validation P@1; ties go to the smaller weight."""
    grid = default_anchor_weight_grid() if grid is None else tuple(grid)
    if not grid:
        raise ValueError("empty tuning grid")
    queries = np.asarray(val_pairs.sources(), dtype=np.intp)
    targets = val_pairs.targets_of()
    best_weight, best_p1 = None, -1.0
    for weight, matrix in _sweep(spaces, cfg, grid):
        top1 = np.argmax(matrix[queries], axis=1)
        p1 = 100.0 * sum(int(t) in targets[int(q)]
                         for q, t in zip(queries, top1)) / len(queries)
        if p1 > best_p1:
            best_weight, best_p1 = weight, p1
    logger.info("supervised weight tuning: best %.2f at P@1 %.2f", best_weight, best_p1)
    return best_weight


def tune_anchor_weight_unsupervised(val_sources: Sequence[int],
                                    forward: RetrievalSpaces,
                                    backward: RetrievalSpaces,
                                    cfg: SimilarityConfig,
                                    grid: Sequence[float] | None = None) -> float:
    """Pick the weight whose source->target->source round trip returns most
    sources to themselves; ties go to the smaller weight.

    ``backward`` holds the models trained in the reverse direction, indexed so
    that its "source" side is the forward target language.
    """
    grid = default_anchor_weight_grid() if grid is None else tuple(grid)
    if not grid:
        raise ValueError("empty tuning grid")
    queries = np.asarray(list(val_sources), dtype=np.intp)
    if queries.size == 0:
        raise ValueError("round-trip tuning needs at least one validation word")
    forward_sweep = _sweep(forward, cfg, grid)
    backward_sweep = _sweep(backward, cfg, grid)
    best_weight, best_acc = None, -1.0
    for (weight, fwd), (_, bwd) in zip(forward_sweep, backward_sweep):
        hops = np.argmax(fwd[queries], axis=1)
        back = np.argmax(bwd[hops], axis=1)
        acc = float(np.mean(back == queries))
        if acc > best_acc:
            best_weight, best_acc = weight, acc
    logger.info("round-trip weight tuning: best %.2f at accuracy %.3f",
                best_weight, best_acc)
    return best_weight
