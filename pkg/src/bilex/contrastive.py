"""Contrastive training of the spring networks.

Each dictionary entry contributes one positive pair, weighted as heavily as
its mined negatives combined, minus the similarity of the source to each of
the best non-gold targets under the current model.  Only spring parameters
move; mapped embeddings and anchors stay fixed.  The unsupervised wrapper
re-trains on re-induced dictionaries until the dictionary stops changing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .io import BilingualDictionary
from .retrieve import (RetrievalSpaces, SimilarityConfig, cosine_matrix,
                       pair_score_matrix, precision_at_1)
from .spring import (SpringNet, SpringParams, UnifiedSpace, build_unified,
                     init_spring_params, spring_backward, unify)

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    negatives: int = 10
    epochs: int = 20
    batch_size: int = 128
    learning_rate: float = 1e-3
    optimizer: str = "adam"         # "adam" | "sgd"
    rng_seed: int = 13
    max_unsup_rounds: int = 10
    unsup_epochs_per_round: int = 5
    unsup_induction: str = "unified"  # "unified" | "interpolated"

    def __post_init__(self):
        if self.negatives < 1:
            raise ValueError(f"need at least one negative per entry, got {self.negatives}")
        for name in ("epochs", "batch_size", "max_unsup_rounds", "unsup_epochs_per_round"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.unsup_induction not in ("unified", "interpolated"):
            raise ValueError(f"unknown induction mode {self.unsup_induction!r}")


@dataclass
class TrainResult:
    params: SpringParams
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_p1: float = 0.0


@dataclass
class UnsupResult:
    params: SpringParams
    dictionary: BilingualDictionary
    rounds: int
    converged: bool
    history: list[dict] = field(default_factory=list)


def mine_negatives(unified: UnifiedSpace, pairs: BilingualDictionary,
                   n_negatives: int) -> list[np.ndarray]:
    """Best non-gold targets of each entry's source under the current model.

    Candidates are ranked by cosine against the entry's unified source row
    over the whole target vocabulary, excluding every gold target of that
    source word; ties go to the lower index.  If exclusion leaves fewer than
    requested, all remaining candidates are returned with a warning.
    """
    n_tgt = unified.tgt.shape[0]
    if n_negatives >= n_tgt:
        raise ValueError(f"{n_negatives} negatives requested from a "
                         f"{n_tgt}-word target vocabulary")
    gold = pairs.targets_of()
    sim = cosine_matrix(unified.src[pairs.src_indices()], unified.tgt)
    short = 0
    out: list[np.ndarray] = []
    for row, (src, _) in zip(sim, pairs.pairs):
        scores = row.copy()
        scores[list(gold[src])] = -np.inf
        ranked = np.argsort(-scores, kind="stable")
        available = n_tgt - len(gold[src])
        if available < n_negatives:
            short += 1
        out.append(ranked[:min(n_negatives, available)].astype(np.intp))
    if short:
        logger.warning("%d entries had fewer than %d candidates after excluding "
                       "gold targets", short, n_negatives)
    return out


def contrastive_loss(unified: UnifiedSpace, pairs: BilingualDictionary,
                     negatives: list[np.ndarray], n_negatives: int) -> float:
    """Negated sum over entries of (positive cosine copied once per negative
    slot, minus the negatives' cosines)."""
    if len(negatives) != len(pairs.pairs):
        raise ValueError("one negative list per dictionary entry is required")
    src_rows = unified.src[pairs.src_indices()]
    tgt_rows = unified.tgt[pairs.tgt_indices()]
    pos = _row_cosines(src_rows, tgt_rows)
    total = 0.0
    for i, negs in enumerate(negatives):
        if len(negs) > n_negatives:
            raise ValueError(f"entry {i} has {len(negs)} negatives, limit {n_negatives}")
        neg = _row_cosines(src_rows[i][None, :], unified.tgt[negs]).sum() if len(negs) else 0.0
        total += n_negatives * pos[i] - neg
    return -total


def _row_cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[0] == 1 and b.shape[0] > 1:
        a = np.broadcast_to(a, b.shape)
    an = np.linalg.norm(a, axis=1)
    bn = np.linalg.norm(b, axis=1)
    denom = np.maximum(an * bn, np.finfo(float).tiny)
    return (a * b).sum(axis=1) / denom


def _cosine_grad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d cos(a, b) / d a for row pairs."""
    an = np.maximum(np.linalg.norm(a, axis=1, keepdims=True), np.finfo(float).tiny)
    bn = np.maximum(np.linalg.norm(b, axis=1, keepdims=True), np.finfo(float).tiny)
    ah = a / an
    bh = b / bn
    cos = (ah * bh).sum(axis=1, keepdims=True)
    return (bh - cos * ah) / an


class _Optimizer:
    def __init__(self, params: SpringParams, cfg: TrainConfig):
        self.cfg = cfg
        if cfg.optimizer == "adam":
            self.step_count = 0
            self.moments = {}
            for side, net in (("src", params.src), ("tgt", params.tgt)):
                for name, arr in net.arrays():
                    self.moments[f"{side}.{name}"] = (np.zeros_like(arr),
                                                      np.zeros_like(arr))

    def step(self, params: SpringParams, grads_src: SpringNet, grads_tgt: SpringNet):
        lr = self.cfg.learning_rate
        if self.cfg.optimizer == "sgd":
            for net, grads in ((params.src, grads_src), (params.tgt, grads_tgt)):
                for (_, arr), (_, g) in zip(net.arrays(), grads.arrays()):
                    arr -= lr * g
            return
        # adaptive moment estimation with the usual decay constants
        self.step_count += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        correction1 = 1.0 - b1 ** self.step_count
        correction2 = 1.0 - b2 ** self.step_count
        for side, net, grads in (("src", params.src, grads_src),
                                 ("tgt", params.tgt, grads_tgt)):
            for (name, arr), (_, g) in zip(net.arrays(), grads.arrays()):
                m, v = self.moments[f"{side}.{name}"]
                m *= b1
                m += (1 - b1) * g
                v *= b2
                v += (1 - b2) * g * g
                arr -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)


def _batch_step(src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                params: SpringParams, entries: list[tuple[int, int]],
                negatives: list[np.ndarray], n_negatives: int):
    """Loss over a batch and spring-parameter gradients for both languages."""
    u_src = unify(src_mapped, src_anchors, params.src)
    u_tgt = unify(tgt_mapped, tgt_anchors, params.tgt)
    g_src = np.zeros_like(u_src)
    g_tgt = np.zeros_like(u_tgt)
    loss = 0.0
    for (s, t), negs in zip(entries, negatives):
        a = u_src[s][None, :]
        b = u_tgt[t][None, :]
        pos_cos = float(_row_cosines(a, b)[0])
        # positive term enters J times, so its gradient does too
        g_src[s] -= n_negatives * _cosine_grad(a, b)[0]
        g_tgt[t] -= n_negatives * _cosine_grad(b, a)[0]
        neg_cos = 0.0
        if len(negs):
            nb = u_tgt[negs]
            na = np.broadcast_to(a, nb.shape)
            neg_cos = float(_row_cosines(na, nb).sum())
            g_src[s] += _cosine_grad(na, nb).sum(axis=0)
            np.add.at(g_tgt, negs, _cosine_grad(nb, na))
        loss -= n_negatives * pos_cos - neg_cos
    grads_src = spring_backward(src_anchors, g_src, params.src)
    grads_tgt = spring_backward(tgt_anchors, g_tgt, params.tgt)
    return loss, grads_src, grads_tgt


def _validation_p1(src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                   params: SpringParams, val_pairs: BilingualDictionary) -> float:
    # plain cosine in the unified space: argmax_y cos(u_x, u_y)
    unified = build_unified(src_mapped, src_anchors, tgt_mapped, tgt_anchors, params)
    queries = val_pairs.sources()
    sim = cosine_matrix(unified.src[queries], unified.tgt)
    top1 = np.argmax(sim, axis=1)
    return precision_at_1({int(q): int(t) for q, t in zip(queries, top1)}, val_pairs)


def _fit_epochs(src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                params: SpringParams, pairs: BilingualDictionary,
                cfg: TrainConfig, epochs: int, rng: np.random.Generator,
                optimizer: _Optimizer) -> list[float]:
    """Run training epochs in place; returns the per-epoch summed loss."""
    losses = []
    for _ in range(epochs):
        unified = build_unified(src_mapped, src_anchors, tgt_mapped, tgt_anchors, params)
        negatives = mine_negatives(unified, pairs, cfg.negatives)
        order = rng.permutation(len(pairs.pairs))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            entries = [pairs.pairs[i] for i in batch]
            negs = [negatives[i] for i in batch]
            loss, g_src, g_tgt = _batch_step(src_mapped, tgt_mapped, src_anchors,
                                             tgt_anchors, params, entries, negs,
                                             cfg.negatives)
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite training loss {loss!r}; aborting")
            optimizer.step(params, g_src, g_tgt)
            epoch_loss += loss
        losses.append(epoch_loss)
    return losses


def train_supervised(src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                     train_pairs: BilingualDictionary,
                     val_pairs: BilingualDictionary, cfg: TrainConfig,
                     log=None) -> TrainResult:
    """Train both springs on a gold dictionary, keeping the epoch with the
    best validation P@1 under unified-space cosine retrieval.

    Negatives are re-mined from the current model once per epoch.  Mapped
    embeddings and anchors are never modified.  Deterministic given the
    config seed.
    """
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(2)
    params = init_spring_params(src_mapped.shape[1], src_anchors.shape[1],
                                seed=seeds[0])
    rng = np.random.default_rng(seeds[1])
    optimizer = _Optimizer(params, cfg)

    result = TrainResult(params=params.copy())
    result.best_val_p1 = _validation_p1(src_mapped, tgt_mapped, src_anchors,
                                        tgt_anchors, params, val_pairs)
    result.history.append({"epoch": 0, "loss": float("nan"),
                           "val_p1": result.best_val_p1})
    for epoch in range(1, cfg.epochs + 1):
        (loss,) = _fit_epochs(src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                              params, train_pairs, cfg, 1, rng, optimizer)
        val_p1 = _validation_p1(src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                                params, val_pairs)
        record = {"epoch": epoch, "loss": loss, "val_p1": val_p1}
        result.history.append(record)
        if log is not None:
            log(record)
        if val_p1 > result.best_val_p1:
            result.best_val_p1 = val_p1
            result.best_epoch = epoch
            result.params = params.copy()
        logger.info("epoch %d: loss %.4f, val P@1 %.2f", epoch, loss, val_p1)
    return result


def _induce_over_sources(sources, src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                         params, cfg: TrainConfig,
                         anchor_maps=None,
                         similarity: SimilarityConfig | None = None) -> BilingualDictionary:
    unified = build_unified(src_mapped, src_anchors, tgt_mapped, tgt_anchors, params)
    if cfg.unsup_induction == "interpolated":
        if anchor_maps is None or similarity is None:
            raise ValueError("interpolated induction needs mapped anchors and a "
                             "similarity config")
        spaces = RetrievalSpaces(unified, anchor_maps[0], anchor_maps[1])
        matrix = pair_score_matrix(spaces, similarity)
    else:
        matrix = cosine_matrix(unified.src, unified.tgt)
    top1 = np.argmax(matrix[sources], axis=1)
    return BilingualDictionary([(int(s), int(t)) for s, t in zip(sources, top1)])


def train_unsupervised(src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                       init_pairs: BilingualDictionary, cfg: TrainConfig,
                       anchor_maps=None,
                       similarity: SimilarityConfig | None = None,
                       log=None) -> UnsupResult:
    """Iterate spring training and dictionary re-induction to a fixed point.

    Each round trains a fresh model on the current dictionary for a fixed
    epoch budget, then re-induces top-1 translations for the same source-word
    set (unified-space cosine by default).  Stops when the dictionary repeats
    itself, or flags non-convergence at the round cap.
    """
    if not init_pairs.pairs:
        raise ValueError("unsupervised training needs a non-empty initial dictionary")
    sources = init_pairs.sources()
    current = init_pairs
    # identical seeds every round: a repeated dictionary then yields a repeated
    # model, so the loop has true fixed points
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(2)
    params = None
    history: list[dict] = []
    for round_no in range(1, cfg.max_unsup_rounds + 1):
        params = init_spring_params(src_mapped.shape[1], src_anchors.shape[1],
                                    seed=seeds[0])
        rng = np.random.default_rng(seeds[1])
        optimizer = _Optimizer(params, cfg)
        losses = _fit_epochs(src_mapped, tgt_mapped, src_anchors, tgt_anchors,
                             params, current, cfg, cfg.unsup_epochs_per_round,
                             rng, optimizer)
        induced = _induce_over_sources(sources, src_mapped, tgt_mapped, src_anchors,
                                       tgt_anchors, params, cfg, anchor_maps,
                                       similarity)
        record = {"round": round_no, "loss": losses[-1],
                  "dict_size": len(induced.pairs)}
        history.append(record)
        if log is not None:
            log(record)
        if induced.as_set() == current.as_set():
            logger.info("unsupervised loop converged after %d rounds", round_no)
            return UnsupResult(params, induced, round_no, True, history)
        current = induced
    logger.warning("unsupervised loop did not converge within %d rounds",
                   cfg.max_unsup_rounds)
    return UnsupResult(params, current, cfg.max_unsup_rounds, False, history)
