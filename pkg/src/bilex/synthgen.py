"""Deterministic synthetic bilingual worlds with known ground truth.

The two embedding spaces differ by a seeded random rotation plus Gaussian
noise; optionally a fraction of target rows is pushed through cluster-local
non-orthogonal affine maps, breaking the isometry exactly where a learned
correction should help.  Anchors are noisy linear images of the shared latent
positions, so they carry the information needed to undo the distortion.
Everything is a pure function of the seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .io import BilingualDictionary, Vocabulary


@dataclass
class SynthWorldConfig:
    n_words: int = 2000
    emb_dim: int = 50
    anchor_dim: int = 64
    seed: int = 7
    noise_sigma: float = 0.0
    deform_fraction: float = 0.0
    deform_magnitude: float = 0.6
    deform_clusters: int = 8
    anchor_fidelity: float = 1.0

    def __post_init__(self):
        if self.n_words < 10:
            raise ValueError(f"need at least 10 words, got {self.n_words}")
        if self.emb_dim < 2 or self.anchor_dim < 2:
            raise ValueError("dimensions must be >= 2")
        if not 0.0 <= self.deform_fraction <= 1.0:
            raise ValueError(f"deform fraction {self.deform_fraction} outside [0, 1]")
        if not 0.0 <= self.anchor_fidelity <= 1.0:
            raise ValueError(f"anchor fidelity {self.anchor_fidelity} outside [0, 1]")
        if self.noise_sigma < 0 or self.deform_magnitude < 0:
            raise ValueError("noise and deformation magnitudes must be >= 0")
        if self.deform_clusters < 1:
            raise ValueError("need at least one deformation cluster")


@dataclass
class SynthWorld:
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    src_emb: np.ndarray
    tgt_emb: np.ndarray
    src_anchors: np.ndarray
    tgt_anchors: np.ndarray
    gold: BilingualDictionary


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random rotation via sign-fixed QR."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _unit_rows(data: np.ndarray) -> np.ndarray:
    return data / np.linalg.norm(data, axis=1, keepdims=True)


def generate(cfg: SynthWorldConfig) -> SynthWorld:
    """Build a paired world; the gold dictionary is the identity pairing.

    Tokens w0..w{n-1} are shared across both vocabularies so identical-string
    seeding works in unsupervised experiments.
    """
    rng = np.random.default_rng(cfg.seed)
    n, d, dp = cfg.n_words, cfg.emb_dim, cfg.anchor_dim

    latent = _unit_rows(rng.standard_normal((n, d)))
    rotation = random_orthogonal(d, rng)
    tgt = latent @ rotation + cfg.noise_sigma * rng.standard_normal((n, d))

    n_deformed = int(round(cfg.deform_fraction * n))
    if n_deformed:
        chosen = rng.choice(n, size=n_deformed, replace=False)
        centroids = _unit_rows(rng.standard_normal((cfg.deform_clusters, d)))
        assignment = np.argmax(latent[chosen] @ centroids.T, axis=1)
        for cluster in range(cfg.deform_clusters):
            members = chosen[assignment == cluster]
            # draw the cluster map regardless so the stream layout is stable
            left = random_orthogonal(d, rng)
            right = random_orthogonal(d, rng)
            spread = np.exp(cfg.deform_magnitude * rng.uniform(-1.0, 1.0, d))
            shift = 0.1 * cfg.deform_magnitude * rng.standard_normal(d) / np.sqrt(d)
            if members.size:
                affine = (left * spread) @ right.T
                tgt[members] = tgt[members] @ affine + shift

    # anchors: fidelity-weighted linear image of the shared latent plus noise
    # at the same per-component scale
    src_proj = rng.standard_normal((d, dp)) / np.sqrt(d)
    tgt_proj = rng.standard_normal((d, dp)) / np.sqrt(d)
    src_noise = rng.standard_normal((n, dp)) / np.sqrt(d)
    tgt_noise = rng.standard_normal((n, dp)) / np.sqrt(d)
    fid = cfg.anchor_fidelity
    src_anchors = fid * (latent @ src_proj) + (1.0 - fid) * src_noise
    tgt_anchors = fid * (latent @ tgt_proj) + (1.0 - fid) * tgt_noise

    words = tuple(f"w{i}" for i in range(n))
    return SynthWorld(
        src_vocab=Vocabulary(words),
        tgt_vocab=Vocabulary(words),
        src_emb=latent,
        tgt_emb=tgt,
        src_anchors=src_anchors,
        tgt_anchors=tgt_anchors,
        gold=BilingualDictionary([(i, i) for i in range(n)]),
    )


def split_pairs(gold: BilingualDictionary, sizes: Sequence[int],
                seed: int) -> list[BilingualDictionary]:
    """Disjoint seeded splits of a dictionary, e.g. train/validation/test."""
    if sum(sizes) > len(gold.pairs):
        raise ValueError(f"splits of {sum(sizes)} pairs requested from "
                         f"{len(gold.pairs)} available")
    order = np.random.default_rng(seed).permutation(len(gold.pairs))
    out = []
    start = 0
    for size in sizes:
        chunk = order[start:start + size]
        out.append(BilingualDictionary([gold.pairs[i] for i in chunk]))
        start += size
    return out
