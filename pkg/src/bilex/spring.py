"""Spring network: anchor-conditioned offsets for mapped embeddings.

A two-layer tanh network per language turns a word's contextual anchor into a
bounded offset; the unified representation is the mapped static embedding
plus the offset scaled element-wise by a learned weight vector.  Forward and
reverse-mode gradients are written out explicitly so they can be checked
against finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARAM_FIELDS = ("w0", "b0", "w1", "b1", "offset_weight")


@dataclass
class SpringNet:
    """One language's spring: two tanh layers plus the offset weight vector."""

    w0: np.ndarray            # (anchor_dim, emb_dim)
    b0: np.ndarray            # (emb_dim,)
    w1: np.ndarray            # (emb_dim, emb_dim)
    b1: np.ndarray            # (emb_dim,)
    offset_weight: np.ndarray  # (emb_dim,)

    def __post_init__(self):
        for name in PARAM_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        d = self.w0.shape[1]
        expected = {"w0": (self.w0.shape[0], d), "b0": (d,), "w1": (d, d),
                    "b1": (d,), "offset_weight": (d,)}
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValueError(f"{name} has shape {actual}, expected {shape}")
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} contains non-finite values")

    @property
    def emb_dim(self) -> int:
        return self.w0.shape[1]

    @property
    def anchor_dim(self) -> int:
        return self.w0.shape[0]

    def arrays(self):
        """(name, array) view over all parameter fields, in a fixed order."""
        return [(name, getattr(self, name)) for name in PARAM_FIELDS]

    def copy(self) -> "SpringNet":
        return SpringNet(**{name: getattr(self, name).copy() for name in PARAM_FIELDS})

    @classmethod
    def zeros(cls, emb_dim: int, anchor_dim: int) -> "SpringNet":
        return cls(w0=np.zeros((anchor_dim, emb_dim)), b0=np.zeros(emb_dim),
                   w1=np.zeros((emb_dim, emb_dim)), b1=np.zeros(emb_dim),
                   offset_weight=np.zeros(emb_dim))


@dataclass
class SpringParams:
    """Spring networks for both languages."""

    src: SpringNet
    tgt: SpringNet

    def __post_init__(self):
        if (self.src.emb_dim, self.src.anchor_dim) != (self.tgt.emb_dim,
                                                       self.tgt.anchor_dim):
            raise ValueError("source and target springs must share dimensions")

    @property
    def emb_dim(self) -> int:
        return self.src.emb_dim

    @property
    def anchor_dim(self) -> int:
        return self.src.anchor_dim

    def copy(self) -> "SpringParams":
        return SpringParams(self.src.copy(), self.tgt.copy())


@dataclass
class UnifiedSpace:
    """Mapped embeddings pulled by spring offsets, one matrix per language."""

    src: np.ndarray
    tgt: np.ndarray


def init_spring_net(emb_dim: int, anchor_dim: int, rng: np.random.Generator,
                    offset_weight_init: float = 0.1) -> SpringNet:
    # uniform in +-1/sqrt(fan_in) keeps pre-activations in tanh's linear regime,
    # so training starts close to the plain mapped embeddings
    return SpringNet(
        w0=rng.uniform(-1, 1, (anchor_dim, emb_dim)) / np.sqrt(anchor_dim),
        b0=np.zeros(emb_dim),
        w1=rng.uniform(-1, 1, (emb_dim, emb_dim)) / np.sqrt(emb_dim),
        b1=np.zeros(emb_dim),
        offset_weight=np.full(emb_dim, offset_weight_init),
    )


def init_spring_params(emb_dim: int, anchor_dim: int, seed: int,
                       offset_weight_init: float = 0.1) -> SpringParams:
    rng = np.random.default_rng(seed)
    return SpringParams(
        src=init_spring_net(emb_dim, anchor_dim, rng, offset_weight_init),
        tgt=init_spring_net(emb_dim, anchor_dim, rng, offset_weight_init),
    )


def spring_forward(anchors: np.ndarray, net: SpringNet) -> np.ndarray:
    """Offsets tanh(tanh(A w0 + b0) w1 + b1); every component lies in (-1, 1)."""
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.ndim != 2 or anchors.shape[1] != net.anchor_dim:
        raise ValueError(f"anchor rows have shape {anchors.shape}, "
                         f"spring expects (*, {net.anchor_dim})")
    hidden = np.tanh(anchors @ net.w0 + net.b0)
    return np.tanh(hidden @ net.w1 + net.b1)


def unify(mapped_emb: np.ndarray, anchors: np.ndarray, net: SpringNet,
          offset_weight: np.ndarray | None = None) -> np.ndarray:
    """Mapped embeddings plus offset-weighted spring output, row-aligned."""
    mapped_emb = np.asarray(mapped_emb, dtype=np.float64)
    if mapped_emb.shape[0] != np.asarray(anchors).shape[0]:
        raise ValueError("embedding and anchor row counts differ")
    weight = net.offset_weight if offset_weight is None else np.asarray(offset_weight)
    if weight.shape != (net.emb_dim,):
        raise ValueError(f"offset weight has shape {weight.shape}, "
                         f"expected ({net.emb_dim},)")
    return mapped_emb + spring_forward(anchors, net) * weight


def build_unified(src_mapped: np.ndarray, src_anchors: np.ndarray,
                  tgt_mapped: np.ndarray, tgt_anchors: np.ndarray,
                  params: SpringParams) -> UnifiedSpace:
    return UnifiedSpace(src=unify(src_mapped, src_anchors, params.src),
                        tgt=unify(tgt_mapped, tgt_anchors, params.tgt))


def spring_backward(anchors: np.ndarray, upstream: np.ndarray,
                    net: SpringNet) -> SpringNet:
    """Gradients of sum(upstream * U) w.r.t. all parameters of one spring.

    ``upstream`` holds dLoss/dU for the given anchor rows; embeddings and
    anchors are treated as constants.  Returns a SpringNet-shaped container
    of gradients.
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (anchors.shape[0], net.emb_dim):
        raise ValueError(f"upstream gradient has shape {upstream.shape}, "
                         f"expected ({anchors.shape[0]}, {net.emb_dim})")
    hidden = np.tanh(anchors @ net.w0 + net.b0)
    offsets = np.tanh(hidden @ net.w1 + net.b1)

    d_offset_weight = (upstream * offsets).sum(axis=0)
    d_offsets = upstream * net.offset_weight
    d_z1 = d_offsets * (1.0 - offsets * offsets)
    d_w1 = hidden.T @ d_z1
    d_b1 = d_z1.sum(axis=0)
    d_hidden = d_z1 @ net.w1.T
    d_z0 = d_hidden * (1.0 - hidden * hidden)
    d_w0 = anchors.T @ d_z0
    d_b0 = d_z0.sum(axis=0)
    return SpringNet(w0=d_w0, b0=d_b0, w1=d_w1, b1=d_b1,
                     offset_weight=d_offset_weight)
