"""Versioned plain-text checkpoints for a trained model.

A checkpoint stores both orthogonal mapping pairs, the spring parameters, the
interpolation weight, and the CSLS neighborhood size.  Values are written
with 17 significant digits, so a save/load round trip reproduces every matrix
entry exactly and therefore every induced ranking.  The text layout (named
sections, then rows of decimals) keeps checkpoints diffable.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .align import MappingPair
from .io import FLOAT_FMT, FormatError
from .spring import PARAM_FIELDS, SpringNet, SpringParams

FORMAT_VERSION = "v1"
_MAGIC = "bilex-checkpoint"


@dataclass
class Checkpoint:
    emb_map: MappingPair
    anchor_map: MappingPair
    spring: SpringParams
    anchor_weight: float
    csls_k: int
    version: str = FORMAT_VERSION

    def __post_init__(self):
        if self.version != FORMAT_VERSION:
            raise ValueError(f"unrecognized checkpoint version {self.version!r}")
        if self.anchor_weight < 0:
            raise ValueError(f"anchor weight must be >= 0, got {self.anchor_weight}")
        if self.csls_k < 1:
            raise ValueError(f"CSLS neighborhood size must be >= 1, got {self.csls_k}")
        if self.spring.emb_dim != self.emb_map.dim:
            raise ValueError(f"spring embedding dimension {self.spring.emb_dim} "
                             f"differs from the embedding map's {self.emb_map.dim}")
        if self.spring.anchor_dim != self.anchor_map.dim:
            raise ValueError(f"spring anchor dimension {self.spring.anchor_dim} "
                             f"differs from the anchor map's {self.anchor_map.dim}")

    def require_dims(self, emb_dim: int, anchor_dim: int) -> None:
        """Reject a checkpoint that does not fit the data it is applied to."""
        if self.emb_map.dim != emb_dim:
            raise ValueError(f"checkpoint maps {self.emb_map.dim}-dimensional "
                             f"embeddings, data has {emb_dim}")
        if self.anchor_map.dim != anchor_dim:
            raise ValueError(f"checkpoint maps {self.anchor_map.dim}-dimensional "
                             f"anchors, data has {anchor_dim}")


def _write_matrix(fh, data: np.ndarray) -> None:
    for row in np.atleast_2d(data):
        fh.write(" ".join(FLOAT_FMT % v for v in row) + "\n")


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_MAGIC} {ckpt.version}\n")
        fh.write(f"anchor_weight {FLOAT_FMT % ckpt.anchor_weight}\n")
        fh.write(f"csls_k {ckpt.csls_k}\n")
        fh.write(f"emb_map {ckpt.emb_map.dim}\n")
        _write_matrix(fh, ckpt.emb_map.src)
        _write_matrix(fh, ckpt.emb_map.tgt)
        fh.write(f"anchor_map {ckpt.anchor_map.dim}\n")
        _write_matrix(fh, ckpt.anchor_map.src)
        _write_matrix(fh, ckpt.anchor_map.tgt)
        fh.write(f"spring {ckpt.spring.emb_dim} {ckpt.spring.anchor_dim}\n")
        for net in (ckpt.spring.src, ckpt.spring.tgt):
            for _, arr in net.arrays():
                _write_matrix(fh, arr)


class _Reader:
    def __init__(self, path):
        self.path = Path(path)
        with open(self.path, encoding="utf-8") as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0

    def next_line(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise FormatError(self.path, f"unexpected end of file, expected {what}",
                              self.pos + 1)
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def section(self, name: str, n_fields: int) -> list[str]:
        parts = self.next_line(f"section '{name}'").split()
        if len(parts) != 1 + n_fields or parts[0] != name:
            raise FormatError(self.path, f"expected section '{name}', got "
                              f"{' '.join(parts)!r}", self.pos)
        return parts[1:]

    def matrix(self, rows: int, cols: int, what: str) -> np.ndarray:
        out = np.empty((rows, cols), dtype=np.float64)
        for r in range(rows):
            parts = self.next_line(f"{what} row {r}").split()
            if len(parts) != cols:
                raise FormatError(self.path, f"{what} row {r} has {len(parts)} "
                                  f"values, expected {cols}", self.pos)
            try:
                out[r] = [float(p) for p in parts]
            except ValueError:
                raise FormatError(self.path, f"invalid float in {what} row {r}",
                                  self.pos) from None
        return out


def load_checkpoint(path) -> Checkpoint:
    reader = _Reader(path)
    header = reader.next_line("header").split()
    if len(header) != 2 or header[0] != _MAGIC:
        raise FormatError(reader.path, "not a checkpoint file", 1)
    if header[1] != FORMAT_VERSION:
        raise FormatError(reader.path, f"unsupported checkpoint version {header[1]!r}, "
                          f"expected {FORMAT_VERSION}", 1)
    version = header[1]

    (weight_str,) = reader.section("anchor_weight", 1)
    (k_str,) = reader.section("csls_k", 1)
    try:
        anchor_weight = float(weight_str)
        csls_k = int(k_str)
    except ValueError:
        raise FormatError(reader.path, "invalid anchor_weight or csls_k value") from None

    def mapping(name: str) -> MappingPair:
        (dim_str,) = reader.section(name, 1)
        dim = int(dim_str)
        pair = MappingPair(src=reader.matrix(dim, dim, f"{name}.src"),
                           tgt=reader.matrix(dim, dim, f"{name}.tgt"))
        if pair.orthogonality_defect() >= 1e-6:
            raise FormatError(reader.path, f"{name} matrices are not orthogonal")
        return pair

    emb_map = mapping("emb_map")
    anchor_map = mapping("anchor_map")

    emb_dim_str, anchor_dim_str = reader.section("spring", 2)
    emb_dim, anchor_dim = int(emb_dim_str), int(anchor_dim_str)
    if emb_dim != emb_map.dim or anchor_dim != anchor_map.dim:
        raise FormatError(reader.path, f"spring dimensions ({emb_dim}, {anchor_dim}) "
                          f"do not match maps ({emb_map.dim}, {anchor_map.dim})")
    shapes = {"w0": (anchor_dim, emb_dim), "b0": (1, emb_dim),
              "w1": (emb_dim, emb_dim), "b1": (1, emb_dim),
              "offset_weight": (1, emb_dim)}
    nets = []
    for side in ("src", "tgt"):
        fields = {}
        for name in PARAM_FIELDS:
            rows, cols = shapes[name]
            arr = reader.matrix(rows, cols, f"spring.{side}.{name}")
            fields[name] = arr[0] if rows == 1 else arr
        nets.append(SpringNet(**fields))
    if reader.pos != len(reader.lines):
        raise FormatError(reader.path, "trailing content after checkpoint data",
                          reader.pos + 1)
    return Checkpoint(emb_map=emb_map, anchor_map=anchor_map,
                      spring=SpringParams(src=nets[0], tgt=nets[1]),
                      anchor_weight=anchor_weight, csls_k=csls_k, version=version)
