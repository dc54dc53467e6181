"""Randomized linear compression of exchanged vectors, plus the wire format.

The operators here are linear and odd for any fixed mask: for a shared
mask m, comp(x + y) = comp(x) + comp(y) and comp(-x) = -comp(x) hold
bit-exactly, and comp(0) = 0. Quality is measured by tau in (0, 1]
through E||comp(x) - x||^2 <= (1 - tau) ||x||^2; rand-k% keeps each
coordinate independently with probability k/100 and has tau = k/100.
No unbiasedness is claimed: rand-k% as defined shrinks expectations by
its keep rate.

Masks come from counter-based randomness keyed by (edge_seed, round), so
the two endpoints of an edge reconstruct identical masks without ever
exchanging them, and replay or parallel execution cannot change them.

Wire format (little endian throughout):
    dense payload:  u32 count, then count float64 values
    sparse payload: u32 count, then count * (u32 index, float64 value)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CompressionOperator",
    "MaskStream",
    "Payload",
    "derive_mask",
    "apply",
    "verify_contract",
    "encode_payload",
    "decode_dense",
    "decode_sparse",
    "dense_nbytes",
    "sparse_nbytes",
]

_SPARSE_ENTRY = np.dtype([("index", "<u4"), ("value", "<f8")])


@dataclass(frozen=True)
class CompressionOperator:
    """Masking compressor: either the identity or rand-k% sparsification."""

    kind: str = "identity"
    k_percent: float = 100.0

    def __post_init__(self):
        if self.kind not in ("identity", "rand-k"):
            raise ValueError(f"unknown compression kind {self.kind!r}")
        if not (0.0 < self.k_percent <= 100.0):
            raise ValueError(f"k_percent must lie in (0, 100], got {self.k_percent}")

    @property
    def tau(self) -> float:
        """Contractual quality: 1 for identity, k/100 for rand-k%."""
        return 1.0 if self.kind == "identity" else self.k_percent / 100.0

    @classmethod
    def identity(cls) -> "CompressionOperator":
        return cls("identity", 100.0)

    @classmethod
    def rand_k(cls, k_percent: float) -> "CompressionOperator":
        return cls("rand-k", k_percent)


@dataclass(frozen=True)
class MaskStream:
    """Deterministic mask source for one directed dual pair.

    Both endpoints hold the same ``edge_seed`` (derived from the
    experiment seed and the edge, never transmitted), so masks are a
    pure function of (edge_seed, round, dimension).
    """

    edge_seed: int
    round_counter: int = 0


def derive_mask(stream: MaskStream, round_index: int, d: int, k_percent: float) -> np.ndarray:
    """Boolean keep-mask with i.i.d. Bernoulli(k/100) coordinates.

    Counter-based: identical arguments always return identical masks.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    key = np.array(
        [stream.edge_seed, stream.round_counter + round_index], dtype=np.uint64
    )
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.random(d) < (k_percent / 100.0)


@dataclass
class Payload:
    """A transmitted vector, dense or sparse.

    Sparse payloads store the mask's keep-indices and the vector values
    at those indices; a value may be 0.0 and is still listed, so the
    receiver can recover the mask from the payload alone.
    """

    dim: int
    values: np.ndarray
    indices: np.ndarray | None = None

    @property
    def is_dense(self) -> bool:
        return self.indices is None

    def densify(self) -> np.ndarray:
        if self.indices is None:
            return self.values.copy()
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    @property
    def nbytes(self) -> int:
        if self.indices is None:
            return dense_nbytes(self.dim)
        return sparse_nbytes(len(self.values))


def apply(op: CompressionOperator, x, mask) -> Payload:
    """Compress a vector under the given mask.

    rand-k returns the Hadamard product mask * x in sparse form; the
    identity operator ignores the mask and returns x densely.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if op.kind == "identity":
        return Payload(dim=x.shape[0], values=x.copy())
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ValueError(f"mask shape {mask.shape} does not match vector shape {x.shape}")
    indices = np.flatnonzero(mask).astype(np.uint32)
    return Payload(dim=x.shape[0], values=x[indices], indices=indices)


def verify_contract(op: CompressionOperator, d: int, n_samples: int, seed: int) -> float:
    """Empirical tau: 1 - mean of ||comp(x) - x||^2 / ||x||^2.

    Draws standard Gaussian vectors with fresh masks each sample. For
    the identity this returns exactly 1; for rand-k% it estimates k/100.
    """
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples for a meaningful estimate")
    rng = np.random.default_rng(seed)
    ratios = np.empty(n_samples)
    chunk = max(1, min(n_samples, 2 ** 22 // max(d, 1)))
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        X = rng.standard_normal((m, d))
        sq = np.einsum("ij,ij->i", X, X)
        if op.kind == "identity":
            ratios[done:done + m] = 0.0
        else:
            keep = rng.random((m, d)) < (op.k_percent / 100.0)
            dropped = np.where(keep, 0.0, X)
            ratios[done:done + m] = np.einsum("ij,ij->i", dropped, dropped) / sq
        done += m
    return float(1.0 - ratios.mean())


def encode_payload(payload: Payload) -> bytes:
    """Serialize a payload in the documented little-endian wire format."""
    count = len(payload.values)
    header = struct.pack("<I", count)
    if payload.indices is None:
        return header + payload.values.astype("<f8").tobytes()
    entries = np.empty(count, dtype=_SPARSE_ENTRY)
    entries["index"] = payload.indices
    entries["value"] = payload.values
    return header + entries.tobytes()


def decode_dense(data: bytes, dim: int) -> Payload:
    """Parse a dense payload; the count must equal the full dimension."""
    count = _read_count(data)
    if count != dim:
        raise ValueError(f"dense payload carries {count} values, expected {dim}")
    expected = dense_nbytes(dim)
    if len(data) != expected:
        raise ValueError(f"dense payload is {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=4).astype(float)
    return Payload(dim=dim, values=values)


def decode_sparse(data: bytes, dim: int) -> Payload:
    """Parse a sparse payload of (index, value) entries."""
    count = _read_count(data)
    expected = sparse_nbytes(count)
    if len(data) != expected:
        raise ValueError(f"sparse payload is {len(data)} bytes, expected {expected}")
    entries = np.frombuffer(data, dtype=_SPARSE_ENTRY, offset=4)
    indices = entries["index"].astype(np.uint32)
    if count and int(indices.max()) >= dim:
        raise ValueError(f"payload index {int(indices.max())} out of range for dim {dim}")
    return Payload(dim=dim, values=entries["value"].astype(float), indices=indices)


def dense_nbytes(d: int) -> int:
    return 4 + 8 * d


def sparse_nbytes(nnz: int) -> int:
    return 4 + 12 * nnz


def _read_count(data: bytes) -> int:
    if len(data) < 4:
        raise ValueError("payload shorter than its count header")
    return struct.unpack_from("<I", data)[0]
