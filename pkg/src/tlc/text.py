"""Deterministic hashed-n-gram text features.

Pipeline: lowercase -> strip punctuation -> whitespace tokenize -> count
unigrams and bigrams hashed into 4096 buckets with 64-bit FNV-1a -> L2
normalize. A linear projection to the 512-dim language feature is learned
jointly with the trajectory transformer; the hashing side below is fixed so
bucket vectors are reproducible across implementations.
"""

from __future__ import annotations

import string

import numpy as np
import torch

NUM_BUCKETS = 4096
TEXT_DIM = 512

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return text.lower().translate(_PUNCT_TABLE).split()


def bucket_vector(text: str, buckets: int = NUM_BUCKETS) -> np.ndarray:
    """Counted unigram+bigram hash buckets, L2-normalized; empty text -> zeros."""
    tokens = tokenize(text)
    vec = np.zeros(buckets, dtype=np.float64)
    for tok in tokens:
        vec[fnv1a_64(tok.encode("utf-8")) % buckets] += 1.0
    for a, b in zip(tokens, tokens[1:]):
        vec[fnv1a_64(f"{a} {b}".encode("utf-8")) % buckets] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


class TextEncoder:
    """Hashed bucket vector followed by a learned 4096 -> 512 projection."""

    def __init__(self, projection: torch.nn.Linear):
        if projection.in_features != NUM_BUCKETS or projection.out_features != TEXT_DIM:
            raise ValueError(
                f"projection must map {NUM_BUCKETS} buckets to {TEXT_DIM} features"
            )
        self.projection = projection

    def embed(self, text: str) -> np.ndarray:
        with torch.no_grad():
            out = self.embed_torch(text)
        return out.numpy()

    def embed_torch(self, text: str) -> torch.Tensor:
        buckets = torch.from_numpy(bucket_vector(text)).to(self.projection.weight.dtype)
        return self.projection(buckets)
