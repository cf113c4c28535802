"""Deterministic text embeddings via feature hashing.

Tokens are hashed into `dim` buckets with a sign hash and the bucket counts
are L2-normalized. No learned model, no external state: the same
(content, dim, seed) always maps to the same unit vector.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

from .errors import EmptyContentError

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(content: str) -> list[str]:
    """Lowercase word tokens, split on whitespace and punctuation."""
    return _TOKEN_RE.findall(content.lower())


def embed(content: str, dim: int, seed: int) -> tuple[float, ...]:
    """Embed text into a unit vector of length `dim`.

    Raises EmptyContentError when the content is whitespace-only. Content
    with no word tokens (pure punctuation) hashes as a single raw token so
    the result is still a unit vector.
    """
    if dim < 2:
        raise ValueError(f"embedding dim must be >= 2, got {dim}")
    if not content.strip():
        raise EmptyContentError("cannot embed empty content")

    tokens = tokenize(content) or [content.strip()]
    vector = np.zeros(dim, dtype=np.float64)
    prefix = f"{seed}\x1f".encode("utf-8")
    for token in tokens:
        digest = hashlib.blake2b(prefix + token.encode("utf-8"), digest_size=8).digest()
        h = int.from_bytes(digest, "big")
        bucket = h % dim
        sign = 1.0 if (h >> 63) & 1 else -1.0
        vector[bucket] += sign

    norm = np.linalg.norm(vector)
    if norm == 0.0:
        # Sign cancellation across identical buckets; salt with the token count.
        vector[len(tokens) % dim] = 1.0
        norm = 1.0
    return tuple((vector / norm).tolist())
