"""Batched array kernels.

Every function here takes tensors of shape ``(M, *sizes)``: a leading batch
axis followed by one axis per variable.  Variable axes are addressed by their
position in the alphabet product (0-based), never by batch-shifted index.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import xlogy


def drop_axes(nvars: int, keep: Sequence[int]) -> tuple[int, ...]:
    keep = set(keep)
    return tuple(1 + i for i in range(nvars) if i not in keep)


def marg(t: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Marginal over ``keep`` with summed axes retained as singletons."""
    axes = drop_axes(t.ndim - 1, keep)
    if not axes:
        return t
    return t.sum(axis=axes, keepdims=True)


def safe_log(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def entropy(t: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Entropy (nats) of the marginal on ``keep``; shape ``(M,)``."""
    if len(keep) == 0:
        return np.zeros(t.shape[0])
    m = marg(t, keep)
    return -xlogy(m, m).reshape(t.shape[0], -1).sum(axis=1)


def cond_mutual_info(
    t: np.ndarray, a: Sequence[int], c: Sequence[int], b: Sequence[int]
) -> np.ndarray:
    """I(A;C|B) from four entropies; clipped at zero."""
    a, b, c = list(a), list(b), list(c)
    val = entropy(t, a + b) + entropy(t, b + c) - entropy(t, b) - entropy(t, a + b + c)
    return np.maximum(val, 0.0)


def flat(t: np.ndarray) -> np.ndarray:
    return t.reshape(t.shape[0], -1)


def conditional_ratio(
    t: np.ndarray, target: Sequence[int], given: Sequence[int]
) -> np.ndarray:
    """t_{target|given} broadcast to the full shape.

    Entries whose conditioning event has zero mass come back as NaN so callers
    can decide whether reaching them is an error.
    """
    joint = marg(t, list(target) + list(given))
    cond = marg(t, list(given)) if len(given) else t.sum(
        axis=tuple(range(1, t.ndim)), keepdims=True
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        r = joint / cond
    r = np.where(cond > 0, r, np.nan)
    return np.broadcast_to(r, t.shape)


def kl_rows(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Row-wise D(q||p) in nats, +inf on support violation.

    Uses the term-wise nonnegative form p*h(q/p), h(t) = t log t - t + 1, so
    nearly equal rows never produce a negative or cancelled-to-zero value.
    """
    q = q.reshape(q.shape[0], -1)
    p = p.reshape(p.shape[0], -1)
    bad = ((q > 0) & (p <= 0)).any(axis=1)
    pos = (q > 0) & (p > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(pos, (q - p) / np.where(p > 0, p, 1.0), 0.0)
        h = (1.0 + r) * np.log1p(r) - r
    terms = np.where(pos, p * np.maximum(h, 0.0), 0.0)
    # cells with q == 0 contribute p (the -q + p remainder)
    terms = terms + np.where(q > 0, 0.0, p)
    out = terms.sum(axis=1)
    out[bad] = np.inf
    return out
