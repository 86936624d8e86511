"""Error-vector enumeration, signal distances, union bounds and AME lower bounds.

An error vector ``eps = (b - b*) / 2`` has entries in {-1, 0, +1}.  Union bounds
sum ``2**-w(eps) Q(d(eps) / sigma)`` over the error vectors affecting a bit; the
factor ``2**-w`` is the probability that ``eps`` is admissible for a uniformly
random transmitted vector.

Distances for the LAS family are normalized by ``sqrt(eps^T A^2 eps)`` by
default (``normalization="energy"``); with unit amplitudes this is the plain
``sqrt(eps^T eps)`` form, which ``normalization="literal"`` keeps for any
amplitudes.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from ..detectors import BudgetExceeded
from .qfunc import q_function

__all__ = [
    "ErrorVector",
    "UnionBound",
    "enumerate_error_set",
    "is_decomposable",
    "signal_distance",
    "union_bound",
    "ame_lower_bound",
    "plas_thresholds",
    "distance_chain_violations",
    "ERROR_SET_BUDGET",
]

log = logging.getLogger(__name__)

ERROR_SET_BUDGET = 10**7
KINDS = ("gml", "lml1", "las")


@dataclass(frozen=True)
class ErrorVector:
    entries: np.ndarray

    @property
    def weight(self):
        return int(np.count_nonzero(self.entries))

    @property
    def support(self):
        return tuple(int(i) for i in np.flatnonzero(self.entries))

    def is_admissible(self, b):
        """``eps_k`` in {0, b_k} for every ``k``."""
        e = np.asarray(self.entries)
        return bool(np.all((e == 0) | (e == np.asarray(b))))


@dataclass(frozen=True)
class UnionBound:
    value: float
    max_weight: int
    n_terms: int
    truncated: bool


def _error_set_size(K, max_weight):
    return sum(math.comb(K - 1, w - 1) * 2**w for w in range(1, max_weight + 1))


def _partition_masks(w):
    # every 2-partition of w support slots once: slot 0 always on the first side
    masks = []
    for bits in itertools.product((0, 1), repeat=w - 1):
        m = np.array((1,) + bits, dtype=float)
        if m.sum() < w:
            masks.append(m)
    return np.array(masks)


def is_decomposable(eps, H, tol=1e-12):
    """True when ``eps = e1 + e2`` with disjoint supports and ``e1^T H e2 >= 0``."""
    eps = np.asarray(eps, dtype=float)
    I = np.flatnonzero(eps)
    if I.size < 2:
        return False
    M = np.outer(eps[I], eps[I]) * H[np.ix_(I, I)]
    masks = _partition_masks(I.size)
    cross = np.einsum("pi,ij,pj->p", masks, M, 1.0 - masks)
    return bool(np.any(cross >= -tol))


def enumerate_error_set(ch, k, max_weight=None, indecomposable=False, budget=ERROR_SET_BUDGET):
    """All error vectors with ``eps_k != 0`` and weight ``<= max_weight``.

    Rows of the returned int8 array are error vectors, ordered by weight.  With
    ``indecomposable=True`` the decomposable ones are dropped.
    """
    K = ch.K
    max_weight = K if max_weight is None else min(int(max_weight), K)
    if not 0 <= k < K:
        raise IndexError(f"bit index {k} out of range for K={K}")
    if max_weight < 1:
        raise ValueError("max_weight must be >= 1")
    if _error_set_size(K, max_weight) > budget:
        raise BudgetExceeded(f"error set for K={K}, max_weight={max_weight} exceeds {budget} vectors")
    others = [i for i in range(K) if i != k]
    H = ch.weighted
    blocks = []
    for w in range(1, max_weight + 1):
        masks = _partition_masks(w) if w >= 2 else None
        for rest in itertools.combinations(others, w - 1):
            I = np.array(sorted((k,) + rest))
            signs = np.array(list(itertools.product((-1, 1), repeat=w)), dtype=np.int8)
            E = np.zeros((signs.shape[0], K), dtype=np.int8)
            E[:, I] = signs
            if indecomposable and w >= 2:
                Hs = H[np.ix_(I, I)]
                sf = signs.astype(float)
                # cross[e, p] = sum_{i in side p, j not in side p} s_i s_j H_ij
                M = sf[:, :, None] * Hs[None] * sf[:, None, :]
                cross = np.einsum("pi,eij,pj->ep", masks, M, 1.0 - masks)
                E = E[~np.any(cross >= -1e-12, axis=1)]
            blocks.append(E)
    return np.concatenate(blocks) if blocks else np.zeros((0, K), dtype=np.int8)


def _forms(E, ch, T=None):
    E = np.asarray(E, dtype=float)
    if E.ndim == 1:
        E = E[None]
    A2 = ch.amplitudes**2
    x = np.einsum("ei,ij,ej->e", E, ch.weighted, E)
    a = (E**2) @ A2
    n = (E**2).sum(axis=1)
    t = None if T is None else (E**2) @ np.asarray(T, float)
    return x, a, n, t


def signal_distance(ch, eps, kind="gml", T=None, normalization="energy"):
    """Signal distance of error vector(s) ``eps`` for a GML, LML-1 or LAS(T) detector.

    ``gml``: ``sqrt(eps^T H eps)``; ``lml1``: ``eps^T (2H - A^2) eps / norm``;
    ``las``: ``eps^T (2H - T) eps / norm`` with ``T = diag(t*)``.
    """
    x, a, n, t = _forms(eps, ch, T)
    if kind == "gml":
        d = np.sqrt(np.maximum(x, 0.0))
    else:
        if kind == "lml1":
            num = 2.0 * x - a
        elif kind == "las":
            if T is None:
                raise ValueError("LAS distance needs the threshold vector T")
            num = 2.0 * x - t
        else:
            raise ValueError(f"unknown detector kind {kind!r}")
        if normalization == "energy":
            den = np.sqrt(a)
        elif normalization == "literal":
            den = np.sqrt(n)
        else:
            raise ValueError(f"unknown normalization {normalization!r}")
        d = num / den
    return float(d[0]) if np.ndim(eps) == 1 else d


def plas_thresholds(ch):
    """Parallel-LAS thresholds ``t_k = sum_j |H_kj|``."""
    return np.abs(ch.weighted).sum(axis=1)


def union_bound(ch, sigma, k, kind="gml", max_weight=None, T=None, indecomposable=True, normalization="energy"):
    """Union upper bound on the BER of bit ``k``.

    Returns a :class:`UnionBound`; ``truncated`` is set when ``max_weight < K``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    E = enumerate_error_set(ch, k, max_weight, indecomposable)
    d = np.atleast_1d(signal_distance(ch, E, kind, T, normalization))
    w = np.count_nonzero(E, axis=1)
    value = float(np.sum(2.0 ** (-w) * q_function(d / sigma)))
    mw = ch.K if max_weight is None else min(int(max_weight), ch.K)
    return UnionBound(value, mw, int(E.shape[0]), mw < ch.K)


def ame_lower_bound(ch, k, kind="lml1", max_weight=None, T=None, indecomposable=True, normalization="energy"):
    """Lower bound on the asymptotic multi-bit efficiency of bit ``k``, clamped to [0, 1]."""
    if kind not in ("lml1", "las"):
        raise ValueError("AME bound is defined for the lml1 and las kinds")
    E = enumerate_error_set(ch, k, max_weight, indecomposable)
    x, a, n, t = _forms(E, ch, T)
    num = 2.0 * x - (a if kind == "lml1" else t)
    den = np.sqrt(a if normalization == "energy" else n)
    ratio = np.maximum(num, 0.0) / (ch.amplitudes[k] * den)
    return float(np.clip(np.min(ratio) ** 2, 0.0, 1.0))


def distance_chain_violations(ch, k, max_weight=None, T=None, indecomposable=True, normalization="energy"):
    """Error vectors breaking ``d_LAS <= d_LML1 <= d_GML``; each one is logged."""
    E = enumerate_error_set(ch, k, max_weight, indecomposable)
    T = plas_thresholds(ch) if T is None else T
    d_las = signal_distance(ch, E, "las", T, normalization)
    d_lml = signal_distance(ch, E, "lml1", None, normalization)
    d_gml = signal_distance(ch, E, "gml")
    tol = 1e-12
    bad = (d_las > d_lml + tol) | (d_lml > d_gml + tol)
    for e, a, b, c in zip(E[bad], d_las[bad], d_lml[bad], d_gml[bad]):
        log.info("distance chain violated for eps=%s: las=%.6g lml1=%.6g gml=%.6g", e.tolist(), a, b, c)
    return E[bad]
