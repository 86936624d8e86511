"""GML, LAS-family and LMLAS-J detectors.

Bit indices are 0-based throughout.  All detectors work on the likelihood
surrogate ``f(b) = b^T A y - 0.5 b^T H b`` and its gradient ``g = A y - H b``;
the gradient is carried along the search with the rank-|flip set| update
``g <- g + 2 H[:, P] b[P]`` and never recomputed from scratch.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import Observation, sign

__all__ = [
    "SequentialCircular",
    "SequentialRandom",
    "Parallel",
    "Group",
    "EHE",
    "FMD",
    "Hybrid",
    "default_hybrid",
    "DetectorTrace",
    "LmlasConfig",
    "BudgetExceeded",
    "detect_gml",
    "detect_las",
    "detect_lmlas",
    "detect_mf",
    "is_lml_point",
    "is_las_fixed_point",
    "next_candidates",
    "initial_vector",
    "likelihood_delta",
    "thresholds",
    "enumerate_bits",
    "slas_batch",
    "plas_batch",
    "gml_batch",
    "GML_CAP",
    "LMLAS_BUDGET",
]

GML_CAP = 24
LMLAS_BUDGET = 10**7
_TOL = 1e-9


class BudgetExceeded(ValueError):
    """An exhaustive search would exceed its configured cap."""


# -- schedule policies -------------------------------------------------------


@dataclass(frozen=True)
class SequentialCircular:
    """One bit per step in a fixed circular order (natural order by default)."""

    order: tuple | None = None

    single_bit = True


@dataclass(frozen=True)
class SequentialRandom:
    """One bit per step; each sweep visits the bits in a fresh random permutation."""

    seed: int | None = None

    single_bit = True


@dataclass(frozen=True)
class Parallel:
    single_bit = False


@dataclass(frozen=True)
class Group:
    """Group-parallel schedule cycling through the blocks of a partition of ``0..K-1``."""

    partition: tuple

    single_bit = False

    def __post_init__(self):
        object.__setattr__(self, "partition", tuple(tuple(int(i) for i in g) for g in self.partition))

    @classmethod
    def blocks(cls, K, size):
        return cls(tuple(tuple(range(i, min(i + size, K))) for i in range(0, K, size)))

    def validate(self, K):
        flat = sorted(i for g in self.partition for i in g)
        if flat != list(range(K)) or any(len(g) == 0 for g in self.partition):
            raise ValueError("group schedule must partition 0..K-1 into nonempty blocks")


@dataclass(frozen=True)
class EHE:
    """Eliminate-highest-error: the ``m`` bits with the largest flip-desirability ``-b_k g_k / A_k``.

    ``signed=True`` ranks by the literal relative gradient ``g_k / A_k`` instead.
    """

    m: int = 1
    signed: bool = False

    @property
    def single_bit(self):
        return self.m == 1


@dataclass(frozen=True)
class FMD:
    """Fastest-metric-descent: the ``m`` bits with the largest ``|g_k| - 0.5 A_k``."""

    m: int = 1

    @property
    def single_bit(self):
        return self.m == 1


@dataclass(frozen=True)
class Hybrid:
    """Sequence of ``(policy, step_budget)`` phases.

    Every phase but the last runs for at most ``step_budget`` steps (``None`` =
    one full period); the last phase runs to convergence and must update a
    single bit per step.
    """

    phases: tuple

    def __post_init__(self):
        phases = tuple((p, b) for p, b in self.phases)
        if not phases:
            raise ValueError("hybrid schedule needs at least one phase")
        if not getattr(phases[-1][0], "single_bit", False):
            raise ValueError("the final hybrid phase must update one bit per step")
        if any(isinstance(p, Hybrid) for p, _ in phases):
            raise ValueError("hybrid phases cannot nest")
        object.__setattr__(self, "phases", phases)

    single_bit = False


def default_hybrid(K):
    """Parallel for ceil(log2 K) steps, one period of ceil(sqrt K)-blocks, then sequential."""
    return Hybrid(
        (
            (Parallel(), max(1, math.ceil(math.log2(K))) if K > 1 else 1),
            (Group.blocks(K, max(1, math.ceil(math.sqrt(K)))), None),
            (SequentialCircular(), None),
        )
    )


def _terminal_single_bit(policy):
    if isinstance(policy, Hybrid):
        return policy.phases[-1][0].single_bit
    return bool(policy.single_bit)


# -- stateless candidate selection -------------------------------------------


def _scores(policy, g, b, A):
    if isinstance(policy, EHE):
        return g / A if policy.signed else -b * g / A
    return np.abs(g) - 0.5 * A


def next_candidates(policy, n, g, b, A, exclude=None, rng=None):
    """Candidate index set ``L(n)`` for step ``n``.

    ``exclude`` (boolean mask) removes bits from the greedy EHE/FMD ranking;
    ``rng`` feeds ``SequentialRandom``.
    """
    K = len(b)
    if isinstance(policy, SequentialCircular):
        order = policy.order if policy.order is not None else range(K)
        return np.array([tuple(order)[n % K]])
    if isinstance(policy, SequentialRandom):
        rng = rng if rng is not None else np.random.default_rng(policy.seed)
        return np.array([int(rng.integers(K))])
    if isinstance(policy, Parallel):
        return np.arange(K)
    if isinstance(policy, Group):
        return np.array(policy.partition[n % len(policy.partition)])
    if isinstance(policy, (EHE, FMD)):
        s = _scores(policy, np.asarray(g, float), np.asarray(b, float), np.asarray(A, float))
        if exclude is not None:
            s = np.where(exclude, -np.inf, s)
            avail = int((~np.asarray(exclude)).sum())
        else:
            avail = K
        m = min(policy.m, avail)
        # ties resolved toward the lower index
        if m == 1:
            return np.array([int(np.argmax(s))])
        return np.sort(np.argsort(-s, kind="stable")[:m])
    if isinstance(policy, Hybrid):
        for p, budget in policy.phases:
            span = budget if budget is not None else _period_len(p, K)
            if n < span or p is policy.phases[-1][0]:
                return next_candidates(p, n, g, b, A, exclude, rng)
            n -= span
    raise TypeError(f"unknown schedule policy {policy!r}")


def _period_len(policy, K):
    if isinstance(policy, Parallel):
        return 1
    if isinstance(policy, Group):
        return len(policy.partition)
    if isinstance(policy, (EHE, FMD)):
        return math.ceil(K / policy.m)
    return K


def thresholds(H, L):
    """Thresholds ``t_k = sum_{j in L} |H_kj|`` for every ``k`` in ``L``."""
    L = np.asarray(L)
    if L.size == 1:
        return np.abs(H[L, L])
    return np.abs(H[np.ix_(L, L)]).sum(axis=1)


# -- traces ------------------------------------------------------------------


@dataclass
class DetectorTrace:
    output: np.ndarray
    steps: int
    flips: int
    likelihood_trace: np.ndarray
    final_likelihood: float
    anomaly: bool = False
    final_gradient: np.ndarray | None = field(default=None, repr=False)
    terminal_thresholds: np.ndarray | None = field(default=None, repr=False)

    @property
    def flip_rate(self):
        return self.flips / len(self.output)

    def gradient_bound(self):
        """Gradient size at the converged point against its threshold budget.

        Returns ``(||g*||_1, ||[b* g*]^-||_1, sum_k min terminal t_k)``.  The
        fixed-point condition ``b_k g_k >= -t_k`` bounds the second number by
        the third; the first obeys the same bound when every ``b_k g_k <= 0``.
        """
        g = np.asarray(self.final_gradient, float)
        anti = np.maximum(-self.output * g, 0.0)
        return float(np.abs(g).sum()), float(anti.sum()), float(np.sum(self.terminal_thresholds))

    def to_dict(self):
        return {
            "output": [int(v) for v in self.output],
            "steps": int(self.steps),
            "flips": int(self.flips),
            "flip_rate": float(self.flip_rate),
            "final_likelihood": float(self.final_likelihood),
        }

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class LmlasConfig:
    J: int

    def beta(self, K):
        return self.J / K


# -- helpers -----------------------------------------------------------------


def _mf(obs):
    return obs.mf_output if isinstance(obs, Observation) else np.asarray(obs, dtype=float)


def _bits(b, K):
    b = np.asarray(b)
    if b.shape != (K,) or not np.all(np.abs(b) == 1):
        raise ValueError(f"expected a length-{K} vector over {{-1,+1}}")
    return b.astype(float)


def likelihood_delta(g, H, flip_set, b):
    """Likelihood change from flipping the bits in ``flip_set``.

    ``Delta f = db^T (g + z / 2)`` with ``db = -2 b_P`` and ``z = -H db``.
    """
    P = np.asarray(sorted(set(int(i) for i in flip_set)))
    if P.size == 0:
        raise ValueError("flip set must be nonempty")
    db = -2.0 * np.asarray(b, float)[P]
    z = -H[np.ix_(P, P)] @ db
    return float(db @ (np.asarray(g, float)[P] + 0.5 * z))


def initial_vector(kind, ch=None, obs=None, seed=None):
    """``"random"`` (uniform over {-1,+1}^K), ``"mf"`` (``sign(y)``), or an explicit vector."""
    if isinstance(kind, str):
        if kind == "random":
            rng = np.random.default_rng(seed)
            return (2 * rng.integers(0, 2, size=ch.K) - 1).astype(np.int8)
        if kind in ("mf", "matched_filter", "matchedfilter"):
            return sign(_mf(obs))
        raise ValueError(f"unknown initializer {kind!r}")
    b = np.asarray(kind)
    if ch is not None:
        _bits(b, ch.K)
    return b.astype(np.int8)


def detect_mf(ch, obs):
    return sign(_mf(obs))


@lru_cache(maxsize=8)
def enumerate_bits(K):
    """All of {-1,+1}^K in lexicographic order (row 0 is all -1)."""
    if K > 20:
        raise BudgetExceeded(f"refusing to materialize 2^{K} vectors")
    idx = np.arange(2**K)[:, None]
    shifts = np.arange(K - 1, -1, -1)[None, :]
    B = (2 * ((idx >> shifts) & 1) - 1).astype(np.int8)
    B.setflags(write=False)
    return B


def _first_max(vals, offset=0):
    best = vals.max()
    tol = _TOL * max(1.0, abs(best))
    return offset + int(np.flatnonzero(vals >= best - tol)[0]), best


def detect_gml(ch, obs, cap=GML_CAP):
    """Exhaustive maximum-likelihood detection with lexicographic tie-breaking."""
    K = ch.K
    if K > cap:
        raise BudgetExceeded(f"GML over 2^{K} vectors exceeds the cap K <= {cap}")
    Ay = ch.amplitudes * _mf(obs)
    H = ch.weighted
    if K <= 16:
        B = enumerate_bits(K).astype(float)
        f = B @ Ay - 0.5 * np.einsum("ij,ij->i", B @ H, B)
        i, _ = _first_max(f)
        return enumerate_bits(K)[i].copy()
    # high bits enumerated in the outer loop, low 14 bits vectorized
    lo = 14
    hi = K - lo
    Blo = enumerate_bits(lo).astype(float)
    Hll = H[hi:, hi:]
    qlo = np.einsum("ij,ij->i", Blo @ Hll, Blo)
    best_val, best_idx = -np.inf, 0
    for j, bh in enumerate(enumerate_bits(hi).astype(float)):
        cross = Blo @ (H[hi:, :hi] @ bh)
        f = bh @ Ay[:hi] + Blo @ Ay[hi:] - 0.5 * (bh @ H[:hi, :hi] @ bh + 2 * cross + qlo)
        i, v = _first_max(f)
        if v > best_val + _TOL * max(1.0, abs(v)):
            best_val, best_idx = v, (j << lo) | (i)
    bits = ((best_idx >> np.arange(K - 1, -1, -1)) & 1) * 2 - 1
    return bits.astype(np.int8)


def gml_batch(ch, Y):
    """GML decisions for many MF outputs ``Y`` (shape (trials, K)) on one fixed channel."""
    B = enumerate_bits(ch.K).astype(float)
    q = 0.5 * np.einsum("ij,ij->i", B @ ch.weighted, B)
    F = (np.asarray(Y) * ch.amplitudes) @ B.T - q[None, :]
    best = F.max(axis=1, keepdims=True)
    idx = np.argmax(F >= best - _TOL * np.maximum(1.0, np.abs(best)), axis=1)
    return enumerate_bits(ch.K)[idx]


# -- LAS engine ----------------------------------------------------------------


class _Phase:
    """Stateful candidate generator for one non-hybrid policy."""

    def __init__(self, policy, K, H, A, rng):
        self.policy = policy
        self.K = K
        self.H = H
        self.A = A
        self.rng = rng
        self.n = 0
        self.covered = np.zeros(K, dtype=bool)
        self.perm = None
        self.pos = 0
        if isinstance(policy, Group):
            policy.validate(K)
        if isinstance(policy, SequentialCircular) and policy.order is not None:
            if sorted(policy.order) != list(range(K)):
                raise ValueError("circular order must be a permutation of 0..K-1")

    def candidates(self, g, b):
        p = self.policy
        if isinstance(p, SequentialCircular):
            L = next_candidates(p, self.n, g, b, self.A)
        elif isinstance(p, SequentialRandom):
            if self.perm is None or self.pos == self.K:
                self.perm = self.rng.permutation(self.K)
                self.pos = 0
            L = self.perm[self.pos : self.pos + 1]
            self.pos += 1
        elif isinstance(p, (EHE, FMD)):
            L = next_candidates(p, self.n, g, b, self.A, exclude=self.covered)
        else:
            L = next_candidates(p, self.n, g, b, self.A)
        self.n += 1
        return L

    def record(self, L, flipped):
        if flipped:
            self.covered[:] = False
        else:
            self.covered[L] = True

    @property
    def quiet_period(self):
        return bool(self.covered.all())


# the bulk single-bit sweeps; switched off only to test them against the plain loop
_FAST_PATHS = True


def detect_las(ch, obs, b0, policy, max_steps=None, threshold_scale=1.0, record_trace=True, rng_seed=None):
    """Generalized likelihood-ascent search.

    At step ``n`` every candidate ``k`` in ``L(n)`` with ``b_k g_k < -t_k`` flips,
    where ``t_k = threshold_scale * sum_{j in L(n)} |H_kj|``.  The run stops at
    the first full schedule period (every bit checked since the last flip)
    without a flip.  ``threshold_scale`` other than 1 exists for fuzzing only.
    """
    K = ch.K
    H = ch.weighted
    A = ch.amplitudes
    b = _bits(b0, K).copy()
    if max_steps is None:
        max_steps = 100 * K
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    Ay = A * _mf(obs)
    g = Ay - H @ b
    f = float(b @ Ay - 0.5 * b @ H @ b)
    trace = [f] if record_trace else None
    if rng_seed is None:
        pols = [p for p, _ in policy.phases] if isinstance(policy, Hybrid) else [policy]
        rng_seed = next((p.seed for p in pols if isinstance(p, SequentialRandom)), None)
    rng = np.random.default_rng(rng_seed)

    phases = list(policy.phases) if isinstance(policy, Hybrid) else [(policy, None)]
    steps = 0
    flips = 0
    term_t = np.full(K, np.inf)
    diag = threshold_scale * np.abs(np.diag(H))
    converged = False

    for pi, (pol, budget) in enumerate(phases):
        last = pi == len(phases) - 1
        ph = _Phase(pol, K, H, A, rng)
        if _FAST_PATHS and last and isinstance(pol, (SequentialCircular, SequentialRandom)):
            if isinstance(pol, SequentialCircular):
                out = _sequential_sweep(b, g, H, diag, f, pol.order, steps, max_steps, trace)
            else:
                out = _random_sweep(b, g, H, diag, f, rng, steps, max_steps, trace)
            b, g, f, steps, nflip, converged = out
            flips += nflip
            term_t = diag.copy()
            break
        limit = None if last else (budget if budget is not None else _period_len(pol, K))
        local = 0
        while steps < max_steps:
            if limit is not None and local >= limit:
                break
            L = ph.candidates(g, b)
            t = threshold_scale * thresholds(H, L)
            P = L[b[L] * g[L] < -t]
            steps += 1
            local += 1
            if P.size:
                bP = b[P].copy()
                f += likelihood_delta(g, H, P, b)
                g += 2.0 * (H[:, P] @ bP)
                b[P] = -bP
                flips += P.size
                term_t[:] = np.inf
            else:
                np.minimum.at(term_t, L, t)
            ph.record(L, P.size > 0)
            if trace is not None:
                trace.append(f)
            if ph.quiet_period:
                converged = last
                break
        if steps >= max_steps and not converged:
            break

    return DetectorTrace(
        output=b.astype(np.int8),
        steps=steps,
        flips=flips,
        likelihood_trace=np.asarray(trace if trace is not None else [f]),
        final_likelihood=f,
        anomaly=not converged,
        final_gradient=g,
        terminal_thresholds=term_t,
    )


def _random_sweep(b, g, H, t, f, rng, steps, max_steps, trace):
    """Single-bit LAS over fresh random permutations, in bulk between flips.

    Draws the same permutations as the step-by-step loop, so outputs agree.
    """
    K = len(b)
    covered = np.zeros(K, dtype=bool)
    flips = 0
    perm, pos = rng.permutation(K), 0

    def idle(n):
        if trace is not None:
            trace.extend([f] * n)

    while True:
        if pos == K:
            perm, pos = rng.permutation(K), 0
        seg = perm[pos:]
        hit = np.flatnonzero(b[seg] * g[seg] < -t[seg])
        d = int(hit[0]) if hit.size else len(seg)
        fresh = np.flatnonzero(~covered[seg[:d]])
        if fresh.size and fresh.size == K - np.count_nonzero(covered):
            # every bit has now been checked since the last flip
            n = int(fresh[-1]) + 1
            if steps + n > max_steps:
                idle(max_steps - steps)
                return b, g, f, max_steps, flips, False
            idle(n)
            return b, g, f, steps + n, flips, True
        if not hit.size:
            if steps + d > max_steps:
                idle(max_steps - steps)
                return b, g, f, max_steps, flips, False
            covered[seg] = True
            idle(d)
            steps += d
            pos = K
            continue
        if steps + d + 1 > max_steps:
            idle(max_steps - steps)
            return b, g, f, max_steps, flips, False
        idle(d)
        k = int(seg[d])
        bk = b[k]
        f += -2.0 * bk * g[k] - 2.0 * H[k, k]
        g += 2.0 * bk * H[:, k]
        b[k] = -bk
        flips += 1
        steps += d + 1
        covered[:] = False
        pos += d + 1
        if trace is not None:
            trace.append(f)


def _sequential_sweep(b, g, H, t, f, order, steps, max_steps, trace):
    """Circular single-bit LAS, skipping runs of non-flipping steps in bulk."""
    K = len(b)
    order = np.arange(K) if order is None else np.asarray(order)
    pos = 0
    quiet = 0
    flips = 0
    while True:
        viol = b[order] * g[order] < -t[order]
        rolled = np.flatnonzero(np.roll(viol, -pos))
        if rolled.size == 0:
            gap = K - quiet
            if steps + gap > max_steps:
                gap = max_steps - steps
                if trace is not None:
                    trace.extend([f] * gap)
                return b, g, f, steps + gap, flips, False
            if trace is not None:
                trace.extend([f] * gap)
            return b, g, f, steps + gap, flips, True
        d = int(rolled[0])
        if steps + d + 1 > max_steps:
            gap = max_steps - steps
            if trace is not None:
                trace.extend([f] * gap)
            return b, g, f, max_steps, flips, False
        k = int(order[(pos + d) % K])
        if trace is not None and d:
            trace.extend([f] * d)
        bk = b[k]
        f += -2.0 * bk * g[k] - 2.0 * H[k, k]
        g += 2.0 * bk * H[:, k]
        b[k] = -bk
        flips += 1
        steps += d + 1
        quiet = 0
        pos = (pos + d + 1) % K
        if trace is not None:
            trace.append(f)


def slas_batch(ch, Y, B0, max_sweeps=None):
    """Circular SLAS run independently on every row of ``Y`` (fixed channel).

    Returns the converged bit matrix.  Identical, row by row, to
    ``detect_las(..., SequentialCircular())``.
    """
    H = ch.weighted
    A = ch.amplitudes
    K = ch.K
    B = np.array(B0, dtype=float, copy=True)
    G = np.asarray(Y) * A - B @ H
    t = np.diag(H)
    max_sweeps = max_sweeps or 100 * K
    for _ in range(max_sweeps):
        any_flip = False
        for k in range(K):
            mask = B[:, k] * G[:, k] < -t[k]
            if mask.any():
                any_flip = True
                bk = B[mask, k].copy()
                G[mask] += 2.0 * bk[:, None] * H[k][None, :]
                B[mask, k] = -bk
        if not any_flip:
            return B.astype(np.int8)
    raise RuntimeError("batched SLAS failed to converge")


def plas_batch(ch, Y, B0, max_steps=None):
    """Parallel LAS run independently on every row of ``Y`` (fixed channel).

    Row by row identical to ``detect_las(..., Parallel())``.
    """
    H = ch.weighted
    K = ch.K
    B = np.array(B0, dtype=float, copy=True)
    G = np.asarray(Y) * ch.amplitudes - B @ H
    t = np.abs(H).sum(axis=1)
    for _ in range(max_steps or 100 * K):
        flip = B * G < -t
        rows = np.flatnonzero(flip.any(axis=1))
        if rows.size == 0:
            return B.astype(np.int8)
        D = np.where(flip[rows], B[rows], 0.0)
        G[rows] += 2.0 * D @ H
        B[rows] -= 2.0 * D
    raise RuntimeError("batched PLAS failed to converge")


# -- LMLAS-J -------------------------------------------------------------------


def _neighborhood_size(K, J):
    return sum(math.comb(K, i) for i in range(1, J + 1))


@lru_cache(maxsize=64)
def _combos(K, s):
    C = np.array(list(itertools.combinations(range(K), s)), dtype=np.intp).reshape(-1, s)
    C.setflags(write=False)
    return C


def _deltas(C, u, BH):
    # Delta f(P) = -2 sum_{k in P} b_k g_k - 2 sum_{j,k in P} b_j H_jk b_k
    return -2.0 * u[C].sum(axis=1) - 2.0 * BH[C[:, :, None], C[:, None, :]].sum(axis=(1, 2))


def detect_lmlas(ch, obs, b0, cfg, max_steps=None, budget=LMLAS_BUDGET, record_trace=True):
    """LML-J search: move to the first strictly better vector within Hamming radius ``J``.

    Candidates are scanned by flip-set size, lexicographically within a size.
    """
    J = cfg.J if isinstance(cfg, LmlasConfig) else int(cfg)
    K = ch.K
    if not 1 <= J <= K:
        raise ValueError(f"neighborhood size must satisfy 1 <= J <= K, got {J}")
    if _neighborhood_size(K, J) > budget:
        raise BudgetExceeded(f"LMLAS-{J} scan over K={K} exceeds {budget} candidates")
    H = ch.weighted
    b = _bits(b0, K).copy()
    Ay = ch.amplitudes * _mf(obs)
    g = Ay - H @ b
    f = float(b @ Ay - 0.5 * b @ H @ b)
    trace = [f] if record_trace else None
    max_steps = max_steps or 100 * K * J
    steps = flips = 0
    sizes = [_combos(K, s) for s in range(1, J + 1)]
    while steps < max_steps:
        u = b * g
        BH = b[:, None] * H * b[None, :]
        move = None
        for C in sizes:
            d = _deltas(C, u, BH)
            hit = np.flatnonzero(d > _TOL * max(1.0, abs(f)))
            if hit.size:
                move = C[hit[0]]
                f += float(d[hit[0]])
                break
        if move is None:
            return DetectorTrace(b.astype(np.int8), steps, flips, np.asarray(trace or [f]), f, False, g, None)
        bP = b[move].copy()
        g += 2.0 * (H[:, move] @ bP)
        b[move] = -bP
        steps += 1
        flips += move.size
        if trace is not None:
            trace.append(f)
    return DetectorTrace(b.astype(np.int8), steps, flips, np.asarray(trace or [f]), f, True, g, None)


# -- membership predicates -----------------------------------------------------


def is_lml_point(ch, obs, b, J=1, budget=LMLAS_BUDGET):
    """Whether no vector within Hamming distance ``J`` of ``b`` has a higher likelihood."""
    K = ch.K
    bf = _bits(b, K)
    g = ch.amplitudes * _mf(obs) - ch.weighted @ bf
    if J == 1:
        # b_k g_k >= -A_k^2, i.e. b (x) [y - (R - I) A b] >= 0
        scale = max(1.0, float(np.max(np.abs(g))))
        return bool(np.all(bf * g >= -np.diag(ch.weighted) - _TOL * scale))
    if not 1 <= J <= K:
        raise ValueError("J must lie in [1, K]")
    if _neighborhood_size(K, J) > budget:
        raise BudgetExceeded(f"LML-{J} check over K={K} exceeds {budget} candidates")
    u = bf * g
    BH = bf[:, None] * ch.weighted * bf[None, :]
    f = float(bf @ (ch.amplitudes * _mf(obs)) - 0.5 * bf @ ch.weighted @ bf)
    tol = _TOL * max(1.0, abs(f))
    return all(not np.any(_deltas(_combos(K, s), u, BH) > tol) for s in range(1, J + 1))


def is_las_fixed_point(ch, obs, b, t):
    """``b (x) (A y - H b) >= -t`` componentwise, for a threshold vector ``t``."""
    bf = _bits(b, ch.K)
    g = ch.amplitudes * _mf(obs) - ch.weighted @ bf
    return bool(np.all(bf * g >= -np.asarray(t, float) - _TOL))
