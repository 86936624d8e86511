"""Large-system BER fixed points, cutoff channel load and spinodal lines.

For energy classes ``(A_i, lambda_i)`` at load ``alpha`` and noise ``sigma`` the
per-class BERs solve ``p(A) = Q(A / sqrt(sigma^2 + s))`` with the aggregate
interference ``s = 4 alpha E[A^2 p(A)]``.  Everything reduces to the scalar map
``s -> T(s) = 4 alpha E[A^2 Q(A / sqrt(sigma^2 + s))]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ..channel import ebn0_to_sigma
from .qfunc import q_function, q_inverse

__all__ = [
    "EnergyDistribution",
    "Branch",
    "ReplicaSolution",
    "replica_ber",
    "solution_count",
    "CutoffLoad",
    "CutoffNonConvergence",
    "cutoff_load",
    "tangency_constants",
    "load_curve",
    "PhasePoint",
    "SpinodalScan",
    "spinodal_scan",
    "spinodal_cusp",
    "CalibrationError",
    "calibrate_snr_convention",
]

GRID_POINTS = 10_000


@dataclass(frozen=True)
class EnergyDistribution:
    """Discrete amplitude distribution: class amplitudes and population fractions."""

    amplitudes: np.ndarray
    fractions: np.ndarray

    def __post_init__(self):
        A = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        lam = np.atleast_1d(np.asarray(self.fractions, dtype=float))
        if A.shape != lam.shape:
            raise ValueError("amplitudes and fractions must have the same length")
        if np.any(A <= 0) or np.any(lam < 0):
            raise ValueError("amplitudes must be positive and fractions nonnegative")
        if abs(lam.sum() - 1.0) > 1e-12:
            raise ValueError(f"fractions must sum to 1, got {lam.sum()!r}")
        object.__setattr__(self, "amplitudes", A)
        object.__setattr__(self, "fractions", lam)

    @classmethod
    def equal(cls, amplitude=1.0):
        return cls(np.array([amplitude]), np.array([1.0]))

    @classmethod
    def two_class(cls, A1, A2, lam1, normalize=True):
        d = cls(np.array([A1, A2]), np.array([lam1, 1.0 - lam1]))
        return d.normalized() if normalize else d

    @property
    def mean_energy(self):
        return float(self.fractions @ self.amplitudes**2)

    def normalized(self):
        return EnergyDistribution(self.amplitudes / math.sqrt(self.mean_energy), self.fractions)

    def expect(self, values):
        return float(self.fractions @ values)


@dataclass(frozen=True)
class Branch:
    interference: float
    ber: np.ndarray
    mean_ber: float
    eta: float
    classification: str
    residual: float
    double_root: bool = False


@dataclass(frozen=True)
class ReplicaSolution:
    alpha: float
    sigma: float
    distribution: EnergyDistribution
    branches: tuple = field(default_factory=tuple)

    @property
    def fixed_points(self):
        return [b.ber for b in self.branches]

    @property
    def good(self):
        return self.branches[0]

    @property
    def bad(self):
        return self.branches[-1]

    def __len__(self):
        return len(self.branches)


def _T(s, dist, alpha, sigma):
    s = np.asarray(s, dtype=float)
    arg = dist.amplitudes[None, :] / np.sqrt(sigma**2 + s.reshape(-1, 1))
    return 4.0 * alpha * (q_function(arg) * dist.amplitudes**2) @ dist.fractions


def _residual(s, dist, alpha, sigma):
    p = q_function(dist.amplitudes / math.sqrt(sigma**2 + s)) if s > 0 or sigma > 0 else np.zeros_like(dist.amplitudes)
    s2 = 4.0 * alpha * dist.expect(dist.amplitudes**2 * p)
    if s2 == 0 and sigma == 0:
        return p, 0.0
    p2 = q_function(dist.amplitudes / math.sqrt(sigma**2 + s2))
    return p, float(np.max(np.abs(p - p2)))


def _roots(dist, alpha, sigma, n=GRID_POINTS):
    """All roots of ``F(s) = T(s) - s`` (excluding the limiting ``s = 0`` when sigma = 0)."""
    s_hi = 2.0 * alpha * dist.mean_energy * (1.0 + 1e-9)
    if sigma > 0:
        s_lo = float(_T(0.0, dist, alpha, sigma)[0])
        if s_lo <= 0.0:
            s_lo = 1e-300
    else:
        s_lo = s_hi * 1e-14
    grid = np.unique(np.concatenate([np.geomspace(s_lo, s_hi, n // 2), np.linspace(s_lo, s_hi, n // 2)]))
    F = _T(grid, dist, alpha, sigma) - grid
    fun = lambda s: float(_T(s, dist, alpha, sigma)[0]) - s

    roots = []
    if sigma > 0 and s_lo == 1e-300 and F[0] < 0:
        # T(0) underflowed: the good root sits below the smallest double
        roots.append((0.0, False))
    exact = np.flatnonzero(F == 0.0)
    roots.extend((float(grid[i]), False) for i in exact)
    sgn = np.sign(F)
    for i in np.flatnonzero(sgn[:-1] * sgn[1:] < 0):
        roots.append((brentq(fun, grid[i], grid[i + 1], xtol=1e-300, rtol=1e-15, maxiter=500), False))

    # tangencies and root pairs hiding between two grid points
    mid, left, right = F[1:-1], F[:-2], F[2:]
    is_max = (mid >= left) & (mid >= right) & (left < 0) & (mid < 0) & (right < 0)
    is_min = (mid <= left) & (mid <= right) & (left > 0) & (mid > 0) & (right > 0)
    for i in np.flatnonzero(is_max | is_min) + 1:
        sign = -1.0 if F[i] < 0 else 1.0
        res = minimize_scalar(lambda s: sign * fun(s), bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                              options={"xatol": 1e-14 * grid[i]})
        s_ext, f_ext = float(res.x), fun(float(res.x))
        if abs(f_ext) <= 1e-10 * max(s_ext, 1e-12):
            roots.append((s_ext, True))
        elif np.sign(f_ext) != sgn[i]:
            roots.append((brentq(fun, grid[i - 1], s_ext, xtol=1e-300, rtol=1e-15), False))
            roots.append((brentq(fun, s_ext, grid[i + 1], xtol=1e-300, rtol=1e-15), False))
    roots.sort()
    merged = []
    for s, dbl in roots:
        if merged and abs(s - merged[-1][0]) <= 1e-9 * max(s, 1e-300):
            merged[-1] = (merged[-1][0], merged[-1][1] or dbl)
        else:
            merged.append((s, dbl))
    return merged


def replica_ber(dist, alpha, sigma):
    """All fixed points of the large-system BER equation, ordered by BER.

    With ``sigma == 0`` the limiting ``p = 0`` branch is always included.  The
    lowest-BER branch is ``good``, the highest ``bad``, anything between
    ``marginal``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if isinstance(dist, (int, float)):
        dist = EnergyDistribution.equal(float(dist))
    if sigma * sigma == 0.0:
        sigma = 0.0  # sigma^2 underflows: take the noiseless path
    found = _roots(dist, alpha, sigma)
    if sigma == 0:
        found = [(0.0, False)] + found
    branches = []
    for i, (s, dbl) in enumerate(found):
        p, res = _residual(s, dist, alpha, sigma)
        if i == 0:
            cls = "good"
        elif i == len(found) - 1:
            cls = "bad"
        else:
            cls = "marginal"
        eta = 1.0 if s == 0 else sigma**2 / (sigma**2 + s)
        branches.append(Branch(s, p, dist.expect(p), eta, cls, res, dbl))
    return ReplicaSolution(alpha, sigma, dist, tuple(branches))


def solution_count(dist, alpha, sigma):
    return len(replica_ber(dist, alpha, sigma).branches)


# -- cutoff channel load -------------------------------------------------------


class CutoffNonConvergence(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class CutoffLoad:
    alpha: float
    interference: float
    tangency_ber: np.ndarray
    candidates: tuple


def load_curve(s, dist):
    """Load at which ``s`` is a nonzero noiseless fixed point: ``s / (4 E[A^2 Q(A/sqrt s)])``."""
    s = np.asarray(s, dtype=float)
    return s / (4.0 * (q_function(dist.amplitudes[None, :] / np.sqrt(s.reshape(-1, 1))) * dist.amplitudes**2) @ dist.fractions)


def _interference_map(I, dist):
    A, lam = dist.amplitudes, dist.fractions
    num = float(lam @ (A**3 * np.exp(-(A**2) / (2.0 * I)))) ** 2
    den = 8.0 * math.pi * float(lam @ (A**2 * q_function(A / math.sqrt(I)))) ** 2
    if den == 0.0:
        return math.nan
    return num / den


def cutoff_load(dist, starts=(1e-3, 0.1, 1.0, 10.0), damping=0.5, tol=1e-12, max_iter=100_000):
    """Cutoff channel load of the noiseless LML-1 detector.

    Iterates ``I <- (1 - damping) I + damping * G(I)`` with
    ``G(I) = E^2[A^3 exp(-A^2/2I)] / (8 pi E^2[A^2 Q(A/sqrt I)])`` from several
    starts; every limit is a stationary point of the load curve and the load
    reported is the smallest one among them.
    """
    if isinstance(dist, (int, float)):
        dist = EnergyDistribution.equal(float(dist))
    scale = dist.mean_energy
    found = []
    traces = []
    for I0 in starts:
        I = I0 * scale
        trace = [I]
        ok = False
        for _ in range(max_iter):
            G = _interference_map(I, dist)
            if not np.isfinite(G) or G <= 0:
                break
            I_new = (1.0 - damping) * I + damping * G
            trace.append(I_new)
            if abs(I_new - I) <= tol * max(I, 1e-300):
                I, ok = I_new, True
                break
            I = I_new
        traces.append(trace[-20:])
        if ok:
            found.append((float(load_curve(I, dist)[0]), I))
    if not found:
        raise CutoffNonConvergence("interference iteration failed from every start", traces)
    alpha, I = min(found)
    p = q_function(dist.amplitudes / math.sqrt(I))
    return CutoffLoad(alpha, I, p, tuple(sorted(set((round(a, 10), round(i, 10)) for a, i in found))))


def tangency_constants():
    """Equal-energy tangency ``(alpha0, p0)`` found by minimizing ``1 / (4 p Qinv(p)^2)`` over ``p``."""
    res = minimize_scalar(lambda p: 1.0 / (4.0 * p * q_inverse(p) ** 2), bounds=(1e-4, 0.45), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.fun), float(res.x)


# -- phase diagram -------------------------------------------------------------


@dataclass(frozen=True)
class PhasePoint:
    alpha: float
    snr_db: float
    solution_count: int

    @property
    def region(self):
        return "single" if self.solution_count == 1 else "coexistence"


@dataclass
class SpinodalScan:
    points: list
    solutions: dict
    lower: list
    upper: list
    intersection: tuple | None


def _multi(dist, sigma, n=20_000):
    """Whether the load curve ``alpha(s)`` at noise ``sigma`` is non-monotone, with its extrema."""
    s = np.geomspace(1e-8, 4.0 * dist.mean_energy, n)
    a = s / (4.0 * _T(s, dist, 0.25, sigma))  # T is linear in alpha
    d = np.diff(a)
    return bool(np.any(d < 0)), s, a


def spinodal_cusp(dist=None, convention="half", snr_bracket=(0.0, 20.0), tol_db=1e-4):
    """Point ``(alpha, Eb/N0 dB)`` where the two spinodal lines meet."""
    dist = dist or EnergyDistribution.equal()
    lo, hi = snr_bracket
    sig = lambda db: float(ebn0_to_sigma(db, dist.mean_energy, convention))
    if _multi(dist, sig(lo))[0] or not _multi(dist, sig(hi))[0]:
        raise ValueError("SNR bracket does not straddle the cusp")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if _multi(dist, sig(mid))[0]:
            hi = mid
        else:
            lo = mid
    # at the cusp the load curve has a flat inflection: the interior local
    # minimum of its slope touches zero
    _, s, a = _multi(dist, sig(lo))
    d = np.gradient(a, np.log(s))
    interior = np.flatnonzero((d[1:-1] <= d[:-2]) & (d[1:-1] <= d[2:])) + 1
    i = interior[np.argmin(d[interior])]
    return float(a[i]), float(0.5 * (lo + hi))


def _refine(dist, sigma, a_in, a_out, tol=1e-4):
    # a_in has several solutions, a_out has one
    while abs(a_in - a_out) > tol:
        mid = 0.5 * (a_in + a_out)
        if solution_count(dist, mid, sigma) > 1:
            a_in = mid
        else:
            a_out = mid
    return 0.5 * (a_in + a_out)


def spinodal_scan(dist=None, alphas=None, snrs_db=None, convention="half", refine=True, tol=1e-4):
    """Classify an (alpha, Eb/N0) grid by the number of fixed points.

    ``lower`` collects, per SNR row, the smallest load with several solutions
    (where the bad branch appears); ``upper`` the largest (where the good
    branch disappears), both bisected in ``alpha`` to ``tol``.
    """
    dist = dist or EnergyDistribution.equal()
    alphas = np.linspace(0.9, 1.7, 41) if alphas is None else np.asarray(alphas, float)
    snrs_db = np.linspace(3.0, 10.0, 29) if snrs_db is None else np.asarray(snrs_db, float)
    points, sols, lower, upper = [], {}, [], []
    for snr in snrs_db:
        sigma = float(ebn0_to_sigma(snr, dist.mean_energy, convention))
        counts = []
        for a in alphas:
            sol = replica_ber(dist, float(a), sigma)
            sols[(float(a), float(snr))] = sol
            points.append(PhasePoint(float(a), float(snr), len(sol)))
            counts.append(len(sol))
        multi = np.array(counts) > 1
        for i in range(len(alphas) - 1):
            if not multi[i] and multi[i + 1]:
                x = _refine(dist, sigma, alphas[i + 1], alphas[i], tol) if refine else 0.5 * (alphas[i] + alphas[i + 1])
                lower.append((float(x), float(snr)))
            elif multi[i] and not multi[i + 1]:
                x = _refine(dist, sigma, alphas[i], alphas[i + 1], tol) if refine else 0.5 * (alphas[i] + alphas[i + 1])
                upper.append((float(x), float(snr)))
    try:
        cusp = spinodal_cusp(dist, convention)
    except ValueError:
        cusp = None
    return SpinodalScan(points, sols, lower, upper, cusp)


class CalibrationError(RuntimeError):
    pass


def calibrate_snr_convention(target=(1.08, 5.13), tol=(0.02, 0.15), conventions=("half", "full")):
    """Pick the Eb/N0 convention whose equal-energy cusp lands on ``target``."""
    tried = {}
    for conv in conventions:
        a, db = spinodal_cusp(EnergyDistribution.equal(), conv)
        tried[conv] = (a, db)
        if abs(a - target[0]) <= tol[0] and abs(db - target[1]) <= tol[1]:
            return conv, (a, db)
    raise CalibrationError(f"no SNR convention reproduces the cusp {target}: {tried}")
