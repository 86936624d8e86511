"""Monte Carlo experiments: BER with an error-count stopping rule, bit-flip rates,
large-channel distance statistics and two-bit decision-region maps.

Randomness is counter based.  Frame ``i`` of an experiment with master seed
``s`` draws everything (channel, bits, noise, random initial vectors) from
``SeedSequence(s, spawn_key=(i,))``, so results do not depend on how frames are
batched or spread over worker processes.  All detectors and all SNR points see
the same frames (common random numbers); only the noise scale changes with SNR.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    EnergyProfile,
    ebn0_to_sigma,
    generate_dense,
    generate_sparse,
    sign,
    transmit,
)
from .detectors import (
    EHE,
    FMD,
    Group,
    LmlasConfig,
    Parallel,
    SequentialCircular,
    SequentialRandom,
    default_hybrid,
    detect_gml,
    detect_las,
    detect_lmlas,
    enumerate_bits,
)

__all__ = [
    "DetectorSpec",
    "parse_detector",
    "ExperimentConfig",
    "BerEstimate",
    "FlipRateStats",
    "run_ber",
    "run_bfr",
    "LmlCharacteristic",
    "run_lml_characteristic",
    "lml_characteristic_trend",
    "RegionMap",
    "map_regions_2bit",
    "ber_rows",
    "write_csv",
    "BER_COLUMNS",
]

BER_COLUMNS = ("detector", "K", "N", "alpha", "snr_db", "ber", "stderr", "bit_errors", "bits", "mean_c", "mean_steps")

# -- detector specs ------------------------------------------------------------

_ALIASES = {
    "slas": "las:seq",
    "wslas": "las:hybrid",
    "plas": "las:par",
    "sslas": "las:seqrand",
}
_SPEC_RE = re.compile(r"^(mf|gml|las:(seq|seqrand|par|group\d+|ehe\d+|fmd\d+|hybrid)|lmlas:\d+)(@(random|mf|truth))?$")


@dataclass(frozen=True)
class DetectorSpec:
    """A detector with its schedule and initializer, written ``kind[:variant][@init]``.

    Examples: ``mf``, ``gml``, ``las:seq@random``, ``las:group8@mf``,
    ``las:ehe2@mf``, ``lmlas:2@mf``; ``slas``, ``wslas``, ``plas`` are shorthands.
    """

    text: str
    kind: str
    variant: str | None
    init: str

    @property
    def label(self):
        base = self.kind if self.variant is None else f"{self.kind}:{self.variant}"
        return base if self.kind in ("mf", "gml") else f"{base}@{self.init}"

    def policy(self, K, seed=None):
        v = self.variant
        if v == "seq":
            return SequentialCircular()
        if v == "seqrand":
            return SequentialRandom(seed)
        if v == "par":
            return Parallel()
        if v == "hybrid":
            return default_hybrid(K)
        m = int(re.sub(r"\D", "", v))
        if v.startswith("group"):
            return Group.blocks(K, m)
        if v.startswith("ehe"):
            return EHE(m)
        if v.startswith("fmd"):
            return FMD(m)
        raise ValueError(f"no schedule for {self.text!r}")


def parse_detector(text):
    s = text.strip().lower()
    head, at, init = s.partition("@")
    if at and not init:
        raise ValueError(f"malformed detector spec {text!r}")
    head = _ALIASES.get(head, head)
    s = head + (f"@{init}" if init else "")
    if not _SPEC_RE.match(s):
        raise ValueError(f"malformed detector spec {text!r}")
    kind, _, variant = head.partition(":")
    return DetectorSpec(text.strip(), kind, variant or None, init or "mf")


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    K: int
    N: int | None = None
    alpha: float | None = None
    model: str = "dense"
    nonzeros: int | None = None
    chips: str = "binary"
    amplitudes: tuple = (1.0,)
    fractions: tuple = (1.0,)
    snr_db: tuple = ()
    sigma: tuple = ()
    detectors: tuple = ("slas@random",)
    min_bit_errors: int = 300
    min_frames: int = 1
    max_frames: int = 10**7
    seed: int = 0
    workers: int = 1
    channel_mode: str = "redraw"
    batch_frames: int = 16
    convention: str = "half"

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")
        if (self.N is None) == (self.alpha is None):
            raise ValueError("give exactly one of N and alpha")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.model not in ("dense", "sparse"):
            raise ValueError(f"unknown channel model {self.model!r}")
        if self.model == "sparse" and not self.nonzeros:
            raise ValueError("sparse channels need nonzeros")
        if bool(self.snr_db) == bool(self.sigma):
            raise ValueError("give exactly one of snr_db and sigma")
        if self.min_bit_errors < 1:
            raise ValueError("min_bit_errors must be >= 1")
        if self.max_frames < max(1, self.min_frames):
            raise ValueError("max_frames must be >= min_frames")
        if self.channel_mode not in ("redraw", "fixed"):
            raise ValueError(f"unknown channel mode {self.channel_mode!r}")
        if len(self.amplitudes) != len(self.fractions):
            raise ValueError("amplitudes and fractions differ in length")
        for name in ("amplitudes", "fractions", "snr_db", "sigma", "detectors"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for d in self.detectors:
            parse_detector(d)

    @property
    def n_dims(self):
        return self.N if self.N is not None else max(1, round(self.K / self.alpha))

    @property
    def load(self):
        return self.K / self.n_dims

    def profile(self):
        return EnergyProfile.from_classes(self.K, self.amplitudes, self.fractions, normalize=True)

    def sigmas(self):
        """``(snr_db, sigma)`` pairs; SNR is ``nan`` when sigmas are given directly."""
        if self.sigma:
            return [(math.nan, float(s)) for s in self.sigma]
        e = self.profile().mean_energy
        return [(float(d), float(ebn0_to_sigma(d, e, self.convention))) for d in self.snr_db]

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


# -- per-frame engine -------------------------------------------------------------


def _frame_streams(seed, i):
    ss = np.random.SeedSequence(seed, spawn_key=(i,))
    ch_ss, data_ss = ss.spawn(2)
    return ch_ss, np.random.default_rng(data_ss)


def _make_channel(cfg, ch_ss, profile):
    N = cfg.n_dims
    if cfg.model == "sparse":
        return generate_sparse(N, cfg.K, cfg.nonzeros, ch_ss, profile)
    return generate_dense(N, cfg.K, ch_ss, profile, chips=cfg.chips)


def _run_detector(spec, ch, obs, b_rand, b_true, seed):
    if spec.kind == "mf":
        return sign(obs.mf_output), 0, 0, False
    if spec.kind == "gml":
        return detect_gml(ch, obs), 0, 0, False
    b0 = {"mf": lambda: sign(obs.mf_output), "random": lambda: b_rand, "truth": lambda: b_true}[spec.init]()
    if spec.kind == "lmlas":
        tr = detect_lmlas(ch, obs, b0, LmlasConfig(int(spec.variant)), record_trace=False)
    else:
        tr = detect_las(ch, obs, b0, spec.policy(ch.K, seed), record_trace=False, rng_seed=seed)
    return tr.output, tr.flips, tr.steps, tr.anomaly


def _simulate_frames(cfg, specs, sigmas, start, stop, fixed_channel=None):
    """Bit errors, flips and steps for frames ``start..stop-1``.

    Returns arrays shaped (frames, detectors, sigmas).
    """
    profile = cfg.profile()
    n, D, S = stop - start, len(specs), len(sigmas)
    errors = np.zeros((n, D, S), dtype=np.int64)
    flips = np.zeros((n, D, S), dtype=np.int64)
    steps = np.zeros((n, D, S), dtype=np.int64)
    anomalies = np.zeros((n, D, S), dtype=np.int64)
    K = cfg.K
    for j, i in enumerate(range(start, stop)):
        ch_ss, rng = _frame_streams(cfg.seed, i)
        base = fixed_channel if fixed_channel is not None else _make_channel(cfg, ch_ss, profile)
        b = (2 * rng.integers(0, 2, size=K) - 1).astype(np.int8)
        noise = rng.standard_normal(base.N)
        b_rand = (2 * rng.integers(0, 2, size=K) - 1).astype(np.int8)
        det_seed = int(rng.integers(0, 2**63))
        for s, (_, sigma) in enumerate(sigmas):
            ch = base.with_sigma(sigma)
            obs = transmit(ch, b, noise=noise)
            for d, spec in enumerate(specs):
                out, m, st, bad = _run_detector(spec, ch, obs, b_rand, b, det_seed)
                errors[j, d, s] = int(np.count_nonzero(out != b))
                flips[j, d, s] = m
                steps[j, d, s] = st
                anomalies[j, d, s] = bad
    return errors, flips, steps, anomalies


def _simulate_batch(args):
    cfg, start, stop = args
    specs = [parse_detector(t) for t in cfg.detectors]
    # the fixed channel is seeded by the master seed itself, which makes it the
    # same channel `lmlas bounds` builds for that seed
    fixed = _make_channel(cfg, cfg.seed, cfg.profile()) if cfg.channel_mode == "fixed" else None
    return _simulate_frames(cfg, specs, cfg.sigmas(), start, stop, fixed)


@dataclass(frozen=True)
class BerEstimate:
    detector: str
    snr_db: float
    sigma: float
    K: int
    N: int
    bit_errors: int
    bits: int
    frames: int
    mean_flip_rate: float
    max_flip_rate: float
    mean_steps: float
    anomalies: int
    underpowered: bool

    @property
    def ber(self):
        return self.bit_errors / self.bits if self.bits else math.nan

    @property
    def std_error(self):
        p = self.ber
        return math.sqrt(p * (1.0 - p) / self.bits) if self.bits else math.nan

    @property
    def alpha(self):
        return self.K / self.N

    def row(self):
        return {
            "detector": self.detector,
            "K": self.K,
            "N": self.N,
            "alpha": f"{self.alpha:.6g}",
            "snr_db": f"{self.snr_db:.6g}",
            "ber": f"{self.ber:.6e}",
            "stderr": f"{self.std_error:.6e}",
            "bit_errors": self.bit_errors,
            "bits": self.bits,
            "mean_c": f"{self.mean_flip_rate:.6g}",
            "mean_steps": f"{self.mean_steps:.6g}",
        }


def _batches(cfg):
    size = max(1, int(cfg.batch_frames))
    start = 0
    while start < cfg.max_frames:
        stop = min(start + size, cfg.max_frames)
        yield start, stop
        start = stop


def _run(cfg, stop_rule):
    """Accumulate frames batch by batch until ``stop_rule`` says every cell is done.

    Batches are consumed strictly in order, so the frames counted towards a
    cell never depend on the number of workers.
    """
    specs = [parse_detector(t) for t in cfg.detectors]
    sig = cfg.sigmas()
    D, S = len(specs), len(sig)
    err = np.zeros((D, S), dtype=np.int64)
    frames = np.zeros((D, S), dtype=np.int64)
    flip_sum = np.zeros((D, S))
    flip_max = np.zeros((D, S))
    step_sum = np.zeros((D, S))
    anom = np.zeros((D, S), dtype=np.int64)
    active = np.ones((D, S), dtype=bool)

    def absorb(res):
        e, f, st, an = res
        for j in range(e.shape[0]):
            if not active.any():
                return
            m = active
            err[m] += e[j][m]
            frames[m] += 1
            flip_sum[m] += f[j][m]
            flip_max[m] = np.maximum(flip_max[m], f[j][m])
            step_sum[m] += st[j][m]
            anom[m] += an[j][m]
            active[:] = active & ~stop_rule(err, frames)

    batches = _batches(cfg)
    if cfg.workers <= 1:
        for start, stop in batches:
            absorb(_simulate_batch((cfg, start, stop)))
            if not active.any():
                break
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            while active.any():
                wave = [next(batches, None) for _ in range(cfg.workers)]
                wave = [w for w in wave if w is not None]
                if not wave:
                    break
                for res in pool.map(_simulate_batch, [(cfg, a, b) for a, b in wave]):
                    absorb(res)

    N = cfg.n_dims
    out = []
    for s, (db, sigma) in enumerate(sig):
        for d, spec in enumerate(specs):
            fr = int(frames[d, s])
            out.append(
                BerEstimate(
                    detector=spec.label,
                    snr_db=db,
                    sigma=sigma,
                    K=cfg.K,
                    N=N,
                    bit_errors=int(err[d, s]),
                    bits=fr * cfg.K,
                    frames=fr,
                    mean_flip_rate=float(flip_sum[d, s] / (fr * cfg.K)) if fr else math.nan,
                    max_flip_rate=float(flip_max[d, s] / cfg.K),
                    mean_steps=float(step_sum[d, s] / fr) if fr else math.nan,
                    anomalies=int(anom[d, s]),
                    underpowered=bool(err[d, s] < cfg.min_bit_errors),
                )
            )
    return out


def run_ber(cfg):
    """BER per (SNR, detector) cell.

    A cell stops once it has ``min_bit_errors`` errors over at least
    ``min_frames`` frames; cells still short at ``max_frames`` are flagged
    ``underpowered``.
    """
    def done(err, frames):
        return ((err >= cfg.min_bit_errors) & (frames >= cfg.min_frames)) | (frames >= cfg.max_frames)

    return _run(cfg, done)


@dataclass(frozen=True)
class FlipRateStats:
    detector: str
    snr_db: float
    K: int
    N: int
    frames: int
    mean_flip_rate: float
    max_flip_rate: float
    mean_steps: float


def run_bfr(cfg):
    """Mean and maximum flip rate ``c = M / K`` over exactly ``min_frames`` frames per cell."""
    cfg = cfg.replace(max_frames=max(1, cfg.min_frames))
    est = _run(cfg, lambda err, frames: frames >= cfg.max_frames)
    return [
        FlipRateStats(e.detector, e.snr_db, e.K, e.N, e.frames, e.mean_flip_rate, e.max_flip_rate, e.mean_steps)
        for e in est
    ]


def ber_rows(estimates):
    return [e.row() for e in estimates]


def write_csv(rows, path_or_buf, columns=None):
    """Write dict rows as CSV with a header; returns the text when no path is given."""
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO() if path_or_buf is None else None
    fh = buf if buf is not None else open(path_or_buf, "w", newline="")
    try:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in columns})
    finally:
        if buf is None:
            fh.close()
    return buf.getvalue() if buf is not None else None


# -- distance statistics of large channels -------------------------------------------


@dataclass(frozen=True)
class LmlCharacteristic:
    N: int
    alpha: float
    M1: int
    M2: int
    samples: int
    violations: int

    @property
    def rate(self):
        return self.violations / self.samples


def run_lml_characteristic(N, alpha, M1, M2, samples, seed=0, amplitudes=(1.0,), fractions=(1.0,), chips="binary"):
    """Fraction of nested error-vector pairs whose distances are out of order.

    Each sample draws a support ``I2`` of size ``w2`` in ``(M1, M2]`` among the
    ``K = alpha N`` bits, a subset ``I1`` of size ``w1 <= M1``, signs for
    ``eps2`` (``eps1`` is its restriction to ``I1``) and a fresh channel.  Only
    the ``w2`` channel columns on ``I2`` enter either distance, so only those
    are drawn.  A violation is ``d_GML(eps1) >= d_GML(eps2)``.
    """
    if not 1 <= M1 < M2:
        raise ValueError("need 1 <= M1 < M2")
    K = max(M2, round(alpha * N))
    rng = np.random.default_rng(seed)
    A_cls = np.asarray(amplitudes, float)
    lam = np.asarray(fractions, float)
    A_cls = A_cls / math.sqrt(lam @ A_cls**2)
    viol = 0
    for _ in range(samples):
        w2 = int(rng.integers(M1 + 1, M2 + 1))
        w1 = int(rng.integers(1, M1 + 1))
        I2 = rng.choice(K, size=w2, replace=False)
        amp = A_cls[np.minimum(np.searchsorted(np.cumsum(lam), (I2 + 0.5) / K), len(lam) - 1)]
        if chips == "binary":
            S = (2 * rng.integers(0, 2, size=(N, w2)) - 1).astype(float)
        else:
            S = rng.standard_normal((N, w2))
        S /= np.linalg.norm(S, axis=0, keepdims=True)
        e2 = (2 * rng.integers(0, 2, size=w2) - 1) * amp
        e1 = np.zeros(w2)
        sub = rng.choice(w2, size=w1, replace=False)
        e1[sub] = e2[sub]
        viol += np.sum((S @ e1) ** 2) >= np.sum((S @ e2) ** 2)
    return LmlCharacteristic(N, alpha, M1, M2, samples, int(viol))


def lml_characteristic_trend(Ns, alpha, M1, M2, samples, repeats=10, seed=0, **kw):
    """Median violation rate over ``repeats`` independent runs, per ``N``."""
    out = {}
    for N in Ns:
        rates = [
            run_lml_characteristic(N, alpha, M1, M2, samples, seed=np.random.SeedSequence(seed, spawn_key=(N, r)), **kw).rate
            for r in range(repeats)
        ]
        out[N] = float(np.median(rates))
    return out


# -- two-bit decision regions -----------------------------------------------------------


def _label(b):
    return "".join("+" if x > 0 else "-" for x in b)


@dataclass
class RegionMap:
    """Per-grid-point decisions on the ``(y1, y2)`` plane of a two-bit channel.

    ``gml`` holds indices into :attr:`vectors`; ``lml1`` and ``plas`` are boolean
    masks of shape ``(n1, n2, 4)`` marking LML-1 points and PLAS fixed points.
    """

    rho: float
    amplitudes: tuple
    y1: np.ndarray
    y2: np.ndarray
    vectors: np.ndarray
    gml: np.ndarray
    lml1: np.ndarray
    plas: np.ndarray
    likelihood: np.ndarray = field(repr=False)

    def rows(self):
        labels = [_label(v) for v in self.vectors]
        for i, a in enumerate(self.y1):
            for j, c in enumerate(self.y2):
                yield {
                    "y1": f"{a:.6g}",
                    "y2": f"{c:.6g}",
                    "gml": labels[self.gml[i, j]],
                    "lml1": " ".join(l for l, m in zip(labels, self.lml1[i, j]) if m),
                    "plas": " ".join(l for l, m in zip(labels, self.plas[i, j]) if m),
                    "n_lml1": int(self.lml1[i, j].sum()),
                    "n_plas": int(self.plas[i, j].sum()),
                }

    def to_csv(self, path=None):
        return write_csv(self.rows(), path, ["y1", "y2", "gml", "lml1", "plas", "n_lml1", "n_plas"])


def map_regions_2bit(rho, A1, A2, y1=None, y2=None, extent=2.0, resolution=401):
    """GML decision, LML-1 set and PLAS fixed-point set at every grid point.

    The grid defaults to ``resolution`` points per axis over ``[-extent, extent]``.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    y1 = np.linspace(-extent, extent, resolution) if y1 is None else np.asarray(y1, float)
    y2 = np.linspace(-extent, extent, resolution) if y2 is None else np.asarray(y2, float)
    A = np.array([A1, A2], float)
    H = np.array([[A1 * A1, rho * A1 * A2], [rho * A1 * A2, A2 * A2]])
    B = enumerate_bits(2).astype(float)
    Y = np.stack(np.meshgrid(y1, y2, indexing="ij"), axis=-1)
    AY = Y * A
    # G[i, j, v, k]: gradient at vector v
    G = AY[:, :, None, :] - (B @ H)[None, None, :, :]
    F = AY @ B.T - 0.5 * np.einsum("vk,kl,vl->v", B, H, B)
    best = F.max(axis=-1, keepdims=True)
    gml = np.argmax(F >= best - 1e-12, axis=-1)
    u = B[None, None] * G
    lml1 = np.all(u >= -np.diag(H) - 1e-12, axis=-1)
    plas = np.all(u >= -np.abs(H).sum(axis=1) - 1e-12, axis=-1)
    return RegionMap(rho, (A1, A2), y1, y2, enumerate_bits(2).copy(), gml, lml1, plas, F)


def manifest_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=str)
