"""Random large-MIMO / CDMA channel realizations and matched-filter statistics.

The channel is the real BPSK model ``r = S A b + m`` with unit-norm columns in
``S``, amplitudes ``A`` and white Gaussian noise of standard deviation ``sigma``
per dimension.  The matched-filter output is ``y = S^T r = R A b + S^T m``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "EnergyProfile",
    "ChannelInstance",
    "Observation",
    "generate_dense",
    "generate_sparse",
    "two_bit_channel",
    "orthogonal_channel",
    "transmit",
    "likelihood",
    "gradient",
    "sign",
    "ebn0_to_sigma",
    "sigma_to_ebn0",
    "save_channel",
    "load_channel",
]

SNR_CONVENTIONS = ("half", "full")


def sign(x):
    """Componentwise sign with ``sign(0) = +1``."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def ebn0_to_sigma(ebn0_db, energy=1.0, convention="half"):
    """Noise standard deviation for a given Eb/N0 in dB.

    ``convention="half"`` uses Eb/N0 = A^2 / (2 sigma^2) (real BPSK, N0 = 2 sigma^2),
    ``convention="full"`` uses Eb/N0 = A^2 / sigma^2.
    """
    lin = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    if convention == "half":
        return np.sqrt(energy / (2.0 * lin))
    if convention == "full":
        return np.sqrt(energy / lin)
    raise ValueError(f"unknown SNR convention {convention!r}")


def sigma_to_ebn0(sigma, energy=1.0, convention="half"):
    """Inverse of :func:`ebn0_to_sigma`."""
    sigma = np.asarray(sigma, dtype=float)
    if convention == "half":
        return 10.0 * np.log10(energy / (2.0 * sigma**2))
    if convention == "full":
        return 10.0 * np.log10(energy / sigma**2)
    raise ValueError(f"unknown SNR convention {convention!r}")


@dataclass(frozen=True)
class EnergyProfile:
    """Per-bit amplitudes ``A_k > 0``."""

    energies: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.energies, dtype=float).reshape(-1)
        if a.size == 0 or np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise ValueError("amplitudes must be finite and strictly positive")
        a.setflags(write=False)
        object.__setattr__(self, "energies", a)

    @classmethod
    def equal(cls, K, amplitude=1.0):
        return cls(np.full(K, float(amplitude)))

    @classmethod
    def from_classes(cls, K, amplitudes, fractions, normalize=True):
        """Assign ``K`` bits to energy classes in order, ``round(K * fraction)`` each."""
        amplitudes = np.asarray(amplitudes, dtype=float)
        fractions = np.asarray(fractions, dtype=float)
        counts = np.floor(fractions * K).astype(int)
        # hand the rounding remainder to the largest classes first
        rem = K - counts.sum()
        for i in np.argsort(-(fractions * K - counts))[:rem]:
            counts[i] += 1
        a = np.repeat(amplitudes, counts)
        prof = cls(a)
        return prof.normalized() if normalize else prof

    @property
    def K(self):
        return self.energies.size

    @property
    def mean_energy(self):
        return float(np.mean(self.energies**2))

    @property
    def is_normalized(self):
        return abs(self.mean_energy - 1.0) <= 1e-9

    def normalized(self):
        return EnergyProfile(self.energies / np.sqrt(self.mean_energy))


@dataclass(frozen=True)
class ChannelInstance:
    """One channel realization.

    Attributes
    ----------
    columns : (N, K) ndarray
        Channel matrix ``S`` with unit-norm columns.
    profile : EnergyProfile
    noise_sigma : float
        Real noise standard deviation per dimension.
    crosscorr, weighted : (K, K) ndarray
        ``R = S^T S`` and ``H = A R A``.
    """

    columns: np.ndarray
    profile: EnergyProfile
    noise_sigma: float = 1.0
    seed: object = None
    model: str = "dense"
    crosscorr: np.ndarray = field(default=None, repr=False)
    weighted: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        S = np.asarray(self.columns, dtype=float)
        if S.ndim != 2:
            raise ValueError("channel matrix must be 2-D")
        if S.shape[1] != self.profile.K:
            raise ValueError(f"profile has {self.profile.K} amplitudes, S has {S.shape[1]} columns")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        S.setflags(write=False)
        object.__setattr__(self, "columns", S)
        R = self.crosscorr
        if R is None:
            R = S.T @ S
            R = 0.5 * (R + R.T)
            np.fill_diagonal(R, np.einsum("ij,ij->j", S, S))
        R = np.asarray(R, dtype=float)
        A = self.profile.energies
        H = self.weighted
        if H is None:
            H = (A[:, None] * R) * A[None, :]
        for m in (R, H):
            m.setflags(write=False)
        object.__setattr__(self, "crosscorr", R)
        object.__setattr__(self, "weighted", H)

    @property
    def N(self):
        return self.columns.shape[0]

    @property
    def K(self):
        return self.columns.shape[1]

    @property
    def load(self):
        return self.K / self.N

    @property
    def amplitudes(self):
        return self.profile.energies

    def with_sigma(self, sigma):
        return replace(self, noise_sigma=float(sigma))


@dataclass(frozen=True)
class Observation:
    received: np.ndarray
    mf_output: np.ndarray
    truth: np.ndarray


def _normalize_columns(S):
    return S / np.linalg.norm(S, axis=0, keepdims=True)


def _binary_gram(Z, scale):
    # float32 products of +-1 / 0 chips are exact integers for N < 2**24
    Zf = Z.astype(np.float32)
    G = (Zf.T @ Zf).astype(float) * scale
    return G


def generate_dense(N, K, rng_seed=None, profile=None, sigma=1.0, chips="binary"):
    """Dense random channel with i.i.d. zero-mean unit-variance chips scaled by ``N**-0.5``.

    ``chips="binary"`` draws equiprobable +-1 chips; ``chips="gaussian"`` draws
    standard normal chips.  Columns are renormalized to exact unit length.
    """
    if N < 1 or K < 1:
        raise ValueError("N and K must be positive")
    rng = np.random.default_rng(rng_seed)
    profile = profile if profile is not None else EnergyProfile.equal(K)
    if chips == "binary":
        Z = (2 * rng.integers(0, 2, size=(N, K), dtype=np.int8) - 1).astype(np.int8)
        S = _normalize_columns(Z / np.sqrt(N))
        R = _binary_gram(Z, 1.0 / N)
        np.fill_diagonal(R, 1.0)
        return ChannelInstance(S, profile, sigma, seed=rng_seed, model="dense", crosscorr=R)
    if chips == "gaussian":
        S = _normalize_columns(rng.standard_normal((N, K)) / np.sqrt(N))
        R = S.T @ S
        R = 0.5 * (R + R.T)
        np.fill_diagonal(R, 1.0)
        return ChannelInstance(S, profile, sigma, seed=rng_seed, model="dense-gaussian", crosscorr=R)
    raise ValueError(f"unknown chip distribution {chips!r}")


def generate_sparse(N, K, L, rng_seed=None, profile=None, sigma=1.0):
    """Sparse random code: each column has exactly ``L`` nonzero chips +-L**-0.5."""
    if N < 1 or K < 1:
        raise ValueError("N and K must be positive")
    if not 1 <= L <= N:
        raise ValueError(f"need 1 <= L <= N, got L={L}, N={N}")
    rng = np.random.default_rng(rng_seed)
    profile = profile if profile is not None else EnergyProfile.equal(K)
    Z = np.zeros((N, K), dtype=np.int8)
    rows = np.argsort(rng.random((N, K)), axis=0)[:L]
    signs = 2 * rng.integers(0, 2, size=(L, K), dtype=np.int8) - 1
    Z[rows, np.arange(K)[None, :]] = signs
    S = _normalize_columns(Z / np.sqrt(L))
    R = _binary_gram(Z, 1.0 / L)
    np.fill_diagonal(R, 1.0)
    return ChannelInstance(S, profile, sigma, seed=rng_seed, model=f"sparse-L{L}", crosscorr=R)


def two_bit_channel(rho, A1=1.0, A2=1.0, sigma=1.0):
    """Analytic two-bit channel with crosscorrelation ``rho``."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    S = np.array([[1.0, rho], [0.0, np.sqrt(1.0 - rho * rho)]])
    R = np.array([[1.0, rho], [rho, 1.0]])
    return ChannelInstance(S, EnergyProfile(np.array([A1, A2])), sigma, model="two-bit", crosscorr=R)


def orthogonal_channel(K, amplitudes=None, sigma=1.0):
    prof = EnergyProfile.equal(K) if amplitudes is None else EnergyProfile(amplitudes)
    return ChannelInstance(np.eye(K), prof, sigma, model="orthogonal", crosscorr=np.eye(K))


def _check_bits(b, K):
    b = np.asarray(b)
    if b.shape != (K,):
        raise ValueError(f"bit vector must have shape ({K},), got {b.shape}")
    if not np.all(np.abs(b) == 1):
        raise ValueError("bits must be +-1")
    return b.astype(float)


def transmit(ch, b, rng_seed=None, noise=None):
    """Send ``b`` through ``ch``; returns the received vector and MF output.

    ``noise`` may carry a pre-drawn standard-normal vector of length N, which is
    scaled by ``ch.noise_sigma`` (used for common random numbers across SNRs).
    """
    bf = _check_bits(b, ch.K)
    if noise is None:
        rng = np.random.default_rng(rng_seed)
        noise = rng.standard_normal(ch.N)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (ch.N,):
        raise ValueError("noise vector has the wrong length")
    Ab = ch.amplitudes * bf
    m = ch.noise_sigma * noise
    r = ch.columns @ Ab + m
    # R A b is exact for the stored R; S^T m carries the noise
    y = ch.crosscorr @ Ab + ch.columns.T @ m
    return Observation(r, y, np.asarray(b, dtype=np.int8).copy())


def likelihood(ch, obs, b):
    """Likelihood surrogate ``b^T A y - 0.5 b^T H b``.

    Differs from ``-0.5 (y - RAb)^T R^{-1} (y - RAb)`` by a b-independent constant.
    """
    bf = _check_bits(b, ch.K)
    y = obs.mf_output if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
    return float(bf @ (ch.amplitudes * y) - 0.5 * bf @ ch.weighted @ bf)


def gradient(ch, obs, b):
    """Likelihood gradient ``A y - H b``."""
    bf = _check_bits(b, ch.K)
    y = obs.mf_output if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
    return ch.amplitudes * y - ch.weighted @ bf


# -- import / export -------------------------------------------------------

_MAGIC = b"LMLCHAN1"


def _header(ch):
    seed = ch.seed if isinstance(ch.seed, (int, type(None))) else str(ch.seed)
    return {
        "N": ch.N,
        "K": ch.K,
        "seed": seed,
        "model": ch.model,
        "sigma": ch.noise_sigma,
        "amplitudes": ch.amplitudes.tolist(),
    }


def save_channel(ch, path, fmt=None):
    """Write ``S`` row-major with a header (N, K, seed, model tag, amplitudes, sigma).

    ``fmt`` is ``"csv"`` or ``"bin"``; inferred from the suffix when omitted.
    """
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    hdr = _header(ch)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(hdr, sort_keys=True) + "\n")
            for row in ch.columns:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    elif fmt == "bin":
        blob = json.dumps(hdr, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(np.ascontiguousarray(ch.columns, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown channel file format {fmt!r}")
    return path


def load_channel(path):
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(_MAGIC))
        if head == _MAGIC:
            (n,) = struct.unpack("<I", fh.read(4))
            hdr = json.loads(fh.read(n))
            S = np.frombuffer(fh.read(), dtype="<f8").reshape(hdr["N"], hdr["K"])
        else:
            fh.seek(0)
            text = fh.read().decode()
            first, _, body = text.partition("\n")
            if not first.startswith("#"):
                raise ValueError(f"{path}:1: missing channel header line")
            hdr = json.loads(first[1:])
            S = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
            if S.shape != (hdr["N"], hdr["K"]):
                raise ValueError(f"{path}: matrix shape {S.shape} does not match header")
    return ChannelInstance(
        np.array(S),
        EnergyProfile(np.asarray(hdr["amplitudes"])),
        hdr["sigma"],
        seed=hdr["seed"],
        model=hdr["model"],
    )
