"""Reference configuration and named experiment presets (INI text)."""

REFERENCE = """\
# Reference configuration.  Every key is optional; the values shown are the defaults.
# Lists are comma separated; "a:b:n" expands to n evenly spaced values from a to b.

[simulate]
# channel: exactly one of N or alpha (alpha may be a list: one run per load)
K = 2048
alpha = 1.02
# dense | sparse
model = dense
# nonzero chips per column for sparse codes
# nonzeros = 16
# binary | gaussian
chips = binary
# energy classes (normalized to unit mean energy)
amplitudes = 1.0
fractions = 1.0
# exactly one of snr_db (Eb/N0 in dB) or sigma
snr_db = 6, 8
# mf, gml, slas, wslas, plas, las:seq|seqrand|par|groupN|eheM|fmdM|hybrid, lmlas:J
# each optionally followed by @random, @mf or @truth (initial vector; default mf)
detectors = slas@random
min_bit_errors = 300
min_frames = 1
max_frames = 10000000
seed = 0
workers = 1
# redraw the channel every frame, or keep one fixed channel
channel_mode = redraw
batch_frames = 16
# Eb/N0 = A^2/(2 sigma^2) (half) or A^2/sigma^2 (full)
convention = half
# ber | bfr
mode = ber
# also write large-system branches and the single-bit bound for each SNR
replica = false

[replica]
# scan: classify an (alpha, snr) grid and extract spinodal lines
# points: fixed points at every (alpha, snr-or-sigma) pair
# ccl: cutoff load of two-class distributions over a sweep of A2
mode = scan
alpha = 0.9:1.7:41
snr_db = 3:10:29
# sigma = 0
amplitudes = 1.0
fractions = 1.0
convention = half
refine = true
tol = 1e-4
lambda1 = 0.5
A2 = 1.0, 0.8, 0.6, 0.4, 0.2, 0.1, 0.05

[bounds]
# channel = path/to/channel.csv   (or generate one below)
# dense | sparse | orthogonal | two-bit
model = dense
K = 8
N = 8
seed = 0
amplitudes = 1.0
fractions = 1.0
# rho = 0.4      (two-bit model)
sigma = 0.3, 0.5, 0.8
kinds = gml, lml1, las
max_weight = 8
indecomposable = true
# energy: sqrt(eps^T A^2 eps); literal: sqrt(eps^T eps)
normalization = energy

[regions]
rho = 0.4
A1 = 1.0
A2 = 0.6
extent = 2.0
resolution = 401
"""

_FIG4 = """\
[simulate]
K = 2048
alpha = {alpha}
snr_db = {snr}
detectors = slas@random
min_bit_errors = 300
max_frames = 20000
replica = true
"""

RECIPES = {
    "fig1": ("regions", "[regions]\nrho = 0.4\nA1 = 1.0\nA2 = 0.6\nextent = 2.0\nresolution = 401\n"),
    "fig3": ("replica", "[replica]\nmode = scan\nalpha = 0.9:1.7:41\nsnr_db = 3:10:29\n"),
    "fig4a": ("simulate", _FIG4.format(alpha="0.8, 1.0, 1.08, 1.15, 1.25, 1.5, 2.0, 2.3", snr="7.99")),
    "fig4b": ("simulate", _FIG4.format(alpha="2.3", snr="2:10:9")),
    "fig4c": ("simulate", _FIG4.format(alpha="1.25", snr="2:10:9")),
    "fig4d": ("simulate", _FIG4.format(alpha="1.08", snr="2:10:9")),
    "fig4e": ("simulate", _FIG4.format(alpha="1.02", snr="2:10:9")),
    "fig5": (
        "replica",
        "[replica]\nmode = ccl\nlambda1 = 0.3, 0.5, 0.7, 0.9\n"
        "A2 = 1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05\n",
    ),
    "table-bfr": (
        "simulate",
        "[simulate]\nK = 1200\nalpha = 0.5, 0.7, 1.0, 1.2\nsnr_db = 4, 6, 8, 10\n"
        "detectors = slas@mf\nmode = bfr\nmin_frames = 4\n",
    ),
}
