import numpy as np

from lmlas.channel import transmit


def random_bits(rng, K):
    return (2 * rng.integers(0, 2, size=K) - 1).astype(np.int8)


def noisy_observation(ch, rng):
    b = random_bits(rng, ch.K)
    return b, transmit(ch, b, rng_seed=rng)
