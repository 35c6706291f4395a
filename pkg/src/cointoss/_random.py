"""Counter-based random streams keyed on explicit coordinates.

Every draw is a pure function of its key, so results never depend on how
work is split across processes.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def keyed_generator(seed: int, stream: int, counter: int = 0) -> np.random.Generator:
    """Philox generator with key ``(seed, stream)`` started at ``counter``."""
    bitgen = np.random.Philox(key=[seed & _MASK64, stream & _MASK64],
                              counter=[counter & _MASK64, 0, 0, 0])
    return np.random.Generator(bitgen)


def random_bits(gen: np.random.Generator, nbits: int) -> int:
    """Uniform integer in ``[0, 2**nbits)``."""
    if nbits <= 0:
        return 0
    words = gen.integers(0, 1 << 64, size=(nbits + 63) // 64, dtype=np.uint64, endpoint=False)
    value = 0
    for w in words.tolist():
        value = (value << 64) | w
    return value & ((1 << nbits) - 1)
