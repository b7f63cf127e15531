"""splitmix64, the only PRNG used anywhere in the package."""

MASK64 = (1 << 64) - 1


def splitmix64_step(state):
    """Advance ``state`` and return ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state, out = splitmix64_step(self.state)
        return out

    def next_double(self):
        """Uniform in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def next_below(self, n):
        """Uniform integer in [0, n), multiply-shift (bias < n / 2**64)."""
        return (self.next_u64() * n) >> 64
