"""Deterministic pseudo-random numbers used for every random choice in the package.

The generator is xorshift64* with fixed constants, chosen so that any
reimplementation (in any language) reproduces every stream bit for bit:

    x ^= x >> 12;  x ^= x << 25 (mod 2**64);  x ^= x >> 27
    output = (x * 0x2545F4914F6CDD1D) mod 2**64

Seeds are scrambled through the splitmix64 finalizer so that small
consecutive seeds give unrelated streams.  Derived conventions, all
documented here because downstream files depend on them:

* uniform doubles take the top 53 output bits: ``(u >> 11) * 2**-53``;
* normal deviates use the Box-Muller transform on uniform pairs, with the
  second value of each pair cached and returned on the next call;
* bounded integers are ``next_uint64() % bound`` (modulo bias < bound/2**64,
  negligible at the sizes used here);
* shuffles are Fisher-Yates from the top index down.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_XORSHIFT_MULT = 0x2545F4914F6CDD1D


def _mix64(x: int) -> int:
    """splitmix64 finalizer: a fixed 64-bit bijective scrambler."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    """Derive an independent stream seed from a master seed and index parts.

    Applies ``state = mix64(state + GOLDEN + part)`` left to right, starting
    from ``mix64(seed)``.  Used to give each experiment component (data
    generation, splitting, weight init, batch shuffling, ...) its own stream
    while everything still flows from one user-visible seed.
    """
    state = _mix64(seed)
    for part in parts:
        state = _mix64((state + GOLDEN + (part & MASK64)) & MASK64)
    return state


class Xorshift64Star:
    """xorshift64* stream; all methods consume the stream in documented order."""

    def __init__(self, seed: int):
        state = _mix64(seed)
        # The all-zero state is the one fixed point of the update rule.
        self._state = state if state != 0 else GOLDEN
        self._spare_normal: float | None = None

    def next_uint64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * _XORSHIFT_MULT) & MASK64

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_uint64() >> 11) * 2.0**-53

    def below(self, bound: int) -> int:
        """Integer in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_uint64() % bound

    def normal(self) -> float:
        """Standard normal deviate (Box-Muller, spare value cached)."""
        if self._spare_normal is not None:
            value = self._spare_normal
            self._spare_normal = None
            return value
        u1 = max(self.uniform(), 2.0**-53)  # keep log(u1) finite
        u2 = self.uniform()
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        self._spare_normal = float(radius * np.sin(theta))
        return float(radius * np.cos(theta))

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)], dtype=float)

    def unit_vector(self, dim: int) -> np.ndarray:
        """Random direction, uniform on the sphere (normalized Gaussian)."""
        while True:
            v = self.normals(dim)
            norm = float(np.linalg.norm(v))
            if norm > 1e-12:
                return v / norm

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        order = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order
