"""Counter-based, platform-independent noise streams.

Algorithm (bit-exact):

* ``mix64(z)`` is the SplitMix64 finaliser::

      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      z =  z ^ (z >> 31)                        (all mod 2**64)

* a stream is keyed by ``key = mix64(mix64(seed) + stream_id)``;
* word ``i`` of the stream is ``mix64(key + (i + 1) * 0x9E3779B97F4A7C15)``,
  i.e. the ``i``-th SplitMix64 output started from ``key``;
* ``unif(i) = (word(i) >> 11) * 2**-53``, in ``[0, 1)``.

Draw ``j`` consumes words ``3j`` (mixture component selector), ``3j+1`` and
``3j+2``. A standard normal is Box-Muller on the last two:
``sqrt(-2 ln(1 - unif(3j+1))) * cos(2 pi unif(3j+2))``. A uniform draw with
the requested mean and std is ``mean + std*sqrt(3)*(2*unif(3j+1) - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError

_M64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)

FAMILIES = ("gaussian", "gaussian_mixture", "uniform")


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _C1
    z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, stream_id: int = 0) -> int:
    with np.errstate(over="ignore"):
        k = _mix64(np.array([seed & _M64], dtype=np.uint64))
        k = _mix64(k + np.uint64(stream_id & _M64))
    return int(k[0])


def uniform_words(seed: int, stream_id: int, start: int, count: int) -> np.ndarray:
    """``unif(i)`` for ``i`` in ``[start, start + count)``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(stream_key(seed, stream_id)) + idx * _GOLDEN
        z = _mix64(z)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of one i.i.d. noise source.

    ``components`` is only used by ``gaussian_mixture``: a tuple of
    ``(weight, mean, std)`` triples with positive weights summing to 1.
    """

    family: str = "gaussian"
    mean: float = 0.0
    std: float = 0.0
    components: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown noise family {self.family!r}")
        if not 0 <= self.seed <= _M64:
            raise InvalidParameterError("seed must fit in an unsigned 64-bit integer")
        if self.family == "gaussian_mixture":
            comps = tuple(tuple(float(v) for v in c) for c in self.components)
            if not comps or any(len(c) != 3 for c in comps):
                raise InvalidParameterError("mixture needs (weight, mean, std) components")
            weights = [c[0] for c in comps]
            if any(not w > 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
                raise InvalidParameterError("mixture weights must be positive and sum to 1")
            if any(not c[2] >= 0 for c in comps):
                raise InvalidParameterError("component std must be >= 0")
            object.__setattr__(self, "components", comps)
        elif not self.std >= 0:
            raise InvalidParameterError("std must be >= 0")

    @property
    def expected_mean(self) -> float:
        if self.family == "gaussian_mixture":
            return sum(w * m for w, m, _ in self.components)
        return self.mean

    @property
    def variance(self) -> float:
        if self.family == "gaussian_mixture":
            mu = self.expected_mean
            return sum(w * (s * s + (m - mu) ** 2) for w, m, s in self.components)
        return self.std * self.std

    def with_seed(self, seed: int) -> "NoiseSpec":
        return replace(self, seed=seed)


def draw_noise(spec: NoiseSpec, count: int, stream_id: int = 0, start: int = 0) -> np.ndarray:
    """Draws ``start .. start+count-1`` of the stream ``(spec.seed, stream_id)``."""
    if count <= 0:
        return np.zeros(0)
    words = uniform_words(spec.seed, stream_id, 3 * start, 3 * count).reshape(count, 3)
    if spec.family == "uniform":
        half = spec.std * np.sqrt(3.0)
        return spec.mean + half * (2.0 * words[:, 1] - 1.0)
    z = np.sqrt(-2.0 * np.log(1.0 - words[:, 1])) * np.cos(2.0 * np.pi * words[:, 2])
    if spec.family == "gaussian":
        return spec.mean + spec.std * z
    comps = np.array(spec.components)
    cum = np.cumsum(comps[:, 0])
    pick = np.minimum(np.searchsorted(cum, words[:, 0], side="right"), len(comps) - 1)
    return comps[pick, 1] + comps[pick, 2] * z


@dataclass(frozen=True)
class NoiseStream:
    """Position in a noise stream; advanced functionally by :func:`sample_noise`."""

    stream_id: int = 0
    index: int = field(default=0)


def sample_noise(spec: NoiseSpec, stream_state: NoiseStream | None = None):
    """Next draw of the stream. Returns ``(value, next_state)``."""
    state = stream_state or NoiseStream()
    value = float(draw_noise(spec, 1, state.stream_id, state.index)[0])
    return value, NoiseStream(state.stream_id, state.index + 1)
