"""Counter-based random streams.

Every random draw in the package comes from a Philox4x64-10 generator
(Salmon et al., "Parallel random numbers: as easy as 1, 2, 3", SC'11; the
reference implementation is the Random123 library, numpy ships a bit-exact
port as ``numpy.random.Philox``).  The 128-bit key is ``(seed, stream_id)``
and the 256-bit counter addresses the output, so any block of the stream can
be regenerated without replaying what precedes it.

Samples are addressed by a global sample index: sample ``i`` of a draw with
``width`` doubles per sample always consumes the words
``[i * padded, i * padded + width)`` where ``padded`` is ``width`` rounded
up to a multiple of 4 (one Philox block yields four 64-bit words).  This is
what makes sharded runs produce exactly the samples of a single run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _padded(width: int) -> int:
    return -(-width // 4) * 4


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) <= _MASK64):
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {v}")

    def _bitgen(self) -> np.random.Philox:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Philox(key=key)

    def generator(self) -> np.random.Generator:
        """A fresh sequential generator positioned at the start of the stream."""
        return np.random.Generator(self._bitgen())

    def uniform_block(self, start: int, count: int, width: int) -> np.ndarray:
        """Uniform doubles in [0, 1) for samples ``start .. start+count-1``.

        Returns an array of shape ``(count, width)``; row ``j`` depends only on
        ``(seed, stream_id, start + j, width)``.
        """
        if start < 0 or count < 0 or width < 1:
            raise ValueError("start, count must be >= 0 and width >= 1")
        pad = _padded(width)
        bg = self._bitgen()
        if start:
            bg.advance(start * pad // 4)
        out = np.random.Generator(bg).random((count, pad))
        return out[:, :width]

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def stream_for(seed: int, label: str) -> RngStream:
    """Stream whose id is derived from a text label (stable across runs and platforms)."""
    h = 1469598103934665603
    for b in label.encode():
        h = ((h ^ b) * 1099511628211) & _MASK64
    return RngStream(seed, h)
