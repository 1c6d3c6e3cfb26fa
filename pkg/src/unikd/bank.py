"""Fixed-capacity FIFO embedding stores feeding the relational loss.

A MemoryBank keeps the most recent `capacity` embedding rows in insertion
order, evicting oldest-first. Rows are stored raw (unnormalized) and copied
on the way in and out, so stored state is detached from caller arrays and
snapshots never alias the buffer. BankPair maintains a teacher bank and a
student bank in lockstep so row i of each always came from the same sample.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .errors import BankEmptyError, BatchTooLargeError, DimensionMismatchError

Array = NDArray[np.float64]


class MemoryBank:
    """Ring-buffer FIFO over embedding rows with strict capacity."""

    def __init__(self, capacity: int, dim: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self._buf = np.zeros((self.capacity, self.dim))
        self._ptr = 0  # next write slot
        self.fill = 0

    def enqueue_batch(self, batch: object) -> "MemoryBank":
        """Append rows oldest-first-evicted; fill = min(capacity, fill + m)."""
        arr = np.ascontiguousarray(batch, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"batch shape {arr.shape} incompatible with bank dim {self.dim}"
            )
        m = arr.shape[0]
        if m > self.capacity:
            raise BatchTooLargeError(
                f"batch of {m} rows exceeds bank capacity {self.capacity}"
            )
        if m == 0:
            return self
        idx = (self._ptr + np.arange(m)) % self.capacity
        self._buf[idx] = arr  # fancy assignment copies, detaching from caller
        self._ptr = int((self._ptr + m) % self.capacity)
        self.fill = min(self.capacity, self.fill + m)
        return self

    def snapshot(self) -> Array:
        """Copy of the stored rows, oldest first."""
        if self.fill == 0:
            raise BankEmptyError("snapshot of an empty bank")
        idx = (self._ptr - self.fill + np.arange(self.fill)) % self.capacity
        return self._buf[idx]

    def is_ready(self) -> bool:
        """True once the bank has reached full capacity."""
        return self.fill == self.capacity


class BankPair:
    """Teacher and student banks updated together, same capacity and fill."""

    def __init__(self, capacity: int, dim: int) -> None:
        self.teacher = MemoryBank(capacity, dim)
        self.student = MemoryBank(capacity, dim)

    def enqueue_pair(self, t_batch: object, s_batch: object) -> None:
        t = np.asarray(t_batch)
        s = np.asarray(s_batch)
        if t.shape != s.shape:
            raise DimensionMismatchError(
                f"teacher batch shape {t.shape} != student batch shape {s.shape}"
            )
        self.teacher.enqueue_batch(t)
        self.student.enqueue_batch(s)

    def is_ready(self) -> bool:
        return self.teacher.is_ready() and self.student.is_ready()

    def snapshots(self) -> tuple[Array, Array]:
        return self.teacher.snapshot(), self.student.snapshot()
