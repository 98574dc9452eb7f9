"""Simulated datagram link and latest-wins state replication.

The link is a logical event queue driven by the simulation clock: each
message is independently dropped with the configured loss rate, otherwise
delivered after the mean latency plus uniform jitter.  Without reordering
enabled, per-sender FIFO is enforced by never scheduling a delivery before
the previously scheduled one.  A fixed seed gives an identical schedule.

Replication keeps only the highest sequence number per (type, subject)
key; a lost sample is healed by the next one, so no retransmission exists.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass

from .protocol import Message


@dataclass
class LinkStats:
    sent: int = 0
    dropped: int = 0
    delivered: int = 0


class SimulatedLink:
    """One direction of the lossy channel between the two rooms."""

    def __init__(
        self,
        latency_ms: float = 0.0,
        jitter_ms: float = 0.0,
        loss_rate: float = 0.0,
        allow_reorder: bool = False,
        seed: int = 0,
    ):
        if not (0.0 <= loss_rate <= 1.0):
            raise ValueError("loss_rate must be within [0, 1]")
        if latency_ms < 0.0 or jitter_ms < 0.0:
            raise ValueError("latency and jitter must be non-negative")
        self.latency_ms = latency_ms
        self.jitter_ms = jitter_ms
        self.loss_rate = loss_rate
        self.allow_reorder = allow_reorder
        self._rng = random.Random(seed)
        self._queue: list[tuple[float, int, Message]] = []
        self._counter = 0
        self._last_scheduled = 0.0
        self.stats = LinkStats()

    def set_params(
        self,
        latency_ms: float | None = None,
        jitter_ms: float | None = None,
        loss_rate: float | None = None,
    ) -> None:
        """Retune the channel live; applies to subsequent sends only."""
        if latency_ms is not None:
            self.latency_ms = max(0.0, latency_ms)
        if jitter_ms is not None:
            self.jitter_ms = min(max(0.0, jitter_ms), self.latency_ms)
        if loss_rate is not None:
            self.loss_rate = min(max(0.0, loss_rate), 1.0)

    def send(self, message: Message, now: float) -> float | None:
        """Queue a message at time ``now``; returns the scheduled delivery
        time, or None when the loss draw eats it."""
        self.stats.sent += 1
        if self._rng.random() < self.loss_rate:
            self.stats.dropped += 1
            return None
        latency = self.latency_ms / 1000.0
        jitter = self.jitter_ms / 1000.0
        when = now + latency + self._rng.uniform(-jitter, jitter)
        when = max(when, now + max(0.0, latency - jitter))
        if not self.allow_reorder:
            when = max(when, self._last_scheduled)
            self._last_scheduled = when
        self._counter += 1
        heapq.heappush(self._queue, (when, self._counter, message))
        return when

    def poll(self, now: float) -> list[Message]:
        """All messages whose delivery time has arrived, in delivery order."""
        out = []
        while self._queue and self._queue[0][0] <= now + 1e-12:
            _, _, msg = heapq.heappop(self._queue)
            out.append(msg)
            self.stats.delivered += 1
        return out

    @property
    def in_flight(self) -> int:
        return len(self._queue)


class ReplicaStore:
    """Latest-wins replication: per key, only strictly newer seqs mutate state."""

    def __init__(self):
        self._entries: dict[tuple[int, int], tuple[int, Message]] = {}
        self.accepted = 0
        self.stale = 0

    def apply(self, message: Message) -> str:
        """Returns "accepted" or "stale"."""
        key = message.key
        current = self._entries.get(key)
        if current is not None and message.seq <= current[0]:
            self.stale += 1
            return "stale"
        self._entries[key] = (message.seq, message)
        self.accepted += 1
        return "accepted"

    def get(self, msg_type: int, subject_id: int) -> Message | None:
        entry = self._entries.get((msg_type, subject_id))
        return entry[1] if entry else None

    def latest(self, msg_type: int) -> dict[int, Message]:
        """Latest message per subject for one type."""
        return {
            key[1]: msg
            for key, (_, msg) in self._entries.items()
            if key[0] == msg_type
        }

    def __len__(self) -> int:
        return len(self._entries)


class SequenceCounters:
    """Per (msg_type, subject) outgoing sequence numbers, starting at 1."""

    def __init__(self):
        self._next: dict[tuple[int, int], int] = {}

    def next_for(self, msg_type: int, subject_id: int) -> int:
        key = (msg_type, subject_id)
        seq = self._next.get(key, 1)
        self._next[key] = seq + 1
        return seq
