"""Egress port with eight strict-priority FIFO queues (non-preemptive)."""

from __future__ import annotations

from collections import deque

N_CLASSES = 8


class Frame:
    __slots__ = ("stream", "seq", "created", "tag", "path", "hop", "size", "t_ingress")

    def __init__(self, stream, seq, created, size):
        self.stream = stream
        self.seq = seq
        self.created = created
        self.size = size
        self.tag = 0
        self.path = None
        self.hop = 0
        self.t_ingress = None


class Port:
    """One direction of a link.

    ``offer`` returns the frame to transmit right away (port idle), None
    when the frame was queued and False when the queue bound dropped it. ``release`` is called when the
    current transmission ends and returns the next frame to send, if any.
    The caller schedules the events; the port only keeps queue state.
    """

    __slots__ = ("key", "rate", "propagation", "bound", "queues", "queued_bytes",
                 "busy_until", "free_pending", "tx_bytes", "drops", "n_queued", "peer", "to_host")

    def __init__(self, key, rate, propagation, bound):
        self.key = key
        self.rate = rate
        self.propagation = propagation
        self.bound = bound
        self.queues = [deque() for _ in range(N_CLASSES)]
        self.queued_bytes = [0] * N_CLASSES
        self.busy_until = 0.0
        self.free_pending = False
        self.tx_bytes = 0
        self.drops = 0
        self.n_queued = 0
        self.peer = None
        self.to_host = False

    def tx_time(self, size):
        return size * 8.0 / self.rate

    def offer(self, frame, now):
        if self.n_queued == 0 and self.busy_until <= now:
            return frame
        q = frame.tag
        if self.queued_bytes[q] + frame.size > self.bound:
            self.drops += 1
            return False
        self.queues[q].append(frame)
        self.queued_bytes[q] += frame.size
        self.n_queued += 1
        return None

    def release(self):
        for q in range(N_CLASSES - 1, -1, -1):
            if self.queues[q]:
                frame = self.queues[q].popleft()
                self.queued_bytes[q] -= frame.size
                self.n_queued -= 1
                return frame
        return None

    def start(self, frame, now):
        """Begin transmitting; returns the arrival time of the last bit at the peer."""
        end = now + frame.size * 8.0 / self.rate
        self.busy_until = end
        self.tx_bytes += frame.size
        return end + self.propagation

    def frames(self):
        for q in self.queues:
            yield from q
