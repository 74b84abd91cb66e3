"""Per-topic sampling policies deciding which records receive integrity proofs.

A policy resolves each topic to an interval k: the k-th, 2k-th, ... message
on that topic is selected for the chain (1-based counters, so the first
selected record is the k-th, not the 1st). The rate-adaptive policy derives
the interval from the topic's publication rate via a fixed ladder: slower
topics get denser proofs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

from .errors import ConfigError

logger = logging.getLogger(__name__)


class PolicyError(ConfigError):
    """Invalid sampling-policy construction or serialization."""


class RateOutOfRange(PolicyError):
    """Publication rate outside the ladder's [0, 400) Hz domain."""


# (exclusive upper rate bound in Hz, proof interval in messages)
RATE_LADDER: tuple[tuple[float, int], ...] = (
    (0.5, 1),
    (1.0, 5),
    (3.0, 10),
    (25.0, 15),
    (45.0, 50),
    (100.0, 100),
    (400.0, 1000),
)

# Interval applied to topics a rate-adaptive policy has never heard of.
FALLBACK_INTERVAL = 100


def interval_for_rate(rate_hz: float) -> int:
    """Map a publication rate to its ladder interval.

    Raises:
        RateOutOfRange: if rate_hz is negative or >= 400 Hz.
    """
    if rate_hz < 0:
        raise RateOutOfRange(f"rate must be non-negative, got {rate_hz}")
    for bound, interval in RATE_LADDER:
        if rate_hz < bound:
            return interval
    raise RateOutOfRange(f"rate {rate_hz} Hz is beyond the ladder's 400 Hz bound")


@dataclass
class TopicCounter:
    """Messages observed on one topic; incremented before the selection test."""

    topic: str
    count: int = 0

    def increment(self) -> int:
        self.count += 1
        return self.count


@dataclass(frozen=True)
class SamplingPolicy:
    """Selection rule: kind 'none', 'fixed', or 'rate_adaptive'."""

    kind: str
    interval: int | None = None
    intervals: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def none(cls) -> "SamplingPolicy":
        return cls(kind="none")

    @classmethod
    def fixed(cls, interval: int) -> "SamplingPolicy":
        if interval < 1:
            raise PolicyError(f"interval must be >= 1, got {interval}")
        return cls(kind="fixed", interval=interval)

    @classmethod
    def rate_adaptive(cls, rates: Mapping[str, float]) -> "SamplingPolicy":
        intervals = {topic: interval_for_rate(rate) for topic, rate in rates.items()}
        return cls(kind="rate_adaptive", intervals=intervals)

    def interval_for(self, topic: str) -> int | None:
        """Resolved interval for a topic; None means never select."""
        if self.kind == "none":
            return None
        if self.kind == "fixed":
            return self.interval
        resolved = self.intervals.get(topic)
        if resolved is None:
            logger.warning(
                "topic %r not covered by rate-adaptive policy; falling back to interval %d",
                topic,
                FALLBACK_INTERVAL,
            )
            return FALLBACK_INTERVAL
        return resolved

    def to_dict(self) -> dict:
        if self.kind == "none":
            return {"kind": "none"}
        if self.kind == "fixed":
            return {"kind": "fixed", "interval": self.interval}
        return {
            "kind": "rate_adaptive",
            "intervals": {topic: self.intervals[topic] for topic in sorted(self.intervals)},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SamplingPolicy":
        kind = data.get("kind")
        if kind == "none":
            return cls.none()
        if kind == "fixed":
            interval = data.get("interval")
            if not isinstance(interval, int) or interval < 1:
                raise PolicyError(f"bad fixed interval: {interval!r}")
            return cls.fixed(interval)
        if kind == "rate_adaptive":
            intervals = data.get("intervals")
            if not isinstance(intervals, dict) or not all(
                isinstance(v, int) and v >= 1 for v in intervals.values()
            ):
                raise PolicyError(f"bad rate_adaptive intervals: {intervals!r}")
            return cls(kind="rate_adaptive", intervals=dict(intervals))
        raise PolicyError(f"unknown policy kind: {kind!r}")


def selects(policy: SamplingPolicy, counter: TopicCounter) -> bool:
    """True iff the counter's current message gets a chain entry."""
    interval = policy.interval_for(counter.topic)
    if interval is None:
        return False
    return counter.count % interval == 0
