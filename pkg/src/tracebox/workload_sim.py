"""Synthetic topic workload plus a bounded-queue recorder model.

Generates per-topic message streams at reference rates and sizes, then
replays them through a single-consumer recorder model whose per-record
processing cost grows with the payload bytes it must hash. Arrivals that
find the queue full are dropped and counted as lost, which reproduces the
qualitative effect of proof density on message loss: sparser hashing, less
loss.

Absolute loss percentages are hardware- and stack-dependent; the numbers
here follow from the frozen cost-model constants and only the relative
ordering across policies is meaningful.
"""

from __future__ import annotations

import hashlib
import heapq
import time
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import ConfigError
from .policy import SamplingPolicy, TopicCounter, selects
from .recorder import MessageRecord

DEFAULT_QUEUE_CAPACITY = 256


@dataclass(frozen=True)
class TopicSpec:
    """Average publication rate and payload size for one topic."""

    name: str
    rate_hz: float
    msg_bytes: int

    def __post_init__(self):
        if self.rate_hz < 0:
            raise ConfigError(f"rate must be >= 0, got {self.rate_hz} for {self.name!r}")
        if self.msg_bytes < 1:
            raise ConfigError(f"msg_bytes must be >= 1, got {self.msg_bytes} for {self.name!r}")


# Reference navigation workload: topic name -> (rate Hz, average message bytes).
REFERENCE_TOPICS: tuple[TopicSpec, ...] = (
    TopicSpec("map", 0.0, 1007309),
    TopicSpec("tf_static", 0.0, 9011),
    TopicSpec("robot_description", 0.0, 25498),
    TopicSpec("navigate_to_pose/_action/status", 0.028, 2389),
    TopicSpec("global_costmap/costmap", 0.500, 996147),
    TopicSpec("plan", 0.884, 3809),
    TopicSpec("rosout", 1.014, 746),
    TopicSpec("local_costmap/costmap", 1.646, 3987),
    TopicSpec("amcl_pose", 1.925, 1055),
    TopicSpec("behavior_tree_log", 2.74, 313),
    TopicSpec("cmd_vel", 18.151, 147),
    TopicSpec("camera/image_raw", 25.57, 1037111),
    TopicSpec("scan", 47.173, 8846),
    TopicSpec("odom", 92.946, 780),
    TopicSpec("tf", 387.278, 195),
)

REFERENCE_RATES: dict[str, float] = {spec.name: spec.rate_hz for spec in REFERENCE_TOPICS}


@dataclass(frozen=True)
class CostModel:
    """Per-record processing time of the recorder under proof duty.

    base_cost_s covers writing a record; hash_cost_per_byte_s covers the
    whole proof path (hashing, chain bookkeeping, transaction handling) and
    is deliberately far above raw SHA-256 throughput, which on the build
    machine measured ~0.7 ns/byte. The defaults are sized against the
    reference workload and the default queue so that one ~1 MB hash stall
    stays within queue capacity, while hashing every 10th message keeps the
    consumer permanently oversubscribed.
    """

    base_cost_s: float = 2.0e-4
    hash_cost_per_byte_s: float = 4.0e-7

    def service_time(self, payload_bytes: int, selected: bool) -> float:
        if selected:
            return self.base_cost_s + self.hash_cost_per_byte_s * payload_bytes
        return self.base_cost_s

    @classmethod
    def calibrate(cls, pressure: float = 570.0, base_cost_s: float = 2.0e-4) -> "CostModel":
        """Scale a fresh SHA-256 micro-benchmark by a pressure multiplier."""
        buf = b"\xa5" * (4 * 1024 * 1024)
        start = time.perf_counter()
        hashlib.sha256(buf).digest()
        per_byte = (time.perf_counter() - start) / len(buf)
        return cls(base_cost_s=base_cost_s, hash_cost_per_byte_s=per_byte * pressure)


DEFAULT_COST_MODEL = CostModel()


@dataclass(frozen=True)
class LossReport:
    """Per-topic published/recorded counts for one policy run."""

    policy_label: str
    duration_s: float
    published: Mapping[str, int]
    recorded: Mapping[str, int]

    def lost(self, topic: str) -> int:
        return self.published[topic] - self.recorded[topic]

    def loss_rate(self, topic: str) -> float:
        published = self.published[topic]
        if published == 0:
            return 0.0
        return 1.0 - self.recorded[topic] / published

    def to_dict(self) -> dict:
        return {
            "policy": self.policy_label,
            "duration_s": self.duration_s,
            "topics": {
                topic: {
                    "published": self.published[topic],
                    "recorded": self.recorded[topic],
                    "loss_rate": self.loss_rate(topic),
                }
                for topic in sorted(self.published)
            },
        }


def _topic_rng(seed: int, topic: str) -> np.random.Generator:
    topic_key = int.from_bytes(hashlib.blake2b(topic.encode(), digest_size=8).digest(), "big")
    return np.random.default_rng([seed, topic_key])


def _topic_arrivals(spec: TopicSpec, duration_s: float, seed: int,
                    poisson: bool) -> Iterator[MessageRecord]:
    rng = _topic_rng(seed, spec.name)
    if spec.rate_hz == 0:
        # Latched topic: published once at start.
        yield MessageRecord(spec.name, 1, 0, rng.bytes(spec.msg_bytes))
        return
    seq = 0
    t = 0.0
    while True:
        t += rng.exponential(1.0 / spec.rate_hz) if poisson else 1.0 / spec.rate_hz
        if t >= duration_s:
            return
        seq += 1
        yield MessageRecord(spec.name, seq, round(t * 1e9), rng.bytes(spec.msg_bytes))


def generate_stream(specs: Iterable[TopicSpec], duration_s: float, seed: int,
                    poisson: bool = False) -> Iterator[MessageRecord]:
    """Time-ordered merged stream over all topics; deterministic per seed."""
    if duration_s <= 0:
        raise ConfigError(f"duration must be > 0, got {duration_s}")
    streams = [
        ((record.t_ns, record.topic, record) for record in _topic_arrivals(spec, duration_s, seed, poisson))
        for spec in specs
    ]
    for _, _, record in heapq.merge(*streams):
        yield record


def run_recorder_model(stream: Iterable[MessageRecord], policy: SamplingPolicy,
                       cost_model: CostModel = DEFAULT_COST_MODEL,
                       queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
                       policy_label: str = "", duration_s: float = 0.0) -> LossReport:
    """Replay a stream through the bounded-queue recorder model.

    Single consumer, FIFO service, drop-newest on overflow. Selection
    counters advance only for admitted records, mirroring a recorder that
    never sees dropped messages.
    """
    published: dict[str, int] = {}
    recorded: dict[str, int] = {}
    counters: dict[str, TopicCounter] = {}
    completions: deque[float] = deque()
    last_completion = 0.0

    for record in stream:
        t = record.t_ns / 1e9
        while completions and completions[0] <= t:
            completions.popleft()
        published[record.topic] = published.get(record.topic, 0) + 1
        recorded.setdefault(record.topic, 0)
        if len(completions) >= queue_capacity:
            continue
        recorded[record.topic] += 1
        counter = counters.setdefault(record.topic, TopicCounter(topic=record.topic))
        counter.increment()
        service = cost_model.service_time(len(record.payload), selects(policy, counter))
        last_completion = max(t, last_completion) + service
        completions.append(last_completion)

    return LossReport(
        policy_label=policy_label,
        duration_s=duration_s,
        published=published,
        recorded=recorded,
    )


def default_policy_set(specs: Iterable[TopicSpec]) -> dict[str, SamplingPolicy]:
    rates = {spec.name: spec.rate_hz for spec in specs}
    policies: dict[str, SamplingPolicy] = {
        f"interval-{k}": SamplingPolicy.fixed(k) for k in (10, 25, 50, 100)
    }
    policies["rate-adaptive"] = SamplingPolicy.rate_adaptive(rates)
    policies["none"] = SamplingPolicy.none()
    return policies


def compare_policies(specs: Iterable[TopicSpec], policies: Mapping[str, SamplingPolicy],
                     duration_s: float, seed: int,
                     cost_model: CostModel = DEFAULT_COST_MODEL,
                     queue_capacity: int = DEFAULT_QUEUE_CAPACITY) -> list[LossReport]:
    """One LossReport per policy over the identical (same-seed) stream."""
    specs = tuple(specs)
    return [
        run_recorder_model(
            generate_stream(specs, duration_s, seed),
            policy,
            cost_model=cost_model,
            queue_capacity=queue_capacity,
            policy_label=label,
            duration_s=duration_s,
        )
        for label, policy in policies.items()
    ]


def format_table(reports: list[LossReport]) -> str:
    """Plain-text loss table: one row per topic, one column per policy."""
    if not reports:
        return ""
    topics = sorted({topic for report in reports for topic in report.published})
    labels = [report.policy_label for report in reports]
    name_width = max(len("topic"), *(len(t) for t in topics))
    col_width = max(9, *(len(label) for label in labels))
    header = "topic".ljust(name_width) + "".join(f"  {label:>{col_width}}" for label in labels)
    lines = [header]
    for topic in topics:
        cells = "".join(f"  {report.loss_rate(topic) * 100:>{col_width - 1}.2f}%" for report in reports)
        lines.append(topic.ljust(name_width) + cells)
    return "\n".join(lines) + "\n"


def render_svg(reports: list[LossReport], title: str = "Message loss by policy") -> str:
    """Self-contained grouped-bar SVG of per-topic loss rates."""
    topics = sorted({topic for report in reports for topic in report.published})
    labels = [report.policy_label for report in reports]
    palette = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1"]
    bar_w, group_gap, left, top, plot_h = 14, 18, 70, 40, 240
    group_w = bar_w * len(labels) + group_gap
    width = left + group_w * len(topics) + 180
    height = top + plot_h + 150

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="20" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{width - 160}" y2="{top + plot_h}" stroke="#333"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="#333"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + plot_h - frac * plot_h
        parts.append(f'<text x="{left - 8}" y="{y + 4}" text-anchor="end">{frac * 100:.0f}%</text>')
        parts.append(f'<line x1="{left - 4}" y1="{y}" x2="{left}" y2="{y}" stroke="#333"/>')
    for gi, topic in enumerate(topics):
        x0 = left + gi * group_w + group_gap / 2
        for bi, report in enumerate(reports):
            rate = report.loss_rate(topic)
            h = rate * plot_h
            x = x0 + bi * bar_w
            parts.append(
                f'<rect x="{x:.1f}" y="{top + plot_h - h:.1f}" width="{bar_w - 2}" '
                f'height="{h:.1f}" fill="{palette[bi % len(palette)]}"/>'
            )
        label_x = x0 + bar_w * len(labels) / 2
        parts.append(
            f'<text x="{label_x:.1f}" y="{top + plot_h + 10}" text-anchor="end" '
            f'transform="rotate(-45 {label_x:.1f} {top + plot_h + 10})">{topic}</text>'
        )
    for bi, label in enumerate(labels):
        y = top + 16 * bi
        x = width - 150
        parts.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{palette[bi % len(palette)]}"/>')
        parts.append(f'<text x="{x + 14}" y="{y}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
