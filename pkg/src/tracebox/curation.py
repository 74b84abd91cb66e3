"""Turn raw navigation messages into a human-readable event timeline.

High-rate sensor topics never produce timeline lines of their own; they
only feed aggregate facts. What survives is the navigation story: goal
lifecycle transitions, behavior-tree node changes, replans, suspected
obstacles, and pose/velocity facts, each rendered as one timestamped
sentence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import TraceboxError
from .recorder import MessageRecord

STATUS_EXECUTING = 2
STATUS_SUCCEEDED = 4
STATUS_CANCELED = 5
STATUS_ABORTED = 6

TOPIC_GOAL_STATUS = "navigate_to_pose/_action/status"
TOPIC_BT_LOG = "behavior_tree_log"
TOPIC_AMCL_POSE = "amcl_pose"
TOPIC_CMD_VEL = "cmd_vel"
TOPIC_PLAN = "plan"
TOPIC_LOCAL_COSTMAP = "local_costmap/costmap"

# Nav2 behavior-tree node catalog; unknown nodes render without a
# description clause.
BT_NODE_DESCRIPTIONS = {
    "NavigateRecovery": "that recovers from unexpected situations",
    "ComputePathToPose": "that determines a viable path from a starting point to a specified target pose",
    "FollowPath": "that steers along the computed path",
    "ClearingActions": "that clears the costmaps to discard stale sensor data",
    "RateController": "that throttles path computation to a steady rate",
    "GoalUpdated": "that checks whether a new destination has been requested",
    "RecoveryNode": "that retries its child action when it fails",
    "PipelineSequence": "that re-ticks earlier children while later ones run",
    "RoundRobin": "that rotates through recovery behaviors in turn",
    "Spin": "that turns in place to refresh the immediate surroundings",
    "Wait": "that pauses briefly before retrying",
    "BackUp": "that reverses a short distance",
}

_BT_STATUS_VERBS = {
    "RUNNING": "is running",
    "SUCCESS": "has succeeded",
    "FAILURE": "has failed",
    "IDLE": "is idle",
}


class SchemaError(TraceboxError):
    """A raw message body does not match its topic schema."""


@dataclass(frozen=True)
class RawNavMessage:
    topic: str
    t_ns: int
    body: dict


@dataclass(frozen=True)
class CurationEvent:
    t_s: int
    kind: str
    text: str
    source_topics: tuple[str, ...]
    goal_number: int | None = None


@dataclass
class CurationConfig:
    """Heuristic knobs for replan and obstacle inference."""

    replan_relative_length_change: float = 0.10
    replan_divergence_m: float = 0.5
    obstacle_window_s: float = 2.0


@dataclass
class CurationResult:
    events: list[CurationEvent]
    skipped: list[tuple[int, str]] = field(default_factory=list)
    unterminated_goals: list[int] = field(default_factory=list)


def describe_bt_node(node_name: str) -> str:
    """Catalog phrase for a known node name, empty for unknown ones."""
    return BT_NODE_DESCRIPTIONS.get(node_name, "")


def parse_record(record: MessageRecord) -> RawNavMessage:
    """Decode a bag record's payload as a structured navigation message."""
    try:
        body = json.loads(record.payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"payload on {record.topic!r} is not a JSON object: {exc}") from exc
    if not isinstance(body, dict):
        raise SchemaError(f"payload on {record.topic!r} is not a JSON object")
    return RawNavMessage(topic=record.topic, t_ns=record.t_ns, body=body)


def render_timeline(events: Iterable[CurationEvent]) -> str:
    """One `<epoch seconds> <sentence>` line per event."""
    return "".join(f"{event.t_s} {event.text}\n" for event in events)


def curate(messages: Sequence[RawNavMessage], config: CurationConfig | None = None) -> list[CurationEvent]:
    """Curate time-ordered raw messages into timeline events."""
    return curate_result(messages, config).events


def curate_records(
    records: Sequence[MessageRecord], config: CurationConfig | None = None
) -> CurationResult:
    """Curate bag records, counting undecodable payloads as skipped."""
    messages: list[RawNavMessage] = []
    skipped: list[tuple[int, str]] = []
    for i, record in enumerate(records):
        try:
            messages.append(parse_record(record))
        except SchemaError as exc:
            skipped.append((i, str(exc)))
    result = curate_result(messages, config)
    result.skipped = skipped + result.skipped
    return result


class _Curator:
    def __init__(self, config: CurationConfig):
        self.config = config
        self.events: list[CurationEvent] = []
        self.skipped: list[tuple[int, str]] = []
        self.goal_numbers: dict[str, int] = {}
        self.goal_status: dict[str, int] = {}
        self.active_goal: str | None = None
        self.last_pose: tuple[float, float, float, float] | None = None
        self.initial_pose_emitted = False
        self.last_plan: list[tuple[float, float]] | None = None
        self.last_costmap_t_ns: int | None = None
        self.velocities: dict[str, list[float]] = {}

    def feed(self, index: int, msg: RawNavMessage) -> None:
        handler = {
            TOPIC_GOAL_STATUS: self._on_goal_status,
            TOPIC_BT_LOG: self._on_bt_log,
            TOPIC_AMCL_POSE: self._on_amcl_pose,
            TOPIC_CMD_VEL: self._on_cmd_vel,
            TOPIC_PLAN: self._on_plan,
            TOPIC_LOCAL_COSTMAP: self._on_local_costmap,
        }.get(msg.topic)
        if handler is None:
            return
        try:
            handler(msg)
        except SchemaError as exc:
            self.skipped.append((index, str(exc)))

    def finish(self) -> CurationResult:
        unterminated = [
            self.goal_numbers[goal_id]
            for goal_id, status in self.goal_status.items()
            if status == STATUS_EXECUTING
        ]
        return CurationResult(
            events=self.events, skipped=self.skipped, unterminated_goals=sorted(unterminated)
        )

    def _emit(self, msg: RawNavMessage, kind: str, text: str, sources: tuple[str, ...],
              goal_number: int | None = None) -> None:
        self.events.append(
            CurationEvent(
                t_s=msg.t_ns // 1_000_000_000,
                kind=kind,
                text=text,
                source_topics=sources,
                goal_number=goal_number,
            )
        )

    def _goal_number(self, goal_id: str) -> int:
        if goal_id not in self.goal_numbers:
            self.goal_numbers[goal_id] = len(self.goal_numbers) + 1
        return self.goal_numbers[goal_id]

    def _pose_clause(self) -> str:
        if self.last_pose is None:
            return ""
        x, y, z, w = self.last_pose
        return f" Position: {x}, {y}. Orientation: {z},{w}."

    def _pose_sources(self, *topics: str) -> tuple[str, ...]:
        if self.last_pose is None:
            return topics
        return topics + (TOPIC_AMCL_POSE,)

    def _on_goal_status(self, msg: RawNavMessage) -> None:
        goal_id = msg.body.get("goal_id")
        status = msg.body.get("status")
        if not isinstance(goal_id, str) or not isinstance(status, int):
            raise SchemaError(f"goal status needs goal_id:str and status:int, got {msg.body!r}")
        number = self._goal_number(goal_id)
        previous = self.goal_status.get(goal_id)

        if status == STATUS_EXECUTING:
            if previous == STATUS_EXECUTING:
                return
            self.goal_status[goal_id] = status
            self.active_goal = goal_id
            self.last_plan = None
            self.velocities.setdefault(goal_id, [])
            self._emit(msg, "goal_started",
                       f"Navigation to the goal number {number} has started.",
                       (TOPIC_GOAL_STATUS,), number)
            self._emit(msg, "goal_in_progress",
                       f"Navigation to the goal number {number} is in progress.",
                       (TOPIC_GOAL_STATUS,), number)
            return

        terminal = {
            STATUS_SUCCEEDED: ("goal_succeeded", "has succeeded."),
            STATUS_ABORTED: ("goal_aborted", "has been aborted."),
            STATUS_CANCELED: ("goal_canceled", "has been canceled."),
        }.get(status)
        if terminal is None:
            return
        if previous is not None and previous != STATUS_EXECUTING:
            return
        kind, phrase = terminal
        self.goal_status[goal_id] = status
        if self.active_goal == goal_id:
            self.active_goal = None
            self.last_plan = None
        self._emit(msg, kind,
                   f"Navigation to the goal number {number} {phrase}{self._pose_clause()}",
                   self._pose_sources(TOPIC_GOAL_STATUS), number)
        samples = self.velocities.pop(goal_id, [])
        if samples:
            avg = sum(samples) / len(samples)
            self._emit(msg, "velocity_fact",
                       f"Average linear velocity when navigating to the goal number {number} "
                       f"was {avg:.3f} m/s.",
                       (TOPIC_CMD_VEL,), number)

    def _on_bt_log(self, msg: RawNavMessage) -> None:
        name = msg.body.get("node_name")
        prev = msg.body.get("previous_status")
        curr = msg.body.get("current_status")
        if not all(isinstance(v, str) for v in (name, prev, curr)):
            raise SchemaError(f"behavior tree log needs three string fields, got {msg.body!r}")
        if prev == curr:
            return
        verb = _BT_STATUS_VERBS.get(curr, f"is {curr.lower()}")
        description = describe_bt_node(name)
        if description:
            text = f"Nav2 Behavior Tree node {name} {description}, {verb}."
        else:
            text = f"Nav2 Behavior Tree node {name} {verb}."
        self._emit(msg, "bt_transition", text, (TOPIC_BT_LOG,))

    def _on_amcl_pose(self, msg: RawNavMessage) -> None:
        try:
            pose = tuple(float(msg.body[key]) for key in ("x", "y", "z", "w"))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"pose needs numeric x, y, z, w: {msg.body!r}") from exc
        self.last_pose = pose
        if not self.initial_pose_emitted:
            self.initial_pose_emitted = True
            x, y, z, w = pose
            self._emit(msg, "pose_fact",
                       f"The initial position of the robot is {x}, {y}. Orientation: {z},{w}.",
                       (TOPIC_AMCL_POSE,))

    def _on_cmd_vel(self, msg: RawNavMessage) -> None:
        linear = msg.body.get("linear_x")
        if not isinstance(linear, (int, float)):
            raise SchemaError(f"velocity command needs numeric linear_x: {msg.body!r}")
        if self.active_goal is not None:
            self.velocities.setdefault(self.active_goal, []).append(float(linear))

    def _on_plan(self, msg: RawNavMessage) -> None:
        poses = msg.body.get("poses")
        if not isinstance(poses, list) or not all(
            isinstance(p, (list, tuple)) and len(p) == 2 for p in poses
        ):
            raise SchemaError(f"plan needs poses as [x, y] pairs: {msg.body!r}")
        path = [(float(x), float(y)) for x, y in poses]
        if self.active_goal is None:
            return
        number = self.goal_numbers[self.active_goal]
        if self.last_plan is not None and _is_replan(self.last_plan, path, self.config):
            self._emit(msg, "replan",
                       f"The robot has re-planned an alternative trajectory to the goal "
                       f"number {number}.",
                       (TOPIC_PLAN,), number)
            if (
                self.last_costmap_t_ns is not None
                and msg.t_ns - self.last_costmap_t_ns <= self.config.obstacle_window_s * 1e9
            ):
                self._emit(msg, "obstacle_suspected",
                           f"An obstacle has been found during the navigation; the robot "
                           f"re-planned the route to the goal number {number} to avoid it.",
                           (TOPIC_PLAN, TOPIC_LOCAL_COSTMAP), number)
        self.last_plan = path

    def _on_local_costmap(self, msg: RawNavMessage) -> None:
        self.last_costmap_t_ns = msg.t_ns


def curate_result(
    messages: Sequence[RawNavMessage], config: CurationConfig | None = None
) -> CurationResult:
    curator = _Curator(config or CurationConfig())
    for i, msg in enumerate(messages):
        curator.feed(i, msg)
    return curator.finish()


def _path_length(path: Sequence[tuple[float, float]]) -> float:
    return sum(math.dist(a, b) for a, b in zip(path, path[1:]))


def _max_divergence(path: Sequence[tuple[float, float]], reference: Sequence[tuple[float, float]]) -> float:
    if not path or not reference:
        return 0.0
    return max(min(math.dist(p, r) for r in reference) for p in path)


def _is_replan(
    old: Sequence[tuple[float, float]], new: Sequence[tuple[float, float]], config: CurationConfig
) -> bool:
    old_length = _path_length(old)
    new_length = _path_length(new)
    if old_length > 0 and abs(new_length - old_length) / old_length > config.replan_relative_length_change:
        return True
    # Same destination but a substantially different route.
    if old and new and math.dist(old[-1], new[-1]) <= config.replan_divergence_m:
        if _max_divergence(new, old) > config.replan_divergence_m:
            return True
    return False
