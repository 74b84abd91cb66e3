"""Reference scenarios: message streams, golden timelines, and QA fixtures.

Three navigation runs ship with the package, mirroring a three-waypoint
course: scenario 1 reaches all goals unobstructed, scenario 2 replans
around an obstacle before goal 2, and scenario 3 aborts goal 1 behind a
blocked doorway and then completes goals 2 and 3 under scenario-2
conditions. Each scenario directory holds the raw stream, the expected
timeline, and a question set with per-scenario answer predicates.

Regenerate the on-disk fixture files with `python -m tracebox.fixtures`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..curation import curate_records, render_timeline
from ..errors import ConfigError
from ..recorder import (
    LedgerBinding,
    MessageRecord,
    read_bag,
    record_line,
    _parse_record,
)
from ..policy import SamplingPolicy

SCENARIO_IDS = (1, 2, 3)

_T0 = 1701354686  # epoch seconds of the reference run

_GOAL_IDS = (
    "be5130d0f8934e52bc74ca98cbe1959e",
    "7f3a2b1c9d8e4f5a8b6c0d1e2f3a4b5c",
    "0a1b2c3d4e5f60718293a4b5c6d7e8f9",
)


class UnknownScenario(ConfigError):
    """Scenario id outside 1..3."""


@dataclass(frozen=True)
class Question:
    id: int
    category: str
    text: str
    k: int
    expect: dict

    def check(self, answer_text: str) -> bool:
        """Evaluate this question's predicate against an answer."""
        expect = self.expect
        for needle in expect.get("contains", []):
            if needle not in answer_text:
                return False
        for needle in expect.get("not_contains", []):
            if needle in answer_text:
                return False
        any_of = expect.get("contains_any")
        if any_of and not any(needle in answer_text for needle in any_of):
            return False
        first_line = expect.get("first_line")
        if first_line is not None:
            lines = answer_text.splitlines()
            if not lines or lines[0] != first_line:
                return False
        return True


@dataclass(frozen=True)
class ScenarioFixture:
    id: int
    records: list[MessageRecord]
    expected_timeline: str
    questions: list[Question]
    expected_outcomes: dict


class _StreamBuilder:
    """Appends records in script order with per-topic sequence numbers."""

    def __init__(self, t0_s: int = _T0):
        self.t0_s = t0_s
        self.records: list[MessageRecord] = []
        self._seqs: dict[str, int] = {}
        self._tick_at: dict[int, int] = {}

    def add(self, topic: str, at_s: int, body: dict) -> None:
        tick = self._tick_at.get(at_s, 0)
        self._tick_at[at_s] = tick + 1
        seq = self._seqs.get(topic, 0) + 1
        self._seqs[topic] = seq
        self.records.append(
            MessageRecord(
                topic=topic,
                seq=seq,
                t_ns=(self.t0_s + at_s) * 1_000_000_000 + tick * 1_000_000,
                payload=json.dumps(body, separators=(",", ":")).encode("utf-8"),
            )
        )

    def status(self, at_s: int, goal: int, status: int) -> None:
        self.add("navigate_to_pose/_action/status", at_s,
                 {"goal_id": _GOAL_IDS[goal - 1], "status": status})

    def bt(self, at_s: int, node: str, prev: str, curr: str) -> None:
        self.add("behavior_tree_log", at_s,
                 {"node_name": node, "previous_status": prev, "current_status": curr})

    def pose(self, at_s: int, x: float, y: float, z: float, w: float) -> None:
        self.add("amcl_pose", at_s, {"x": x, "y": y, "z": z, "w": w})

    def vel(self, at_s: int, linear_x: float, angular_z: float = 0.0) -> None:
        self.add("cmd_vel", at_s, {"linear_x": linear_x, "angular_z": angular_z})

    def plan(self, at_s: int, poses: list[list[float]]) -> None:
        self.add("plan", at_s, {"poses": poses})

    def costmap(self, at_s: int) -> None:
        self.add("local_costmap/costmap", at_s, {"update": True})

    def noise(self, at_s: int) -> None:
        # Topics that never surface in the timeline directly.
        self.add("rosout", at_s, {"msg": "controller server heartbeat"})
        self.add("odom", at_s, {"vx": 0.21, "vy": 0.0})
        self.add("tf", at_s, {"frames": 41})


# Terminal poses; scenario 3 carries the reference run's exact values.
_S12_INITIAL = (-2.0317890445421605, -0.5239855171935585, 0.0023710884460879, 0.9999971887638473)
_S12_GOAL1 = (3.4478527951874815, 1.2205614549542318, 0.1736481776669304, 0.984807753012208)
_S12_GOAL2 = (7.0912878216348115, -2.8356817793276093, -0.3826834323650898, 0.9238795325112867)
_S12_GOAL3 = (10.253617260428636, -6.9172398811507205, 0.2588190451025207, 0.9659258262890683)

_S3_INITIAL = (-0.9862777814079216, -1.8364267015883449, 0.0104528463267653, 0.9999453519054323)
_S3_ABORT1 = (-5.062160931312302, -8.330878461767831, -0.8760794639388502, 0.4821667479872674)
_S3_GOAL2 = (-9.14068582195674, -25.977117025927537, -0.6580310307304338, 0.7529908117605705)
_S3_GOAL3 = (-1.8811226231679194, -28.773672979732826, -0.5946646510401259, 0.803973850820613)


def _goal_leg(
    b: _StreamBuilder,
    goal: int,
    start_s: int,
    plan_poses: list[list[float]],
    end_pose: tuple[float, float, float, float],
    velocities: list[float],
    obstacle_plan: list[list[float]] | None = None,
) -> int:
    """Script one successful goal leg; returns the timestamp after it ends."""
    t = start_s
    b.status(t, goal, 2)
    b.bt(t, "ComputePathToPose", "IDLE", "RUNNING")
    t += 1
    b.plan(t, plan_poses)
    b.bt(t, "ComputePathToPose", "RUNNING", "SUCCESS")
    b.bt(t, "FollowPath", "IDLE", "RUNNING")
    for v in velocities[: len(velocities) // 2]:
        t += 1
        b.vel(t, v)
    if obstacle_plan is not None:
        t += 1
        b.costmap(t)
        t += 1
        b.plan(t, obstacle_plan)
    for v in velocities[len(velocities) // 2:]:
        t += 1
        b.vel(t, v)
    t += 1
    b.noise(t)
    b.pose(t, *end_pose)
    t += 1
    b.bt(t, "FollowPath", "RUNNING", "SUCCESS")
    b.status(t, goal, 4)
    return t + 1


_PLAN_G1 = [
    [-2.0317890445421605, -0.5239855171935585],
    [-0.3811205783319642, -0.0912275874035569],
    [1.5327790452108341, 0.4260178343918294],
    [3.4478527951874815, 1.2205614549542318],
]
_PLAN_G2 = [
    [3.4478527951874815, 1.2205614549542318],
    [4.6142081452396125, 0.1871868155309758],
    [5.8823718906412837, -1.3561243930814861],
    [7.0912878216348115, -2.8356817793276093],
]
# Detour around a fresh obstacle: same endpoints, far longer route.
_PLAN_G2_DETOUR = [
    [3.4478527951874815, 1.2205614549542318],
    [4.1158372945128343, 2.7904512238176308],
    [5.9631284750912734, 3.4182358217349125],
    [7.3120985126734812, 1.9045128437561298],
    [7.5218452193847123, -0.8123745812937461],
    [7.0912878216348115, -2.8356817793276093],
]
_PLAN_G3 = [
    [7.0912878216348115, -2.8356817793276093],
    [8.1871236450918273, -4.2145812973458126],
    [9.2650193847561234, -5.6031287456093815],
    [10.253617260428636, -6.9172398811507205],
]

_S3_PLAN_G1 = [
    [-0.9862777814079216, -1.8364267015883449],
    [-2.3145812936475082, -3.8218452193041276],
    [-3.7123845109273645, -6.0145362819203748],
    [-5.062160931312302, -8.330878461767831],
]
_S3_PLAN_G2 = [
    [-5.062160931312302, -8.330878461767831],
    [-6.2145312098473518, -13.712384510927361],
    [-7.6031287456093815, -19.265019384756123],
    [-9.14068582195674, -25.977117025927537],
]
_S3_PLAN_G2_DETOUR = [
    [-5.062160931312302, -8.330878461767831],
    [-2.8218452193041276, -12.314581293647508],
    [-3.4182358217349125, -18.963128475091273],
    [-6.8123745812937461, -23.521845219384712],
    [-9.14068582195674, -25.977117025927537],
]
_S3_PLAN_G3 = [
    [-9.14068582195674, -25.977117025927537],
    [-6.7123845109273645, -26.821845219304128],
    [-4.2145812973458126, -27.718712364509183],
    [-1.8811226231679194, -28.773672979732826],
]


def build_scenario_records(scenario_id: int) -> list[MessageRecord]:
    """Deterministic message stream for one scenario."""
    if scenario_id == 1:
        b = _StreamBuilder()
        b.pose(0, *_S12_INITIAL)
        b.noise(0)
        b.bt(1, "NavigateRecovery", "IDLE", "RUNNING")
        b.bt(1, "RateController", "IDLE", "RUNNING")
        t = _goal_leg(b, 1, 1, _PLAN_G1, _S12_GOAL1, [0.26, 0.24, 0.25, 0.23])
        t = _goal_leg(b, 2, t, _PLAN_G2, _S12_GOAL2, [0.25, 0.27, 0.26, 0.24])
        t = _goal_leg(b, 3, t, _PLAN_G3, _S12_GOAL3, [0.22, 0.21, 0.23, 0.22])
        b.bt(t, "NavigateRecovery", "RUNNING", "SUCCESS")
        return b.records

    if scenario_id == 2:
        b = _StreamBuilder()
        b.pose(0, *_S12_INITIAL)
        b.noise(0)
        b.bt(1, "NavigateRecovery", "IDLE", "RUNNING")
        b.bt(1, "RateController", "IDLE", "RUNNING")
        t = _goal_leg(b, 1, 1, _PLAN_G1, _S12_GOAL1, [0.26, 0.24, 0.25, 0.23])
        t = _goal_leg(b, 2, t, _PLAN_G2, _S12_GOAL2, [0.25, 0.27, 0.26, 0.24],
                      obstacle_plan=_PLAN_G2_DETOUR)
        t = _goal_leg(b, 3, t, _PLAN_G3, _S12_GOAL3, [0.22, 0.21, 0.23, 0.22])
        b.bt(t, "NavigateRecovery", "RUNNING", "SUCCESS")
        return b.records

    if scenario_id == 3:
        b = _StreamBuilder()
        b.pose(0, *_S3_INITIAL)
        b.noise(0)
        b.bt(1, "NavigateRecovery", "IDLE", "RUNNING")
        b.bt(1, "RateController", "IDLE", "RUNNING")
        # Goal 1: the only doorway is blocked; recovery fails and the goal
        # is aborted at the reference position.
        b.status(1, 1, 2)
        b.bt(1, "ComputePathToPose", "IDLE", "RUNNING")
        b.plan(2, _S3_PLAN_G1)
        b.bt(2, "ComputePathToPose", "RUNNING", "SUCCESS")
        b.bt(2, "FollowPath", "IDLE", "RUNNING")
        b.vel(3, 0.19)
        b.vel(4, 0.21)
        b.costmap(5)
        b.vel(5, 0.08)
        b.bt(6, "FollowPath", "RUNNING", "FAILURE")
        b.bt(6, "ClearingActions", "IDLE", "RUNNING")
        b.bt(7, "ClearingActions", "RUNNING", "SUCCESS")
        b.bt(7, "Spin", "IDLE", "RUNNING")
        b.bt(8, "Spin", "RUNNING", "SUCCESS")
        b.bt(8, "FollowPath", "IDLE", "RUNNING")
        b.vel(9, 0.05)
        b.bt(10, "FollowPath", "RUNNING", "FAILURE")
        b.noise(10)
        b.pose(10, *_S3_ABORT1)
        b.status(11, 1, 6)
        t = _goal_leg(b, 2, 12, _S3_PLAN_G2, _S3_GOAL2, [0.24, 0.26, 0.25, 0.23],
                      obstacle_plan=_S3_PLAN_G2_DETOUR)
        t = _goal_leg(b, 3, t, _S3_PLAN_G3, _S3_GOAL3, [0.22, 0.24, 0.23, 0.21])
        b.bt(t, "NavigateRecovery", "RUNNING", "SUCCESS")
        return b.records

    raise UnknownScenario(f"scenario id must be one of {SCENARIO_IDS}, got {scenario_id}")


def build_questions(scenario_id: int) -> list[Question]:
    """The 16-question set with predicates for one scenario."""
    if scenario_id not in SCENARIO_IDS:
        raise UnknownScenario(f"scenario id must be one of {SCENARIO_IDS}, got {scenario_id}")
    s = scenario_id

    def pick(s1, s2, s3):
        return {1: s1, 2: s2, 3: s3}[s]

    return [
        Question(1, "Navigation Process Overview",
                 "What has happened in this ROS2 log regarding navigation?", 6,
                 {"contains": ["Navigation to the goal number"]}),
        Question(2, "Navigation Process Overview",
                 "How has the navigation task proceeded?", 6,
                 {"contains": ["Navigation to the goal number"]}),
        Question(3, "Trajectory Planning and Replanning",
                 "Has the robot re-planned an alternative trajectory during navigation?", 6,
                 pick({"not_contains": ["re-planned"]},
                      {"contains": ["re-planned an alternative trajectory"]},
                      {"contains": ["re-planned an alternative trajectory"]})),
        Question(4, "Trajectory Planning and Replanning",
                 "Why did the robot re-plan the route?", 6,
                 pick({"not_contains": ["obstacle"]},
                      {"contains": ["obstacle"]},
                      {"contains": ["obstacle"]})),
        Question(5, "Trajectory Planning and Replanning",
                 "Did the robot find any obstacle during the navigation?", 6,
                 pick({"not_contains": ["An obstacle has been found"]},
                      {"contains": ["An obstacle has been found"]},
                      {"contains": ["An obstacle has been found"]})),
        Question(6, "Goal Completion and Navigation Task Status",
                 "How many goals have been reached by the robot?", 8,
                 pick({"first_line": "3"},
                      {"first_line": "3"},
                      {"first_line": "2", "contains": ["1 aborted", "has been aborted"]})),
        Question(7, "Goal Completion and Navigation Task Status",
                 "Has the robot completed the navigation task?", 6,
                 pick({"contains": ["has succeeded"]},
                      {"contains": ["has succeeded"]},
                      {"contains_any": ["has succeeded", "has been aborted"]})),
        Question(8, "Goal Completion and Navigation Task Status",
                 "When has the robot ended the navigation task?", 6,
                 {"contains": ["Navigation to the goal number 3 has succeeded."]}),
        Question(9, "Goal Completion and Navigation Task Status",
                 "Have all objectives been successfully achieved or have any been "
                 "cancelled or aborted?", 6,
                 pick({"contains": ["has succeeded"], "not_contains": ["aborted"]},
                      {"contains": ["has succeeded"], "not_contains": ["aborted"]},
                      {"contains": ["has been aborted"]})),
        Question(10, "Specifics about Goals and Locations",
                 "Where is the second location or goal located?", 6,
                 {"contains": ["goal number 2", "Position:"]}),
        Question(11, "Specifics about Goals and Locations",
                 "What was the linear velocity when navigating to goal pose number 2?", 6,
                 {"contains": ["Average linear velocity when navigating to the goal number 2"]}),
        Question(12, "Specifics about Goals and Locations",
                 "What is the initial position and orientation of the robot?", 6,
                 {"contains": ["The initial position of the robot is"]}),
        Question(13, "Specifics about Goals and Locations",
                 "What was the linear velocity of the robot after receiving the goal number 1?", 6,
                 {"contains": ["Average linear velocity when navigating to the goal number 1"]}),
        Question(14, "Nav2 Behavior Tree and Node Status",
                 "What is Nav2 Behavior Tree's node to determine a viable path from a "
                 "starting point to a specified target pose or location?", 6,
                 {"contains": ["ComputePathToPose"]}),
        Question(15, "Nav2 Behavior Tree and Node Status",
                 "Did any node from the Nav2 Behavior Tree fail during navigation?", 6,
                 pick({"not_contains": ["has failed"]},
                      {"not_contains": ["has failed"]},
                      {"contains": ["has failed"]})),
        Question(16, "Nav2 Behavior Tree and Node Status",
                 "Which Behavior Tree's nodes were used during navigation?", 6,
                 {"contains": ["Nav2 Behavior Tree node"]}),
    ]


_EXPECTED_OUTCOMES = {
    1: {"goal_succeeded": 3, "goal_aborted": 0, "goal_canceled": 0, "replan": 0,
        "obstacle_suspected": 0},
    2: {"goal_succeeded": 3, "goal_aborted": 0, "goal_canceled": 0, "replan": 1,
        "obstacle_suspected": 1},
    3: {"goal_succeeded": 2, "goal_aborted": 1, "goal_canceled": 0, "replan": 1,
        "obstacle_suspected": 1},
}


def build_scenario(scenario_id: int) -> ScenarioFixture:
    """Construct a scenario fixture entirely in memory."""
    records = build_scenario_records(scenario_id)
    timeline = render_timeline(curate_records(records).events)
    return ScenarioFixture(
        id=scenario_id,
        records=records,
        expected_timeline=timeline,
        questions=build_questions(scenario_id),
        expected_outcomes=dict(_EXPECTED_OUTCOMES[scenario_id]),
    )


def _fixture_dir(scenario_id: int) -> Path:
    return Path(str(resources.files(__package__))) / f"scenario{scenario_id}"


def load_scenario(scenario_id: int) -> ScenarioFixture:
    """Load a scenario fixture from the packaged data files."""
    if scenario_id not in SCENARIO_IDS:
        raise UnknownScenario(f"scenario id must be one of {SCENARIO_IDS}, got {scenario_id}")
    directory = _fixture_dir(scenario_id)
    records = []
    with (directory / "stream.jsonl").open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            records.append(_parse_record(json.loads(line), i))
    timeline = (directory / "timeline.txt").read_text(encoding="utf-8")
    questions = [
        Question(**obj) for obj in json.loads((directory / "questions.json").read_text("utf-8"))
    ]
    return ScenarioFixture(
        id=scenario_id,
        records=records,
        expected_timeline=timeline,
        questions=questions,
        expected_outcomes=dict(_EXPECTED_OUTCOMES[scenario_id]),
    )


def write_fixture_files(root: Path | None = None) -> list[Path]:
    """Write the scenario directories; used to (re)generate packaged data."""
    base = root if root is not None else Path(str(resources.files(__package__)))
    written = []
    for scenario_id in SCENARIO_IDS:
        fixture = build_scenario(scenario_id)
        directory = base / f"scenario{scenario_id}"
        directory.mkdir(parents=True, exist_ok=True)
        stream = directory / "stream.jsonl"
        stream.write_text(
            "".join(record_line(r) + "\n" for r in fixture.records), encoding="utf-8"
        )
        golden = directory / "timeline.txt"
        golden.write_text(fixture.expected_timeline, encoding="utf-8")
        questions = directory / "questions.json"
        questions.write_text(
            json.dumps(
                [
                    {"id": q.id, "category": q.category, "text": q.text, "k": q.k,
                     "expect": q.expect}
                    for q in fixture.questions
                ],
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        written += [stream, golden, questions]
    return written


def record_scenario_bag(
    scenario_id: int,
    bag_path: Path | str,
    policy: SamplingPolicy,
    seed: bytes | None = None,
    ledger_binding: LedgerBinding | None = None,
    batch_limit: int = 32,
):
    """Record a scenario stream into a bag; returns the footer."""
    from ..recorder import open_bag

    fixture = load_scenario(scenario_id)
    writer = open_bag(bag_path, policy, seed=seed, ledger_binding=ledger_binding,
                      batch_limit=batch_limit)
    for record in fixture.records:
        writer.ingest(record)
    return writer.stop()


def selected_record_indices(bag_path: Path | str) -> list[int]:
    """0-based file-order indices of the records the manifest policy selects."""
    from ..policy import TopicCounter, selects

    bag = read_bag(bag_path)
    counters: dict[str, TopicCounter] = {}
    indices = []
    for i, record in enumerate(bag.records):
        counter = counters.setdefault(record.topic, TopicCounter(topic=record.topic))
        counter.increment()
        if selects(bag.manifest.policy, counter):
            indices.append(i)
    return indices


def flip_payload_byte(
    bag_path: Path | str,
    record_index: int,
    out_path: Path | str,
    byte_index: int = 0,
) -> Path:
    """Copy a bag with one record's payload byte flipped (tamper injection)."""
    import base64

    bag_path, out_path = Path(bag_path), Path(out_path)
    lines = bag_path.read_text(encoding="utf-8").splitlines()
    seen = -1
    for i, line in enumerate(lines):
        obj = json.loads(line)
        if obj.get("type") != "record":
            continue
        seen += 1
        if seen != record_index:
            continue
        payload = bytearray(base64.b64decode(obj["payload_b64"]))
        if not payload:
            raise ConfigError(f"record {record_index} has an empty payload")
        payload[byte_index % len(payload)] ^= 0x01
        obj["payload_b64"] = base64.b64encode(bytes(payload)).decode("ascii")
        lines[i] = json.dumps(
            {"type": "record", "topic": obj["topic"], "seq": obj["seq"],
             "t_ns": obj["t_ns"], "payload_b64": obj["payload_b64"]},
            separators=(",", ":"),
        )
        out_path.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
        return out_path
    raise ConfigError(f"bag has no record at index {record_index}")
