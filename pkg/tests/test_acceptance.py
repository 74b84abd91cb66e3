"""End-to-end acceptance checks, one test per release criterion.

Each test prints a PASS/FAIL line in the terminal summary (see conftest).
Expected values come from independent oracles computed here, never from
the code paths under test.
"""

import hashlib
import json
import random
import subprocess
import sys
import time
from collections import Counter

from tracebox import explain, workload_sim
from tracebox.curation import curate, RawNavMessage
from tracebox.fixtures import (
    flip_payload_byte,
    load_scenario,
    record_scenario_bag,
    selected_record_indices,
)
from tracebox.hashchain import Digest, init_chain
from tracebox.ledger import BadSignature, Ledger, NotOwner, create_account, tamper_payload
from tracebox.policy import SamplingPolicy, interval_for_rate
from tracebox.recorder import LedgerBinding, MessageRecord, open_bag, read_bag, write_stream
from tracebox.verifier import recompute_from_bag, verify_bag, verify_digest

ZERO_SEED = bytes(32)


def _random_records(n, rng_seed):
    rng = random.Random(rng_seed)
    topics = ["odom", "scan", "tf", "cmd_vel", "plan"]
    seqs = {}
    records = []
    for i in range(n):
        topic = rng.choice(topics)
        seqs[topic] = seqs.get(topic, 0) + 1
        records.append(MessageRecord(topic, seqs[topic], 10_000 * (i + 1),
                                     rng.randbytes(rng.randrange(1, 96))))
    return records


def _sha256sum(data: bytes) -> bytes:
    out = subprocess.run(["sha256sum"], input=data, capture_output=True, check=True)
    return bytes.fromhex(out.stdout.decode().split()[0])


def _oracle_fold(seed: bytes, records) -> list[bytes]:
    """Brute-force chain fold written independently of the library."""
    digests = []
    acc = hashlib.sha256(seed).digest()
    for r in records:
        blob = acc + ("%s\n%d\n%d\n" % (r.topic, r.seq, r.t_ns)).encode() + r.payload
        acc = hashlib.sha256(blob).digest()
        digests.append(acc)
    return digests


def test_01_chain_oracle_equivalence(tmp_path):
    """Chain recomputation matches an independent brute-force fold on 1,000 records."""
    start = time.monotonic()
    records = _random_records(1000, rng_seed=2024)

    path = tmp_path / "chain.bag"
    writer = open_bag(path, SamplingPolicy.fixed(10), seed=ZERO_SEED)
    for record in records:
        writer.ingest(record)
    writer.stop()
    recomputed = recompute_from_bag(path)

    # Oracle: re-derive the per-topic selection and fold with sha256 directly.
    selected = []
    counts = {}
    for record in records:
        counts[record.topic] = counts.get(record.topic, 0) + 1
        if counts[record.topic] % 10 == 0:
            selected.append(record)
    expected = _oracle_fold(ZERO_SEED, selected)

    assert [bytes(d) for d in recomputed] == expected
    assert len(recomputed) == len(selected) > 0

    # Anchor the fold itself through the system hash utility on a prefix.
    acc = _sha256sum(ZERO_SEED)
    for r in selected[:5]:
        acc = _sha256sum(acc + f"{r.topic}\n{r.seq}\n{r.t_ns}\n".encode() + r.payload)
    assert acc == expected[4]
    assert time.monotonic() - start < 5.0


def test_02_tamper_localization_full_sweep(tmp_path):
    """Flipping any record's payload byte is localized to exactly that chain index."""
    start = time.monotonic()
    n = 50
    ledger = Ledger()
    account = create_account(seed=b"acceptance")
    contract = ledger.deploy_contract(account)
    binding = LedgerBinding(ledger=ledger, contract_id=contract, account=account)

    path = tmp_path / "sweep.bag"
    writer = open_bag(path, SamplingPolicy.fixed(1), seed=ZERO_SEED, ledger_binding=binding)
    for record in _random_records(n, rng_seed=7):
        writer.ingest(record)
    writer.stop()
    assert verify_bag(path, ledger, contract).ok

    hits = 0
    for j in range(1, n + 1):
        tampered = flip_payload_byte(path, j - 1, tmp_path / "tampered.bag")
        report = verify_bag(tampered, ledger, contract)
        assert not report.ok
        assert report.first_missing_index == j
        assert report.confirmed == j - 1  # every index before j still confirmed
        hits += 1
    assert hits == n
    assert time.monotonic() - start < 10.0


def test_03_rate_ladder_mapping():
    """The reference topic rates resolve to the expected proof intervals exactly."""
    expected = {
        "map": 1,
        "tf_static": 1,
        "robot_description": 1,
        "navigate_to_pose/_action/status": 1,
        "global_costmap/costmap": 5,
        "plan": 5,
        "rosout": 10,
        "local_costmap/costmap": 10,
        "amcl_pose": 10,
        "behavior_tree_log": 10,
        "cmd_vel": 15,
        "camera/image_raw": 50,
        "scan": 100,
        "odom": 100,
        "tf": 1000,
    }
    resolved = {
        spec.name: interval_for_rate(spec.rate_hz) for spec in workload_sim.REFERENCE_TOPICS
    }
    assert resolved == expected
    policy = SamplingPolicy.rate_adaptive(workload_sim.REFERENCE_RATES)
    assert dict(policy.intervals) == expected


def test_04_batching_and_flush(tmp_path):
    """1,000 selected digests at limit 32 yield 31 full transactions plus one flush of 8."""
    ledger = Ledger()
    account = create_account(seed=b"batching")
    contract = ledger.deploy_contract(account)
    binding = LedgerBinding(ledger=ledger, contract_id=contract, account=account)

    path = tmp_path / "batch.bag"
    writer = open_bag(path, SamplingPolicy.fixed(1), seed=ZERO_SEED,
                      ledger_binding=binding, batch_limit=32)
    records = [MessageRecord("odom", i + 1, 1000 * (i + 1), bytes([i % 256])) for i in range(1000)]
    for record in records:
        writer.ingest(record)
    assert ledger.height == 31  # transactions during ingestion
    footer = writer.stop()
    assert ledger.height == 32  # single flush transaction afterwards
    assert footer.tx_count == 32

    sizes = [len(block.transactions[0].payload) for block in ledger.blocks]
    assert sizes == [32] * 31 + [8]

    digests = recompute_from_bag(path)
    assert len(digests) == 1000
    block_numbers = []
    for k, digest in enumerate(digests):
        number = ledger.query_proof(contract, digest)
        assert number == 1 + k // 32  # the block of its transaction
        block_numbers.append(number)
    assert block_numbers == sorted(block_numbers)


def test_05_access_control():
    """Non-owner submissions and post-signing payload edits are rejected outright."""
    ledger = Ledger()
    owner = create_account(seed=b"owner")
    contract = ledger.deploy_contract(owner)
    payload = [Digest(hashlib.sha256(bytes([i])).digest()) for i in range(6)]

    mallory = create_account(seed=b"mallory")
    try:
        ledger.submit_proofs(contract, mallory, payload)
        raise AssertionError("non-owner submission must be rejected")
    except NotOwner:
        pass
    assert all(ledger.query_proof(contract, d) == 0 for d in payload)

    tx = ledger.build_transaction(contract, owner, payload)
    evil = tamper_payload(tx, 0, Digest(hashlib.sha256(b"evil").digest()))
    try:
        ledger.submit_signed(evil)
        raise AssertionError("tampered payload must be rejected")
    except BadSignature:
        pass
    assert ledger.height == 0


def test_06_proof_messages_bit_exact():
    """Digest lookups produce the exact stored / not-stored message strings."""
    ledger = Ledger()
    owner = create_account(seed=b"messages")
    contract = ledger.deploy_contract(owner)
    digest = Digest(hashlib.sha256(b"payload").digest())
    for _ in range(6):  # land the proof in block 7
        ledger.submit_proofs(contract, owner, [Digest(hashlib.sha256(random.randbytes(8)).digest())])
    ledger.submit_proofs(contract, owner, [digest])
    assert verify_digest(ledger, contract, digest) == "The hash value is stored in 7."
    unknown = Digest(hashlib.sha256(b"never stored").digest())
    assert verify_digest(ledger, contract, unknown) == "The hash value is not stored."


def test_07_curation_goldens(scenarios):
    """Scenario timelines hit 3/3/2 successes, 0/0/1 aborts, and the reference lines."""
    for sid, (succeeded, aborted) in ((1, (3, 0)), (2, (3, 0)), (3, (2, 1))):
        timeline = scenarios[sid].expected_timeline
        assert timeline.count("has succeeded.") >= succeeded
        goal_successes = sum(
            1 for line in timeline.splitlines()
            if "Navigation to the goal number" in line and "has succeeded." in line
        )
        goal_aborts = sum(
            1 for line in timeline.splitlines()
            if "Navigation to the goal number" in line and "has been aborted." in line
        )
        assert (goal_successes, goal_aborts) == (succeeded, aborted)

    t = 1701354686
    events = curate([
        RawNavMessage("navigate_to_pose/_action/status", t * 10**9,
                      {"goal_id": "be5130d0f8934e52bc74ca98cbe1959e", "status": 2}),
        RawNavMessage("behavior_tree_log", t * 10**9 + 1,
                      {"node_name": "NavigateRecovery", "previous_status": "IDLE",
                       "current_status": "RUNNING"}),
    ])
    assert [f"{e.t_s} {e.text}" for e in events] == [
        "1701354686 Navigation to the goal number 1 has started.",
        "1701354686 Navigation to the goal number 1 is in progress.",
        "1701354686 Nav2 Behavior Tree node NavigateRecovery that recovers from "
        "unexpected situations, is running.",
    ]


def test_08_question_answering_fixtures(scenarios):
    """The extractive answerer passes >= 14 of 16 question predicates per scenario."""
    goals_question = "How many goals have been reached by the robot?"
    for sid, fixture in scenarios.items():
        store = explain.build_index(fixture.expected_timeline)

        result = explain.answer(goals_question, store, k=8)
        first_line = result.text.splitlines()[0]
        if sid in (1, 2):
            assert first_line == "3"
        else:
            assert first_line == "2"
            assert "1 aborted" in result.text

        passed = 0
        for question in fixture.questions:
            answer = explain.answer(question.text, store, k=question.k)
            if question.check(answer.text):
                passed += 1
            retrieved = explain.retrieve(store, question.text, k=question.k)
            chunk_texts = [sc.chunk.text for sc in retrieved]
            for line in answer.text.splitlines():
                if line.endswith("."):
                    assert any(line in text for text in chunk_texts), (sid, question.id, line)
        assert passed >= 14, f"scenario {sid}: only {passed}/16 predicates passed"


def test_09_loss_trend_reproduction():
    """Per-topic loss is monotone in proof interval, with interval-100 minimal."""
    start = time.monotonic()
    policies = {f"interval-{k}": SamplingPolicy.fixed(k) for k in (10, 25, 50, 100)}
    runs = workload_sim.compare_policies(
        workload_sim.REFERENCE_TOPICS, policies, duration_s=10.0, seed=7
    )
    again = workload_sim.compare_policies(
        workload_sim.REFERENCE_TOPICS, policies, duration_s=10.0, seed=7
    )
    assert [r.to_dict() for r in runs] == [r.to_dict() for r in again]  # deterministic

    by = {report.policy_label: report for report in runs}
    for topic in by["interval-10"].published:
        rates = [by[f"interval-{k}"].loss_rate(topic) for k in (10, 25, 50, 100)]
        assert all(rates[i] >= rates[i + 1] - 1e-12 for i in range(3)), (topic, rates)
        assert rates[3] <= min(rates) + 1e-12, (topic, rates)
    assert any(by["interval-10"].loss_rate(topic) > 0.05 for topic in by["interval-10"].published)
    assert time.monotonic() - start < 30.0


def test_10_end_to_end_cli(tmp_path):
    """Record scenario 2 with the adaptive policy, verify, corrupt, verify again."""
    start = time.monotonic()
    stream = tmp_path / "s2.jsonl"
    write_stream(stream, load_scenario(2).records)
    bag = tmp_path / "s2.bag"
    ledger = tmp_path / "ledger.db"

    def cli(*args):
        return subprocess.run(
            [sys.executable, "-m", "tracebox.cli", *args],
            capture_output=True, text=True,
        )

    recorded = cli("record", "--in", str(stream), "--out", str(bag),
                   "--policy", "adaptive", "--ledger", str(ledger), "--format", "json")
    assert recorded.returncode == 0, recorded.stderr
    assert json.loads(recorded.stdout)["selected_count"] > 0

    ok = cli("verify", "--bag", str(bag), "--ledger", str(ledger))
    assert ok.returncode == 0, ok.stdout + ok.stderr

    tampered = tmp_path / "tampered.bag"
    flip_payload_byte(bag, selected_record_indices(bag)[0], tampered)
    bad = cli("verify", "--bag", str(tampered), "--ledger", str(ledger), "--format", "json")
    assert bad.returncode == 1
    assert json.loads(bad.stdout)["ok"] is False
    assert time.monotonic() - start < 10.0
