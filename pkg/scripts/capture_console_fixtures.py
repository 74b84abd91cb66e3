#!/usr/bin/env python3
"""Capture live service response bodies for the console's snapshot tests.

Builds the three scenario bags plus one tampered copy, serves them through
the real HTTP app, and freezes selected responses under
frontend/test/fixtures/. Rerun after changing the service schema.
"""

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from tracebox.fixtures import flip_payload_byte, record_scenario_bag, selected_record_indices
from tracebox.ledger import Ledger, create_account
from tracebox.policy import SamplingPolicy
from tracebox.recorder import LedgerBinding
from tracebox.service import ServiceConfig, create_app

OUT_DIR = Path(__file__).resolve().parent.parent / "frontend" / "test" / "fixtures"


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        records_dir = root / "records"
        records_dir.mkdir()
        ledger_path = root / "ledger.db"
        ledger = Ledger(persist_path=ledger_path)
        account = create_account(seed=b"console-fixtures")
        for sid in (1, 2, 3):
            contract = ledger.deploy_contract(account)
            binding = LedgerBinding(ledger=ledger, contract_id=contract, account=account)
            record_scenario_bag(sid, records_dir / f"scenario{sid}.bag",
                                SamplingPolicy.fixed(2), seed=bytes([sid]) * 32,
                                ledger_binding=binding)
        client = TestClient(create_app(ServiceConfig(records_dir=records_dir,
                                                     ledger_path=ledger_path)))

        def save(name: str, payload) -> None:
            path = OUT_DIR / name
            if isinstance(payload, str):
                path.write_text(payload, encoding="utf-8")
            else:
                path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
            print(f"wrote {path}", file=sys.stderr)

        records = client.get("/v1/records").json()
        # Drop the host-specific absolute paths for reproducible fixtures.
        for entry in records:
            entry["path"] = f"records/{entry['id']}.bag"
        save("records.json", records)
        save("timeline_scenario1.txt", client.get("/v1/records/scenario1/timeline").text)
        save("verify_ok.json", client.post("/v1/records/scenario1/verify").json())
        save("answer_goals.json", client.post(
            "/v1/records/scenario1/ask",
            json={"question": "How many goals have been reached by the robot?", "k": 8},
        ).json())

        # The tampered copy joins the directory afterwards so the captured
        # listing stays at exactly the three reference runs.
        tampered_at = selected_record_indices(records_dir / "scenario2.bag")[2]
        flip_payload_byte(records_dir / "scenario2.bag", tampered_at,
                          records_dir / "scenario2-tampered.bag")
        save("verify_tampered.json",
             client.post("/v1/records/scenario2-tampered/verify").json())


if __name__ == "__main__":
    main()
