import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { AnswerDoc, RecordEntry, VerificationReport } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

function read(name: string): string {
  return readFileSync(join(here, "fixtures", name), "utf-8");
}

/** Response bodies recorded from the real service over the three reference runs. */
export const recordedBodies = {
  records: JSON.parse(read("records.json")) as RecordEntry[],
  timelineScenario1: read("timeline_scenario1.txt"),
  verifyOk: JSON.parse(read("verify_ok.json")) as VerificationReport,
  verifyTampered: JSON.parse(read("verify_tampered.json")) as VerificationReport,
  answerGoals: JSON.parse(read("answer_goals.json")) as AnswerDoc,
};
