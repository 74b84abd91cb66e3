import type { ChatEntry, VerificationReport } from "./types.js";

/** Verification pane state; transitions only idle -> running -> ok | failed. */
export type VerifyState =
  | { phase: "idle" }
  | { phase: "running" }
  | { phase: "ok"; report: VerificationReport }
  | { phase: "failed"; report: VerificationReport }
  | { phase: "error"; detail: string };

export type VerifyEvent =
  | { kind: "start" }
  | { kind: "result"; report: VerificationReport }
  | { kind: "error"; detail: string }
  | { kind: "reset" };

export function transition(state: VerifyState, event: VerifyEvent): VerifyState {
  switch (event.kind) {
    case "reset":
      return { phase: "idle" };
    case "start":
      if (state.phase === "running") {
        throw new Error("verification already running");
      }
      return { phase: "running" };
    case "result":
      if (state.phase !== "running") {
        throw new Error(`unexpected verification result in phase ${state.phase}`);
      }
      return event.report.ok
        ? { phase: "ok", report: event.report }
        : { phase: "failed", report: event.report };
    case "error":
      if (state.phase !== "running") {
        throw new Error(`unexpected verification error in phase ${state.phase}`);
      }
      return { phase: "error", detail: event.detail };
  }
}

const TRANSCRIPT_PREFIX = "tracebox.transcript.";

/** Per-record chat transcripts persisted in browser storage. */
export class TranscriptStore {
  constructor(private readonly storage: Storage) {}

  load(recordId: string): ChatEntry[] {
    const raw = this.storage.getItem(TRANSCRIPT_PREFIX + recordId);
    if (raw === null) return [];
    try {
      const parsed = JSON.parse(raw);
      return Array.isArray(parsed) ? (parsed as ChatEntry[]) : [];
    } catch {
      return [];
    }
  }

  append(recordId: string, entry: ChatEntry): ChatEntry[] {
    const entries = this.load(recordId);
    entries.push(entry);
    this.storage.setItem(TRANSCRIPT_PREFIX + recordId, JSON.stringify(entries));
    return entries;
  }

  clear(recordId: string): void {
    this.storage.removeItem(TRANSCRIPT_PREFIX + recordId);
  }
}
