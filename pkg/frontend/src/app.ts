import { ApiClient, ApiError } from "./api.js";
import { TranscriptStore, transition, type VerifyState } from "./state.js";
import {
  renderEmptyRecords,
  renderRecordsTable,
  renderTimeline,
  renderTranscript,
  renderVerifyPanel,
} from "./views.js";
import type { RecordEntry } from "./types.js";

function apiBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) {
    window.localStorage.setItem("tracebox.api", fromQuery);
    return fromQuery;
  }
  return window.localStorage.getItem("tracebox.api") ?? "http://127.0.0.1:8787";
}

export class ConsoleApp {
  private records: RecordEntry[] = [];
  private selectedId: string | null = null;
  private timelineText = "";
  private verifyState: VerifyState = { phase: "idle" };
  private askInFlight = false;

  constructor(
    private readonly api: ApiClient,
    private readonly transcripts: TranscriptStore,
    private readonly root: Document,
  ) {}

  private el(id: string): HTMLElement {
    const node = this.root.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
  }

  async start(): Promise<void> {
    this.el("records-pane").addEventListener("click", (event) => {
      const row = (event.target as HTMLElement).closest("tr[data-record-id]");
      if (row) void this.select(row.getAttribute("data-record-id")!);
    });
    this.el("verify-button").addEventListener("click", () => void this.verify());
    this.el("chat-form").addEventListener("submit", (event) => {
      event.preventDefault();
      void this.ask();
    });
    await this.refreshRecords();
  }

  async refreshRecords(): Promise<void> {
    try {
      this.records = await this.api.listRecords();
      this.el("records-pane").innerHTML = renderRecordsTable(this.records, this.selectedId);
    } catch (error) {
      this.records = [];
      this.el("records-pane").innerHTML = renderEmptyRecords(
        error instanceof ApiError ? error.message : "service unreachable",
      );
    }
  }

  async select(recordId: string): Promise<void> {
    this.selectedId = recordId;
    this.verifyState = { phase: "idle" };
    this.el("records-pane").innerHTML = renderRecordsTable(this.records, recordId);
    this.el("selected-title").textContent = recordId;
    this.renderVerify();
    this.renderChat();
    try {
      this.timelineText = await this.api.timeline(recordId);
    } catch (error) {
      this.timelineText = "";
    }
    this.renderTimelinePane();
  }

  private renderVerify(): void {
    this.el("verify-pane").innerHTML = renderVerifyPanel(this.verifyState);
  }

  private renderTimelinePane(): void {
    this.el("timeline-pane").innerHTML = renderTimeline(this.timelineText, this.verifyState);
  }

  private renderChat(): void {
    if (!this.selectedId) return;
    this.el("chat-transcript").innerHTML = renderTranscript(
      this.transcripts.load(this.selectedId),
    );
  }

  async verify(): Promise<void> {
    if (!this.selectedId || this.verifyState.phase === "running") return;
    this.verifyState = transition(this.verifyState, { kind: "reset" });
    this.verifyState = transition(this.verifyState, { kind: "start" });
    this.renderVerify();
    try {
      const report = await this.api.verify(this.selectedId);
      this.verifyState = transition(this.verifyState, { kind: "result", report });
    } catch (error) {
      this.verifyState = transition(this.verifyState, {
        kind: "error",
        detail: error instanceof ApiError ? error.message : String(error),
      });
    }
    this.renderVerify();
    this.renderTimelinePane();
    void this.refreshRecords();
  }

  async ask(): Promise<void> {
    if (!this.selectedId || this.askInFlight) return;
    const input = this.el("chat-input") as HTMLInputElement;
    const question = input.value.trim();
    const validation = this.el("chat-validation");
    if (!question) {
      validation.textContent = "Enter a question first.";
      return;
    }
    validation.textContent = "";
    this.askInFlight = true;
    try {
      const answer = await this.api.ask(this.selectedId, question);
      this.transcripts.append(this.selectedId, {
        question,
        answer,
        askedAt: Date.now(),
      });
      input.value = "";
      this.renderChat();
    } catch (error) {
      validation.textContent =
        error instanceof ApiError ? error.message : "question failed";
    } finally {
      this.askInFlight = false;
    }
  }
}

export function bootstrap(): void {
  const api = new ApiClient(apiBaseUrl());
  const app = new ConsoleApp(api, new TranscriptStore(window.localStorage), document);
  void app.start();
}

if (typeof window !== "undefined" && typeof document !== "undefined" && document.getElementById("records-pane")) {
  bootstrap();
}
