import type { ChatEntry, RecordEntry } from "./types.js";
import type { VerifyState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** One row per record with footer summary and any cached verification. */
export function renderRecordsTable(entries: RecordEntry[], selectedId: string | null): string {
  const rows = entries
    .map((entry) => {
      const footer = entry.footer;
      const counts = footer
        ? `${footer.record_count} records / ${footer.selected_count} proofs`
        : "—";
      const cached = entry.verification
        ? entry.verification.ok
          ? '<span class="badge ok">verified</span>'
          : '<span class="badge bad">tampered</span>'
        : "";
      const selected = entry.id === selectedId ? ' class="selected"' : "";
      return (
        `<tr data-record-id="${escapeHtml(entry.id)}"${selected}>` +
        `<td>${escapeHtml(entry.id)}</td>` +
        `<td>${escapeHtml(entry.status)}</td>` +
        `<td>${escapeHtml(counts)}</td>` +
        `<td>${cached}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    '<table class="records"><thead><tr>' +
    "<th>record</th><th>status</th><th>contents</th><th>integrity</th>" +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderEmptyRecords(detail: string): string {
  return `<div class="banner error">${escapeHtml(detail)}</div><table class="records"><tbody></tbody></table>`;
}

export function renderVerifyPanel(state: VerifyState): string {
  switch (state.phase) {
    case "idle":
      return '<div class="verify idle">Not verified yet.</div>';
    case "running":
      return '<div class="verify running">Verifying against the ledger…</div>';
    case "ok": {
      const r = state.report;
      return (
        `<div class="verify ok">Verified: ${r.confirmed}/${r.checked} proofs confirmed` +
        (r.incomplete ? " (recording incomplete)" : "") +
        "</div>"
      );
    }
    case "failed": {
      const r = state.report;
      const where =
        r.first_missing_index !== undefined
          ? ` first altered chain entry: #${r.first_missing_index}.`
          : " final digest mismatch.";
      return (
        `<div class="verify bad">Tampering detected: ${r.confirmed}/${r.checked} proofs ` +
        `confirmed.${where}</div>`
      );
    }
    case "error":
      return `<div class="verify warn">Ledger unavailable: ${escapeHtml(state.detail)}</div>`;
  }
}

/**
 * Timeline pane. When a failed verification localizes the first altered
 * chain entry, the trailing region of the timeline (proportional to the
 * altered chain suffix) is highlighted as suspect.
 */
export function renderTimeline(text: string, state: VerifyState): string {
  const lines = text === "" ? [] : text.replace(/\n$/, "").split("\n");
  let suspectFrom = lines.length;
  if (state.phase === "failed" && state.report.first_missing_index !== undefined && state.report.checked > 0) {
    const fraction = (state.report.first_missing_index - 1) / state.report.checked;
    suspectFrom = Math.floor(fraction * lines.length);
  }
  const body = lines
    .map((line, i) => {
      const cls = i >= suspectFrom ? ' class="suspect"' : "";
      return `<li${cls}>${escapeHtml(line)}</li>`;
    })
    .join("");
  return `<ol class="timeline">${body}</ol>`;
}

/** A question/answer exchange with its sources behind a disclosure widget. */
export function renderChatEntry(entry: ChatEntry): string {
  const sources = entry.answer.sources
    .map(
      ([chunkId, score]) =>
        `<li>chunk ${chunkId} (score ${score.toFixed(3)})</li>`,
    )
    .join("");
  return (
    '<div class="chat-entry">' +
    `<div class="question">${escapeHtml(entry.question)}</div>` +
    `<pre class="answer">${escapeHtml(entry.answer.text)}</pre>` +
    `<details class="sources"><summary>${entry.answer.sources.length} source ` +
    `chunk${entry.answer.sources.length === 1 ? "" : "s"}</summary>` +
    `<ul>${sources}</ul></details>` +
    "</div>"
  );
}

export function renderTranscript(entries: ChatEntry[]): string {
  return entries.map(renderChatEntry).join("");
}
