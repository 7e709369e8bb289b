// Pure HTML renderers for the red/green result boxes the portal shows.

import type { BatchRowError } from "./api.js";

export type BatchOutcome =
  | { kind: "success"; accepted: number }
  | { kind: "errors"; errors: BatchRowError[] }
  | { kind: "empty" };

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Green confirmation box. */
export function successBox(message: string): string {
  return `<div class="box success">${escapeHtml(message)}</div>`;
}

/** Red error box; one line per message. */
export function errorBox(messages: string[]): string {
  const items = messages.map((m) => `<li>${escapeHtml(m)}</li>`).join("");
  return `<div class="box error"><ul>${items}</ul></div>`;
}

/**
 * Batch upload outcome: a red box listing each failing spreadsheet row and
 * its reason, or a green box with the accepted count.
 */
export function renderBatchResult(outcome: BatchOutcome): string {
  if (outcome.kind === "empty") {
    return `<div class="box neutral">No upload yet.</div>`;
  }
  if (outcome.kind === "success") {
    return successBox(
      `${outcome.accepted} client${outcome.accepted === 1 ? "" : "s"} uploaded into the database.`,
    );
  }
  const rows = outcome.errors.map(
    (e) => `Row ${e.row_number}: ${readableReason(e.reason)}`,
  );
  return errorBox([
    `There ${rows.length === 1 ? "is 1 error" : `are ${rows.length} errors`}, and the data cannot be uploaded:`,
    ...rows,
  ]);
}

const REASON_TEXT: Record<string, string> = {
  "invalid-national-id": "invalid NHS number",
  "missing-primary-id": "missing primary ID",
  "missing-trial-code": "missing trial code",
  "invalid-date": "invalid date",
  "duplicate-trial-code": "duplicate trial code",
  "duplicate-primary-id": "duplicate primary ID",
  "already-registered": "client already registered",
  "opted-out": "client has opted out",
};

export function readableReason(code: string): string {
  return REASON_TEXT[code] ?? code;
}
