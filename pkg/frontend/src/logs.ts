// Line-delimited export formats shared with the analysis CLI: a CSV gaze log
// and a JSONL trial log.

import type { Side } from "./plan.js";

export const GAZE_LOG_HEADER = "timestamp_ms,x_px,y_px,valid,source_tag";

export interface GazeRow {
  timestampMs: number;
  x: number;
  y: number;
  valid: boolean;
}

export function gazeLogCsv(rows: readonly GazeRow[], sourceTag: string): string {
  const lines = [GAZE_LOG_HEADER];
  for (const r of rows) {
    lines.push(
      `${Math.round(r.timestampMs)},${r.x.toFixed(3)},${r.y.toFixed(3)},` +
      `${r.valid ? 1 : 0},${sourceTag}`,
    );
  }
  return lines.join("\n") + "\n";
}

export interface TrialRecordOut {
  trial: number;
  screen: [number, number];
  left_id: string;
  right_id: string;
  negative_side: Side;
  probe_side: Side;
  rect_left: [number, number, number, number];
  rect_right: [number, number, number, number];
  fixation_on: number;
  fixation_off: number;
  stimulus_on: number;
  stimulus_off: number;
  probe_on: number;
  probe_off: number;
  response_key: string | null;
  response_time_ms: number | null;
  anticipatory: Array<[string, number]>;
  phase_sample_counts: null;
}

export function trialLogJsonl(records: readonly TrialRecordOut[]): string {
  return records.map((r) => JSON.stringify(r)).join("\n") + "\n";
}

/** Browser download helper (unused in headless runs). */
export function downloadText(filename: string, text: string): void {
  const blob = new Blob([text], { type: "text/plain" });
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = filename;
  a.click();
  URL.revokeObjectURL(url);
}
