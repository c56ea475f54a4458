import { describe, expect, it } from "vitest";

import { GAZE_LOG_HEADER, gazeLogCsv, trialLogJsonl } from "../src/logs.js";

describe("gaze log", () => {
  it("writes the shared CSV format", () => {
    const csv = gazeLogCsv([
      { timestampMs: 33.4, x: 12.3456, y: 700.1, valid: true },
      { timestampMs: 66, x: 0, y: 0, valid: false },
    ], "webapp");
    const lines = csv.trim().split("\n");
    expect(lines[0]).toBe(GAZE_LOG_HEADER);
    expect(lines[1]).toBe("33,12.346,700.100,1,webapp");
    expect(lines[2]).toBe("66,0.000,0.000,0,webapp");
  });
});

describe("trial log", () => {
  it("emits one complete JSON object per line", () => {
    const record = {
      trial: 0,
      screen: [1280, 800] as [number, number],
      left_id: "negative_0.png",
      right_id: "neutral_0.png",
      negative_side: "left" as const,
      probe_side: "right" as const,
      rect_left: [128, 240, 512, 560] as [number, number, number, number],
      rect_right: [768, 240, 1152, 560] as [number, number, number, number],
      fixation_on: 0,
      fixation_off: 700,
      stimulus_on: 700,
      stimulus_off: 2700,
      probe_on: 2700,
      probe_off: 2950,
      response_key: "space",
      response_time_ms: 250,
      anticipatory: [] as Array<[string, number]>,
      phase_sample_counts: null,
    };
    const jsonl = trialLogJsonl([record, { ...record, trial: 1 }]);
    const lines = jsonl.trim().split("\n");
    expect(lines).toHaveLength(2);
    const parsed = JSON.parse(lines[0]!);
    expect(parsed.negative_side).toBe("left");
    expect(parsed.rect_left).toHaveLength(4);
    expect(parsed.probe_off - parsed.probe_on).toBe(250);
  });
});
