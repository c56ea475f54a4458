import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { FRAME_INTERVAL_MS, KeyQueue, runDotProbe } from "../src/dotprobe.js";
import { GAZE_LOG_HEADER, gazeLogCsv, trialLogJsonl } from "../src/logs.js";
import { GazeOverlay } from "../src/overlay.js";
import { buildSessionPlan } from "../src/plan.js";
import {
  FIXTURES,
  FakeDot,
  FakeFrameSource,
  FakeTaskUi,
  TestClock,
  loadRecorded,
  makeFakeFetch,
} from "./helpers.js";

const SESSION = { baseUrl: "http://test", sessionId: "s1", screenW: 1280,
                  screenH: 800, frameRateTarget: 30 };
const ONE_FRAME = FRAME_INTERVAL_MS * 1.001; // +-1 display frame tolerance

function catalog(n = 8) {
  return Array.from({ length: n }, (_, i) =>
    [`negative_${i}.png`, `neutral_${i}.png`] as [string, string]);
}

interface DriverOptions {
  rtMs?: number;
  anticipateInFixation?: boolean;
  maxSteps?: number;
}

function setup(routes = {}) {
  const clock = new TestClock();
  const frames = new FakeFrameSource(clock);
  const ui = new FakeTaskUi();
  const keys = new KeyQueue();
  const dot = new FakeDot();
  const overlay = new GazeOverlay(dot);
  const { fetchImpl, calls } = makeFakeFetch({
    "/predict": () => ({ status: 200, body: loadRecorded("predict_valid") }),
    ...routes,
  });
  const client = new ApiClient("http://test", fetchImpl);
  return { clock, frames, ui, keys, dot, overlay, client, calls };
}

/** Step the clock frame by frame, answering probes and break screens. */
async function drive(env: ReturnType<typeof setup>, run: Promise<any>,
                     opts: DriverOptions = {}) {
  const { clock, ui, keys } = env;
  const rtMs = opts.rtMs ?? 180;
  const maxSteps = opts.maxSteps ?? 50_000;
  let outcome: { value?: any; error?: unknown; settled: boolean } = { settled: false };
  run.then((v) => (outcome = { value: v, settled: true }),
           (e) => (outcome = { error: e, settled: true }));
  const answered = new Set<number>();
  let anticipated = false;
  let probeSince = -1;
  for (let i = 0; i < maxSteps && !outcome.settled; i++) {
    if (ui.current === "probe" && !answered.has(ui.probeTrial)) {
      if (probeSince < 0) probeSince = clock.now();
      if (clock.now() - probeSince >= rtMs) {
        keys.push("space", clock.now());
        answered.add(ui.probeTrial);
        probeSince = -1;
      }
    } else if (ui.current === "break") {
      keys.push("space", clock.now());
    } else if (ui.current === "fixation" && opts.anticipateInFixation && !anticipated) {
      keys.push("x", clock.now());
      anticipated = true;
    }
    await clock.advance(FRAME_INTERVAL_MS);
  }
  if (outcome.error) throw outcome.error;
  expect(outcome.settled).toBe(true);
  return outcome.value;
}

describe("runDotProbe", () => {
  it("three scripted trials keep phase timing within one display frame", async () => {
    const env = setup();
    const plan = buildSessionPlan(catalog(), SESSION.screenW, SESSION.screenH, 5, 3, 2);
    const result = await drive(env, runDotProbe(plan, {
      client: env.client, session: SESSION, frames: env.frames, ui: env.ui,
      keys: env.keys, clock: env.clock, overlay: env.overlay,
    }, { seed: 5 }));

    expect(result.records).toHaveLength(3);
    for (const rec of result.records) {
      const fixation = rec.fixation_off - rec.fixation_on;
      const stimulus = rec.stimulus_off - rec.stimulus_on;
      expect(fixation).toBeGreaterThanOrEqual(500);
      expect(fixation).toBeLessThanOrEqual(1500);
      expect(stimulus).toBeGreaterThanOrEqual(2000);
      expect(stimulus).toBeLessThanOrEqual(2000 + ONE_FRAME);
      expect(rec.response_key).toBe("space");
      expect(rec.response_time_ms).toBeGreaterThanOrEqual(180 - ONE_FRAME);
      expect(rec.probe_off).toBeGreaterThan(rec.probe_on);
      expect(rec.screen).toEqual([1280, 800]);
    }
    // phases appear in order within the UI event stream
    const seq = env.ui.sequence.filter((s) => s !== "idle");
    expect(seq.slice(0, 3)).toEqual(["fixation", "stimulus", "probe"]);
  });

  it("inserts the break screen after the configured trial", async () => {
    const env = setup();
    const plan = buildSessionPlan(catalog(), SESSION.screenW, SESSION.screenH, 1, 3, 2);
    const result = await drive(env, runDotProbe(plan, {
      client: env.client, session: SESSION, frames: env.frames, ui: env.ui,
      keys: env.keys, clock: env.clock,
    }, { seed: 1 }));
    expect(env.ui.breakShown).toBe(1);
    expect(result.records).toHaveLength(3);
    const breakIdx = env.ui.sequence.indexOf("break");
    const probesBefore = env.ui.sequence.slice(0, breakIdx)
      .filter((s) => s === "probe").length;
    expect(probesBefore).toBe(2);
  });

  it("ignores keypresses outside the probe phase but logs them", async () => {
    const env = setup();
    const plan = buildSessionPlan(catalog(), SESSION.screenW, SESSION.screenH, 2, 1, 99);
    const result = await drive(env, runDotProbe(plan, {
      client: env.client, session: SESSION, frames: env.frames, ui: env.ui,
      keys: env.keys, clock: env.clock,
    }, { seed: 2 }), { anticipateInFixation: true });
    const rec = result.records[0]!;
    expect(rec.anticipatory.length).toBeGreaterThan(0);
    expect(rec.anticipatory[0]![0]).toBe("x");
    // the anticipatory key did not end any phase early
    expect(rec.stimulus_off - rec.stimulus_on).toBeGreaterThanOrEqual(2000);
  });

  it("logs conflicts as invalid samples and never stalls", async () => {
    const env = setup({
      "/predict": () => ({ status: 409, body: { detail: "session busy" } }),
    });
    const plan = buildSessionPlan(catalog(), SESSION.screenW, SESSION.screenH, 3, 1, 99);
    const result = await drive(env, runDotProbe(plan, {
      client: env.client, session: SESSION, frames: env.frames, ui: env.ui,
      keys: env.keys, clock: env.clock,
    }, { seed: 3 }));
    expect(result.records).toHaveLength(1);
    expect(result.gazeRows.length).toBeGreaterThan(0);
    expect(result.gazeRows.every((r) => !r.valid)).toBe(true);
  });

  it("keeps at most one predict request in flight", async () => {
    let active = 0;
    let maxActive = 0;
    const env = setup({
      "/predict": async () => {
        active += 1;
        maxActive = Math.max(maxActive, active);
        await new Promise((resolve) => setTimeout(resolve, 0));
        active -= 1;
        return { status: 200, body: loadRecorded("predict_valid") };
      },
    });
    const plan = buildSessionPlan(catalog(), SESSION.screenW, SESSION.screenH, 4, 1, 99);
    await drive(env, runDotProbe(plan, {
      client: env.client, session: SESSION, frames: env.frames, ui: env.ui,
      keys: env.keys, clock: env.clock,
    }, { seed: 4 }));
    expect(maxActive).toBe(1);
  });

  it("never renders the overlay during the task, even in debug mode", async () => {
    const env = setup();
    env.overlay.setEnabled(true); // debug overlay on before the task starts
    const plan = buildSessionPlan(catalog(), SESSION.screenW, SESSION.screenH, 6, 2, 99);
    await drive(env, runDotProbe(plan, {
      client: env.client, session: SESSION, frames: env.frames, ui: env.ui,
      keys: env.keys, clock: env.clock, overlay: env.overlay,
    }, { seed: 6 }));
    expect(env.dot.showCalls).toHaveLength(0);
    // after the task the debug overlay works again
    env.overlay.update({ x: 10, y: 20 });
    expect(env.dot.showCalls).toHaveLength(1);
  });

  it("exports logs in the shared formats", async () => {
    const env = setup();
    const plan = buildSessionPlan(catalog(), SESSION.screenW, SESSION.screenH, 7, 3, 2);
    const result = await drive(env, runDotProbe(plan, {
      client: env.client, session: SESSION, frames: env.frames, ui: env.ui,
      keys: env.keys, clock: env.clock,
    }, { seed: 7 }));

    const gazeCsv = gazeLogCsv(result.gazeRows, "webapp");
    expect(gazeCsv.split("\n")[0]).toBe(GAZE_LOG_HEADER);
    const trialJsonl = trialLogJsonl(result.records);
    for (const line of trialJsonl.trim().split("\n")) {
      const parsed = JSON.parse(line);
      expect(parsed).toHaveProperty("fixation_on");
      expect(parsed).toHaveProperty("rect_left");
      expect(parsed.screen).toEqual([1280, 800]);
    }

    // committed for the python-side analyze round trip
    mkdirSync(FIXTURES, { recursive: true });
    writeFileSync(join(FIXTURES, "exported_trials.jsonl"), trialJsonl);
    writeFileSync(join(FIXTURES, "exported_gaze.csv"), gazeCsv);
  });
});
