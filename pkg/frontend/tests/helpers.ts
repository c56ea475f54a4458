// Shared fakes for headless runs: a manually-advanced clock, a frame source,
// a routing fetch, and recording UI adapters.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";
import { CameraDeniedError, type CapturedFrame, type FrameSource } from "../src/capture.js";
import type { CalibrationUi } from "../src/calibration.js";
import type { Clock } from "../src/clock.js";
import type { TaskUi } from "../src/dotprobe.js";
import type { OverlayDot } from "../src/overlay.js";
import type { Side, TrialSpec } from "../src/plan.js";

const HERE = dirname(fileURLToPath(import.meta.url));
export const FIXTURES = join(HERE, "..", "fixtures");

export function loadRecorded(name: string): any {
  return JSON.parse(readFileSync(join(FIXTURES, "recorded", `${name}.json`), "utf-8"));
}

const flush = () => new Promise<void>((resolve) => setTimeout(resolve, 0));

export class TestClock implements Clock {
  private t = 0;
  private sleepers: Array<{ due: number; resolve: () => void }> = [];

  now(): number {
    return this.t;
  }

  sleep(ms: number): Promise<void> {
    return new Promise((resolve) => this.sleepers.push({ due: this.t + ms, resolve }));
  }

  /** Advance simulated time, waking sleepers in due order. */
  async advance(ms: number): Promise<void> {
    const target = this.t + ms;
    for (;;) {
      const due = this.sleepers.filter((s) => s.due <= target);
      if (due.length === 0) break;
      due.sort((a, b) => a.due - b.due);
      const next = due[0]!;
      this.sleepers.splice(this.sleepers.indexOf(next), 1);
      this.t = Math.max(this.t, next.due);
      next.resolve();
      await flush();
    }
    this.t = target;
    await flush();
  }
}

export function syntheticLandmarks(): number[] {
  const flat = new Array<number>(956);
  for (let i = 0; i < 478; i++) {
    flat[2 * i] = 0.3 + 0.4 * ((i * 37) % 101) / 101;
    flat[2 * i + 1] = 0.3 + 0.4 * ((i * 59) % 103) / 103;
  }
  return flat;
}

export class FakeFrameSource implements FrameSource {
  grabs = 0;
  denied = false;
  landmarks: number[] | null = syntheticLandmarks();

  constructor(private readonly clock: Clock) {}

  async ensureReady(): Promise<void> {
    if (this.denied) throw new CameraDeniedError();
  }

  async grab(): Promise<CapturedFrame> {
    this.grabs += 1;
    return {
      frameB64: "ZmFrZS1mcmFtZQ==",
      landmarks: this.landmarks ? this.landmarks.slice() : null,
      timestampMs: Math.round(this.clock.now()),
    };
  }

  stop(): void {}
}

export interface FetchCall {
  url: string;
  method: string;
  body: any;
}

export type RouteHandler = (call: FetchCall) => Promise<{ status: number; body: any }> |
  { status: number; body: any };

/** Routes by substring match; records every call for contract assertions. */
export function makeFakeFetch(routes: Record<string, RouteHandler>) {
  const calls: FetchCall[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    const call: FetchCall = {
      url: String(url),
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : null,
    };
    calls.push(call);
    for (const [pattern, handler] of Object.entries(routes)) {
      if (call.url.includes(pattern)) {
        const { status, body } = await handler(call);
        return new Response(JSON.stringify(body), {
          status,
          headers: { "content-type": "application/json" },
        });
      }
    }
    return new Response("not found", { status: 404 });
  };
  return { fetchImpl, calls };
}

export class FakeCalibrationUi implements CalibrationUi {
  shown: Array<{ x: number; y: number; index: number; tMs: number }> = [];
  report: any = null;
  error: { message: string; retryable: boolean } | null = null;
  cleared = 0;

  constructor(private readonly clock: Clock) {}

  showTarget(x: number, y: number, index: number): void {
    this.shown.push({ x, y, index, tMs: this.clock.now() });
  }

  clear(): void {
    this.cleared += 1;
  }

  showReport(report: any): void {
    this.report = report;
  }

  showError(message: string, retryable: boolean): void {
    this.error = { message, retryable };
  }
}

export class FakeTaskUi implements TaskUi {
  current = "idle";
  probeTrial = -1;
  breakShown = 0;
  sequence: string[] = [];

  private set(state: string): void {
    this.current = state;
    this.sequence.push(state);
  }

  showFixation(): void {
    this.set("fixation");
  }

  showStimuli(_trial: TrialSpec): void {
    this.set("stimulus");
  }

  showProbe(_side: Side, trial: TrialSpec): void {
    this.probeTrial = trial.index;
    this.set("probe");
  }

  showBreak(): void {
    this.breakShown += 1;
    this.set("break");
  }

  clear(): void {
    this.set("idle");
  }
}

export class FakeDot implements OverlayDot {
  showCalls: Array<{ x: number; y: number }> = [];
  hidden = true;

  show(x: number, y: number): void {
    this.showCalls.push({ x, y });
    this.hidden = false;
  }

  hide(): void {
    this.hidden = true;
  }
}
