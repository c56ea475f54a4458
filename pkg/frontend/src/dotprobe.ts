// Dot-probe task runner: drives fixation -> stimulus pair -> probe phases on
// the trial clock while streaming webcam frames to the prediction endpoint.
// At most one predict request is in flight; the newest frame wins and
// failures (conflict, timeout, network) are logged as invalid samples so the
// task never stalls on the network.

import type { ApiClient, ClientSession } from "./api.js";
import type { FrameSource } from "./capture.js";
import type { Clock } from "./clock.js";
import type { GazeRow, TrialRecordOut } from "./logs.js";
import type { GazeOverlay } from "./overlay.js";
import type { SessionPlan, Side, TrialSpec } from "./plan.js";
import { mulberry32, uniform } from "./rng.js";

export const STIMULUS_MS = 2000;
export const FIXATION_RANGE_MS: [number, number] = [500, 1500];
// transitions are frame-quantized; keep the draw below the upper bound so
// recorded durations stay inside the range
export const FIXATION_FRAME_RESERVE_MS = 20;
export const PROBE_TIMEOUT_MS = 5000;
export const FRAME_INTERVAL_MS = 1000 / 60;

export interface TaskUi {
  showFixation(): void;
  showStimuli(trial: TrialSpec): void;
  showProbe(side: Side, trial: TrialSpec): void;
  showBreak(): void;
  clear(): void;
}

export interface KeyEventIn {
  key: string;
  tMs: number;
}

/** Pull-based key queue; the DOM adapter pushes listener events into it. */
export class KeyQueue {
  private events: KeyEventIn[] = [];

  push(key: string, tMs: number): void {
    this.events.push({ key, tMs });
  }

  drain(): KeyEventIn[] {
    const out = this.events;
    this.events = [];
    return out;
  }
}

export interface DotProbeOptions {
  stimulusMs?: number;
  fixationRangeMs?: [number, number];
  probeTimeoutMs?: number;
  frameIntervalMs?: number;
  seed?: number;
  /** Stream frames to the predict endpoint while the task runs. */
  predict?: boolean;
}

export interface DotProbeDeps {
  client: ApiClient;
  session: ClientSession;
  frames: FrameSource;
  ui: TaskUi;
  keys: KeyQueue;
  clock: Clock;
  overlay?: GazeOverlay;
}

export interface DotProbeResult {
  records: TrialRecordOut[];
  gazeRows: GazeRow[];
}

export async function runDotProbe(
  plan: SessionPlan,
  deps: DotProbeDeps,
  options: DotProbeOptions = {},
): Promise<DotProbeResult> {
  const stimulusMs = options.stimulusMs ?? STIMULUS_MS;
  const [fixLo, fixHi] = options.fixationRangeMs ?? FIXATION_RANGE_MS;
  const probeTimeoutMs = options.probeTimeoutMs ?? PROBE_TIMEOUT_MS;
  const frameIntervalMs = options.frameIntervalMs ?? FRAME_INTERVAL_MS;
  const predictEnabled = options.predict ?? true;
  const rng = mulberry32(options.seed ?? 0);

  const { client, session, frames, ui, keys, clock, overlay } = deps;
  const records: TrialRecordOut[] = [];
  const gazeRows: GazeRow[] = [];

  overlay?.setTaskMode(true);
  let inFlight = false;

  const pumpFrames = () => {
    if (!predictEnabled || inFlight) return;
    inFlight = true;
    void (async () => {
      const frame = await frames.grab();
      try {
        const resp = await client.predict(session, {
          frame_b64: frame.frameB64,
          landmarks: frame.landmarks,
          timestamp_ms: frame.timestampMs,
        });
        if (resp.valid && resp.raw) {
          gazeRows.push({ timestampMs: frame.timestampMs,
                          x: resp.raw.x_px, y: resp.raw.y_px, valid: true });
          overlay?.update(resp.smoothed
            ? { x: resp.smoothed.x_px, y: resp.smoothed.y_px } : null);
        } else {
          gazeRows.push({ timestampMs: frame.timestampMs, x: 0, y: 0, valid: false });
          overlay?.update(null);
        }
      } catch {
        // conflict/timeout/network: an invalid sample, never a stall
        gazeRows.push({ timestampMs: frame.timestampMs, x: 0, y: 0, valid: false });
        overlay?.update(null);
      } finally {
        inFlight = false;
      }
    })();
  };

  let anticipatory: Array<[string, number]> = [];

  const tick = async (): Promise<KeyEventIn[]> => {
    pumpFrames();
    await clock.sleep(frameIntervalMs);
    return keys.drain();
  };

  const waitUntil = async (deadline: number): Promise<void> => {
    while (clock.now() < deadline) {
      for (const ev of await tick()) {
        anticipatory.push([ev.key, ev.tMs]);
      }
    }
  };

  try {
    for (const trial of plan.trials) {
      anticipatory = [];
      const fixationOn = Math.round(clock.now());
      ui.showFixation();
      const fixationMs = uniform(rng, fixLo, fixHi - FIXATION_FRAME_RESERVE_MS);
      await waitUntil(fixationOn + fixationMs);

      const stimulusOn = Math.round(clock.now());
      ui.showStimuli(trial);
      await waitUntil(stimulusOn + stimulusMs);

      const probeOn = Math.round(clock.now());
      ui.showProbe(trial.probeSide, trial);
      let response: KeyEventIn | null = null;
      while (response === null && clock.now() < probeOn + probeTimeoutMs) {
        const events = await tick();
        response = events.length > 0 ? events[0]! : null;
      }
      const probeOff = response ? Math.round(response.tMs) : Math.round(clock.now());

      records.push({
        trial: trial.index,
        screen: [session.screenW, session.screenH],
        left_id: trial.leftId,
        right_id: trial.rightId,
        negative_side: trial.negativeSide,
        probe_side: trial.probeSide,
        rect_left: trial.rectLeft,
        rect_right: trial.rectRight,
        fixation_on: fixationOn,
        fixation_off: stimulusOn,
        stimulus_on: stimulusOn,
        stimulus_off: probeOn,
        probe_on: probeOn,
        probe_off: probeOff,
        response_key: response?.key ?? null,
        response_time_ms: response ? Math.round(response.tMs) - probeOn : null,
        anticipatory,
        phase_sample_counts: null,
      });

      if (records.length === plan.breakAfter && records.length < plan.trials.length) {
        ui.showBreak();
        let resume = false;
        while (!resume) {
          resume = (await tick()).length > 0;
        }
      }
    }
  } finally {
    ui.clear();
    overlay?.setTaskMode(false);
  }
  return { records, gazeRows };
}
