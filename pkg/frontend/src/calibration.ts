// 13-target calibration flow: show each target, dwell so the eyes settle,
// capture one frame, then post the whole mini-dataset in a single request
// (an abort before that point leaves the session untouched).

import type { ApiClient, CalibrationReport, CalibrationSamplePayload, ClientSession } from "./api.js";
import { ConflictError } from "./api.js";
import { CameraDeniedError, type FrameSource } from "./capture.js";
import type { Clock } from "./clock.js";

export const CALIBRATION_DWELL_MS = 800;

export interface CalibrationUi {
  showTarget(x: number, y: number, index: number, total: number): void;
  clear(): void;
  showReport(report: CalibrationReport): void;
  showError(message: string, retryable: boolean): void;
}

/** 3x3 grid at 10/50/90% of each dimension plus four points at 30/70%. */
export function calibrationTargets(screenW: number, screenH: number): Array<[number, number]> {
  const targets: Array<[number, number]> = [];
  for (const fy of [0.1, 0.5, 0.9]) {
    for (const fx of [0.1, 0.5, 0.9]) {
      targets.push([fx * screenW, fy * screenH]);
    }
  }
  for (const fy of [0.3, 0.7]) {
    for (const fx of [0.3, 0.7]) {
      targets.push([fx * screenW, fy * screenH]);
    }
  }
  return targets;
}

export interface CalibrationOptions {
  dwellMs?: number;
  shouldAbort?: () => boolean;
}

export async function runCalibration(
  client: ApiClient,
  session: ClientSession,
  frames: FrameSource,
  ui: CalibrationUi,
  clock: Clock,
  options: CalibrationOptions = {},
): Promise<CalibrationReport | null> {
  const dwellMs = options.dwellMs ?? CALIBRATION_DWELL_MS;
  const shouldAbort = options.shouldAbort ?? (() => false);

  try {
    await frames.ensureReady();
  } catch (err) {
    if (err instanceof CameraDeniedError) {
      ui.showError("camera access is required for calibration", false);
      return null; // no network traffic without a camera
    }
    throw err;
  }

  const targets = calibrationTargets(session.screenW, session.screenH);
  const samples: CalibrationSamplePayload[] = [];
  for (let i = 0; i < targets.length; i++) {
    if (shouldAbort()) {
      ui.clear();
      return null; // nothing was posted: the session stays Ready
    }
    const [x, y] = targets[i]!;
    ui.showTarget(x, y, i, targets.length);
    await clock.sleep(dwellMs);
    const frame = await frames.grab();
    samples.push({ frame_b64: frame.frameB64, landmarks: frame.landmarks, target_px: [x, y] });
  }
  ui.clear();

  try {
    const report = await client.calibrate(session, samples);
    ui.showReport(report);
    return report;
  } catch (err) {
    if (err instanceof ConflictError) {
      ui.showError("the session is busy calibrating; try again shortly", true);
      return null;
    }
    throw err;
  }
}
