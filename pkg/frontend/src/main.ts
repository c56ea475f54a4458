// Browser wiring: buttons, camera, landmark model, overlay, log export.
// Everything testable lives in the modules this file composes.

import { ApiClient } from "./api.js";
import { CameraFrameSource } from "./capture.js";
import { runCalibration, type CalibrationUi } from "./calibration.js";
import { realClock } from "./clock.js";
import { KeyQueue, runDotProbe, type TaskUi } from "./dotprobe.js";
import { loadMediapipeProvider } from "./landmarks.js";
import { downloadText, gazeLogCsv, trialLogJsonl } from "./logs.js";
import { DomOverlayDot, GazeOverlay } from "./overlay.js";
import { buildSessionPlan, type Side, type TrialSpec } from "./plan.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function placeRect(node: HTMLElement, rect: [number, number, number, number]): void {
  Object.assign(node.style, {
    position: "fixed",
    left: `${rect[0]}px`,
    top: `${rect[1]}px`,
    width: `${rect[2] - rect[0]}px`,
    height: `${rect[3] - rect[1]}px`,
    display: "block",
  });
}

class DomCalibrationUi implements CalibrationUi {
  private readonly target = el<HTMLDivElement>("calib-target");
  private readonly status = el<HTMLDivElement>("status");

  showTarget(x: number, y: number, index: number, total: number): void {
    this.target.style.display = "block";
    this.target.style.left = `${x}px`;
    this.target.style.top = `${y}px`;
    this.status.textContent = `fixate the dot (${index + 1}/${total})`;
  }

  clear(): void {
    this.target.style.display = "none";
    this.status.textContent = "";
  }

  showReport(report: { mean_l2_px_before: number; mean_l2_px_after: number }): void {
    this.status.textContent =
      `calibrated: ${report.mean_l2_px_before.toFixed(1)} px -> ` +
      `${report.mean_l2_px_after.toFixed(1)} px`;
  }

  showError(message: string, retryable: boolean): void {
    this.status.textContent = retryable ? `${message} (retry)` : message;
  }
}

class DomTaskUi implements TaskUi {
  private readonly fixation = el<HTMLDivElement>("fixation");
  private readonly left = el<HTMLDivElement>("stim-left");
  private readonly right = el<HTMLDivElement>("stim-right");
  private readonly probe = el<HTMLDivElement>("probe");
  private readonly message = el<HTMLDivElement>("status");

  showFixation(): void {
    this.clear();
    this.fixation.style.display = "block";
  }

  showStimuli(trial: TrialSpec): void {
    this.clear();
    placeRect(this.left, trial.rectLeft);
    placeRect(this.right, trial.rectRight);
    this.left.textContent = trial.leftId;
    this.right.textContent = trial.rightId;
  }

  showProbe(side: Side, trial: TrialSpec): void {
    this.clear();
    const rect = side === "left" ? trial.rectLeft : trial.rectRight;
    this.probe.style.display = "block";
    this.probe.style.left = `${(rect[0] + rect[2]) / 2}px`;
    this.probe.style.top = `${(rect[1] + rect[3]) / 2}px`;
  }

  showBreak(): void {
    this.clear();
    this.message.textContent = "take a short break; press any key to continue";
  }

  clear(): void {
    for (const node of [this.fixation, this.left, this.right, this.probe]) {
      node.style.display = "none";
    }
    this.message.textContent = "";
  }
}

async function boot(): Promise<void> {
  const baseUrl = (el<HTMLInputElement>("server-url")).value || "http://127.0.0.1:8321";
  const client = new ApiClient(baseUrl);
  const session = await client.createSession(window.innerWidth, window.innerHeight);
  const landmarks = await loadMediapipeProvider();
  const frames = new CameraFrameSource(landmarks, realClock);
  const overlay = new GazeOverlay(new DomOverlayDot());
  const keys = new KeyQueue();
  window.addEventListener("keydown", (ev) => keys.push(ev.key, realClock.now()));

  el<HTMLInputElement>("overlay-toggle").addEventListener("change", (ev) => {
    overlay.setEnabled((ev.target as HTMLInputElement).checked);
  });

  el<HTMLButtonElement>("btn-calibrate").addEventListener("click", () => {
    void runCalibration(client, session, frames, new DomCalibrationUi(), realClock);
  });

  el<HTMLButtonElement>("btn-task").addEventListener("click", async () => {
    const catalog: Array<[string, string]> = Array.from(
      { length: 96 }, (_, i) => [`negative_${i}.png`, `neutral_${i}.png`]);
    const plan = buildSessionPlan(catalog, session.screenW, session.screenH, Date.now() >>> 0);
    const result = await runDotProbe(plan,
      { client, session, frames, ui: new DomTaskUi(), keys, clock: realClock, overlay });
    downloadText("trials.jsonl", trialLogJsonl(result.records));
    downloadText("gaze.csv", gazeLogCsv(result.gazeRows, "webapp"));
  });
}

window.addEventListener("DOMContentLoaded", () => {
  el<HTMLButtonElement>("btn-connect").addEventListener("click", () => void boot());
});
