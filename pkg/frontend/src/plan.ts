// Session plan: 96 trials from a (negative, neutral) catalog, negative side
// balanced 48/48, stimulus rects symmetric about the vertical midline.

import { mulberry32, shuffled } from "./rng.js";

export type Side = "left" | "right";

export interface TrialSpec {
  index: number;
  leftId: string;
  rightId: string;
  negativeSide: Side;
  probeSide: Side;
  rectLeft: [number, number, number, number];
  rectRight: [number, number, number, number];
}

export interface SessionPlan {
  trials: TrialSpec[];
  breakAfter: number;
  screenW: number;
  screenH: number;
}

export const N_TRIALS = 96;
export const BREAK_AFTER = 48;
const STIM_SIZE_FRAC: [number, number] = [0.3, 0.4];
const STIM_CENTER_X = [0.25, 0.75];

export function stimulusRects(screenW: number, screenH: number):
    [[number, number, number, number], [number, number, number, number]] {
  const sw = STIM_SIZE_FRAC[0] * screenW;
  const sh = STIM_SIZE_FRAC[1] * screenH;
  const cy = 0.5 * screenH;
  const rects = STIM_CENTER_X.map((cxFrac) => {
    const cx = cxFrac * screenW;
    return [cx - sw / 2, cy - sh / 2, cx + sw / 2, cy + sh / 2] as
      [number, number, number, number];
  });
  return [rects[0]!, rects[1]!];
}

export function buildSessionPlan(
  catalog: ReadonlyArray<[string, string]>,
  screenW: number,
  screenH: number,
  seed = 0,
  nTrials = N_TRIALS,
  breakAfter = BREAK_AFTER,
): SessionPlan {
  if (catalog.length < nTrials) {
    throw new Error(`catalog has ${catalog.length} pairs, need ${nTrials}`);
  }
  const rng = mulberry32(seed);
  const order = shuffled(rng, catalog).slice(0, nTrials);
  const half = Math.floor(nTrials / 2);
  const sides: Side[] = shuffled(rng, [
    ...Array<Side>(half).fill("left"),
    ...Array<Side>(nTrials - half).fill("right"),
  ]);
  const probes: Side[] = shuffled(rng, [
    ...Array<Side>(half).fill("left"),
    ...Array<Side>(nTrials - half).fill("right"),
  ]);
  const [rectLeft, rectRight] = stimulusRects(screenW, screenH);
  const trials = order.map(([negId, neuId], i) => {
    const negativeSide = sides[i]!;
    return {
      index: i,
      leftId: negativeSide === "left" ? negId : neuId,
      rightId: negativeSide === "left" ? neuId : negId,
      negativeSide,
      probeSide: probes[i]!,
      rectLeft,
      rectRight,
    };
  });
  return { trials, breakAfter, screenW, screenH };
}
