import { describe, expect, it } from "vitest";

import { BREAK_AFTER, N_TRIALS, buildSessionPlan, stimulusRects } from "../src/plan.js";

function catalog(n = 100) {
  return Array.from({ length: n }, (_, i) => [`neg_${i}`, `neu_${i}`] as [string, string]);
}

describe("buildSessionPlan", () => {
  it("defaults to 96 trials with the break after 48", () => {
    const plan = buildSessionPlan(catalog(), 1920, 1080, 0);
    expect(plan.trials).toHaveLength(N_TRIALS);
    expect(plan.breakAfter).toBe(BREAK_AFTER);
  });

  it("balances the negative side 48/48", () => {
    const plan = buildSessionPlan(catalog(), 1920, 1080, 3);
    const left = plan.trials.filter((t) => t.negativeSide === "left").length;
    expect(left).toBe(48);
  });

  it("is deterministic for a fixed seed", () => {
    const a = buildSessionPlan(catalog(), 1920, 1080, 9);
    const b = buildSessionPlan(catalog(), 1920, 1080, 9);
    expect(a).toEqual(b);
    const c = buildSessionPlan(catalog(), 1920, 1080, 10);
    expect(JSON.stringify(c)).not.toBe(JSON.stringify(a));
  });

  it("rejects an undersized catalog", () => {
    expect(() => buildSessionPlan(catalog(95), 1920, 1080, 0)).toThrow();
  });

  it("negative side determines which id goes where", () => {
    const plan = buildSessionPlan(catalog(), 1920, 1080, 1);
    for (const t of plan.trials) {
      if (t.negativeSide === "left") {
        expect(t.leftId.startsWith("neg")).toBe(true);
      } else {
        expect(t.rightId.startsWith("neg")).toBe(true);
      }
    }
  });
});

describe("stimulusRects", () => {
  it("yields disjoint rects symmetric about the midline", () => {
    const [left, right] = stimulusRects(1920, 1080);
    expect(left[2]).toBeLessThanOrEqual(right[0]);
    const mid = 960;
    expect(mid - left[0]).toBeCloseTo(right[2] - mid, 6);
    expect(mid - left[2]).toBeCloseTo(right[0] - mid, 6);
    expect(left[1]).toBe(right[1]);
    expect(left[3]).toBe(right[3]);
  });
});
