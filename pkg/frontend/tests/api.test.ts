// Contract tests: the zod schemas accept real recorded server responses, and
// outgoing payloads are validated before any network traffic.

import { describe, expect, it } from "vitest";

import {
  ApiClient,
  CalibrationReportSchema,
  ConflictError,
  HealthResponseSchema,
  PredictResponseSchema,
  SessionResponseSchema,
} from "../src/api.js";
import { loadRecorded, makeFakeFetch, syntheticLandmarks } from "./helpers.js";

describe("recorded server responses", () => {
  it("health parses", () => {
    expect(HealthResponseSchema.parse(loadRecorded("health")).status).toBe("ok");
  });

  it("session parses", () => {
    const body = SessionResponseSchema.parse(loadRecorded("session"));
    expect(body.session_id.length).toBeGreaterThan(0);
  });

  it("calibration report parses", () => {
    const report = CalibrationReportSchema.parse(loadRecorded("calibrate"));
    expect(report.n_samples).toBe(13);
    expect(report.mean_l2_px_after).toBeLessThan(report.mean_l2_px_before);
    expect(report.per_target_residuals_px).toHaveLength(13);
  });

  it("valid prediction parses", () => {
    const body = PredictResponseSchema.parse(loadRecorded("predict_valid"));
    expect(body.valid).toBe(true);
    expect(body.raw).not.toBeNull();
    expect(body.space_chain.map((c) => c.space)).toEqual(["normalized", "screen_px"]);
  });

  it("invalid prediction parses", () => {
    const body = PredictResponseSchema.parse(loadRecorded("predict_invalid"));
    expect(body.valid).toBe(false);
    expect(body.raw).toBeNull();
    expect(body.smoothed).toBeNull();
  });
});

describe("client behavior", () => {
  const session = { baseUrl: "http://test", sessionId: "s1", screenW: 1280,
                    screenH: 800, frameRateTarget: 30 };

  it("raises ConflictError on recorded 409", async () => {
    const recorded = loadRecorded("predict_conflict");
    const { fetchImpl } = makeFakeFetch({
      "/predict": () => ({ status: recorded.status_code, body: recorded.body }),
    });
    const client = new ApiClient("http://test", fetchImpl);
    await expect(client.predict(session, {
      frame_b64: "eA==", landmarks: syntheticLandmarks(), timestamp_ms: 0,
    })).rejects.toBeInstanceOf(ConflictError);
  });

  it("rejects malformed landmarks before any network call", async () => {
    const { fetchImpl, calls } = makeFakeFetch({});
    const client = new ApiClient("http://test", fetchImpl);
    await expect(client.predict(session, {
      frame_b64: "eA==", landmarks: [0.5, 0.5], timestamp_ms: 0,
    })).rejects.toThrow();
    expect(calls).toHaveLength(0);
  });

  it("creates a session carrying the layout screen dims", async () => {
    const { fetchImpl, calls } = makeFakeFetch({
      "/session": () => ({ status: 200, body: loadRecorded("session") }),
    });
    const client = new ApiClient("http://test", fetchImpl);
    const created = await client.createSession(1920, 1080);
    expect(created.screenW).toBe(1920);
    expect(calls[0]!.body).toEqual({ screen_w: 1920, screen_h: 1080 });
  });
});
