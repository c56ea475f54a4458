// HTTP client for the gaze server. Outgoing payloads are validated against
// the wire schema before they leave the browser; responses are parsed with
// the same zod schemas the contract tests run against recorded server output.

import { z } from "zod";

export const LANDMARK_FLOATS = 956; // 478 x 2

export const CalibrationSamplePayloadSchema = z.object({
  frame_b64: z.string().min(1),
  landmarks: z.array(z.number()).length(LANDMARK_FLOATS).nullable(),
  target_px: z.tuple([z.number(), z.number()]),
});
export type CalibrationSamplePayload = z.infer<typeof CalibrationSamplePayloadSchema>;

export const CalibrateRequestSchema = z.object({
  samples: z.array(CalibrationSamplePayloadSchema).min(1),
});

export const PredictRequestSchema = z.object({
  frame_b64: z.string().min(1),
  landmarks: z.array(z.number()).length(LANDMARK_FLOATS).nullable(),
  timestamp_ms: z.number().int(),
});
export type PredictRequest = z.infer<typeof PredictRequestSchema>;

export const SessionResponseSchema = z.object({
  session_id: z.string().min(1),
  schema_version: z.number().int(),
});

export const CalibrationReportSchema = z.object({
  n_samples: z.number().int(),
  n_invalid: z.number().int(),
  mean_l2_px_before: z.number(),
  mean_l2_px_after: z.number(),
  per_target_residuals_px: z.array(z.number()),
  steps: z.number().int(),
  wall_time_ms: z.number(),
  schema_version: z.number().int().optional(),
});
export type CalibrationReport = z.infer<typeof CalibrationReportSchema>;

const PointSchema = z.object({ x_px: z.number(), y_px: z.number() });

export const PredictResponseSchema = z.object({
  valid: z.boolean(),
  face_detected: z.boolean(),
  raw: PointSchema.nullable(),
  smoothed: PointSchema.nullable(),
  space_chain: z.array(z.object({ space: z.string(), x: z.number(), y: z.number() })),
  schema_version: z.number().int(),
});
export type PredictResponse = z.infer<typeof PredictResponseSchema>;

export const HealthResponseSchema = z.object({
  status: z.string(),
  profile: z.string(),
  uptime_s: z.number(),
  schema_version: z.number().int(),
});

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

/** 409: the session is busy calibrating. */
export class ConflictError extends ApiError {
  constructor(message: string) {
    super(message, 409);
    this.name = "ConflictError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientSession {
  baseUrl: string;
  sessionId: string;
  screenW: number;
  screenH: number;
  frameRateTarget: number;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post(path: string, body: unknown): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (resp.status === 409) {
      throw new ConflictError(await resp.text());
    }
    if (!resp.ok) {
      throw new ApiError(`${path} failed: ${resp.status} ${await resp.text()}`, resp.status);
    }
    return resp.json();
  }

  async health() {
    const resp = await this.fetchImpl(`${this.baseUrl}/health`);
    if (!resp.ok) throw new ApiError(`health failed: ${resp.status}`, resp.status);
    return HealthResponseSchema.parse(await resp.json());
  }

  /** Creates a session whose screen dims drive all client-side layout. */
  async createSession(screenW: number, screenH: number,
                      frameRateTarget = 30): Promise<ClientSession> {
    const body = await this.post("/session", { screen_w: screenW, screen_h: screenH });
    const parsed = SessionResponseSchema.parse(body);
    return { baseUrl: this.baseUrl, sessionId: parsed.session_id, screenW, screenH, frameRateTarget };
  }

  async calibrate(session: ClientSession,
                  samples: CalibrationSamplePayload[]): Promise<CalibrationReport> {
    const payload = CalibrateRequestSchema.parse({ samples });
    const body = await this.post(`/session/${session.sessionId}/calibrate`, payload);
    return CalibrationReportSchema.parse(body);
  }

  async predict(session: ClientSession, request: PredictRequest): Promise<PredictResponse> {
    const payload = PredictRequestSchema.parse(request);
    const body = await this.post(`/session/${session.sessionId}/predict`, payload);
    return PredictResponseSchema.parse(body);
  }
}
