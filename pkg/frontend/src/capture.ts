// Webcam capture: grabs a frame, downscales it, encodes it, and attaches
// client-side landmarks. Tests substitute a fake FrameSource; only the
// DOM-backed implementation below touches browser APIs.

import type { Clock } from "./clock.js";
import type { LandmarkProvider } from "./landmarks.js";

export const MAX_FRAME_WIDTH = 640; // bound the payload size before encoding

export interface CapturedFrame {
  frameB64: string;
  landmarks: number[] | null; // flat 956 floats in [0,1], null when no face
  timestampMs: number;
}

export class CameraDeniedError extends Error {
  constructor() {
    super("camera permission denied");
    this.name = "CameraDeniedError";
  }
}

export interface FrameSource {
  /** Resolves once frames can be grabbed; rejects with CameraDeniedError. */
  ensureReady(): Promise<void>;
  grab(): Promise<CapturedFrame>;
  stop(): void;
}

export class CameraFrameSource implements FrameSource {
  private video: HTMLVideoElement | null = null;
  private canvas: HTMLCanvasElement | null = null;
  private stream: MediaStream | null = null;

  constructor(
    private readonly landmarks: LandmarkProvider,
    private readonly clock: Clock,
    private readonly mimeType: string = "image/jpeg",
  ) {}

  async ensureReady(): Promise<void> {
    if (this.stream) return;
    try {
      this.stream = await navigator.mediaDevices.getUserMedia({ video: true });
    } catch {
      throw new CameraDeniedError();
    }
    this.video = document.createElement("video");
    this.video.srcObject = this.stream;
    this.video.muted = true;
    await this.video.play();
    this.canvas = document.createElement("canvas");
  }

  async grab(): Promise<CapturedFrame> {
    if (!this.video || !this.canvas) throw new CameraDeniedError();
    const vw = this.video.videoWidth || MAX_FRAME_WIDTH;
    const vh = this.video.videoHeight || 480;
    const scale = Math.min(1, MAX_FRAME_WIDTH / vw);
    const w = Math.round(vw * scale);
    const h = Math.round(vh * scale);
    this.canvas.width = w;
    this.canvas.height = h;
    const ctx = this.canvas.getContext("2d")!;
    ctx.drawImage(this.video, 0, 0, w, h);
    const dataUrl = this.canvas.toDataURL(this.mimeType, 0.85);
    const frameB64 = dataUrl.slice(dataUrl.indexOf(",") + 1);
    const timestampMs = Math.round(this.clock.now());
    const landmarks = await this.landmarks.detect(this.video, timestampMs);
    return { frameB64, landmarks, timestampMs };
  }

  stop(): void {
    this.stream?.getTracks().forEach((t) => t.stop());
    this.stream = null;
    this.video = null;
  }
}
