// Client-side face-mesh landmark extraction (478 points). The real provider
// loads MediaPipe tasks-vision from a CDN at runtime; tests and non-camera
// callers plug in their own provider.

export const LANDMARK_COUNT = 478;

export interface LandmarkProvider {
  /** Flat [x0, y0, x1, y1, ...] in [0,1], or null when no face is found. */
  detect(video: HTMLVideoElement, timestampMs: number): Promise<number[] | null>;
}

const WASM_BASE = "https://cdn.jsdelivr.net/npm/@mediapipe/tasks-vision@latest/wasm";
const MODEL_URL =
  "https://storage.googleapis.com/mediapipe-models/face_landmarker/face_landmarker/float16/1/face_landmarker.task";

export async function loadMediapipeProvider(): Promise<LandmarkProvider> {
  const vision = await import(/* @vite-ignore */ "@mediapipe/tasks-vision" as string);
  const fileset = await vision.FilesetResolver.forVisionTasks(WASM_BASE);
  const landmarker = await vision.FaceLandmarker.createFromOptions(fileset, {
    baseOptions: { modelAssetPath: MODEL_URL },
    runningMode: "VIDEO",
    numFaces: 1,
  });
  return {
    async detect(video: HTMLVideoElement, timestampMs: number) {
      const result = landmarker.detectForVideo(video, timestampMs);
      const face = result?.faceLandmarks?.[0];
      if (!face || face.length !== LANDMARK_COUNT) return null;
      const flat: number[] = new Array(LANDMARK_COUNT * 2);
      for (let i = 0; i < LANDMARK_COUNT; i++) {
        flat[2 * i] = face[i].x;
        flat[2 * i + 1] = face[i].y;
      }
      return flat;
    },
  };
}
