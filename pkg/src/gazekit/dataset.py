"""Subject-wise dataset ingestion, per-subject target normalization,
subject-disjoint folds, and a synthetic desk-scale dataset generator.

Layout on disk: ``root/pXX/annotations.csv`` (frame_path,x_px,y_px),
``root/pXX/screen.txt`` (``W H``), ``root/pXX/frames/*.png``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import ScreenGeometry
from .preprocess import LANDMARK_COUNT, Frame

ANNOTATIONS = "annotations.csv"
SCREEN_FILE = "screen.txt"
FRAMES_DIR = "frames"

# Synthetic frame layout: the face is a bright square on a dark noisy
# background, each eye box holds a blob whose position encodes the gaze
# target, so a small network can actually learn the mapping.
SYNTH_FRAME_W = 160
SYNTH_FRAME_H = 120
SYNTH_FACE_SIZE = 80
_EYE_REL = {  # eye boxes relative to the face rect
    "left": (0.15, 0.25, 0.40, 0.50),
    "right": (0.60, 0.25, 0.85, 0.50),
}
_BLOB_MARGIN = 0.2  # blob center stays in the inner 60% of the eye box
_FACE_LEVEL = 100
_EYE_LEVEL = 140
_BLOB_LEVEL = 255
_BG_MAX = 40


class DatasetError(ValueError):
    pass


@dataclass
class Sample:
    frame_path: Path
    gaze_px: tuple[float, float]


@dataclass
class SubjectRecord:
    subject_id: str
    screen: ScreenGeometry
    samples: list[Sample]

    def load_frame(self, index: int, landmark_provider=None) -> Frame:
        provider = landmark_provider or synthetic_landmarks
        path = self.samples[index].frame_path
        try:
            img = Image.open(path).convert("RGB")
        except OSError as exc:
            raise DatasetError(f"{self.subject_id}: unreadable frame {path}: {exc}") from exc
        rgb = np.asarray(img, dtype=np.float32).transpose(2, 0, 1)
        lm = provider(rgb) if provider is not None else None
        return Frame(width=img.width, height=img.height, rgb=rgb, landmarks=lm)


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]  # (train_ids, val_ids) per fold

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def load_dataset(root: str | Path) -> list[SubjectRecord]:
    root = Path(root)
    records = []
    if not root.exists():
        return records
    for subject_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        sid = subject_dir.name
        ann = subject_dir / ANNOTATIONS
        screen_file = subject_dir / SCREEN_FILE
        if not ann.exists():
            raise DatasetError(f"{sid}: missing {ANNOTATIONS}")
        if not screen_file.exists():
            raise DatasetError(f"{sid}: missing {SCREEN_FILE}")
        try:
            w, h = (int(v) for v in screen_file.read_text().split())
            screen = ScreenGeometry(w, h)
        except ValueError as exc:
            raise DatasetError(f"{sid}: bad {SCREEN_FILE}: {exc}") from exc

        samples = []
        with ann.open(newline="") as fh:
            reader = csv.DictReader(fh)
            for row_no, row in enumerate(reader, start=2):  # header is line 1
                try:
                    x = float(row["x_px"])
                    y = float(row["y_px"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise DatasetError(f"{sid}: row {row_no}: bad annotation: {exc}") from exc
                if not (0 <= x <= screen.width_px and 0 <= y <= screen.height_px):
                    raise DatasetError(
                        f"{sid}: row {row_no}: gaze target ({x}, {y}) outside "
                        f"{screen.width_px}x{screen.height_px} screen")
                frame_path = subject_dir / row["frame_path"]
                if not frame_path.exists():
                    raise DatasetError(f"{sid}: row {row_no}: missing frame {frame_path}")
                samples.append(Sample(frame_path=frame_path, gaze_px=(x, y)))
        records.append(SubjectRecord(subject_id=sid, screen=screen, samples=samples))
    return records


def normalize_targets(record: SubjectRecord) -> np.ndarray:
    """Per-subject normalization to [0,1]^2 (divide by the subject screen)."""
    out = np.array([[s.gaze_px[0] / record.screen.width_px,
                     s.gaze_px[1] / record.screen.height_px]
                    for s in record.samples], dtype=np.float64)
    return out


def load_bundles(record: SubjectRecord, config, means, landmark_provider=None):
    """Preprocess every sample of a subject; returns (bundles, normalized targets)."""
    from .preprocess import make_bundle

    bundles = []
    for i in range(len(record.samples)):
        frame = record.load_frame(i, landmark_provider)
        bundles.append(make_bundle(frame, means, config))
    return bundles, normalize_targets(record)


def group_kfold(subject_ids, k: int = 5, seed: int = 0) -> FoldPlan:
    """Subject-disjoint folds: shuffle by seed, deal round-robin."""
    ids = list(subject_ids)
    if k > len(ids):
        raise ValueError(f"k={k} exceeds the {len(ids)} available subjects")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    val_sets: list[list[str]] = [[] for _ in range(k)]
    for i, sid in enumerate(order):
        val_sets[i % k].append(sid)
    folds = []
    for val in val_sets:
        train = tuple(sid for sid in ids if sid not in set(val))
        folds.append((train, tuple(val)))
    return FoldPlan(folds=tuple(folds))


# ---------------------------------------------------------------------------
# synthetic data

def _eye_boxes(face_rect):
    """Eye boxes (x0, y0, x1, y1) from a face rect using the fixed layout."""
    fx0, fy0, fx1, fy1 = face_rect
    fw, fh = fx1 - fx0, fy1 - fy0
    boxes = {}
    for side, (rx0, ry0, rx1, ry1) in _EYE_REL.items():
        boxes[side] = (fx0 + rx0 * fw, fy0 + ry0 * fh, fx0 + rx1 * fw, fy0 + ry1 * fh)
    return boxes


def _rect_perimeter_points(rect, count: int) -> np.ndarray:
    """`count` points on a rect boundary; the four corners always included
    so the convex hull recovers the rect exactly."""
    x0, y0, x1, y1 = rect
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)
    extra = count - 4
    pts = [corners]
    if extra > 0:
        w, h = x1 - x0, y1 - y0
        per = 2 * (w + h)
        ts = (np.arange(extra) + 0.5) / extra * per
        ex = np.empty((extra, 2))
        for i, t in enumerate(ts):
            if t < w:
                ex[i] = (x0 + t, y0)
            elif t < w + h:
                ex[i] = (x1, y0 + (t - w))
            elif t < 2 * w + h:
                ex[i] = (x1 - (t - w - h), y1)
            else:
                ex[i] = (x0, y1 - (t - 2 * w - h))
        pts.append(ex)
    return np.concatenate(pts)[:count]


def _layout_landmarks(face_rect, frame_w: int, frame_h: int) -> np.ndarray:
    """Deterministic 478-point mesh for a synthetic face rect (normalized)."""
    from .preprocess import FACE_OVAL_INDICES, LEFT_EYE_INDICES, RIGHT_EYE_INDICES

    eyes = _eye_boxes(face_rect)
    lm = np.zeros((LANDMARK_COUNT, 2), dtype=np.float64)
    used = np.zeros(LANDMARK_COUNT, dtype=bool)
    for indices, rect in ((LEFT_EYE_INDICES, eyes["left"]),
                          (RIGHT_EYE_INDICES, eyes["right"]),
                          (FACE_OVAL_INDICES, face_rect)):
        pts = _rect_perimeter_points(rect, len(indices))
        for idx, p in zip(indices, pts):
            lm[idx] = p
            used[idx] = True
    # remaining indices: hash-spread inside the inner face region
    fx0, fy0, fx1, fy1 = face_rect
    fw, fh = fx1 - fx0, fy1 - fy0
    for i in np.flatnonzero(~used):
        u = (i * 37 % 101) / 101.0
        v = (i * 59 % 103) / 103.0
        lm[i] = (fx0 + (0.2 + 0.6 * u) * fw, fy0 + (0.2 + 0.6 * v) * fh)
    lm[:, 0] /= frame_w
    lm[:, 1] /= frame_h
    return lm.astype(np.float32)


def detect_synthetic_face(rgb: np.ndarray):
    """Recover the synthetic face rect by thresholding; None if absent."""
    mask = rgb[0] >= (_FACE_LEVEL + _BG_MAX) / 2
    if not mask.any():
        return None
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return (float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1))


def synthetic_landmarks(rgb: np.ndarray) -> np.ndarray | None:
    """Landmark provider for generator output (threshold + fixed layout)."""
    rect = detect_synthetic_face(rgb)
    if rect is None:
        return None
    h, w = rgb.shape[1], rgb.shape[2]
    return _layout_landmarks(rect, w, h)


def render_synthetic_frame(face_xy: tuple[int, int], gaze_norm: tuple[float, float],
                           rng: np.random.Generator,
                           frame_w: int = SYNTH_FRAME_W,
                           frame_h: int = SYNTH_FRAME_H) -> np.ndarray:
    """Draw one synthetic frame; returns (3, H, W) f32 in [0, 255]."""
    base = rng.integers(0, _BG_MAX, size=(frame_h, frame_w)).astype(np.float32)
    fx0, fy0 = face_xy
    fx1, fy1 = fx0 + SYNTH_FACE_SIZE, fy0 + SYNTH_FACE_SIZE
    base[fy0:fy1, fx0:fx1] = _FACE_LEVEL
    for side, box in _eye_boxes((fx0, fy0, fx1, fy1)).items():
        ex0, ey0, ex1, ey1 = (int(round(v)) for v in box)
        base[ey0:ey1, ex0:ex1] = _EYE_LEVEL
        bw, bh = ex1 - ex0, ey1 - ey0
        bx = ex0 + (_BLOB_MARGIN + (1 - 2 * _BLOB_MARGIN) * gaze_norm[0]) * bw
        by = ey0 + (_BLOB_MARGIN + (1 - 2 * _BLOB_MARGIN) * gaze_norm[1]) * bh
        bx, by = int(round(bx)), int(round(by))
        base[max(0, by - 2):by + 3, max(0, bx - 2):bx + 3] = _BLOB_LEVEL
    return np.repeat(base[None], 3, axis=0)


_SCREEN_CYCLE = ((1920, 1080), (1280, 800), (1600, 900), (1440, 900), (1366, 768))


def generate_synthetic(root: str | Path, n_subjects: int, samples_per: int,
                       seed: int = 0) -> Path:
    """Write a synthetic dataset; deterministic for a given seed."""
    if n_subjects < 1 or samples_per < 1:
        raise ValueError("need at least one subject and one sample")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for s in range(n_subjects):
        sid = f"p{s:02d}"
        sdir = root / sid
        (sdir / FRAMES_DIR).mkdir(parents=True, exist_ok=True)
        w, h = _SCREEN_CYCLE[s % len(_SCREEN_CYCLE)]
        (sdir / SCREEN_FILE).write_text(f"{w} {h}\n")
        rows = []
        for i in range(samples_per):
            gaze_norm = rng.uniform(0.02, 0.98, size=2)
            fx0 = int(rng.integers(20, 61))
            fy0 = int(rng.integers(10, 31))
            rgb = render_synthetic_frame((fx0, fy0), tuple(gaze_norm), rng)
            name = f"{FRAMES_DIR}/f{i:03d}.png"
            img = Image.fromarray(rgb.transpose(1, 2, 0).astype(np.uint8), mode="RGB")
            img.save(sdir / name)
            rows.append((name, gaze_norm[0] * w, gaze_norm[1] * h))
        with (sdir / ANNOTATIONS).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame_path", "x_px", "y_px"])
            for name, x, y in rows:
                writer.writerow([name, f"{x:.2f}", f"{y:.2f}"])
    return root
