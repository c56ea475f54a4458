"""Batch entry points: synthetic data, training, evaluation, beta grid search,
calibration replay, dot-probe analysis, serving, and gradient self-check.

Exit codes: 0 success, 1 usage, 2 data error, 3 internal.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .calibration import CalibrationError, assemble, fine_tune
from .dataset import (DatasetError, generate_synthetic, group_kfold, load_bundles,
                      load_dataset)
from .dotprobe import SessionPlanError, align_gaze, analyze_session
from .estimator import GazeRegressor
from .geometry import GazePoint, ScreenGeometry, Space, cm_to_px, norm_to_px
from .logs import LogFormatError, read_gaze_log, read_trial_log
from .metrics import (GazeSeries, MetricError, beta_grid_search, l2_over_diagonal,
                      mean_l2, rmse2d)
from .model import ConfigError, GazeNetwork, ModelConfig
from .preprocess import Frame, MeanImages
from .selfcheck import TOLERANCE, gradcheck_report
from .weights import WeightFormatError, read_fingerprint

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

DATA_ERRORS = (DatasetError, LogFormatError, WeightFormatError, CalibrationError,
               SessionPlanError, MetricError, ConfigError, FileNotFoundError,
               NotADirectoryError, ValueError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="gazekit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=3)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train per GroupKFold fold")
    p.add_argument("--dataset", required=True)
    p.add_argument("--profile", choices=["tiny", "full"], default="tiny")
    p.add_argument("--loss", choices=["smooth_l1", "euclidean"], default="smooth_l1")
    p.add_argument("--beta", type=float, default=0.8)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate weights: rmse2d / mean L2 / diagonal %%")
    p.add_argument("--weights", required=True, help="container file or directory of fold_<i>.eyth")
    p.add_argument("--dataset", required=True)
    p.add_argument("--profile", choices=["tiny", "full"], default="tiny")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("gridsearch", help="grid search the smooth-L1 beta")
    p.add_argument("--dataset", required=True)
    p.add_argument("--betas", required=True, help="comma-separated, e.g. 0.1,0.5,0.8")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=["tiny", "full"], default="tiny")
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze", help="dot-probe session report from logs")
    p.add_argument("--trials", required=True, help="trial log (JSONL)")
    p.add_argument("--gaze-a", required=True, help="gaze log CSV")
    p.add_argument("--gaze-b", default=None, help="optional second tracker log")
    p.add_argument("--screen", default=None, help="WxH override, e.g. 1920x1080")
    p.add_argument("--out", default=None)

    p = sub.add_parser("gradcheck", help="finite-difference gradient self-check")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--inject-fault", action="store_true",
                   help="flip one layer's gradient sign (must fail; test hook)")

    p = sub.add_parser("calibrate", help="replay a calibration fixture")
    p.add_argument("--fixture", required=True, help="dir with target_<i>.png + targets.csv")
    p.add_argument("--screen", required=True, help="WxH, e.g. 1920x1080")
    p.add_argument("--profile", choices=["tiny", "full"], default="tiny")
    p.add_argument("--weights", default=None)
    p.add_argument("--space", choices=[s.value for s in Space if s != Space.SCREEN_PX],
                   default=None)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--weights", default=None)
    p.add_argument("--profile", choices=["tiny", "full"], default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    return parser


def _parse_screen(text: str) -> ScreenGeometry:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise ValueError(f"bad --screen value {text!r}, expected WxH") from exc
    return ScreenGeometry(w, h)


def _load_records(path: str):
    records = load_dataset(path)
    if not records:
        raise DatasetError(f"no subjects found under {path}")
    return records


def _prepare_subjects(records, config, means):
    """Subject id -> (bundles, normalized targets, screen)."""
    table = {}
    for rec in records:
        bundles, targets = load_bundles(rec, config, means)
        table[rec.subject_id] = (bundles, targets, rec.screen)
    return table


def _gather(table, subject_ids):
    bundles, targets, screens = [], [], []
    for sid in subject_ids:
        b, t, screen = table[sid]
        bundles.extend(b)
        targets.extend(t)
        screens.extend([screen] * len(b))
    return bundles, np.asarray(targets, dtype=np.float32), screens


def cmd_synth(args) -> int:
    root = generate_synthetic(args.out, args.subjects, args.samples, args.seed)
    print(f"wrote {args.subjects} subjects x {args.samples} samples to {root}")
    return EXIT_OK


def cmd_train(args) -> int:
    records = _load_records(args.dataset)
    plan = group_kfold([r.subject_id for r in records], k=args.folds, seed=args.seed)
    config = ModelConfig.for_profile(args.profile, Space.NORMALIZED)
    means = MeanImages.constant(config)
    table = _prepare_subjects(records, config, means)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for fold_i, (train_ids, val_ids) in enumerate(plan):
        if not train_ids:
            raise DatasetError(f"fold {fold_i} has no training subjects (k too large?)")
        xb, yb, _ = _gather(table, train_ids)
        vx, vy, _ = _gather(table, val_ids)
        est = GazeRegressor(profile=args.profile, output_space="normalized",
                            loss=args.loss, beta=args.beta, lr=args.lr,
                            epochs=args.epochs, batch_size=args.batch, seed=args.seed)
        est.fit(xb, yb, eval_set=(vx, vy))
        est.network_.save(out_dir / f"fold_{fold_i}.eyth")
        for epoch, (tl, vl) in enumerate(zip(est.loss_curve_, est.val_loss_curve_)):
            rows.append((fold_i, epoch, tl, vl))
        print(f"fold {fold_i}: train={est.loss_curve_[-1]:.6f} "
              f"val={est.val_loss_curve_[-1]:.6f} ({len(xb)} train samples)")

    with (out_dir / "loss.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "epoch", "train_loss", "val_loss"])
        for row in rows:
            writer.writerow([row[0], row[1], f"{row[2]:.8f}", f"{row[3]:.8f}"])
    print(f"weights and loss.csv written to {out_dir}")
    return EXIT_OK


def _load_network_for(path: Path, profile: str) -> GazeNetwork:
    fingerprint = read_fingerprint(path)
    for space in (Space.NORMALIZED, Space.CAMERA_CM):
        config = ModelConfig.for_profile(profile, space)
        if config.fingerprint() == fingerprint:
            return GazeNetwork.load(path, config)
    raise WeightFormatError(
        f"{path}: fingerprint {fingerprint!r} does not match profile {profile!r}")


def _to_px(pred, space: Space, screen: ScreenGeometry):
    p = GazePoint(float(pred[0]), float(pred[1]), space)
    q = cm_to_px(p, screen) if space == Space.CAMERA_CM else norm_to_px(p, screen)
    return (q.x, q.y)


def cmd_eval(args) -> int:
    records = _load_records(args.dataset)
    plan = group_kfold([r.subject_id for r in records], k=args.folds, seed=args.seed)
    weights = Path(args.weights)

    nets = {}
    if weights.is_dir():
        for fold_i in range(len(plan)):
            nets[fold_i] = _load_network_for(weights / f"fold_{fold_i}.eyth", args.profile)
    else:
        shared = _load_network_for(weights, args.profile)
        nets = {i: shared for i in range(len(plan))}

    config = nets[0].config
    means = MeanImages.constant(config)
    table = _prepare_subjects(records, config, means)

    results = []
    for fold_i, (_, val_ids) in enumerate(plan):
        vb, vt, screens = _gather(table, val_ids)
        if not vb:
            raise DatasetError(f"fold {fold_i} has an empty validation set")
        net = nets[fold_i]
        raw = net.predict_batch(vb)
        space = net.config.output_space
        preds_px = [_to_px(p, space, s) for p, s in zip(raw, screens)]
        gts_px = [(t[0] * s.width_px, t[1] * s.height_px) for t, s in zip(vt, screens)]
        results.append((rmse2d(preds_px, gts_px), mean_l2(preds_px, gts_px),
                        l2_over_diagonal(preds_px, gts_px, screens)))

    header = f"{'fold':>4}  {'rmse2d_px':>12}  {'mean_l2_px':>12}  {'l2_diag_pct':>12}"
    print(header)
    for i, (a, b, c) in enumerate(results):
        print(f"{i:>4}  {a:>12.3f}  {b:>12.3f}  {c:>12.4f}")
    mean = np.mean(results, axis=0)
    print(f"{'mean':>4}  {mean[0]:>12.3f}  {mean[1]:>12.3f}  {mean[2]:>12.4f}")

    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fold", "rmse2d_px", "mean_l2_px", "l2_diag_pct"])
            for i, row in enumerate(results):
                writer.writerow([i, f"{row[0]:.6f}", f"{row[1]:.6f}", f"{row[2]:.6f}"])
            writer.writerow(["mean", f"{mean[0]:.6f}", f"{mean[1]:.6f}", f"{mean[2]:.6f}"])
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    records = _load_records(args.dataset)
    plan = group_kfold([r.subject_id for r in records], k=args.folds, seed=args.seed)
    train_ids, val_ids = plan.folds[0]
    if not train_ids:
        raise DatasetError("fold 0 has no training subjects (k too large?)")
    config = ModelConfig.for_profile(args.profile, Space.NORMALIZED)
    means = MeanImages.constant(config)
    table = _prepare_subjects(records, config, means)
    xb, yb, _ = _gather(table, train_ids)
    vx, vy, _ = _gather(table, val_ids)

    betas = [float(v) for v in args.betas.split(",") if v.strip()]

    def train_eval(beta, lr):
        est = GazeRegressor(profile=args.profile, output_space="normalized",
                            loss="smooth_l1", beta=beta, lr=lr, epochs=args.epochs,
                            batch_size=args.batch, seed=args.seed)
        est.fit(xb, yb, eval_set=(vx, vy))
        return est.val_loss_curve_

    result = beta_grid_search(train_eval, betas, args.lr)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "curves.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta", "epoch", "val_loss"])
        for beta in betas:
            if beta not in result.curves:
                continue
            for epoch, v in enumerate(result.curves[beta]):
                writer.writerow([beta, epoch, f"{v:.8f}"])
    (out / "result.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    print(f"best beta: {result.best_beta}")
    if result.excluded:
        print(f"excluded (non-finite): {result.excluded}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    records = read_trial_log(args.trials)
    if not records:
        raise LogFormatError("trial log is empty")
    if args.screen:
        screen = _parse_screen(args.screen)
    elif records[0].screen:
        screen = ScreenGeometry(*records[0].screen)
    else:
        raise ValueError("trial log carries no screen size; pass --screen WxH")

    t, x, y, valid, tag = read_gaze_log(args.gaze_a)
    series_a = align_gaze(records, t, x, y, valid, screen, source=tag or "a")
    series_b = None
    if args.gaze_b:
        t, x, y, valid, tag = read_gaze_log(args.gaze_b)
        series_b = align_gaze(records, t, x, y, valid, screen, source=tag or "b")

    report = analyze_session(series_a, series_b, records)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    worst, report, elapsed = gradcheck_report(eps=args.eps, seed=args.seed,
                                              inject_fault=args.inject_fault)
    for name in sorted(report):
        print(f"{name:36s} {report[name]:.3e}")
    status = "PASS" if worst < TOLERANCE else "FAIL"
    print(f"max relative error: {worst:.3e} (tolerance {TOLERANCE}) "
          f"[{status}] in {elapsed:.1f}s")
    return EXIT_OK if worst < TOLERANCE else EXIT_INTERNAL


def cmd_calibrate(args) -> int:
    fixture = Path(args.fixture)
    targets_csv = fixture / "targets.csv"
    if not targets_csv.exists():
        raise CalibrationError(f"missing {targets_csv}")
    screen = _parse_screen(args.screen)
    space = Space(args.space) if args.space else None
    config = ModelConfig.for_profile(args.profile, space)
    means = MeanImages.constant(config)
    if args.weights:
        net = GazeNetwork.load(Path(args.weights), config)
    else:
        net = GazeNetwork(config, seed=args.seed)

    from PIL import Image

    from .dataset import synthetic_landmarks

    pairs = []
    with targets_csv.open(newline="") as fh:
        for row in csv.DictReader(fh):
            img = Image.open(fixture / f"target_{row['index']}.png").convert("RGB")
            rgb = np.asarray(img, dtype=np.float32).transpose(2, 0, 1)
            frame = Frame(width=img.width, height=img.height, rgb=rgb,
                          landmarks=synthetic_landmarks(rgb))
            pairs.append((frame, (float(row["x_px"]), float(row["y_px"]))))

    samples = assemble(pairs, screen, config.output_space, means, config)
    _, report = fine_tune(net, samples, screen, lr=args.lr, epochs=args.epochs)
    text = json.dumps(report.to_dict(), indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import ServerConfig, run_server

    config = ServerConfig.from_sources(args.config)
    if args.weights:
        config.weights = args.weights
    if args.profile:
        config.profile = args.profile
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    if not config.weights:
        raise ValueError("no weights configured (use --weights, the config file, "
                         "or EYETHEIA_WEIGHTS)")
    if not Path(config.weights).exists():
        raise FileNotFoundError(f"weights file {config.weights} does not exist")
    run_server(config)
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "gridsearch": cmd_gridsearch,
    "analyze": cmd_analyze,
    "gradcheck": cmd_gradcheck,
    "calibrate": cmd_calibrate,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
