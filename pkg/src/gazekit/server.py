"""Real-time REST service: session lifecycle, the calibration endpoint, and
the per-frame prediction endpoint.

Base weights are shared read-only; every session owns a private model copy
and a smoothing state. Calibration takes exclusive access to its session;
prediction requests for a calibrating session are refused with a conflict.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .calibration import CalibrationAborted, CalibrationError, assemble, fine_tune
from .geometry import ScreenGeometry, Space, to_screen_px
from .model import GazeNetwork, ModelConfig
from .preprocess import (DegenerateBBoxError, FaceNotFoundError, MeanImages,
                         frame_from_b64, make_bundle)
from .smoothing import OneEuroFilter

SCHEMA_VERSION = 1

ENV_WEIGHTS = "EYETHEIA_WEIGHTS"
ENV_PORT = "EYETHEIA_PORT"
ENV_PROFILE = "EYETHEIA_PROFILE"


@dataclass
class ServerConfig:
    weights: Optional[str] = None
    profile: str = "tiny"
    output_space: Optional[str] = None  # profile default when None
    host: str = "127.0.0.1"
    port: int = 8321
    oneeuro_enabled: bool = True
    oneeuro_min_cutoff: float = 1.0
    oneeuro_beta: float = 0.007
    oneeuro_d_cutoff: float = 1.0
    session_timeout_s: float = 1800.0
    calibration_epochs: int = 100
    calibration_lr: float = 1e-4
    calibration_timeout_s: float = 120.0
    mean_value: float = 0.5

    @classmethod
    def from_sources(cls, config_file: str | Path | None = None,
                     env: Optional[dict] = None) -> "ServerConfig":
        """File values first, then EYETHEIA_* environment overrides."""
        cfg = cls()
        if config_file:
            data = json.loads(Path(config_file).read_text())
            one = data.pop("oneeuro", {})
            for key, value in data.items():
                if hasattr(cfg, key):
                    setattr(cfg, key, value)
            for key, value in one.items():
                attr = f"oneeuro_{key}"
                if hasattr(cfg, attr):
                    setattr(cfg, attr, value)
        env = os.environ if env is None else env
        if env.get(ENV_WEIGHTS):
            cfg.weights = env[ENV_WEIGHTS]
        if env.get(ENV_PORT):
            cfg.port = int(env[ENV_PORT])
        if env.get(ENV_PROFILE):
            cfg.profile = env[ENV_PROFILE]
        return cfg


class CreateSessionRequest(BaseModel):
    screen_w: int = Field(gt=0)
    screen_h: int = Field(gt=0)
    config: dict = Field(default_factory=dict)


class CalibrationSampleIn(BaseModel):
    frame_b64: str
    landmarks: Optional[list[float]] = None
    target_px: tuple[float, float]


class CalibrateRequest(BaseModel):
    samples: list[CalibrationSampleIn]


class PredictRequest(BaseModel):
    frame_b64: str
    landmarks: Optional[list[float]] = None
    timestamp_ms: int = 0


@dataclass
class Session:
    session_id: str
    screen: ScreenGeometry
    network: GazeNetwork
    smoother: OneEuroFilter
    smoothing_enabled: bool
    status: str = "ready"  # ready | calibrating
    created: float = field(default_factory=time.time)
    last_used: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _decode_frame(frame_b64: str, landmarks):
    try:
        return frame_from_b64(frame_b64, landmarks)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"bad frame payload: {exc}") from exc


def create_app(config: ServerConfig | None = None,
               network: GazeNetwork | None = None,
               means: MeanImages | None = None) -> FastAPI:
    config = config or ServerConfig()
    if network is None:
        if not config.weights:
            raise ValueError("no base weights: set config.weights or EYETHEIA_WEIGHTS")
        space = Space(config.output_space) if config.output_space else None
        model_config = ModelConfig.for_profile(config.profile, space)
        network = GazeNetwork.load(Path(config.weights), model_config)
    means = means or MeanImages.constant(network.config, config.mean_value)
    means.validate(network.config)

    app = FastAPI(title="gazekit", version="0.1.0")
    app.state.config = config
    app.state.base_network = network
    app.state.means = means
    app.state.sessions: dict[str, Session] = {}
    app.state.sessions_lock = threading.Lock()
    app.state.started = time.time()

    def get_session(session_id: str) -> Session:
        now = time.time()
        with app.state.sessions_lock:
            expired = [sid for sid, s in app.state.sessions.items()
                       if now - s.last_used > config.session_timeout_s]
            for sid in expired:
                del app.state.sessions[sid]
            session = app.state.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown or expired session")
        session.last_used = now
        return session

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "profile": network.config.profile,
            "output_space": network.config.output_space.value,
            "uptime_s": time.time() - app.state.started,
            "schema_version": SCHEMA_VERSION,
        }

    @app.post("/session")
    def create_session(req: CreateSessionRequest):
        overrides = req.config.get("oneeuro", {})
        smoother = OneEuroFilter(
            min_cutoff=overrides.get("min_cutoff", config.oneeuro_min_cutoff),
            beta=overrides.get("beta", config.oneeuro_beta),
            d_cutoff=overrides.get("d_cutoff", config.oneeuro_d_cutoff))
        session = Session(
            session_id=uuid.uuid4().hex,
            screen=ScreenGeometry(req.screen_w, req.screen_h),
            network=app.state.base_network.clone(),
            smoother=smoother,
            smoothing_enabled=overrides.get("enabled", config.oneeuro_enabled))
        with app.state.sessions_lock:
            app.state.sessions[session.session_id] = session
        return {"session_id": session.session_id, "schema_version": SCHEMA_VERSION}

    @app.post("/session/{session_id}/calibrate")
    def calibrate(session_id: str, req: CalibrateRequest):
        session = get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="session busy")
        try:
            if session.status != "ready":
                raise HTTPException(status_code=409, detail="session is calibrating")
            session.status = "calibrating"
            try:
                pairs = []
                for s in req.samples:
                    frame = _decode_frame(s.frame_b64, s.landmarks)
                    pairs.append((frame, s.target_px))
                samples = assemble(pairs, session.screen,
                                   session.network.config.output_space,
                                   app.state.means, session.network.config)
                _, report = fine_tune(session.network, samples, session.screen,
                                      lr=config.calibration_lr,
                                      epochs=config.calibration_epochs,
                                      max_seconds=config.calibration_timeout_s)
            except CalibrationAborted as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            except CalibrationError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            finally:
                session.status = "ready"
        finally:
            session.lock.release()
        out = report.to_dict()
        out["schema_version"] = SCHEMA_VERSION
        return out

    @app.post("/session/{session_id}/predict")
    def predict(session_id: str, req: PredictRequest):
        session = get_session(session_id)
        if session.status != "ready":
            raise HTTPException(status_code=409, detail="session is calibrating")
        frame = _decode_frame(req.frame_b64, req.landmarks)
        base = {"valid": False, "face_detected": False, "raw": None, "smoothed": None,
                "space_chain": [], "schema_version": SCHEMA_VERSION}
        if frame.landmarks is None:
            return base
        base["face_detected"] = True
        with session.lock:
            if session.status != "ready":
                raise HTTPException(status_code=409, detail="session is calibrating")
            try:
                bundle = make_bundle(frame, app.state.means, session.network.config)
            except (FaceNotFoundError, DegenerateBBoxError):
                base["face_detected"] = False
                return base
            model_point = session.network.predict(bundle, timestamp_ms=req.timestamp_ms)
            px = to_screen_px(model_point, session.screen)
            smoothed = px
            if session.smoothing_enabled:
                res = session.smoother.filter(req.timestamp_ms, px)
                if res is not None:
                    smoothed = res
        base.update({
            "valid": True,
            "raw": {"x_px": px.x, "y_px": px.y},
            "smoothed": {"x_px": smoothed.x, "y_px": smoothed.y},
            "space_chain": [
                {"space": model_point.space.value, "x": model_point.x, "y": model_point.y},
                {"space": px.space.value, "x": px.x, "y": px.y},
            ],
        })
        return base

    return app


def run_server(config: ServerConfig, network: GazeNetwork | None = None,
               means: MeanImages | None = None):
    import uvicorn

    app = create_app(config, network=network, means=means)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
