"""Asynchronous generation job service over HTTP JSON (/api/v1).

One model set is active per process; jobs run on a bounded worker pool with
serialized job-table mutations, per-iteration progress updates, and
cancellation honored between optimizer iterations.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field, field_validator, model_validator

from .config import OptimizeConfig, ServiceConfig
from .container import ContainerError
from .errors import InputError
from .metrics import ControlErrorAccumulator
from .models import ModelBundle, bundle_digests, load_bundle
from .motion import GROUPS, PartialTrajectory, clip_to_json, recover_global_positions
from .refine import generate_motion

WIRE_GROUPS: dict[str, str] = {
    "root": "root",
    "head": "head",
    "left_hand": "left_arm",
    "right_hand": "right_arm",
    "left_foot": "left_leg",
    "right_foot": "right_leg",
}


class Waypoint(BaseModel):
    frame: int = Field(ge=0)
    position: list[float] = Field(min_length=3, max_length=3)

    @field_validator("position")
    @classmethod
    def finite(cls, v):
        if not np.isfinite(v).all():
            raise ValueError("position must be finite")
        return v


class Control(BaseModel):
    joint_group: Literal["root", "head", "left_hand", "right_hand", "left_foot", "right_foot"]
    waypoints: list[Waypoint]


class TrajectorySpec(BaseModel):
    length: int = Field(ge=1)
    controls: list[Control] = []

    @model_validator(mode="after")
    def check_frames(self):
        for control in self.controls:
            seen = set()
            for wp in control.waypoints:
                if wp.frame >= self.length:
                    raise ValueError(
                        f"controls[{control.joint_group}] frame {wp.frame} out of range "
                        f"for length {self.length}"
                    )
                if wp.frame in seen:
                    raise ValueError(
                        f"controls[{control.joint_group}] duplicate frame {wp.frame}"
                    )
                seen.add(wp.frame)
        groups = [c.joint_group for c in self.controls]
        if len(groups) != len(set(groups)):
            raise ValueError("duplicate joint_group in controls")
        return self


class OptimizeRequest(BaseModel):
    tolerance: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=1000, ge=1)


class GenerationRequest(BaseModel):
    text: str = ""
    trajectory: TrajectorySpec
    seed: int = 0
    num_samples: int = Field(default=1, ge=1, le=32)
    optimize: OptimizeRequest = OptimizeRequest()

    @model_validator(mode="after")
    def at_least_one_modality(self):
        has_any = bool(self.text.strip()) or any(c.waypoints for c in self.trajectory.controls)
        if not has_any:
            raise ValueError("text and trajectory are both empty; provide at least one")
        return self


def trajectory_from_spec(spec: TrajectorySpec) -> PartialTrajectory:
    traj = PartialTrajectory.empty(spec.length)
    for control in spec.controls:
        g = GROUPS.index(WIRE_GROUPS[control.joint_group])
        for wp in control.waypoints:
            traj.waypoints[wp.frame, g] = wp.position
            traj.mask[wp.frame, g] = True
    return traj


@dataclass
class Job:
    id: str
    request: GenerationRequest
    status: str = "pending"  # pending -> running -> done | error | cancelled
    progress: float = 0.0
    trace_tail: dict = field(default_factory=lambda: {"objective": [], "grad_norm": []})
    result: dict | None = None
    error: str | None = None
    cancel_event: threading.Event = field(default_factory=threading.Event)

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "progress": self.progress,
            "trace_tail": dict(self.trace_tail),
            "result": self.result,
            "error": self.error,
        }


class JobManager:
    def __init__(self, bundle: ModelBundle | None, config: ServiceConfig = ServiceConfig()):
        self.bundle = bundle
        self.config = config
        self.jobs: dict[str, Job] = {}
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=config.max_workers)

    def submit(self, request: GenerationRequest) -> str:
        if self.bundle is None:
            raise InputError("no model loaded")
        job = Job(id=uuid.uuid4().hex, request=request)
        with self.lock:
            self.jobs[job.id] = job
        self.executor.submit(self._run, job)
        return job.id

    def poll(self, job_id: str) -> dict:
        with self.lock:
            job = self.jobs.get(job_id)
            if job is None:
                raise KeyError(job_id)
            return job.snapshot()

    def cancel(self, job_id: str) -> dict:
        with self.lock:
            job = self.jobs.get(job_id)
            if job is None:
                raise KeyError(job_id)
            if job.status in ("done", "error", "cancelled"):
                raise InputError(f"job already {job.status}")
            job.cancel_event.set()
            if job.status == "pending":
                job.status = "cancelled"
            return job.snapshot()

    def _run(self, job: Job) -> None:
        with self.lock:
            if job.status == "cancelled":
                return
            job.status = "running"
        bundle = self.bundle
        request = job.request
        traj = trajectory_from_spec(request.trajectory)
        opt = OptimizeConfig(
            tolerance=request.optimize.tolerance,
            max_iterations=request.optimize.max_iterations,
        )
        tail = self.config.trace_tail
        max_iter = opt.max_iterations

        def progress(sample_idx: int, iteration: int, objective: float):
            with self.lock:
                frac = (sample_idx + min(iteration / max_iter, 1.0)) / request.num_samples
                job.progress = min(frac, 1.0)
                obj = job.trace_tail["objective"]
                obj.append(objective)
                del obj[:-tail]

        try:
            if traj.length > bundle.t_max:
                raise InputError(
                    f"trajectory length {traj.length} exceeds the model maximum {bundle.t_max}"
                )
            samples = generate_motion(
                request.text, traj, bundle.codec, bundle.mtt, bundle.stats,
                seed=request.seed, opt_config=opt, num_samples=request.num_samples,
                fps=bundle.fps, progress=progress,
                should_cancel=job.cancel_event.is_set,
            )
            if job.cancel_event.is_set():
                with self.lock:
                    job.status = "cancelled"
                return
            result = self._build_result(samples, traj, bundle)
            with self.lock:
                job.result = result
                job.progress = 1.0
                job.status = "done"
        except Exception as exc:  # surfaced to the client verbatim
            with self.lock:
                if job.cancel_event.is_set():
                    job.status = "cancelled"
                else:
                    job.error = str(exc)
                    job.status = "error"

    def _build_result(self, samples, traj: PartialTrajectory, bundle: ModelBundle) -> dict:
        key_idx = bundle.skeleton.key_joint_indices()
        motions = []
        per_sample = []
        acc = ControlErrorAccumulator()
        for gen in samples:
            positions = recover_global_positions(gen.clip, bundle.layout)
            motions.append(clip_to_json(gen.clip, bundle.layout, positions))
            entry = {"seed_index": gen.seed_index}
            if gen.refine is not None:
                entry["trace"] = gen.refine.trace_json()
            if traj.num_specified() > 0:
                report = ControlErrorAccumulator()
                report.add(positions[:, key_idx, :], traj)
                acc.add(positions[:, key_idx, :], traj)
                entry["control_errors"] = report.report().to_json()
            per_sample.append(entry)
        result = {"motions": motions, "per_sample": per_sample}
        result["control_errors"] = (
            acc.report().to_json() if traj.num_specified() > 0 else None
        )
        return result


def create_app(
    model_dir: str | Path | None = None,
    service_config: ServiceConfig = ServiceConfig(),
    ui_dir: str | Path | None = None,
) -> FastAPI:
    bundle = load_bundle(model_dir) if model_dir else None
    app = FastAPI(title="trajectory-language motion service")
    manager = JobManager(bundle, service_config)
    app.state.manager = manager
    app.state.model_dir = str(model_dir) if model_dir else None

    @app.get("/api/v1/health")
    def health():
        return {"status": "ok", "model_loaded": manager.bundle is not None}

    @app.get("/api/v1/model")
    def model_info():
        if manager.bundle is None:
            raise HTTPException(status_code=409, detail="no model loaded")
        return {
            "config": manager.bundle.config.to_dict(),
            "manifest_digest": bundle_digests(app.state.model_dir),
            "format_version": 1,
        }

    @app.post("/api/v1/model")
    def load_model(body: dict):
        directory = body.get("dir")
        if not directory:
            raise HTTPException(status_code=422, detail="body.dir is required")
        try:
            manager.bundle = load_bundle(directory)
        except ContainerError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        app.state.model_dir = directory
        return {"status": "loaded", "manifest_digest": bundle_digests(directory)}

    @app.post("/api/v1/jobs", status_code=201)
    def submit(request: GenerationRequest):
        try:
            job_id = manager.submit(request)
        except InputError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"id": job_id}

    @app.get("/api/v1/jobs/{job_id}")
    def poll(job_id: str):
        try:
            return JSONResponse(manager.poll(job_id))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")

    @app.delete("/api/v1/jobs/{job_id}")
    def cancel(job_id: str):
        try:
            return JSONResponse(manager.cancel(job_id))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        except InputError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    ui = Path(ui_dir) if ui_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui), html=True), name="ui")

    return app
