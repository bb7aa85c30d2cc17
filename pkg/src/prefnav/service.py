"""Local HTTP facade for the demonstration-authoring UI.

Serves scenes (with a coarse occupancy preview for rendering),
validates and stores drawn demonstrations via the tracking replay, and
runs seeded rollouts of stored policy checkpoints for playback. Plain
JSON over localhost; single-user, no auth.
"""

from __future__ import annotations

import datetime
import json
import os
import tempfile
import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from . import evaluation, geom, learn, perception, scenes as builtin_scenes, sim
from .geom import Scene


class DemoStore:
    """Directory-backed demonstration collection with an index.

    Writes are atomic (write-temp-then-rename) and serialized through
    one lock. Only demos that pass validation are marked valid; invalid
    ones are kept for inspection but never exported for training.
    """

    def __init__(self, directory: str):
        self.dir = directory
        os.makedirs(directory, exist_ok=True)
        self._lock = threading.Lock()
        self.index_path = os.path.join(directory, "index.json")
        if not os.path.exists(self.index_path):
            self._write_json(self.index_path, {})

    def _write_json(self, path, payload):
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        with os.fdopen(fd, "w") as f:
            json.dump(payload, f)
        os.replace(tmp, path)

    def index(self) -> dict:
        with open(self.index_path) as f:
            return json.load(f)

    def put(self, demo: sim.Demonstration, valid: bool) -> str:
        demo_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._write_json(os.path.join(self.dir, f"{demo_id}.json"), demo.to_json_dict())
            idx = self.index()
            idx[demo_id] = {
                "id": demo_id,
                "scene_id": demo.scene_id,
                "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
                "valid": bool(valid),
            }
            self._write_json(self.index_path, idx)
        return demo_id

    def get(self, demo_id: str) -> sim.Demonstration:
        path = os.path.join(self.dir, f"{demo_id}.json")
        if not os.path.exists(path):
            raise KeyError(demo_id)
        return sim.Demonstration.load(path)

    def list(self, scene_id: str | None = None) -> list:
        entries = sorted(self.index().values(), key=lambda e: e["id"])
        if scene_id:
            entries = [e for e in entries if e["scene_id"] == scene_id]
        return entries

    def export_valid(self, scene_id: str | None = None) -> list:
        """Validated demonstrations only; the training-side loader."""
        return [self.get(e["id"]) for e in self.list(scene_id) if e["valid"]]


def create_app(data_dir: str) -> FastAPI:
    scenes_dir = os.path.join(data_dir, "scenes")
    policies_dir = os.path.join(data_dir, "policies")
    os.makedirs(scenes_dir, exist_ok=True)
    os.makedirs(policies_dir, exist_ok=True)
    if not any(name.endswith(".json") for name in os.listdir(scenes_dir)):
        for scene in builtin_scenes.scene_set():
            scene.save(os.path.join(scenes_dir, f"{scene.id}.json"))
    store = DemoStore(os.path.join(data_dir, "demos"))
    # the validation replay only needs kinematics; a fixed-seed encoder
    # keeps the returned replays deterministic
    vae = perception.VaeModel(rng=np.random.default_rng(0))
    pipeline = perception.PerceptionPipeline(perception.PerceptionConfig(), vae)
    sim_cfg = sim.SimConfig()

    app = FastAPI(title="prefnav service")
    app.state.store = store

    def load_scene(scene_id: str) -> Scene:
        path = os.path.join(scenes_dir, f"{scene_id}.json")
        if not os.path.exists(path):
            raise HTTPException(status_code=404, detail=f"unknown scene {scene_id}")
        return Scene.load(path)

    @app.get("/scenes")
    def list_scenes():
        out = []
        for name in sorted(os.listdir(scenes_dir)):
            if name.endswith(".json"):
                scene = Scene.load(os.path.join(scenes_dir, name))
                out.append({"id": scene.id, "bounds": list(scene.bounds),
                            "n_polygons": len(scene.polygons), "n_circles": len(scene.circles)})
        return out

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str, preview_cell: float = 0.25):
        scene = load_scene(scene_id)
        occ, origin = geom.occupancy_grid(scene, preview_cell, inflate=0.0)
        payload = scene.to_json_dict()
        payload["occupancy_preview"] = {
            "cell": preview_cell,
            "origin": [float(origin[0]), float(origin[1])],
            "grid": occ.astype(int).tolist(),
        }
        return payload

    @app.post("/demos")
    def post_demo(body: dict):
        try:
            demo = sim.Demonstration.from_json_dict(body)
        except (KeyError, TypeError, ValueError) as e:
            raise HTTPException(status_code=400, detail=f"malformed demonstration: {e}")
        scene = load_scene(demo.scene_id)
        xmin, ymin, xmax, ymax = scene.bounds
        xy = demo.robot.xy
        if np.any(xy[:, 0] < xmin) or np.any(xy[:, 0] > xmax) or \
           np.any(xy[:, 1] < ymin) or np.any(xy[:, 1] > ymax):
            raise HTTPException(status_code=422, detail={
                "valid": False,
                "violations": [{"type": "out_of_bounds", "location": None}]})
        try:
            outcome = sim.track_demonstration(demo, scene, pipeline, sim_cfg)
        except (sim.InvalidDemonstrationError, sim.UntrackableDemonstrationError) as e:
            demo_id = store.put(demo, valid=False)
            kind = "collision" if isinstance(e, sim.InvalidDemonstrationError) else "untrackable"
            return JSONResponse(status_code=422, content={
                "id": demo_id,
                "valid": False,
                "violations": [{"type": kind, "message": str(e),
                                "location": list(e.location) if e.location else None}],
            })
        demo_id = store.put(demo, valid=True)
        frechet = evaluation.deviation_aware_frechet(outcome.replay, demo.robot)
        return {
            "id": demo_id,
            "valid": True,
            "replay": outcome.replay.to_rows(),
            "violations": [],
            "tracking": {
                "max_deviation": outcome.max_deviation,
                "frechet_deviation_aware": frechet.f_at_t_star,
                "t_star": frechet.t_star,
            },
        }

    @app.get("/demos")
    def list_demos(scene: str | None = None):
        return store.list(scene)

    @app.get("/demos/{demo_id}")
    def get_demo(demo_id: str):
        try:
            return store.get(demo_id).to_json_dict()
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown demo {demo_id}")

    @app.get("/policies")
    def list_policies():
        return sorted(name[:-4] for name in os.listdir(policies_dir) if name.endswith(".npz"))

    @app.post("/rollouts")
    def post_rollout(body: dict):
        policy_id = body.get("policy_id")
        scene = load_scene(body.get("scene_id", ""))
        path = os.path.join(policies_dir, f"{policy_id}.npz")
        if not os.path.exists(path):
            raise HTTPException(status_code=404, detail=f"unknown policy {policy_id}")
        bundle, _ = learn.PolicyBundle.load(path)
        policy = learn.GreedyPolicy(bundle.actor)
        seed = int(body.get("seed", 0))
        rng = np.random.default_rng(seed)
        demo_id = body.get("demo_id")
        if demo_id:
            try:
                demo = store.get(demo_id)
            except KeyError:
                raise HTTPException(status_code=404, detail=f"unknown demo {demo_id}")
            init = demo.episode_init(seed)
        else:
            init = sim.sample_episode(scene, rng, sim_cfg)
        result, transitions = sim.run_episode(policy, init, scene, pipeline, sim_cfg)
        return {
            "init": init.to_json_dict(),
            "result": result.to_json_dict(),
            "rewards": [tr.r for tr in transitions],
            "gamma": sim_cfg.gamma,
        }

    return app
