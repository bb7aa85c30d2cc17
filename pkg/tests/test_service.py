import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from prefnav import learn, scenes, service, sim
from prefnav.geom import Trajectory


@pytest.fixture()
def client(tmp_path):
    app = service.create_app(str(tmp_path))
    with TestClient(app) as c:
        yield c, tmp_path


def straight_demo(scene_id="tworoom_a"):
    # diagonal inside the left room, clear of the dividing wall
    rows = [[i * 0.4, 0.8 + i * 0.24, 1.0 + i * 0.26] for i in range(11)]
    return {"scene_id": scene_id, "robot": rows, "human": None,
            "meta": {"author": "test", "note": "diagonal"}}


class TestScenes:
    def test_list_and_get(self, client):
        c, _ = client
        listing = c.get("/scenes").json()
        ids = {s["id"] for s in listing}
        assert {"tworoom_a", "tworoom_b"} <= ids
        scene = c.get("/scenes/tworoom_a").json()
        assert scene["bounds"] == [0.0, 0.0, 8.0, 5.0]
        assert scene["polygons"]
        assert scene["occupancy_preview"]["grid"]

    def test_unknown_scene_404(self, client):
        c, _ = client
        assert c.get("/scenes/nope").status_code == 404

    def test_occupancy_preview_matches_point_in_polygon_oracle(self, client):
        from shapely.geometry import Point, Polygon

        c, _ = client
        payload = c.get("/scenes/tworoom_a").json()
        prev = payload["occupancy_preview"]
        cell = prev["cell"]
        ox, oy = prev["origin"]
        grid = np.asarray(prev["grid"])
        polys = [Polygon(p) for p in payload["polygons"]]
        circles = [(c_["c"], c_["r"]) for c_ in payload["circles"]]
        rng = np.random.default_rng(0)
        for _ in range(300):
            r = rng.integers(grid.shape[0])
            col = rng.integers(grid.shape[1])
            center = Point(ox + (col + 0.5) * cell, oy + (r + 0.5) * cell)
            inside = any(p.contains(center) for p in polys) or any(
                center.distance(Point(cc)) <= rr for cc, rr in circles)
            # skip centers within a hair of a boundary
            margin = min([p.exterior.distance(center) for p in polys]
                         + [abs(center.distance(Point(cc)) - rr) for cc, rr in circles])
            if margin < 1e-6:
                continue
            assert bool(grid[r, col]) == inside


class TestDemos:
    def test_valid_demo_round_trip(self, client):
        c, _ = client
        resp = c.post("/demos", json=straight_demo())
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["valid"] is True
        assert body["violations"] == []
        assert body["tracking"]["frechet_deviation_aware"] < 0.1
        replay = Trajectory.from_rows(body["replay"])
        assert replay.arc_length() > 3.0
        listing = c.get("/demos", params={"scene": "tworoom_a"}).json()
        assert any(e["id"] == body["id"] and e["valid"] for e in listing)

    def test_wall_crossing_demo_422_with_location(self, client):
        c, _ = client
        rows = [[i * 0.5, 1.0 + i * 0.8, 1.0] for i in range(8)]
        resp = c.post("/demos", json={"scene_id": "tworoom_a", "robot": rows,
                                      "human": None, "meta": {}})
        assert resp.status_code == 422
        body = resp.json()
        assert body["valid"] is False
        v = body["violations"][0]
        assert v["type"] == "collision"
        assert v["location"] is not None and len(v["location"]) == 2
        # stored but flagged invalid, and never exported for training
        listing = c.get("/demos").json()
        entry = next(e for e in listing if e["id"] == body["id"])
        assert entry["valid"] is False

    def test_malformed_body_400(self, client):
        c, _ = client
        assert c.post("/demos", json={"robot": "nope"}).status_code == 400

    def test_recorded_human_path_stored_and_replayed(self, client):
        c, _ = client
        demo = scenes.demo_catalog()[2]  # walking human on the shared clock
        resp = c.post("/demos", json=demo.to_json_dict())
        assert resp.status_code == 200
        demo_id = resp.json()["id"]
        stored = c.get(f"/demos/{demo_id}").json()
        human = np.asarray(stored["human"])
        assert np.all(np.diff(human[:, 0]) > 0)  # strictly increasing timestamps

    def test_invalid_demos_never_exported(self, client):
        c, tmp_path = client
        c.post("/demos", json=straight_demo())
        rows = [[i * 0.5, 1.0 + i * 0.8, 1.0] for i in range(8)]
        c.post("/demos", json={"scene_id": "tworoom_a", "robot": rows, "human": None, "meta": {}})
        store = service.DemoStore(str(tmp_path / "demos"))
        exported = store.export_valid("tworoom_a")
        assert len(exported) == 1


class TestRollouts:
    @pytest.fixture()
    def with_policy(self, client):
        c, tmp_path = client
        bundle = learn.PolicyBundle(13, learn.TD3Config(hidden=(16, 16)), seed=0)
        bundle.save(tmp_path / "policies" / "test_policy.npz", seed=0,
                    extra={"state_dim": 13, "hidden": [16, 16]})
        return c

    def test_policy_listing(self, with_policy):
        c = with_policy
        assert c.get("/policies").json() == ["test_policy"]

    def test_unknown_policy_404(self, with_policy):
        c = with_policy
        resp = c.post("/rollouts", json={"policy_id": "nope", "scene_id": "tworoom_a", "seed": 1})
        assert resp.status_code == 404

    def test_rollout_deterministic_and_accounted(self, with_policy):
        c = with_policy
        req = {"policy_id": "test_policy", "scene_id": "tworoom_a", "seed": 42}
        r1 = c.post("/rollouts", json=req)
        r2 = c.post("/rollouts", json=req)
        assert r1.status_code == 200
        assert r1.content == r2.content
        body = r1.json()
        assert body["result"]["outcome"] in ("success", "collision", "timeout")
        # client-side accounting: discounted reward sum equals return
        ret = 0.0
        for i, r in enumerate(body["rewards"]):
            ret += body["gamma"] ** i * r
        assert ret == pytest.approx(body["result"]["return"], abs=1e-12)
