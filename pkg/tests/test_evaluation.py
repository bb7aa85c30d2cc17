import json
import math

import numpy as np
import pytest

from prefnav import evaluation, geom, perception, sim
from prefnav.evaluation import (EvalScenario, deviation_aware_frechet, deviation_point,
                                discrete_frechet, evaluate_controller, partial_frechet_curve)
from prefnav.geom import Pose2, Scene, Trajectory


def brute_force_frechet(P, Q):
    """Exhaustive search over all monotone couplings (with pruning)."""
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    n, m = len(P), len(Q)
    dist = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=2)
    best = [math.inf]

    def walk(i, j, cur):
        cur = max(cur, dist[i, j])
        if cur >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = cur
            return
        if i < n - 1:
            walk(i + 1, j, cur)
        if j < m - 1:
            walk(i, j + 1, cur)
        if i < n - 1 and j < m - 1:
            walk(i + 1, j + 1, cur)

    walk(0, 0, 0.0)
    return best[0]


def random_polyline(rng, max_pts=8):
    n = int(rng.integers(2, max_pts + 1))
    return np.cumsum(rng.normal(0, 1, (n, 2)), axis=0)


def deviating_pair(rng, t0, n_base=60):
    """A follows B up to fraction t0 of A's own arc length, then departs
    on a straight ray; both returned as point arrays."""
    kind = rng.integers(2)
    length = rng.uniform(4.0, 9.0)
    if kind == 0:
        s = np.linspace(0, length, n_base)
        base = np.stack([s, np.zeros_like(s)], axis=1)
    else:
        radius = rng.uniform(3.0, 8.0)
        ang = np.linspace(0, length / radius, n_base)
        base = np.stack([radius * np.sin(ang), radius * (1 - np.cos(ang))], axis=1)
    rot = rng.uniform(-math.pi, math.pi)
    R = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])
    base = base @ R.T + rng.uniform(-3, 3, 2)
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(base, axis=0), axis=1))])
    total_a = cum[-1] / max(t0, 1e-6) if t0 < 1.0 else cum[-1]
    shared = cum[-1] * min(1.0, t0 * total_a / cum[-1])
    prefix = geom.resample_polyline(base, 200)
    pcum = np.linspace(0, cum[-1], 200)
    keep = prefix[pcum <= t0 * total_a + 1e-9]
    tangent = keep[-1] - keep[-2]
    tangent /= np.linalg.norm(tangent)
    dep_ang = rng.uniform(math.radians(45), math.radians(120)) * rng.choice([-1, 1])
    Rd = np.array([[math.cos(dep_ang), -math.sin(dep_ang)], [math.sin(dep_ang), math.cos(dep_ang)]])
    direction = Rd @ tangent
    tail_len = (1.0 - t0) * total_a
    tail = keep[-1] + np.outer(np.linspace(0, tail_len, 40)[1:], direction)
    A = np.vstack([keep, tail])
    return A, base


class TestDiscreteFrechet:
    def test_identity(self):
        A = np.array([[0, 0], [1, 1], [2, 0.5]])
        assert discrete_frechet(A, A) == 0.0

    def test_parallel_offset(self):
        A = np.array([[0, 0], [1, 0]])
        B = np.array([[0, 1], [1, 1]])
        assert discrete_frechet(A, B) == pytest.approx(1.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(80):
            A, B = random_polyline(rng), random_polyline(rng)
            assert discrete_frechet(A, B) == pytest.approx(brute_force_frechet(A, B), abs=1e-12)

    def test_metric_properties(self):
        rng = np.random.default_rng(1)
        for _ in range(40):
            A, B, C = (random_polyline(rng, 6) for _ in range(3))
            ab, ba = discrete_frechet(A, B), discrete_frechet(B, A)
            assert ab == pytest.approx(ba, abs=1e-12)
            assert ab >= 0.0
            assert discrete_frechet(A, C) <= ab + discrete_frechet(B, C) + 1e-9

    def test_zero_iff_coincide(self):
        rng = np.random.default_rng(2)
        A = random_polyline(rng, 6)
        assert discrete_frechet(A, A) == 0.0
        B = A + [0.0, 1e-3]
        assert discrete_frechet(A, B) > 0.0


class TestPartialCurve:
    def test_identical_curves_flat_zero(self):
        A = np.cumsum(np.random.default_rng(3).normal(0, 1, (10, 2)), axis=0)
        curve = partial_frechet_curve(A, A)
        assert np.allclose(curve[:, 1], 0.0)

    def test_nondecreasing_and_final_equals_full(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            A, B = random_polyline(rng, 12), random_polyline(rng, 12)
            curve = partial_frechet_curve(A, B)
            assert np.all(np.diff(curve[:, 1]) >= -1e-12)
            assert curve[-1, 1] == pytest.approx(discrete_frechet(A, B), abs=1e-12)
            assert np.all(curve[:, 1] <= curve[-1, 1] + 1e-12)

    def test_half_follow_pair(self):
        B = np.stack([np.linspace(0, 8, 80), np.zeros(80)], axis=1)
        A = np.vstack([
            np.stack([np.linspace(0, 4, 40), np.zeros(40)], axis=1),
            np.stack([np.full(39, 4.0), np.linspace(0.1, 4, 39)], axis=1),
        ])
        curve = partial_frechet_curve(A, B)
        early = curve[curve[:, 0] <= 0.5]
        late = curve[curve[:, 0] > 0.75]
        assert np.all(early[:, 1] < 0.15)
        assert np.all(late[:, 1] > 0.5)


class TestDeviationPoint:
    def test_flat_zero_returns_one(self):
        curve = np.stack([np.linspace(0, 1, 50), np.zeros(50)], axis=1)
        assert deviation_point(curve) == 1.0

    def test_onset_recovered(self):
        t = np.linspace(0, 1, 101)
        f = np.where(t <= 0.7, 0.0, (t - 0.7) / 0.3 * 2.5)
        curve = np.stack([t, f], axis=1)
        assert deviation_point(curve) == pytest.approx(0.70, abs=0.05)

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        t = np.linspace(0, 1, 80)
        f = np.maximum.accumulate(rng.random(80))
        curve = np.stack([t, f], axis=1)
        scaled = np.stack([t, 10.0 * f], axis=1)
        assert deviation_point(curve) == deviation_point(scaled)

    def test_constructed_pairs(self):
        rng = np.random.default_rng(6)
        for t0 in (0.3, 0.5, 0.7, 0.9):
            hits = 0
            for _ in range(10):
                A, B = deviating_pair(rng, t0)
                report = deviation_aware_frechet(A, B, endpoint_mode="forward")
                if abs(report.t_star - t0) <= 0.05:
                    hits += 1
            assert hits >= 9


class TestDeviationAwareFrechet:
    def test_identical(self):
        A = np.stack([np.linspace(0, 5, 60), np.sin(np.linspace(0, 3, 60))], axis=1)
        report = deviation_aware_frechet(A, A)
        assert report.f_at_t_star == pytest.approx(0.0, abs=1e-12)
        assert report.t_star == 1.0

    def test_constant_offset(self):
        x = np.linspace(0, 6, 80)
        A = np.stack([x, np.zeros_like(x)], axis=1)
        B = np.stack([x, np.full_like(x, 0.4)], axis=1)
        report = deviation_aware_frechet(A, B)
        assert report.f_at_t_star == pytest.approx(0.4, abs=0.02)

    def test_auto_selects_reversed_for_shared_goal(self):
        # different starts, same goal
        B = np.stack([np.linspace(0, 5, 50), np.zeros(50)], axis=1)
        A = np.vstack([[0.0, 3.0], [2.5, 1.0], [5.0, 0.0]])
        report = deviation_aware_frechet(A, B, endpoint_mode="auto")
        assert report.reversed

    def test_reversal_consistency(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            A = np.cumsum(rng.normal(0, 1, (15, 2)), axis=0)
            B = np.cumsum(rng.normal(0, 1, (12, 2)), axis=0)
            r1 = deviation_aware_frechet(A, B, endpoint_mode="reversed")
            r2 = deviation_aware_frechet(A[::-1], B[::-1], endpoint_mode="forward")
            assert r1.f_full == pytest.approx(r2.f_full, abs=1e-12)
            assert r1.t_star == pytest.approx(r2.t_star, abs=1e-12)
            assert r1.f_at_t_star == pytest.approx(r2.f_at_t_star, abs=1e-12)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            deviation_aware_frechet(np.array([[0.0, 0.0]]), np.array([[0, 0], [1, 1.0]]))


def goal_seeker(state):
    b = state.goal.bearing
    v = 0.5 * max(math.cos(b), 0.0)
    return sim.Action(v, float(np.clip(2.5 * b, -math.pi, math.pi)))


@pytest.fixture(scope="module")
def pipeline():
    vae = perception.VaeModel(rng=np.random.default_rng(0))
    return perception.PerceptionPipeline(perception.PerceptionConfig(), vae)


@pytest.fixture(scope="module")
def report(pipeline):
    scene = Scene("empty", (0, 0, 8, 8))
    scenarios = [
        EvalScenario("absent", scene, mode_weights={sim.HumanMode.ABSENT: 1.0}),
        EvalScenario("static", scene, mode_weights={sim.HumanMode.STATIC: 1.0}),
    ]
    return evaluate_controller(goal_seeker, pipeline, scenarios, n=12, base_seed=3)


class TestEvaluateController:
    def test_rates_partition(self, report):
        for s in report.scenarios:
            assert s.success_rate + s.collision_rate + s.timeout_rate == pytest.approx(1.0, abs=1e-12)

    def test_goal_seeker_succeeds_in_empty_room(self, report):
        absent = report.scenarios[0]
        assert absent.success_rate == 1.0

    def test_deterministic_reports(self, pipeline, tmp_path):
        scene = Scene("empty", (0, 0, 8, 8))
        scenarios = [EvalScenario("absent", scene, mode_weights={sim.HumanMode.ABSENT: 1.0})]
        r1 = evaluate_controller(goal_seeker, pipeline, scenarios, n=6, base_seed=9)
        r2 = evaluate_controller(goal_seeker, pipeline, scenarios, n=6, base_seed=9)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        r1.save(p1)
        r2.save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_demo_scenario_produces_frechet(self, pipeline):
        from prefnav import scenes
        demo = scenes.demo_catalog()[1]
        scene = scenes.scene_by_id(demo.scene_id)
        scenarios = [EvalScenario("demo", scene, demo=demo)]
        report = evaluate_controller(goal_seeker, pipeline, scenarios, n=5, base_seed=1)
        s = report.scenarios[0]
        summary = s.frechet_summary()
        assert summary is not None and summary["n"] == 5
        assert summary["f_at_t_star_median"] >= 0.0
