"""Controller evaluation: robustness rates and the deviation-aware
Fréchet preference metric.

The metric compares a rollout A against a demonstration B: a coupling
DP gives the discrete Fréchet distance, its row minima give the prefix
similarity curve f(t), a trade-off knee on the normalized curve marks
the deviation point t*, and f(t*) in meters reports how closely the
robot tracked the demonstration up to its departure.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geom, sim
from .geom import Trajectory

DEFAULT_PHI = 0.75 * math.pi


def _as_points(curve) -> np.ndarray:
    if isinstance(curve, Trajectory):
        return curve.xy
    pts = np.asarray(curve, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError("polyline must be an (n, 2) array")
    return pts


def frechet_table(P, Q) -> np.ndarray:
    """Coupling DP table: d[i, j] = max(|P_i - Q_j|, min of the three
    predecessor cells)."""
    P, Q = _as_points(P), _as_points(Q)
    dist = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=2)
    n, m = dist.shape
    d = np.empty((n, m))
    d[0, 0] = dist[0, 0]
    for j in range(1, m):
        d[0, j] = max(d[0, j - 1], dist[0, j])
    for i in range(1, n):
        d[i, 0] = max(d[i - 1, 0], dist[i, 0])
        row = d[i]
        prev = d[i - 1]
        di = dist[i]
        for j in range(1, m):
            row[j] = max(di[j], min(prev[j], prev[j - 1], row[j - 1]))
    return d


def discrete_frechet(A, B) -> float:
    """Discrete Fréchet distance between two polylines (raw vertices)."""
    return float(frechet_table(A, B)[-1, -1])


def _arc_fractions(P: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= 0.0:
        return np.linspace(0.0, 1.0, len(P))
    return cum / cum[-1]


def partial_frechet_curve(A, B):
    """Prefix similarity curve: for each prefix A[0..i], the best
    Fréchet match against any prefix of B.

    Returns an (n, 2) array of (t_i, f_i) with t_i the arc-length
    fraction of A at index i. f is nondecreasing; the final entry is
    pinned to the full coupling (both curves consumed entirely), so the
    curve ends exactly at the discrete Fréchet distance.
    """
    A, B = _as_points(A), _as_points(B)
    table = frechet_table(A, B)
    f = table.min(axis=1)
    f[-1] = table[-1, -1]
    t = _arc_fractions(A)
    return np.stack([t, f], axis=1)


def deviation_point(curve, phi: float = DEFAULT_PHI) -> float:
    """Deviation point: the knee of the normalized similarity curve.

    Projects the curve points (f normalized by its final value, t) onto
    the trade-off direction (cos(phi), sin(phi)) and returns the t of
    the extreme sample: the last point where the curve still hugs zero
    before rising. Ties break toward larger t; a flat-zero curve (the
    rollout never deviates) returns t* = 1.
    """
    curve = np.asarray(curve, dtype=float).reshape(-1, 2)
    if curve.shape[0] == 0:
        raise ValueError("empty curve")
    t = curve[:, 0]
    f = curve[:, 1]
    f_final = f[-1]
    if f_final <= 0.0:
        return 1.0
    f_hat = f / f_final
    score = math.cos(phi) * f_hat + math.sin(phi) * t
    best = score.max()
    idx = int(np.flatnonzero(score >= best - 1e-12)[-1])
    return float(t[idx])


@dataclass
class FrechetReport:
    """Full metric output for one rollout/demonstration pair."""

    f_full: float
    curve: np.ndarray  # (n, 2) of (t, f in meters)
    t_star: float
    f_at_t_star: float
    reversed: bool

    def to_json_dict(self) -> dict:
        return {
            "f_full": self.f_full,
            "t_star": self.t_star,
            "f_at_t_star": self.f_at_t_star,
            "reversed": self.reversed,
            "curve": [[float(a), float(b)] for a, b in self.curve],
        }

    def write_curve_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "f"])
            for t, f in self.curve:
                w.writerow([repr(float(t)), repr(float(f))])


def deviation_aware_frechet(A, B, endpoint_mode: str = "auto", resample_to: int = 100,
                            phi: float = DEFAULT_PHI) -> FrechetReport:
    """Deviation-aware Fréchet metric between rollout A and demonstration B.

    Both inputs are resampled to `resample_to` points equally spaced in
    arc length. Mode "auto" evaluates on the reversed trajectories when
    the endpoints are closer than the start points (shared-goal case);
    "forward"/"reversed" force the orientation.
    """
    if endpoint_mode not in ("auto", "forward", "reversed"):
        raise ValueError(f"unknown endpoint mode {endpoint_mode!r}")
    A, B = _as_points(A), _as_points(B)
    if A.shape[0] < 2 or B.shape[0] < 2:
        raise ValueError("degenerate trajectory")
    A = geom.resample_polyline(A, resample_to)
    B = geom.resample_polyline(B, resample_to)
    if endpoint_mode == "auto":
        use_reversed = np.linalg.norm(A[-1] - B[-1]) < np.linalg.norm(A[0] - B[0])
    else:
        use_reversed = endpoint_mode == "reversed"
    if use_reversed:
        A = A[::-1].copy()
        B = B[::-1].copy()
    curve = partial_frechet_curve(A, B)
    t_star = deviation_point(curve, phi)
    idx = int(np.argmin(np.abs(curve[:, 0] - t_star)))
    return FrechetReport(
        f_full=float(curve[-1, 1]),
        curve=curve,
        t_star=t_star,
        f_at_t_star=float(curve[idx, 1]),
        reversed=bool(use_reversed),
    )


# ---------------------------------------------------------------------------
# Controller evaluation


@dataclass
class EvalScenario:
    """One evaluation cell: a scene plus either sampled episodes (with
    human mode weights) or a demonstration scenario replay."""

    name: str
    scene: object
    mode_weights: dict | None = None
    demo: object | None = None
    start_jitter: float = 0.15

    def episode_init(self, rng, cfg: sim.SimConfig):
        if self.demo is None:
            return sim.sample_episode(self.scene, rng, cfg, self.mode_weights)
        base = self.demo.episode_init(int(rng.integers(2 ** 31 - 1)))
        if self.start_jitter <= 0.0:
            return base
        for _ in range(50):
            dx, dy = rng.uniform(-self.start_jitter, self.start_jitter, 2)
            dth = rng.uniform(-0.3, 0.3)
            start = geom.Pose2(base.robot_start.x + dx, base.robot_start.y + dy,
                               base.robot_start.theta + dth)
            if not self.scene.disc_collides(start.position, cfg.robot_radius):
                return sim.EpisodeInit(base.scene_id, start, base.goal, base.human, base.seed)
        return base


@dataclass
class ScenarioResult:
    name: str
    n: int
    success_rate: float
    collision_rate: float
    timeout_rate: float
    frechet: list = field(default_factory=list)  # FrechetReport per rollout
    returns: list = field(default_factory=list)

    def rates(self) -> dict:
        return {"success_rate": self.success_rate,
                "collision_rate": self.collision_rate,
                "timeout_rate": self.timeout_rate}

    def frechet_summary(self) -> dict | None:
        if not self.frechet:
            return None
        fs = np.array([r.f_at_t_star for r in self.frechet])
        ts = np.array([r.t_star for r in self.frechet])
        q25, q50, q75 = np.percentile(fs, [25, 50, 75])
        return {
            "f_at_t_star_median": float(q50),
            "f_at_t_star_iqr": float(q75 - q25),
            "t_star_median": float(np.median(ts)),
            "n": len(self.frechet),
        }


@dataclass
class EvalReport:
    scenarios: list

    def to_json_dict(self) -> dict:
        return {
            "scenarios": [
                {
                    "name": s.name,
                    "n": s.n,
                    **s.rates(),
                    "frechet": s.frechet_summary(),
                    "mean_return": float(np.mean(s.returns)) if s.returns else None,
                }
                for s in self.scenarios
            ]
        }

    def save(self, report_path, rates_csv_path=None):
        with open(report_path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2, sort_keys=True)
        if rates_csv_path:
            with open(rates_csv_path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["scenario", "n", "success_rate", "collision_rate",
                            "timeout_rate", "frechet_median", "t_star_median"])
                for s in self.scenarios:
                    fs = s.frechet_summary() or {}
                    w.writerow([s.name, s.n, repr(s.success_rate), repr(s.collision_rate),
                                repr(s.timeout_rate),
                                repr(fs.get("f_at_t_star_median", "")) if fs else "",
                                repr(fs.get("t_star_median", "")) if fs else ""])


def _run_scenario(policy, pipeline, scenario: EvalScenario, n: int, base_seed: int,
                  cfg: sim.SimConfig, scenario_index: int) -> ScenarioResult:
    counts = {sim.Outcome.SUCCESS: 0, sim.Outcome.COLLISION: 0, sim.Outcome.TIMEOUT: 0}
    frechet_reports = []
    returns = []
    for i in range(n):
        rng = np.random.default_rng([base_seed, scenario_index, i])
        init = scenario.episode_init(rng, cfg)
        result, _ = sim.run_episode(policy, init, scenario.scene, pipeline, cfg)
        counts[result.outcome] += 1
        returns.append(result.return_)
        if scenario.demo is not None and result.robot_traj.arc_length() > 1e-6:
            frechet_reports.append(deviation_aware_frechet(result.robot_traj, scenario.demo.robot))
    return ScenarioResult(
        name=scenario.name,
        n=n,
        success_rate=counts[sim.Outcome.SUCCESS] / n,
        collision_rate=counts[sim.Outcome.COLLISION] / n,
        timeout_rate=counts[sim.Outcome.TIMEOUT] / n,
        frechet=frechet_reports,
        returns=returns,
    )


def _scenario_task(args):
    return _run_scenario(*args)


def evaluate_controller(policy, pipeline, scenarios, n: int = 50, base_seed: int = 0,
                        cfg: sim.SimConfig | None = None, workers: int = 1) -> EvalReport:
    """Run n seeded rollouts per scenario and aggregate rates plus
    Fréchet statistics against matched demonstrations.

    Deterministic in (policy, scenarios, n, base_seed); workers > 1
    parallelizes across scenarios without changing results.
    """
    cfg = cfg or sim.SimConfig()
    tasks = [(policy, pipeline, sc, n, base_seed, cfg, k) for k, sc in enumerate(scenarios)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_scenario_task, tasks))
    else:
        results = [_scenario_task(t) for t in tasks]
    return EvalReport(list(results))
