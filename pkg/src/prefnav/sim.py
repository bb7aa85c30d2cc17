"""Differential-drive episode engine.

Exact unicycle kinematics, episode/goal/human sampling, the sparse
reward scheme with its demonstration bonus, termination handling, and
replay of drawn demonstrations into reward-annotated transitions via a
pure-pursuit tracking controller.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import geom
from .geom import Pose2, Scene, Trajectory

V_MAX = 0.5
OMEGA_MAX = math.pi
C_REW = 10.0


class PolicyDivergenceError(RuntimeError):
    pass


class InvalidDemonstrationError(ValueError):
    """Demonstration collides during replay; carries the location."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = None if location is None else (float(location[0]), float(location[1]))


class UntrackableDemonstrationError(ValueError):
    """The tracking controller cannot stay within tolerance of the stroke."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = None if location is None else (float(location[0]), float(location[1]))


@dataclass(frozen=True)
class Action:
    """Forward/angular velocity command, clamped to the control limits
    v in [0, 0.5] m/s (no reverse), omega in [-pi, pi] rad/s."""

    v: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError("non-finite action")
        object.__setattr__(self, "v", min(max(float(self.v), 0.0), V_MAX))
        object.__setattr__(self, "omega", min(max(float(self.omega), -OMEGA_MAX), OMEGA_MAX))


class HumanMode(Enum):
    OPPOSITE_ASTAR = 1
    RANDOM_ASTAR = 2
    STATIC = 3
    ABSENT = 4
    DEMO_REPLAY = 5


_PATH_MODES = (HumanMode.OPPOSITE_ASTAR, HumanMode.RANDOM_ASTAR, HumanMode.DEMO_REPLAY)


@dataclass(frozen=True)
class HumanTrack:
    """Scripted human motion for one episode."""

    mode: HumanMode
    path: Trajectory | None = None
    speed: float = 0.0
    pose: Pose2 | None = None

    def __post_init__(self):
        if self.mode in _PATH_MODES:
            if self.path is None:
                raise ValueError(f"{self.mode.name} requires a path")
            if self.mode is not HumanMode.DEMO_REPLAY and self.speed <= 0.0:
                raise ValueError("walking human needs positive speed")
        elif self.path is not None:
            raise ValueError(f"{self.mode.name} must not carry a path")
        if self.mode is HumanMode.STATIC and self.pose is None:
            raise ValueError("static human needs a pose")

    @classmethod
    def absent(cls) -> "HumanTrack":
        return cls(HumanMode.ABSENT)

    @classmethod
    def static(cls, pose: Pose2) -> "HumanTrack":
        return cls(HumanMode.STATIC, pose=pose)

    @classmethod
    def along_polyline(cls, mode: HumanMode, polyline: np.ndarray, speed: float) -> "HumanTrack":
        """Walk a polyline at constant speed, stopping at its end."""
        pts = np.asarray(polyline, dtype=float)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        keep = np.concatenate([[True], seg > 1e-9])
        pts = pts[keep]
        if len(pts) < 2:
            pts = np.vstack([pts[0], pts[0] + [1e-6, 0.0]])
        cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
        return cls(mode, path=Trajectory(cum / speed, pts), speed=speed)

    @classmethod
    def demo_replay(cls, traj: Trajectory) -> "HumanTrack":
        return cls(HumanMode.DEMO_REPLAY, path=traj, speed=1.0)

    def pose_at(self, time: float) -> Pose2 | None:
        if self.mode is HumanMode.ABSENT:
            return None
        if self.mode is HumanMode.STATIC:
            return self.pose
        return self.path.pose_at(float(np.clip(time, self.path.t[0], self.path.t[-1])))


@dataclass(frozen=True)
class EpisodeInit:
    """Seeded initial conditions for one episode."""

    scene_id: str
    robot_start: Pose2
    goal: tuple
    human: HumanTrack
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "robot_start": [self.robot_start.x, self.robot_start.y, self.robot_start.theta],
            "goal": [float(self.goal[0]), float(self.goal[1])],
            "human_mode": self.human.mode.value,
            "seed": self.seed,
        }


class RewardEvent(Enum):
    NONE = "none"
    COLLISION = "collision"
    GOAL_TRAINING = "goal_training"
    GOAL_DEMO = "goal_demo"
    TIMEOUT = "timeout"


class Source(Enum):
    EXPERIENCE = "experience"
    DEMO = "demo"


class Outcome(Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"


_EVENT_REWARD = {
    RewardEvent.NONE: 0.0,
    RewardEvent.COLLISION: -C_REW / 2.0,
    RewardEvent.GOAL_TRAINING: +C_REW / 2.0,
    RewardEvent.GOAL_DEMO: +C_REW,
    RewardEvent.TIMEOUT: -C_REW / 4.0,
}


def compute_reward(event: RewardEvent, source: Source = Source.EXPERIENCE) -> float:
    """Sparse reward: -5 collision, +5 goal, +10 demo goal, -2.5 timeout,
    0 otherwise; every demonstration-sourced transition earns +0.1."""
    r = _EVENT_REWARD[event]
    if source is Source.DEMO:
        r += C_REW / 100.0
    return r


@dataclass
class Transition:
    s: object  # StateVec
    a: Action
    r: float
    s_next: object
    done: bool
    source: Source = Source.EXPERIENCE
    event: RewardEvent = RewardEvent.NONE


@dataclass
class EpisodeResult:
    outcome: Outcome
    robot_traj: Trajectory
    human_traj: Trajectory | None
    return_: float
    steps: int
    human_in_fov: list

    def to_json_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "robot": self.robot_traj.to_rows(),
            "human": None if self.human_traj is None else self.human_traj.to_rows(),
            "return": self.return_,
            "steps": self.steps,
            "human_in_fov": [bool(b) for b in self.human_in_fov],
        }


@dataclass
class SimConfig:
    """Episode engine constants (paper-silent values documented in README).

    Sampled goals are local, mirroring same-room start/goal sampling: a
    pair is accepted only when its planned path is not much longer than
    the straight-line distance. Set local_goal_ratio to None to allow
    arbitrary detour goals.
    """

    dt: float = 0.2
    n_ep: int = 150
    goal_radius: float = 0.3
    robot_radius: float = 0.18
    human_radius: float = 0.3
    gamma: float = 0.99
    goal_min: float = 1.5
    goal_max: float = 6.0
    speed_mean: float = 0.5
    speed_std: float = 0.3
    speed_lo: float = 0.1
    speed_hi: float = 1.5
    local_goal_ratio: float | None = 1.25
    local_goal_slack: float = 1.0


def step_kinematics(pose: Pose2, a: Action, dt: float) -> Pose2:
    """Exact unicycle integration over one control interval."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if abs(a.omega) < 1e-9:
        return Pose2(pose.x + a.v * dt * math.cos(pose.theta),
                     pose.y + a.v * dt * math.sin(pose.theta),
                     pose.theta)
    radius = a.v / a.omega
    theta_new = pose.theta + a.omega * dt
    return Pose2(pose.x + radius * (math.sin(theta_new) - math.sin(pose.theta)),
                 pose.y - radius * (math.cos(theta_new) - math.cos(pose.theta)),
                 theta_new)


def robot_collides(scene: Scene, pose: Pose2, human_xy, cfg: SimConfig) -> bool:
    """Disc-vs-scene plus disc-vs-human check (human treated like any
    other obstacle)."""
    if scene.disc_collides(pose.position, cfg.robot_radius):
        return True
    if human_xy is not None:
        if math.hypot(pose.x - human_xy[0], pose.y - human_xy[1]) < cfg.robot_radius + cfg.human_radius:
            return True
    return False


def sample_truncated_speed(rng, cfg: SimConfig) -> float:
    """Walking speed: normal(0.5, 0.3) m/s clipped to [0.1, 1.5]."""
    return float(np.clip(rng.normal(cfg.speed_mean, cfg.speed_std), cfg.speed_lo, cfg.speed_hi))


def _sample_free_point(scene: Scene, rng, radius: float, tries: int = 100):
    lo = scene.spawn_region.min(axis=0)
    hi = scene.spawn_region.max(axis=0)
    for _ in range(tries):
        p = rng.uniform(lo, hi)
        if scene.in_spawn_region(p) and not scene.disc_collides(p, radius):
            return p
    return None


def _goal_is_local(scene: Scene, start, goal, cfg: SimConfig) -> bool:
    """Same-room style gate: the planned path to the goal must not be
    much longer than the straight line."""
    if cfg.local_goal_ratio is None:
        return True
    d = float(np.linalg.norm(np.asarray(goal) - np.asarray(start)))
    cell = 0.1
    occ, origin = scene.occupancy(cell, cfg.robot_radius + 0.02)
    try:
        _, cost = geom.grid_astar(occ, geom._cell_of(start, origin, cell),
                                  geom._cell_of(goal, origin, cell))
    except (ValueError, IndexError):
        return False
    return cost * cell <= max(cfg.local_goal_ratio * d, d + cfg.local_goal_slack)


def sample_episode(scene: Scene, rng, cfg: SimConfig | None = None, mode_weights=None,
                   demos=None) -> EpisodeInit:
    """Rejection-sample start/goal in the goal-distance band with a
    sampled human behavior mode.

    mode_weights maps HumanMode -> weight; DEMO_REPLAY requires `demos`
    (a list of Demonstration) and replays that scenario's start, goal
    and human track instead of sampling fresh ones.
    """
    cfg = cfg or SimConfig()
    if mode_weights is None:
        mode_weights = {HumanMode.OPPOSITE_ASTAR: 0.25, HumanMode.RANDOM_ASTAR: 0.25,
                        HumanMode.STATIC: 0.25, HumanMode.ABSENT: 0.25}
    modes = list(mode_weights.keys())
    probs = np.asarray([mode_weights[m] for m in modes], dtype=float)
    probs = probs / probs.sum()
    seed = int(rng.integers(2 ** 31 - 1))
    mode = modes[int(rng.choice(len(modes), p=probs))]

    if mode is HumanMode.DEMO_REPLAY:
        candidates = [d for d in (demos or []) if d.scene_id == scene.id]
        if not candidates:
            raise ValueError("demo replay requested but no demonstration for this scene")
        demo = candidates[int(rng.integers(len(candidates)))]
        return demo.episode_init(seed)

    for attempt in range(1000):
        start = _sample_free_point(scene, rng, cfg.robot_radius + 0.02)
        goal = _sample_free_point(scene, rng, cfg.robot_radius + 0.02)
        if start is None or goal is None:
            continue
        d_goal = float(np.linalg.norm(goal - start))
        if not (cfg.goal_min < d_goal < cfg.goal_max):
            continue
        if not _goal_is_local(scene, start, goal, cfg):
            continue
        theta = rng.uniform(-math.pi, math.pi)
        robot_start = Pose2(start[0], start[1], theta)
        human = _sample_human(scene, rng, cfg, mode, start, goal)
        if human is None:
            continue
        return EpisodeInit(scene.id, robot_start, (float(goal[0]), float(goal[1])), human, seed)
    raise RuntimeError("scene too constrained")


def _sample_human(scene, rng, cfg, mode, robot_start, robot_goal):
    if mode is HumanMode.ABSENT:
        return HumanTrack.absent()
    if mode is HumanMode.STATIC:
        for _ in range(50):
            p = _sample_free_point(scene, rng, cfg.human_radius + 0.02)
            if p is None:
                return None
            clear_goal = np.linalg.norm(p - robot_goal) > cfg.goal_radius + cfg.human_radius + 2 * cfg.robot_radius
            clear_start = np.linalg.norm(p - robot_start) > cfg.human_radius + cfg.robot_radius + 0.1
            if clear_goal and clear_start:
                return HumanTrack.static(Pose2(p[0], p[1], rng.uniform(-math.pi, math.pi)))
        return None
    speed = sample_truncated_speed(rng, cfg)
    if mode is HumanMode.OPPOSITE_ASTAR:
        a, b = robot_goal, robot_start
    else:
        a = _sample_free_point(scene, rng, cfg.human_radius + 0.02)
        b = _sample_free_point(scene, rng, cfg.human_radius + 0.02)
        if a is None or b is None or np.linalg.norm(a - b) < 1.0:
            return None
    try:
        path = geom.astar_path(scene, a, b, cell=0.1, inflate=cfg.human_radius)
    except ValueError:
        return None
    return HumanTrack.along_polyline(mode, path, speed)


class EpisodeEngine:
    """Steps one episode: perception -> action -> kinematics -> events.

    Single-threaded; run several engines with independent seeds for
    parallel evaluation.
    """

    def __init__(self, scene: Scene, pipeline, cfg: SimConfig | None = None,
                 goal_event: RewardEvent = RewardEvent.GOAL_TRAINING,
                 source: Source = Source.EXPERIENCE):
        self.scene = scene
        self.pipeline = pipeline
        self.cfg = cfg or SimConfig()
        self.goal_event = goal_event
        self.source = source

    def reset(self, init: EpisodeInit):
        if init.scene_id != self.scene.id:
            raise ValueError("episode init belongs to a different scene")
        self.init = init
        self.pose = init.robot_start
        self.goal = np.asarray(init.goal, dtype=float)
        self.human = init.human
        self.n = 0
        self.poses = [self.pose]
        self.human_poses = []
        self.fov_flags = []
        self.outcome = None
        self.pipeline.reset()
        self.state = self._observe(None)
        hp = self.human.pose_at(0.0)
        self.human_poses.append(hp)
        return self.state

    def _observe(self, last_action):
        hp = self.human.pose_at(self.n * self.cfg.dt)
        state = self.pipeline.observe(self.scene, self.pose, hp, self.goal, last_action)
        return state

    def step(self, action: Action):
        """Apply one command; returns (state', reward, done, info)."""
        cfg = self.cfg
        self.fov_flags.append(self.state.human.k == 1)
        self.pose = step_kinematics(self.pose, action, cfg.dt)
        self.n += 1
        t = self.n * cfg.dt
        hp = self.human.pose_at(t)
        human_xy = None if hp is None else (hp.x, hp.y)
        event = RewardEvent.NONE
        if robot_collides(self.scene, self.pose, human_xy, cfg):
            event = RewardEvent.COLLISION
        elif float(np.linalg.norm(self.pose.position - self.goal)) < cfg.goal_radius:
            event = self.goal_event
        elif self.n >= cfg.n_ep:
            event = RewardEvent.TIMEOUT
        reward = compute_reward(event, self.source)
        done = event is not RewardEvent.NONE
        if done:
            self.outcome = {
                RewardEvent.COLLISION: Outcome.COLLISION,
                RewardEvent.GOAL_TRAINING: Outcome.SUCCESS,
                RewardEvent.GOAL_DEMO: Outcome.SUCCESS,
                RewardEvent.TIMEOUT: Outcome.TIMEOUT,
            }[event]
        self.poses.append(self.pose)
        self.human_poses.append(hp)
        next_state = self._observe(action)
        self.state = next_state
        info = {"event": event, "t": t, "pose": self.pose}
        return next_state, reward, done, info

    def result(self, rewards) -> EpisodeResult:
        cfg = self.cfg
        times = np.arange(len(self.poses)) * cfg.dt
        robot = Trajectory(times, np.array([[p.x, p.y] for p in self.poses]),
                           np.array([p.theta for p in self.poses]))
        human = None
        if all(hp is not None for hp in self.human_poses):
            human = Trajectory(times, np.array([[hp.x, hp.y] for hp in self.human_poses]),
                               np.array([hp.theta for hp in self.human_poses]))
        ret = 0.0
        for i, r in enumerate(rewards):
            ret += (cfg.gamma ** i) * r
        return EpisodeResult(
            outcome=self.outcome,
            robot_traj=robot,
            human_traj=human,
            return_=ret,
            steps=self.n,
            human_in_fov=list(self.fov_flags),
        )


def run_episode(policy, init: EpisodeInit, scene: Scene, pipeline, cfg: SimConfig | None = None):
    """Roll a policy from an EpisodeInit until termination.

    policy maps a StateVec to an Action. Returns (EpisodeResult,
    transitions).
    """
    cfg = cfg or SimConfig()
    engine = EpisodeEngine(scene, pipeline, cfg)
    state = engine.reset(init)
    transitions = []
    rewards = []
    for _ in range(cfg.n_ep):
        action = policy(state)
        if not (math.isfinite(action.v) and math.isfinite(action.omega)):
            raise PolicyDivergenceError("policy divergence")
        nxt, reward, done, info = engine.step(action)
        transitions.append(Transition(state, action, reward, nxt, done, Source.EXPERIENCE, info["event"]))
        rewards.append(reward)
        state = nxt
        if done:
            break
    return engine.result(rewards), transitions


# ---------------------------------------------------------------------------
# Demonstrations


@dataclass
class Demonstration:
    """A drawn robot stroke with an optional recorded human path."""

    scene_id: str
    robot: Trajectory
    human: Trajectory | None = None
    meta: dict = field(default_factory=dict)

    def goal(self) -> tuple:
        """The goal is pinned to the end of the drawn trajectory."""
        return (float(self.robot.xy[-1, 0]), float(self.robot.xy[-1, 1]))

    def start_pose(self) -> Pose2:
        d = self.robot.xy[1] - self.robot.xy[0]
        theta = math.atan2(d[1], d[0]) if np.linalg.norm(d) > 1e-9 else 0.0
        return Pose2(self.robot.xy[0, 0], self.robot.xy[0, 1], theta)

    def human_track(self) -> HumanTrack:
        if self.human is None:
            return HumanTrack.absent()
        if self.human.arc_length() < 1e-6:
            p = self.human.xy[0]
            theta = 0.0 if self.human.theta is None else float(self.human.theta[0])
            return HumanTrack.static(Pose2(p[0], p[1], theta))
        return HumanTrack.demo_replay(self.human)

    def episode_init(self, seed: int) -> EpisodeInit:
        return EpisodeInit(self.scene_id, self.start_pose(), self.goal(), self.human_track(), seed)

    def to_json_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "robot": self.robot.to_rows(),
            "human": None if self.human is None else self.human.to_rows(),
            "meta": self.meta,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Demonstration":
        human = d.get("human")
        return cls(
            scene_id=d["scene_id"],
            robot=Trajectory.from_rows(d["robot"]),
            human=None if human is None else Trajectory.from_rows(human),
            meta=d.get("meta", {}),
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f)

    @classmethod
    def load(cls, path) -> "Demonstration":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


@dataclass
class ReplayOutcome:
    """Everything the tracking replay of a demonstration produced."""

    transitions: list
    replay: Trajectory
    max_deviation: float
    spline: np.ndarray


def _pure_pursuit_target(path: np.ndarray, pos: np.ndarray, progress: int, lookahead: float):
    """Monotone progress pointer + first path point at the lookahead
    distance; falls back to the final point near the end."""
    window_end = min(progress + 80, len(path))
    seg = path[progress:window_end]
    d = np.linalg.norm(seg - pos, axis=1)
    progress = progress + int(np.argmin(d))
    j = progress
    while j < len(path) - 1 and np.linalg.norm(path[j] - pos) < lookahead:
        j += 1
    return path[j], progress


def track_demonstration(demo: Demonstration, scene: Scene, pipeline, cfg: SimConfig | None = None,
                        lookahead: float = 0.4, max_deviation: float = 0.2,
                        cruise: float = 0.9 * V_MAX) -> ReplayOutcome:
    """Replay a demonstration with a pure-pursuit controller.

    The drawn stroke is resampled to a dense spline and tracked while
    the recorded human path replays on the shared clock. Cruise speed
    sits below the control limit so the demonstrated commands stay in
    the interior of the action box (boundary actions would saturate the
    policy head they are cloned into). Raises
    InvalidDemonstrationError on any collision and
    UntrackableDemonstrationError when the replay leaves the stroke by
    more than `max_deviation` (or stalls).
    """
    cfg = cfg or SimConfig()
    spacing = 0.05
    n_dense = max(int(math.ceil(demo.robot.arc_length() / spacing)) + 1, 2)
    spline = geom.resample_polyline(demo.robot.xy, min(n_dense, 4000))
    # vet the stroke itself before replaying
    for p in spline:
        if scene.disc_collides(p, cfg.robot_radius):
            raise InvalidDemonstrationError(f"demonstration collides at ({p[0]:.2f}, {p[1]:.2f})", p)

    human = demo.human_track()
    init = demo.episode_init(seed=0)
    pose = init.robot_start
    goal = np.asarray(demo.goal())
    pipeline.reset()
    state = pipeline.observe(scene, pose, human.pose_at(0.0), goal, None)

    transitions = []
    poses = [pose]
    worst_dev = 0.0
    progress = 0
    step_limit = int(4 * demo.robot.arc_length() / (V_MAX * cfg.dt)) + 200
    for n in range(1, step_limit + 1):
        target, progress = _pure_pursuit_target(spline, pose.position, progress, lookahead)
        ref = geom.to_polar(target, pose)
        if abs(ref.bearing) > math.pi / 2:
            v, omega = 0.0, float(np.clip(ref.bearing / cfg.dt, -OMEGA_MAX, OMEGA_MAX))
        else:
            kappa = 2.0 * math.sin(ref.bearing) / max(ref.distance, 1e-6)
            v = cruise if abs(kappa) < 1e-9 else min(cruise, OMEGA_MAX / abs(kappa))
            omega = kappa * v
        action = Action(v, omega)
        pose = step_kinematics(pose, action, cfg.dt)
        t = n * cfg.dt
        hp = human.pose_at(t)
        human_xy = None if hp is None else (hp.x, hp.y)
        if robot_collides(scene, pose, human_xy, cfg):
            raise InvalidDemonstrationError(
                f"collision during replay at ({pose.x:.2f}, {pose.y:.2f})", pose.position)
        dev = float(geom._point_segment_distances(pose.position[None, :],
                                                  np.stack([spline[:-1], spline[1:]], axis=1)).min())
        worst_dev = max(worst_dev, dev)
        if dev > max_deviation:
            raise UntrackableDemonstrationError(
                f"replay deviates {dev:.3f} m from the stroke", pose.position)
        reached = float(np.linalg.norm(pose.position - goal)) < cfg.goal_radius
        event = RewardEvent.GOAL_DEMO if reached else RewardEvent.NONE
        reward = compute_reward(event, Source.DEMO)
        next_state = pipeline.observe(scene, pose, hp, goal, action)
        transitions.append(Transition(state, action, reward, next_state, reached, Source.DEMO, event))
        poses.append(pose)
        state = next_state
        if reached:
            break
    else:
        raise UntrackableDemonstrationError("replay never reached the stroke end", pose.position)
    times = np.arange(len(poses)) * cfg.dt
    replay = Trajectory(times, np.array([[p.x, p.y] for p in poses]),
                        np.array([p.theta for p in poses]))
    return ReplayOutcome(transitions, replay, worst_dev, spline)


def demo_to_transitions(demo: Demonstration, scene: Scene, pipeline, cfg: SimConfig | None = None) -> list:
    """Convert a vetted demonstration into DEMO-sourced transitions."""
    return track_demonstration(demo, scene, pipeline, cfg).transitions
