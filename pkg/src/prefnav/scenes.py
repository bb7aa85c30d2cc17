"""Built-in desk-scale scenes and authored demonstration strokes.

Two two-room scenes (a dividing wall with a door plus light furniture)
and three smooth demonstration trajectories with deliberate detours, so
that preference-reflecting behavior is distinguishable from
shortest-path behavior.
"""

from __future__ import annotations

import numpy as np

from .geom import Scene, Trajectory, resample
from .sim import Demonstration


def _rect(cx, cy, w, h):
    return np.array([
        [cx - w / 2, cy - h / 2], [cx + w / 2, cy - h / 2],
        [cx + w / 2, cy + h / 2], [cx - w / 2, cy + h / 2],
    ])


def two_room_a() -> Scene:
    """8 x 5 m flat: dividing wall at x=4 with a 1.6 m door."""
    return Scene(
        "tworoom_a",
        bounds=(0.0, 0.0, 8.0, 5.0),
        polygons=[
            _rect(4.0, 0.95, 0.15, 1.9),   # wall below the door (y 0..1.9)
            _rect(4.0, 4.25, 0.15, 1.5),   # wall above the door (y 3.5..5)
            _rect(1.5, 4.3, 1.2, 0.6),     # sideboard in the left room
        ],
        circles=[(6.5, 1.2, 0.35)],        # round table in the right room
    )


def two_room_b() -> Scene:
    """7 x 6 m flat: dividing wall at y=3 with a 1.6 m door."""
    return Scene(
        "tworoom_b",
        bounds=(0.0, 0.0, 7.0, 6.0),
        polygons=[
            _rect(2.25, 3.0, 4.5, 0.15),   # wall left of the door (x 0..4.5)
            _rect(6.55, 3.0, 0.9, 0.15),   # wall right of the door (x 6.1..7)
            _rect(5.5, 4.9, 1.0, 0.5),     # desk in the upper room
        ],
        circles=[(2.0, 1.5, 0.4)],         # round table in the lower room
    )


def scene_set() -> list:
    return [two_room_a(), two_room_b()]


def _stroke(control_points, draw_speed=0.5, n=80) -> Trajectory:
    """Smooth a hand-authored control polygon into a drawn-stroke
    trajectory with constant-draw-speed timestamps."""
    pts = np.asarray(control_points, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(seg)]) / draw_speed
    rough = Trajectory(t, pts)
    return resample(rough, n, method="catmull-rom")


def _timed_path(control_points, duration) -> Trajectory:
    """Human walking path with timestamps spread over a replay duration."""
    pts = np.asarray(control_points, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    t = cum / cum[-1] * duration
    return resample(Trajectory(t, pts), 40, method="catmull-rom")


def demo_keep_left() -> Demonstration:
    """Scene A: swing high around the static human before the door."""
    robot = _stroke([
        [1.0, 1.0], [1.5, 2.1], [2.5, 3.0], [3.4, 3.0],
        [4.0, 2.7], [5.0, 2.8], [5.7, 3.2], [6.2, 3.6],
    ])
    human = Trajectory([0.0, robot.t[-1] + 30.0], [[2.4, 1.6], [2.4, 1.6]])
    return Demonstration("tworoom_a", robot, human, meta={"author": "fixture", "note": "keep left of the seated human"})


def demo_hug_lower_wall() -> Demonstration:
    """Scene A: after the door, stay low along the wall."""
    robot = _stroke([
        [1.0, 3.2], [2.1, 2.6], [3.2, 2.4], [4.0, 2.45],
        [5.0, 1.9], [6.0, 1.9], [6.7, 1.8],
    ])
    return Demonstration("tworoom_a", robot, None, meta={"author": "fixture", "note": "hug the lower wall after the door"})


def demo_wide_door_turn() -> Demonstration:
    """Scene B: wide turn into the door while a human crosses above."""
    robot = _stroke([
        [1.0, 5.0], [2.6, 4.4], [4.2, 3.8], [5.3, 3.0],
        [5.7, 2.3], [5.7, 1.6],
    ])
    duration = robot.arc_length() / 0.4
    human = _timed_path([[6.3, 4.3], [4.8, 4.6], [3.2, 5.0], [1.8, 5.2]], duration)
    return Demonstration("tworoom_b", robot, human, meta={"author": "fixture", "note": "take the door wide, give way above"})


def demo_catalog() -> list:
    return [demo_keep_left(), demo_hug_lower_wall(), demo_wide_door_turn()]


def scene_by_id(scene_id: str) -> Scene:
    for s in scene_set():
        if s.id == scene_id:
            return s
    raise KeyError(scene_id)
