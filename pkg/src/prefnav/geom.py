"""Planar geometry for the navigation workbench.

World poses, robot-centric polar coordinates, timestamped trajectories,
polygonal scenes with raycasting, and grid A* for scripted walking paths.
All values are immutable after construction; the functions are pure and
safe to call concurrently.

Conventions: units are meters and seconds, the frame is right-handed,
headings are measured from the +x axis and normalized to (-pi, pi].
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TAU = 2.0 * math.pi


def wrap_angle(angle):
    """Normalize an angle (scalar or ndarray) to (-pi, pi].

    Values already in range pass through unchanged (no rounding drift).
    """
    if isinstance(angle, np.ndarray):
        wrapped = np.pi - np.mod(np.pi - angle, TAU)
        inside = (angle > -np.pi) & (angle <= np.pi)
        return np.where(inside, angle, wrapped)
    a = float(angle)
    if -math.pi < a <= math.pi:
        return a
    return math.pi - (math.pi - a) % TAU


@dataclass(frozen=True)
class Pose2:
    """Planar pose; theta is wrapped to (-pi, pi] at construction."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError("non-finite pose")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])


@dataclass(frozen=True)
class PolarRef:
    """Distance/bearing pair in a robot frame.

    distance == -1.0 together with bearing == 0.0 is the sentinel for
    "nothing observed"; any other negative distance is invalid.
    """

    distance: float
    bearing: float

    def __post_init__(self):
        if self.distance < 0.0 and not (self.distance == -1.0 and self.bearing == 0.0):
            raise ValueError(f"invalid polar reference ({self.distance}, {self.bearing})")
        object.__setattr__(self, "bearing", wrap_angle(self.bearing))

    @classmethod
    def sentinel(cls) -> "PolarRef":
        return cls(-1.0, 0.0)

    @property
    def is_sentinel(self) -> bool:
        return self.distance == -1.0


def to_polar(target, frame: Pose2) -> PolarRef:
    """Express a world point as (distance, bearing) in the given frame."""
    tx, ty = float(target[0]), float(target[1])
    dx, dy = tx - frame.x, ty - frame.y
    return PolarRef(math.hypot(dx, dy), wrap_angle(math.atan2(dy, dx) - frame.theta))


def from_polar(ref: PolarRef, frame: Pose2) -> np.ndarray:
    """Inverse of :func:`to_polar`: reconstruct the world point."""
    a = frame.theta + ref.bearing
    return np.array([frame.x + ref.distance * math.cos(a), frame.y + ref.distance * math.sin(a)])


class Trajectory:
    """Timestamped polyline with strictly increasing timestamps.

    xy is an (n, 2) float array, t an (n,) array, theta an optional (n,)
    array of headings. At least two samples are required.
    """

    def __init__(self, t, xy, theta=None):
        t = np.asarray(t, dtype=float)
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if t.shape[0] != xy.shape[0]:
            raise ValueError("timestamp/point count mismatch")
        if t.shape[0] < 2:
            raise ValueError("trajectory needs at least 2 samples")
        if not np.all(np.diff(t) > 0.0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(xy))):
            raise ValueError("non-finite trajectory data")
        self.t = t
        self.xy = xy
        if theta is not None:
            theta = wrap_angle(np.asarray(theta, dtype=float))
            if theta.shape[0] != t.shape[0]:
                raise ValueError("theta length mismatch")
        self.theta = theta
        self.t.setflags(write=False)
        self.xy.setflags(write=False)
        if self.theta is not None:
            self.theta.setflags(write=False)

    def __len__(self):
        return self.t.shape[0]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Trajectory":
        """Build from [[t, x, y], ...] or [[t, x, y, theta], ...] rows."""
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] not in (3, 4):
            raise ValueError("rows must be [t, x, y] or [t, x, y, theta]")
        theta = arr[:, 3] if arr.shape[1] == 4 else None
        return cls(arr[:, 0], arr[:, 1:3], theta)

    def to_rows(self) -> list:
        if self.theta is None:
            return [[float(t), float(x), float(y)] for t, (x, y) in zip(self.t, self.xy)]
        return [
            [float(t), float(x), float(y), float(th)]
            for t, (x, y), th in zip(self.t, self.xy, self.theta)
        ]

    def arc_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.xy, axis=0), axis=1)))

    def cumulative_length(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.xy, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def position_at(self, time: float) -> np.ndarray:
        """Linear interpolation by timestamp, clamped at the ends."""
        x = np.interp(time, self.t, self.xy[:, 0])
        y = np.interp(time, self.t, self.xy[:, 1])
        return np.array([x, y])

    def heading_at(self, time: float) -> float:
        """Heading of motion at a timestamp (recorded theta if present)."""
        if self.theta is not None:
            i = int(np.clip(np.searchsorted(self.t, time), 1, len(self) - 1))
            t0, t1 = self.t[i - 1], self.t[i]
            w = 0.0 if t1 == t0 else np.clip((time - t0) / (t1 - t0), 0.0, 1.0)
            d = wrap_angle(self.theta[i] - self.theta[i - 1])
            return wrap_angle(self.theta[i - 1] + w * d)
        i = int(np.clip(np.searchsorted(self.t, time), 1, len(self) - 1))
        d = self.xy[i] - self.xy[i - 1]
        if np.linalg.norm(d) < 1e-12:
            return 0.0
        return math.atan2(d[1], d[0])

    def pose_at(self, time: float) -> Pose2:
        p = self.position_at(time)
        return Pose2(p[0], p[1], self.heading_at(time))

    def reversed(self) -> "Trajectory":
        t = self.t[-1] - self.t[::-1]
        theta = None if self.theta is None else wrap_angle(self.theta[::-1] + np.pi)
        return Trajectory(t, self.xy[::-1], theta)


def _catmull_rom_dense(points: np.ndarray, per_segment: int = 16) -> np.ndarray:
    """Centripetal Catmull-Rom curve through the points, densely sampled."""
    p = np.vstack([points[0], points, points[-1]])
    out = [points[0]]
    for i in range(1, len(p) - 2):
        p0, p1, p2, p3 = p[i - 1], p[i], p[i + 1], p[i + 2]
        ts = np.linspace(0.0, 1.0, per_segment + 1)[1:]
        for s in ts:
            s2, s3 = s * s, s * s * s
            out.append(
                0.5
                * (
                    (2 * p1)
                    + (-p0 + p2) * s
                    + (2 * p0 - 5 * p1 + 4 * p2 - p3) * s2
                    + (-p0 + 3 * p1 - 3 * p2 + p3) * s3
                )
            )
    return np.asarray(out)


def resample_polyline(points: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to n points equally spaced in arc length.

    Endpoints are preserved exactly. Raises on degenerate (zero-length)
    input.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 1:
        raise ValueError("zero-length trajectory")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0.0:
        raise ValueError("zero-length trajectory")
    s = np.linspace(0.0, total, n)
    x = np.interp(s, cum, pts[:, 0])
    y = np.interp(s, cum, pts[:, 1])
    out = np.stack([x, y], axis=1)
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def resample(traj: Trajectory, n: int, method: str = "linear") -> Trajectory:
    """Resample a trajectory to n samples equally spaced in arc length.

    method "linear" interpolates the recorded polyline directly; method
    "catmull-rom" first runs a centripetal Catmull-Rom spline through the
    samples. Timestamps (and headings, if any) are re-interpolated along
    the arc length; endpoints are kept exactly.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    pts = traj.xy
    cum = traj.cumulative_length()
    if cum[-1] <= 0.0:
        raise ValueError("zero-length trajectory")
    if method == "catmull-rom":
        dense = _catmull_rom_dense(pts)
        dseg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
        dcum = np.concatenate([[0.0], np.cumsum(dseg)])
        # carry timestamps over by matching arc-length fraction
        s_new = np.linspace(0.0, dcum[-1], n)
        x = np.interp(s_new, dcum, dense[:, 0])
        y = np.interp(s_new, dcum, dense[:, 1])
        frac = s_new / dcum[-1]
        t_new = np.interp(frac * cum[-1], cum, traj.t)
        xy_new = np.stack([x, y], axis=1)
    elif method == "linear":
        s_new = np.linspace(0.0, cum[-1], n)
        x = np.interp(s_new, cum, pts[:, 0])
        y = np.interp(s_new, cum, pts[:, 1])
        t_new = np.interp(s_new, cum, traj.t)
        xy_new = np.stack([x, y], axis=1)
    else:
        raise ValueError(f"unknown resample method {method!r}")
    xy_new[0], xy_new[-1] = pts[0], pts[-1]
    t_new[0], t_new[-1] = traj.t[0], traj.t[-1]
    t_new = np.maximum.accumulate(t_new)
    # strictly increasing timestamps even when the drawing paused in place
    eps = max(1e-9, (t_new[-1] - t_new[0]) * 1e-12)
    for i in range(1, n):
        if t_new[i] <= t_new[i - 1]:
            t_new[i] = t_new[i - 1] + eps
    theta_new = None
    if traj.theta is not None:
        unwrapped = np.unwrap(traj.theta)
        if method == "linear":
            theta_new = wrap_angle(np.interp(s_new, cum, unwrapped))
        else:
            frac = np.linspace(0.0, 1.0, n)
            theta_new = wrap_angle(np.interp(frac * cum[-1], cum, unwrapped))
    return Trajectory(t_new, xy_new, theta_new)


# ---------------------------------------------------------------------------
# Scenes


@dataclass
class Scene:
    """Axis-aligned room with polygonal and circular obstacles.

    bounds is (xmin, ymin, xmax, ymax); obstacles must lie inside it.
    spawn_region is a polygon in which robots/humans/goals may be placed
    (defaults to the bounds inset by 0.3 m).
    """

    id: str
    bounds: tuple
    polygons: list = field(default_factory=list)
    circles: list = field(default_factory=list)  # (cx, cy, r)
    spawn_region: np.ndarray | None = None

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("degenerate bounds")
        self.bounds = (float(xmin), float(ymin), float(xmax), float(ymax))
        self.polygons = [np.asarray(p, dtype=float).reshape(-1, 2) for p in self.polygons]
        self.circles = [np.asarray(c, dtype=float).reshape(3) for c in self.circles]
        if self.spawn_region is None:
            m = 0.3
            self.spawn_region = np.array(
                [[xmin + m, ymin + m], [xmax - m, ymin + m], [xmax - m, ymax - m], [xmin + m, ymax - m]]
            )
        else:
            self.spawn_region = np.asarray(self.spawn_region, dtype=float).reshape(-1, 2)
        self._segments = None
        self._occupancy_cache = {}

    @property
    def segments(self) -> np.ndarray:
        """(M, 2, 2) array of wall and obstacle edges (bounds included)."""
        if self._segments is None:
            xmin, ymin, xmax, ymax = self.bounds
            corners = np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])
            segs = [np.stack([corners, np.roll(corners, -1, axis=0)], axis=1)]
            for poly in self.polygons:
                segs.append(np.stack([poly, np.roll(poly, -1, axis=0)], axis=1))
            self._segments = np.concatenate(segs, axis=0)
        return self._segments

    def point_in_obstacle(self, p) -> bool:
        x, y = float(p[0]), float(p[1])
        for poly in self.polygons:
            if _point_in_polygon(x, y, poly):
                return True
        for cx, cy, r in self.circles:
            if (x - cx) ** 2 + (y - cy) ** 2 <= r * r:
                return True
        return False

    def out_of_bounds(self, p, margin: float = 0.0) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return not (xmin + margin <= p[0] <= xmax - margin and ymin + margin <= p[1] <= ymax - margin)

    def in_spawn_region(self, p) -> bool:
        return _point_in_polygon(float(p[0]), float(p[1]), self.spawn_region)

    def clearance(self, p) -> float:
        """Distance from a point to the nearest obstacle edge or circle."""
        p = np.asarray(p, dtype=float)
        d = _point_segment_distances(p[None, :], self.segments).min()
        for cx, cy, r in self.circles:
            d = min(d, max(np.hypot(p[0] - cx, p[1] - cy) - r, 0.0))
        return float(d)

    def disc_collides(self, center, radius: float) -> bool:
        """True when a disc of the given radius overlaps walls or obstacles."""
        if self.out_of_bounds(center, radius):
            return True
        if self.point_in_obstacle(center):
            return True
        return self.clearance(center) < radius

    def occupancy(self, cell: float, inflate: float):
        """Cached occupancy grid for repeated planning queries."""
        key = (round(cell, 6), round(inflate, 6))
        if key not in self._occupancy_cache:
            self._occupancy_cache[key] = occupancy_grid(self, cell, inflate)
        return self._occupancy_cache[key]

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "bounds": list(self.bounds),
            "polygons": [p.tolist() for p in self.polygons],
            "circles": [{"c": [float(c[0]), float(c[1])], "r": float(c[2])} for c in self.circles],
            "spawn_region": self.spawn_region.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Scene":
        return cls(
            id=d["id"],
            bounds=tuple(d["bounds"]),
            polygons=[np.asarray(p) for p in d.get("polygons", [])],
            circles=[np.array([c["c"][0], c["c"][1], c["r"]]) for c in d.get("circles", [])],
            spawn_region=np.asarray(d["spawn_region"]) if d.get("spawn_region") else None,
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "Scene":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def _point_in_polygon(x: float, y: float, poly: np.ndarray) -> bool:
    """Even-odd containment test."""
    inside = False
    j = len(poly) - 1
    for i in range(len(poly)):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def _points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Vectorized even-odd test for an (N, 2) point array."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    j = len(poly) - 1
    for i in range(len(poly)):
        xi, yi = poly[i]
        xj, yj = poly[j]
        crosses = (yi > y) != (yj > y)
        if np.any(crosses):
            x_cross = xi + (y[crosses] - yi) * (xj - xi) / (yj - yi)
            hit = np.zeros(len(pts), dtype=bool)
            hit[crosses] = x[crosses] < x_cross
            inside ^= hit
        j = i
    return inside


def _point_segment_distances(pts: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """(N, M) distances from points to segments."""
    a, b = segs[:, 0], segs[:, 1]
    e = b - a  # (M, 2)
    ee = np.maximum(np.einsum("md,md->m", e, e), 1e-300)
    ap = pts[:, None, :] - a[None, :, :]  # (N, M, 2)
    t = np.clip(np.einsum("nmd,md->nm", ap, e) / ee, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * e[None, :, :]
    return np.linalg.norm(pts[:, None, :] - closest, axis=2)


# ---------------------------------------------------------------------------
# Raycasting


def scan_distances(scene: Scene, origin: Pose2, offsets, max_range: float, extra_discs=()) -> np.ndarray:
    """Distances along rays from origin at heading+offset, clamped to max_range.

    extra_discs is a sequence of (cx, cy, r) dynamic obstacles (the human).
    If the origin sits inside an obstacle or outside the bounds, all rays
    return 0.
    """
    if max_range <= 0.0:
        raise ValueError("max_range must be positive")
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    o = np.array([origin.x, origin.y])
    if scene.out_of_bounds(o) or scene.point_in_obstacle(o):
        return np.zeros(offsets.shape[0])
    ang = origin.theta + offsets
    d = np.stack([np.cos(ang), np.sin(ang)], axis=1)  # (R, 2)
    segs = scene.segments
    a = segs[:, 0]
    e = segs[:, 1] - segs[:, 0]
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]  # (R, M)
    ao = a[None, :, :] - o[None, None, :]  # (1, M, 2)
    t_num = ao[..., 0] * e[None, :, 1] - ao[..., 1] * e[None, :, 0]
    u_num = ao[..., 0] * d[:, None, 1] - ao[..., 1] * d[:, None, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_num / denom
        u = u_num / denom
    ok = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= -1e-12) & (u <= 1.0 + 1e-12)
    t = np.where(ok, t, np.inf)
    dist = t.min(axis=1)
    for disc in [*scene.circles, *extra_discs]:
        cx, cy, r = float(disc[0]), float(disc[1]), float(disc[2])
        oc = o - np.array([cx, cy])
        b = np.einsum("rd,d->r", d, oc)  # d . (o - c)
        c0 = oc @ oc - r * r
        disc_val = b * b - c0
        hit = disc_val >= 0.0
        root = np.sqrt(np.maximum(disc_val, 0.0))
        t1 = -b - root
        t2 = -b + root
        # t1 < 0 <= t2 means the ray starts inside the disc
        tc = np.where(t1 >= 0.0, t1, np.where(t2 >= 0.0, 0.0, np.inf))
        tc = np.where(hit, tc, np.inf)
        dist = np.minimum(dist, tc)
    return np.minimum(dist, max_range)


def raycast(scene: Scene, origin: Pose2, angle_offset: float, max_range: float, extra_discs=()) -> float:
    """Single-ray version of :func:`scan_distances`."""
    return float(scan_distances(scene, origin, [angle_offset], max_range, extra_discs)[0])


# ---------------------------------------------------------------------------
# Grid A*


def occupancy_grid(scene: Scene, cell: float, inflate: float = 0.0):
    """Boolean occupancy grid over the scene bounds.

    A cell is occupied when a disc of radius `inflate` centered on the
    cell would overlap an obstacle or the outer walls. Returns
    (occupied[ny, nx], origin_xy).
    """
    xmin, ymin, xmax, ymax = scene.bounds
    nx = max(int(math.ceil((xmax - xmin) / cell)), 1)
    ny = max(int(math.ceil((ymax - ymin) / cell)), 1)
    xs = xmin + (np.arange(nx) + 0.5) * cell
    ys = ymin + (np.arange(ny) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    occ = np.zeros(len(pts), dtype=bool)
    occ |= (pts[:, 0] < xmin + inflate) | (pts[:, 0] > xmax - inflate)
    occ |= (pts[:, 1] < ymin + inflate) | (pts[:, 1] > ymax - inflate)
    for poly in scene.polygons:
        occ |= _points_in_polygon(pts, poly)
    if inflate > 0.0 and (scene.polygons or True):
        dmin = _point_segment_distances(pts[~occ], scene.segments)
        sub = dmin.min(axis=1) < inflate
        idx = np.flatnonzero(~occ)
        occ[idx[sub]] = True
    for cx, cy, r in scene.circles:
        occ |= (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2 <= (r + inflate) ** 2
    return occ.reshape(ny, nx), np.array([xmin, ymin])


def _cell_of(p, origin, cell):
    return (int((p[1] - origin[1]) / cell), int((p[0] - origin[0]) / cell))


def _cell_center(rc, origin, cell):
    return np.array([origin[0] + (rc[1] + 0.5) * cell, origin[1] + (rc[0] + 0.5) * cell])


_NEIGHBORS = [
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, math.sqrt(2)), (-1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)), (1, 1, math.sqrt(2)),
]


def _octile(a, b):
    dy, dx = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (math.sqrt(2) - 1.0) * min(dx, dy)


def grid_astar(occupied: np.ndarray, start_rc, goal_rc):
    """8-connected A* over an occupancy grid; returns (cells, cost).

    Diagonal moves cost sqrt(2); the octile heuristic keeps the search
    admissible, so returned paths are grid-optimal. Raises ValueError
    when no path exists.
    """
    ny, nx = occupied.shape
    if occupied[start_rc] or occupied[goal_rc]:
        raise ValueError("unreachable")
    g = {start_rc: 0.0}
    came = {}
    pq = [(_octile(start_rc, goal_rc), 0.0, start_rc)]
    closed = set()
    while pq:
        f, gc, cur = heapq.heappop(pq)
        if cur in closed:
            continue
        if cur == goal_rc:
            cells = [cur]
            while cur in came:
                cur = came[cur]
                cells.append(cur)
            return cells[::-1], gc
        closed.add(cur)
        for dr, dc, w in _NEIGHBORS:
            nr, ncol = cur[0] + dr, cur[1] + dc
            if not (0 <= nr < ny and 0 <= ncol < nx) or occupied[nr, ncol]:
                continue
            # no corner cutting between diagonal neighbors
            if dr != 0 and dc != 0 and (occupied[cur[0] + dr, cur[1]] or occupied[cur[0], cur[1] + dc]):
                continue
            ng = gc + w
            nb = (nr, ncol)
            if ng < g.get(nb, math.inf):
                g[nb] = ng
                came[nb] = cur
                heapq.heappush(pq, (ng + _octile(nb, goal_rc), ng, nb))
    raise ValueError("unreachable")


def _segment_clear(scene: Scene, p, q, inflate: float, step: float) -> bool:
    p, q = np.asarray(p, float), np.asarray(q, float)
    n = max(int(math.ceil(np.linalg.norm(q - p) / step)), 1)
    ts = np.linspace(0.0, 1.0, n + 1)
    pts = p[None, :] + ts[:, None] * (q - p)[None, :]
    xmin, ymin, xmax, ymax = scene.bounds
    if np.any(pts[:, 0] < xmin + inflate) or np.any(pts[:, 0] > xmax - inflate):
        return False
    if np.any(pts[:, 1] < ymin + inflate) or np.any(pts[:, 1] > ymax - inflate):
        return False
    for poly in scene.polygons:
        if np.any(_points_in_polygon(pts, poly)):
            return False
    if _point_segment_distances(pts, scene.segments).min() < inflate:
        return False
    for cx, cy, r in scene.circles:
        if np.any(np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) < r + inflate):
            return False
    return True


def astar_path(scene: Scene, start, goal, cell: float = 0.1, inflate: float = 0.3, smooth: bool = True) -> np.ndarray:
    """Collision-free polyline from start to goal.

    Plans 8-connected A* on an occupancy grid inflated by `inflate`, then
    shortcut-smooths corners with line-of-sight checks. Start and goal
    must be in free space after inflation.
    """
    occ, origin = scene.occupancy(cell, inflate)
    start = np.asarray(start, float)
    goal = np.asarray(goal, float)
    s_rc = _cell_of(start, origin, cell)
    g_rc = _cell_of(goal, origin, cell)
    ny, nx = occ.shape
    for rc, name in ((s_rc, "start"), (g_rc, "goal")):
        if not (0 <= rc[0] < ny and 0 <= rc[1] < nx):
            raise ValueError("unreachable")
    if occ[s_rc] or occ[g_rc]:
        raise ValueError("unreachable")
    cells, _ = grid_astar(occ, s_rc, g_rc)
    pts = [start] + [_cell_center(rc, origin, cell) for rc in cells[1:-1]] + [goal]
    pts = np.asarray(pts)
    if not smooth or len(pts) <= 2:
        return pts
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_clear(scene, pts[i], pts[j], inflate * 0.98, cell * 0.5):
            j -= 1
        out.append(pts[j])
        i = j
    return np.asarray(out)
