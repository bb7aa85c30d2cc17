import type { Point, TrajectoryRow } from "./types";

/** Linear interpolation over [t, x, y(, theta)] rows, clamped at the
 * ends. Both robot and human tracks are sampled from the same clock
 * value, which is what keeps their replays synchronized. */
export function sampleTrack(rows: TrajectoryRow[], t: number): Point {
    if (rows.length === 0) throw new Error("empty track");
    if (t <= rows[0][0]) return { x: rows[0][1], y: rows[0][2] };
    const last = rows[rows.length - 1];
    if (t >= last[0]) return { x: last[1], y: last[2] };
    let lo = 0;
    let hi = rows.length - 1;
    while (hi - lo > 1) {
        const mid = (lo + hi) >> 1;
        if (rows[mid][0] <= t) lo = mid;
        else hi = mid;
    }
    const a = rows[lo];
    const b = rows[hi];
    const w = (t - a[0]) / (b[0] - a[0]);
    return { x: a[1] + w * (b[1] - a[1]), y: a[2] + w * (b[2] - a[2]) };
}

export function trackDuration(rows: TrajectoryRow[]): number {
    return rows.length ? rows[rows.length - 1][0] - rows[0][0] : 0;
}

/**
 * Shared playback clock driving every animated layer (replay preview,
 * recorded human, rollout comparison). Speed is a pure multiplier on
 * the advance step, so recordings against this clock stay valid at any
 * playback rate.
 */
export class PlaybackClock {
    private t = 0;
    playing = false;
    speed = 1.0;

    constructor(public duration: number) {}

    get time(): number {
        return this.t;
    }

    /** Advance by a wall-time delta (seconds); returns the clock. */
    tick(wallDelta: number): number {
        if (this.playing) {
            this.t = Math.min(this.t + wallDelta * this.speed, this.duration);
            if (this.t >= this.duration) this.playing = false;
        }
        return this.t;
    }

    seek(t: number): void {
        this.t = Math.min(Math.max(t, 0), this.duration);
    }

    restart(): void {
        this.t = 0;
        this.playing = true;
    }
}
