import type { Point, SceneBounds, TrajectoryRow } from "./types";

export const MIN_SPACING_M = 0.02; // decimation floor between stored points
export const MIN_STROKE_LENGTH_M = 0.5;

export interface StrokeSample {
    t: number;
    x: number;
    y: number;
    clamped: boolean;
}

/**
 * Captures a drawn robot stroke from pointer events in world
 * coordinates. Points are decimated to at least 2 cm spacing
 * (endpoints always kept exactly), clamped into the scene bounds and
 * flagged when clamping happened.
 */
export class StrokeRecorder {
    private samples: StrokeSample[] = [];
    private pending: StrokeSample | null = null;
    private startClock: number | null = null;

    constructor(private bounds: SceneBounds) {}

    get points(): StrokeSample[] {
        const out = this.samples.slice();
        if (this.pending) out.push(this.pending);
        return out;
    }

    get anyClamped(): boolean {
        return this.points.some((p) => p.clamped);
    }

    private clamp(p: Point): { point: Point; clamped: boolean } {
        const x = Math.min(Math.max(p.x, this.bounds.xmin), this.bounds.xmax);
        const y = Math.min(Math.max(p.y, this.bounds.ymin), this.bounds.ymax);
        return { point: { x, y }, clamped: x !== p.x || y !== p.y };
    }

    /** Feed one pointer sample; timeMs is the event clock. */
    add(world: Point, timeMs: number): void {
        if (this.startClock === null) this.startClock = timeMs;
        const t = (timeMs - this.startClock) / 1000;
        const { point, clamped } = this.clamp(world);
        const sample = { t, x: point.x, y: point.y, clamped };
        if (this.samples.length === 0) {
            this.samples.push(sample);
            return;
        }
        const last = this.samples[this.samples.length - 1];
        const dist = Math.hypot(sample.x - last.x, sample.y - last.y);
        if (dist >= MIN_SPACING_M && sample.t > last.t) {
            this.samples.push(sample);
            this.pending = null;
        } else {
            // remember the newest sub-spacing sample so the final
            // endpoint is preserved exactly on finish()
            this.pending = sample;
        }
    }

    length(): number {
        const pts = this.points;
        let len = 0;
        for (let i = 1; i < pts.length; i++) {
            len += Math.hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
        }
        return len;
    }

    /**
     * Finalize the stroke. Returns trajectory rows or an error string
     * ("too short") for inline display.
     */
    finish(): { rows: TrajectoryRow[]; goal: Point } | { error: string } {
        if (this.pending) {
            const last = this.samples[this.samples.length - 1];
            if (!last || this.pending.t > last.t) this.samples.push(this.pending);
            this.pending = null;
        }
        if (this.samples.length < 2 || this.length() < MIN_STROKE_LENGTH_M) {
            return { error: "too short" };
        }
        const rows = this.samples.map((s) => [s.t, s.x, s.y]);
        const goal = this.samples[this.samples.length - 1];
        return { rows, goal: { x: goal.x, y: goal.y } };
    }

    reset(): void {
        this.samples = [];
        this.pending = null;
        this.startClock = null;
    }
}
