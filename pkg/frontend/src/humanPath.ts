import type { Point, TrajectoryRow } from "./types";

/**
 * Records the human marker while the robot replay animates. Positions
 * are sampled against the shared replay clock (not wall time), so the
 * robot and human tracks replay synchronously at any playback speed.
 * No drag at all means a static human at the placed position; never
 * placing the marker means a demo without a human.
 */
export class HumanPathRecorder {
    private samples: { t: number; x: number; y: number }[] = [];
    private placed: Point | null = null;
    private dragged = false;

    place(p: Point): void {
        this.placed = { ...p };
    }

    get isPlaced(): boolean {
        return this.placed !== null;
    }

    /** Record a drag sample at the given replay-clock time (seconds). */
    record(p: Point, replayClock: number): void {
        if (!this.placed) this.placed = { ...p };
        this.dragged = true;
        const last = this.samples[this.samples.length - 1];
        if (last && replayClock <= last.t) return; // clock must advance
        this.samples.push({ t: replayClock, x: p.x, y: p.y });
    }

    /**
     * Rows for submission: null when no human was placed, a two-sample
     * static track when placed but never dragged, else the recorded
     * path with a heading column derived from motion.
     */
    finish(replayDuration: number): TrajectoryRow[] | null {
        if (!this.placed) return null;
        if (!this.dragged || this.samples.length < 2) {
            const p = this.placed;
            return [
                [0, p.x, p.y, 0],
                [Math.max(replayDuration, 1e-3), p.x, p.y, 0],
            ];
        }
        return this.samples.map((s, i) => {
            const nb = this.samples[Math.min(i + 1, this.samples.length - 1)];
            const pv = this.samples[Math.max(i - 1, 0)];
            const theta = Math.atan2(nb.y - pv.y, nb.x - pv.x);
            return [s.t, s.x, s.y, theta];
        });
    }

    reset(): void {
        this.samples = [];
        this.placed = null;
        this.dragged = false;
    }
}
