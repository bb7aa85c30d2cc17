import { describe, expect, it } from "vitest";
import { MIN_SPACING_M, StrokeRecorder } from "../src/stroke";

const BOUNDS = { xmin: 0, ymin: 0, xmax: 8, ymax: 5 };

function drag(rec: StrokeRecorder, from: [number, number], to: [number, number], steps: number) {
    for (let i = 0; i <= steps; i++) {
        const w = i / steps;
        rec.add({ x: from[0] + w * (to[0] - from[0]), y: from[1] + w * (to[1] - from[1]) }, i * 16);
    }
}

describe("StrokeRecorder", () => {
    it("captures a straight drag with monotone timestamps", () => {
        const rec = new StrokeRecorder(BOUNDS);
        drag(rec, [1, 1], [5, 1], 200);
        const done = rec.finish();
        expect("rows" in done).toBe(true);
        if ("rows" in done) {
            const ts = done.rows.map((r) => r[0]);
            for (let i = 1; i < ts.length; i++) expect(ts[i]).toBeGreaterThan(ts[i - 1]);
        }
    });

    it("decimates to at least 2 cm spacing between interior points", () => {
        const rec = new StrokeRecorder(BOUNDS);
        drag(rec, [1, 1], [1.5, 1], 500); // 1 mm raw spacing
        const done = rec.finish();
        if (!("rows" in done)) throw new Error("expected rows");
        for (let i = 1; i < done.rows.length - 1; i++) {
            const d = Math.hypot(
                done.rows[i][1] - done.rows[i - 1][1],
                done.rows[i][2] - done.rows[i - 1][2],
            );
            expect(d).toBeGreaterThanOrEqual(MIN_SPACING_M - 1e-12);
        }
    });

    it("preserves both endpoints exactly through decimation", () => {
        const rec = new StrokeRecorder(BOUNDS);
        rec.add({ x: 1.2345, y: 2.3456 }, 0);
        drag(rec, [1.2345, 2.3456], [3.9876, 1.1234], 777);
        const done = rec.finish();
        if (!("rows" in done)) throw new Error("expected rows");
        expect(done.rows[0][1]).toBe(1.2345);
        expect(done.rows[0][2]).toBe(2.3456);
        expect(done.rows[done.rows.length - 1][1]).toBeCloseTo(3.9876, 12);
        expect(done.rows[done.rows.length - 1][2]).toBeCloseTo(1.1234, 12);
        expect(done.goal.x).toBeCloseTo(3.9876, 12);
    });

    it("rejects strokes shorter than 0.5 m", () => {
        const rec = new StrokeRecorder(BOUNDS);
        drag(rec, [1, 1], [1.3, 1], 30);
        const done = rec.finish();
        expect(done).toEqual({ error: "too short" });
    });

    it("clamps points leaving the bounds and flags them", () => {
        const rec = new StrokeRecorder(BOUNDS);
        drag(rec, [7, 2], [9.5, 2], 100); // exits at x=8
        expect(rec.anyClamped).toBe(true);
        const done = rec.finish();
        if (!("rows" in done)) throw new Error("expected rows");
        for (const row of done.rows) expect(row[1]).toBeLessThanOrEqual(8);
    });

    it("pins the goal marker to the final drawn point", () => {
        const rec = new StrokeRecorder(BOUNDS);
        drag(rec, [1, 4], [4, 1], 150);
        const done = rec.finish();
        if (!("rows" in done)) throw new Error("expected rows");
        const last = done.rows[done.rows.length - 1];
        expect(done.goal).toEqual({ x: last[1], y: last[2] });
    });
});
