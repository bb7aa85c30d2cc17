import { describe, expect, it } from "vitest";
import { ViewTransform } from "../src/transform";

describe("ViewTransform", () => {
    it("round-trips world -> screen -> world within 0.5 px at every zoom", () => {
        const view = new ViewTransform(960, 620);
        view.fitBounds(0, 0, 8, 5);
        const zooms = [0.1, 0.5, 1, 3.7, 12, 80];
        for (const z of zooms) {
            view.zoomAt({ x: 480, y: 310 }, z);
            for (let i = 0; i < 50; i++) {
                const p = { x: (i * 37.1) % 8, y: (i * 13.3) % 5 };
                const screen = view.toScreen(p);
                const back = view.toWorld(screen);
                const backScreen = view.toScreen(back);
                const errPx = Math.hypot(backScreen.x - screen.x, backScreen.y - screen.y);
                expect(errPx).toBeLessThan(0.5);
            }
            view.zoomAt({ x: 480, y: 310 }, 1 / z);
        }
    });

    it("keeps the anchor point fixed while zooming", () => {
        const view = new ViewTransform(960, 620);
        view.fitBounds(0, 0, 8, 5);
        const anchor = { x: 123, y: 456 };
        const before = view.toWorld(anchor);
        view.zoomAt(anchor, 2.5);
        const after = view.toWorld(anchor);
        expect(Math.hypot(after.x - before.x, after.y - before.y)).toBeLessThan(1e-9);
    });

    it("pans by exact pixel offsets", () => {
        const view = new ViewTransform(960, 620);
        view.fitBounds(0, 0, 8, 5);
        const p = { x: 4, y: 2.5 };
        const before = view.toScreen(p);
        view.panBy(33, -17);
        const after = view.toScreen(p);
        expect(after.x - before.x).toBeCloseTo(33, 9);
        expect(after.y - before.y).toBeCloseTo(-17, 9);
    });

    it("fitBounds keeps the scene inside the canvas", () => {
        const view = new ViewTransform(960, 620);
        view.fitBounds(0, 0, 8, 5, 20);
        for (const corner of [
            { x: 0, y: 0 }, { x: 8, y: 0 }, { x: 8, y: 5 }, { x: 0, y: 5 },
        ]) {
            const s = view.toScreen(corner);
            expect(s.x).toBeGreaterThanOrEqual(0);
            expect(s.x).toBeLessThanOrEqual(960);
            expect(s.y).toBeGreaterThanOrEqual(0);
            expect(s.y).toBeLessThanOrEqual(620);
        }
    });
});
