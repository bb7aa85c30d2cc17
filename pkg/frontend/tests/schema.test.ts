import { describe, expect, it } from "vitest";
import { validateDemo } from "../src/schema";

const good = {
    scene_id: "tworoom_a",
    robot: [
        [0, 1, 1],
        [0.5, 1.5, 1.2],
        [1.0, 2.0, 1.5],
    ],
    human: null,
    meta: { author: "test" },
};

describe("demo schema", () => {
    it("accepts a well-formed payload", () => {
        expect(validateDemo(good).ok).toBe(true);
    });

    it("accepts a human track with theta column", () => {
        const payload = {
            ...good,
            human: [
                [0, 2, 2, 0],
                [1, 2.5, 2, 0.1],
            ],
        };
        expect(validateDemo(payload).ok).toBe(true);
    });

    it("rejects non-increasing timestamps", () => {
        const payload = { ...good, robot: [[0, 1, 1], [0, 1.5, 1]] };
        const res = validateDemo(payload);
        expect(res.ok).toBe(false);
        if (!res.ok) expect(res.errors.join(" ")).toMatch(/strictly increasing/);
    });

    it("rejects missing scene id and short trajectories", () => {
        expect(validateDemo({ ...good, scene_id: "" }).ok).toBe(false);
        expect(validateDemo({ ...good, robot: [[0, 1, 1]] }).ok).toBe(false);
    });

    it("rejects non-finite coordinates", () => {
        const payload = { ...good, robot: [[0, 1, 1], [1, Number.NaN, 2]] };
        expect(validateDemo(payload).ok).toBe(false);
    });

    it("rejects rows of the wrong arity", () => {
        const payload = { ...good, robot: [[0, 1], [1, 2]] };
        expect(validateDemo(payload).ok).toBe(false);
    });
});
