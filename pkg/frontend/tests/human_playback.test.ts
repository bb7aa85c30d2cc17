import { describe, expect, it } from "vitest";
import { HumanPathRecorder } from "../src/humanPath";
import { PlaybackClock, sampleTrack, trackDuration } from "../src/playback";

describe("HumanPathRecorder", () => {
    it("no drag gives a static human at the placed position", () => {
        const rec = new HumanPathRecorder();
        rec.place({ x: 2.5, y: 1.5 });
        const rows = rec.finish(12.0);
        expect(rows).not.toBeNull();
        expect(rows!.length).toBe(2);
        expect(rows![0].slice(1, 3)).toEqual([2.5, 1.5]);
        expect(rows![1].slice(1, 3)).toEqual([2.5, 1.5]);
    });

    it("absent marker gives a demo without a human", () => {
        const rec = new HumanPathRecorder();
        expect(rec.finish(10.0)).toBeNull();
    });

    it("recorded timestamps are strictly increasing on the replay clock", () => {
        const rec = new HumanPathRecorder();
        const clock = new PlaybackClock(10);
        clock.restart();
        for (let i = 0; i < 200; i++) {
            clock.tick(0.016);
            rec.record({ x: i * 0.02, y: 1 }, clock.time);
            // a second sample at the same clock value must be dropped
            rec.record({ x: i * 0.02 + 0.001, y: 1 }, clock.time);
        }
        const rows = rec.finish(10)!;
        for (let i = 1; i < rows.length; i++) {
            expect(rows[i][0]).toBeGreaterThan(rows[i - 1][0]);
        }
    });

    it("playback speed does not change recorded geometry vs clock time", () => {
        const record = (speed: number) => {
            const rec = new HumanPathRecorder();
            const clock = new PlaybackClock(8);
            clock.speed = speed;
            clock.restart();
            while (clock.playing) {
                clock.tick(0.02);
                rec.record({ x: clock.time * 0.5, y: 2 }, clock.time);
            }
            return rec.finish(8)!;
        };
        const slow = record(0.5);
        const fast = record(2.0);
        // same x(t) law regardless of wall-time playback speed
        for (const t of [1, 3, 5, 7]) {
            const a = sampleTrack(slow, t);
            const b = sampleTrack(fast, t);
            expect(a.x).toBeCloseTo(b.x, 6);
        }
    });
});

describe("PlaybackClock and track sampling", () => {
    it("robot and human tracks sample from one shared clock", () => {
        const robot = [
            [0, 0, 0],
            [10, 5, 0],
        ];
        const human = [
            [0, 5, 3],
            [10, 0, 3],
        ];
        const clock = new PlaybackClock(Math.max(trackDuration(robot), trackDuration(human)));
        clock.restart();
        clock.tick(4); // seconds
        const rp = sampleTrack(robot, clock.time);
        const hp = sampleTrack(human, clock.time);
        expect(rp.x).toBeCloseTo(2.0, 9);
        expect(hp.x).toBeCloseTo(3.0, 9);
    });

    it("clamps at the ends and stops at the duration", () => {
        const rows = [
            [0, 1, 1],
            [2, 3, 1],
        ];
        expect(sampleTrack(rows, -5)).toEqual({ x: 1, y: 1 });
        expect(sampleTrack(rows, 99)).toEqual({ x: 3, y: 1 });
        const clock = new PlaybackClock(2);
        clock.restart();
        clock.tick(10);
        expect(clock.time).toBe(2);
        expect(clock.playing).toBe(false);
    });

    it("seek clamps into the valid range", () => {
        const clock = new PlaybackClock(5);
        clock.seek(-1);
        expect(clock.time).toBe(0);
        clock.seek(99);
        expect(clock.time).toBe(5);
    });
});
