import { ApiClient } from "./api";
import { HumanPathRecorder } from "./humanPath";
import { PlaybackClock, sampleTrack, trackDuration } from "./playback";
import { StrokeRecorder } from "./stroke";
import { ViewTransform } from "./transform";
import type { DemoResponse, Point, SceneData, TrajectoryRow } from "./types";

type Status = "idle" | "drawing" | "recording-human" | "validating" | "valid" | "rejected";

interface Layers {
    replay: TrajectoryRow[] | null;
    rollout: TrajectoryRow[] | null;
    rolloutHuman: TrajectoryRow[] | null;
    violations: { location: [number, number] | null; type: string }[];
}

/**
 * Single-page demonstration-authoring tool.
 *
 * Flow: load a scene, draw the robot's preferred trajectory with the
 * pointer, optionally record a human path while the validated replay
 * animates (shared clock), submit, then overlay trained-policy
 * rollouts against the demonstration for comparison. One submission is
 * in flight at a time; all persistence goes through the service API.
 */
export class DemoAuthoringApp {
    readonly view: ViewTransform;
    stroke: StrokeRecorder | null = null;
    human = new HumanPathRecorder();
    clock = new PlaybackClock(0);
    status: Status = "idle";
    scene: SceneData | null = null;
    lastResponse: DemoResponse | null = null;
    layers: Layers = { replay: null, rollout: null, rolloutHuman: null, violations: [] };
    statusMessage = "";
    private submitting = false;
    private lastFrame = 0;

    constructor(
        private canvas: HTMLCanvasElement,
        private api: ApiClient,
    ) {
        this.view = new ViewTransform(canvas.width, canvas.height);
        this.bindPointerEvents();
        requestAnimationFrame((ts) => this.frame(ts));
    }

    async loadScene(id: string): Promise<void> {
        this.scene = await this.api.getScene(id);
        const [xmin, ymin, xmax, ymax] = this.scene.bounds;
        this.view.fitBounds(xmin, ymin, xmax, ymax);
        this.stroke = new StrokeRecorder({ xmin, ymin, xmax, ymax });
        this.layers = { replay: null, rollout: null, rolloutHuman: null, violations: [] };
        this.status = "idle";
        this.draw();
    }

    private bindPointerEvents(): void {
        let panning = false;
        let lastPan: Point | null = null;
        this.canvas.addEventListener("pointerdown", (ev) => {
            if (!this.scene) return;
            if (ev.shiftKey) {
                panning = true;
                lastPan = { x: ev.offsetX, y: ev.offsetY };
                return;
            }
            const world = this.view.toWorld({ x: ev.offsetX, y: ev.offsetY });
            if (this.status === "recording-human") {
                this.human.record(world, this.clock.time);
                return;
            }
            this.status = "drawing";
            this.stroke?.reset();
            this.stroke?.add(world, ev.timeStamp);
        });
        this.canvas.addEventListener("pointermove", (ev) => {
            if (panning && lastPan) {
                this.view.panBy(ev.offsetX - lastPan.x, ev.offsetY - lastPan.y);
                lastPan = { x: ev.offsetX, y: ev.offsetY };
                this.draw();
                return;
            }
            const world = this.view.toWorld({ x: ev.offsetX, y: ev.offsetY });
            if (this.status === "drawing" && ev.buttons) {
                this.stroke?.add(world, ev.timeStamp);
                this.draw();
            } else if (this.status === "recording-human" && ev.buttons) {
                this.human.record(world, this.clock.time);
            }
        });
        this.canvas.addEventListener("pointerup", () => {
            panning = false;
            if (this.status === "drawing") this.finishStroke();
        });
        this.canvas.addEventListener("wheel", (ev) => {
            ev.preventDefault();
            const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
            this.view.zoomAt({ x: ev.offsetX, y: ev.offsetY }, factor);
            this.draw();
        });
    }

    private finishStroke(): void {
        if (!this.stroke) return;
        const done = this.stroke.finish();
        if ("error" in done) {
            this.statusMessage = done.error;
            this.status = "idle";
            return;
        }
        this.statusMessage = this.stroke.anyClamped
            ? "stroke clamped to scene bounds"
            : "stroke captured; record the human path or submit";
        this.status = "idle";
    }

    /** Submit the current draft; renders the server replay on success
     * and violation markers on rejection. */
    async submit(author = "", note = ""): Promise<DemoResponse | null> {
        if (!this.scene || !this.stroke || this.submitting) return null;
        const done = this.stroke.finish();
        if ("error" in done) {
            this.statusMessage = done.error;
            return null;
        }
        this.submitting = true;
        this.status = "validating";
        try {
            const replayDuration = this.layers.replay ? trackDuration(this.layers.replay) : 0;
            const resp = await this.api.submitDemo({
                scene_id: this.scene.id,
                robot: done.rows,
                human: this.human.finish(replayDuration),
                meta: { author, note },
            });
            this.lastResponse = resp;
            if (resp.valid && resp.replay) {
                this.status = "valid";
                this.layers.replay = resp.replay;
                this.layers.violations = [];
                this.clock = new PlaybackClock(trackDuration(resp.replay));
                this.clock.restart();
                const dev = resp.tracking?.frechet_deviation_aware ?? NaN;
                this.statusMessage = `valid; replay deviation ${dev.toFixed(3)} m`;
            } else {
                this.status = "rejected";
                this.layers.violations = resp.violations;
                this.statusMessage = resp.violations.map((v) => v.type).join(", ");
            }
            return resp;
        } finally {
            this.submitting = false;
        }
    }

    /** Fetch a trained-policy rollout and overlay it for comparison. */
    async compareRollout(policyId: string, demoId: string, seed: number): Promise<void> {
        if (!this.scene) return;
        const resp = await this.api.runRollout({
            policy_id: policyId,
            scene_id: this.scene.id,
            demo_id: demoId,
            seed,
        });
        this.layers.rollout = resp.result.robot;
        this.layers.rolloutHuman = resp.result.human;
        const dur = Math.max(
            trackDuration(resp.result.robot),
            this.layers.replay ? trackDuration(this.layers.replay) : 0,
        );
        this.clock = new PlaybackClock(dur);
        this.clock.restart();
    }

    startHumanRecording(): void {
        if (!this.layers.replay) {
            this.statusMessage = "validate the stroke first, then record the human";
            return;
        }
        this.human.reset();
        this.status = "recording-human";
        this.clock.restart();
    }

    private frame(ts: number): void {
        const dt = this.lastFrame ? (ts - this.lastFrame) / 1000 : 0;
        this.lastFrame = ts;
        if (this.clock.playing) {
            this.clock.tick(dt);
            this.draw();
        }
        requestAnimationFrame((t) => this.frame(t));
    }

    private path(ctx: CanvasRenderingContext2D, pts: Point[]): void {
        ctx.beginPath();
        pts.forEach((p, i) => {
            const s = this.view.toScreen(p);
            if (i === 0) ctx.moveTo(s.x, s.y);
            else ctx.lineTo(s.x, s.y);
        });
        ctx.stroke();
    }

    draw(): void {
        const ctx = this.canvas.getContext("2d");
        if (!ctx || !this.scene) return;
        ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
        const [xmin, ymin, xmax, ymax] = this.scene.bounds;
        ctx.strokeStyle = "#445";
        ctx.lineWidth = 2;
        this.path(ctx, [
            { x: xmin, y: ymin }, { x: xmax, y: ymin }, { x: xmax, y: ymax },
            { x: xmin, y: ymax }, { x: xmin, y: ymin },
        ]);
        ctx.fillStyle = "#99a";
        for (const poly of this.scene.polygons) {
            ctx.beginPath();
            poly.forEach(([x, y], i) => {
                const s = this.view.toScreen({ x, y });
                if (i === 0) ctx.moveTo(s.x, s.y);
                else ctx.lineTo(s.x, s.y);
            });
            ctx.closePath();
            ctx.fill();
        }
        for (const { c, r } of this.scene.circles) {
            const s = this.view.toScreen({ x: c[0], y: c[1] });
            ctx.beginPath();
            ctx.arc(s.x, s.y, r * this.view.pixelsPerMeter, 0, 2 * Math.PI);
            ctx.fill();
        }
        if (this.stroke && this.stroke.points.length > 1) {
            ctx.strokeStyle = "#e80";
            ctx.lineWidth = 3;
            this.path(ctx, this.stroke.points);
            const goal = this.stroke.points[this.stroke.points.length - 1];
            const g = this.view.toScreen(goal);
            ctx.fillStyle = "#e80";
            ctx.beginPath();
            ctx.arc(g.x, g.y, 6, 0, 2 * Math.PI);
            ctx.fill();
        }
        if (this.layers.replay) {
            ctx.strokeStyle = "#2a6";
            ctx.lineWidth = 2;
            this.path(ctx, this.layers.replay.map((r) => ({ x: r[1], y: r[2] })));
            const p = sampleTrack(this.layers.replay, this.clock.time);
            const s = this.view.toScreen(p);
            ctx.fillStyle = "#2a6";
            ctx.beginPath();
            ctx.arc(s.x, s.y, 7, 0, 2 * Math.PI);
            ctx.fill();
        }
        if (this.layers.rollout) {
            ctx.strokeStyle = "#36c";
            ctx.lineWidth = 2;
            this.path(ctx, this.layers.rollout.map((r) => ({ x: r[1], y: r[2] })));
            const p = sampleTrack(this.layers.rollout, this.clock.time);
            const s = this.view.toScreen(p);
            ctx.fillStyle = "#36c";
            ctx.beginPath();
            ctx.arc(s.x, s.y, 7, 0, 2 * Math.PI);
            ctx.fill();
        }
        if (this.layers.rolloutHuman) {
            const p = sampleTrack(this.layers.rolloutHuman, this.clock.time);
            const s = this.view.toScreen(p);
            ctx.fillStyle = "#c33";
            ctx.beginPath();
            ctx.arc(s.x, s.y, 0.3 * this.view.pixelsPerMeter, 0, 2 * Math.PI);
            ctx.fill();
        }
        ctx.fillStyle = "#c00";
        for (const v of this.layers.violations) {
            if (!v.location) continue;
            const s = this.view.toScreen({ x: v.location[0], y: v.location[1] });
            ctx.beginPath();
            ctx.moveTo(s.x - 7, s.y - 7);
            ctx.lineTo(s.x + 7, s.y + 7);
            ctx.moveTo(s.x - 7, s.y + 7);
            ctx.lineTo(s.x + 7, s.y - 7);
            ctx.strokeStyle = "#c00";
            ctx.lineWidth = 3;
            ctx.stroke();
        }
    }
}
