import type { Point } from "./types";

/**
 * World (meters, y up) <-> screen (pixels, y down) mapping with pan and
 * zoom. The transform is always invertible: scale is clamped to a
 * positive range and pan is a pure translation.
 */
export class ViewTransform {
    private scale: number; // pixels per meter
    private offsetX = 0; // screen px of world origin
    private offsetY = 0;
    readonly minScale = 5;
    readonly maxScale = 2000;

    constructor(
        private canvasWidth: number,
        private canvasHeight: number,
        scale = 80,
    ) {
        this.scale = this.clampScale(scale);
        this.offsetX = 0;
        this.offsetY = canvasHeight;
    }

    private clampScale(s: number): number {
        return Math.min(Math.max(s, this.minScale), this.maxScale);
    }

    get pixelsPerMeter(): number {
        return this.scale;
    }

    /** Center the view on a world rectangle with a pixel margin. */
    fitBounds(xmin: number, ymin: number, xmax: number, ymax: number, margin = 20): void {
        const w = xmax - xmin;
        const h = ymax - ymin;
        this.scale = this.clampScale(
            Math.min((this.canvasWidth - 2 * margin) / w, (this.canvasHeight - 2 * margin) / h),
        );
        this.offsetX = (this.canvasWidth - w * this.scale) / 2 - xmin * this.scale;
        this.offsetY = (this.canvasHeight + h * this.scale) / 2 + ymin * this.scale;
    }

    toScreen(p: Point): Point {
        return { x: this.offsetX + p.x * this.scale, y: this.offsetY - p.y * this.scale };
    }

    toWorld(p: Point): Point {
        return { x: (p.x - this.offsetX) / this.scale, y: (this.offsetY - p.y) / this.scale };
    }

    panBy(dxPixels: number, dyPixels: number): void {
        this.offsetX += dxPixels;
        this.offsetY += dyPixels;
    }

    /** Zoom by a factor keeping the given screen point fixed. */
    zoomAt(screenPoint: Point, factor: number): void {
        const before = this.toWorld(screenPoint);
        this.scale = this.clampScale(this.scale * factor);
        const after = this.toScreen(before);
        this.offsetX += screenPoint.x - after.x;
        this.offsetY += screenPoint.y - after.y;
    }
}
