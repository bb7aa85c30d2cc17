export interface Point {
    x: number;
    y: number;
}

/** [t, x, y] or [t, x, y, theta] rows as served by the backend. */
export type TrajectoryRow = number[];

export interface SceneBounds {
    xmin: number;
    ymin: number;
    xmax: number;
    ymax: number;
}

export interface SceneData {
    id: string;
    bounds: [number, number, number, number];
    polygons: number[][][];
    circles: { c: [number, number]; r: number }[];
    spawn_region: number[][];
    occupancy_preview?: {
        cell: number;
        origin: [number, number];
        grid: number[][];
    };
}

export interface DemoPayload {
    scene_id: string;
    robot: TrajectoryRow[];
    human: TrajectoryRow[] | null;
    meta: { author?: string; note?: string };
}

export interface DemoResponse {
    id: string;
    valid: boolean;
    replay?: TrajectoryRow[];
    violations: { type: string; message?: string; location: [number, number] | null }[];
    tracking?: {
        max_deviation: number;
        frechet_deviation_aware: number;
        t_star: number;
    };
}

export interface RolloutResponse {
    init: { scene_id: string; robot_start: number[]; goal: number[]; seed: number };
    result: {
        outcome: "success" | "collision" | "timeout";
        robot: TrajectoryRow[];
        human: TrajectoryRow[] | null;
        return: number;
        steps: number;
        human_in_fov: boolean[];
    };
    rewards: number[];
    gamma: number;
}
