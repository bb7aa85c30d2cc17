import { validateDemo } from "./schema";
import type { DemoPayload, DemoResponse, RolloutResponse, SceneData } from "./types";

/**
 * Thin typed client for the local demonstration service. All
 * persistence flows through these endpoints; the UI never writes files
 * itself. Submitted demos are schema-validated before they leave the
 * client.
 */
export class ApiClient {
    constructor(
        private baseUrl: string,
        private fetchFn: typeof fetch = fetch,
    ) {}

    private async getJson<T>(path: string): Promise<T> {
        const resp = await this.fetchFn(`${this.baseUrl}${path}`);
        if (!resp.ok) throw new Error(`GET ${path} -> ${resp.status}`);
        return (await resp.json()) as T;
    }

    listScenes(): Promise<{ id: string }[]> {
        return this.getJson("/scenes");
    }

    getScene(id: string): Promise<SceneData> {
        return this.getJson(`/scenes/${encodeURIComponent(id)}`);
    }

    listDemos(sceneId?: string): Promise<{ id: string; scene_id: string; valid: boolean }[]> {
        const q = sceneId ? `?scene=${encodeURIComponent(sceneId)}` : "";
        return this.getJson(`/demos${q}`);
    }

    listPolicies(): Promise<string[]> {
        return this.getJson("/policies");
    }

    /**
     * Submit a drawn demonstration. Resolves with the server verdict
     * for both 200 (valid) and 422 (rejected with violations); other
     * statuses reject the promise.
     */
    async submitDemo(payload: DemoPayload): Promise<DemoResponse> {
        const check = validateDemo(payload);
        if (!check.ok) {
            throw new Error(`demo payload invalid: ${check.errors.join("; ")}`);
        }
        const resp = await this.fetchFn(`${this.baseUrl}/demos`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(payload),
        });
        if (resp.status === 422) {
            const body = await resp.json();
            // FastAPI wraps handler payloads raised as HTTP errors
            return (body.detail ?? body) as DemoResponse;
        }
        if (!resp.ok) throw new Error(`POST /demos -> ${resp.status}`);
        return (await resp.json()) as DemoResponse;
    }

    async runRollout(req: {
        policy_id: string;
        scene_id: string;
        seed: number;
        demo_id?: string;
    }): Promise<RolloutResponse> {
        const resp = await this.fetchFn(`${this.baseUrl}/rollouts`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(req),
        });
        if (!resp.ok) throw new Error(`POST /rollouts -> ${resp.status}`);
        return (await resp.json()) as RolloutResponse;
    }
}
