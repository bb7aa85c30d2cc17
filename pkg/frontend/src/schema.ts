import { z } from "zod";

/** Demonstration file schema: [t, x, y] rows for the robot stroke,
 * optional [t, x, y, theta] rows for the human, timestamps strictly
 * increasing. Matches the backend's demonstration JSON exactly. */

const increasingTimestamps = (rows: number[][]) => {
    for (let i = 1; i < rows.length; i++) {
        if (rows[i][0] <= rows[i - 1][0]) return false;
    }
    return true;
};

const finiteRow = (len: number[]) => (rows: number[][]) =>
    rows.every((r) => len.includes(r.length) && r.every(Number.isFinite));

export const robotRows = z
    .array(z.array(z.number()))
    .min(2)
    .refine(finiteRow([3, 4]), { message: "rows must be [t, x, y(, theta)] and finite" })
    .refine(increasingTimestamps, { message: "timestamps must be strictly increasing" });

export const humanRows = z
    .array(z.array(z.number()))
    .min(2)
    .refine(finiteRow([3, 4]), { message: "rows must be [t, x, y(, theta)] and finite" })
    .refine(increasingTimestamps, { message: "timestamps must be strictly increasing" });

export const demoSchema = z.object({
    scene_id: z.string().min(1),
    robot: robotRows,
    human: humanRows.nullable(),
    meta: z.object({ author: z.string().optional(), note: z.string().optional() }),
});

export type DemoSchema = z.infer<typeof demoSchema>;

export function validateDemo(payload: unknown):
    | { ok: true; demo: DemoSchema }
    | { ok: false; errors: string[] } {
    const parsed = demoSchema.safeParse(payload);
    if (parsed.success) return { ok: true, demo: parsed.data };
    return {
        ok: false,
        errors: parsed.error.issues.map((i) => `${i.path.join(".")}: ${i.message}`),
    };
}
