/** JSON shapes spoken by the session service. */

export interface MorphAssets {
  model_id: string;
  base_weight_kg: number;
  bounds_kg: [number, number];
  vertex_count: number;
  faces: number[][];
  base_vertices: number[][];
  delta_grid_kg: number[];
  buffers: number[][][];
}

export interface TrialDescriptor {
  status: "running" | "completed";
  trial_index: number;
  trial_count: number;
  kind?: "pet" | "amt";
  method?: "gesture" | "joystick" | "objects" | null;
  target_kg?: number;
  current_kg?: number;
  presented?: boolean | null;
}

/** Passive-trial presentation: morph-grid blend only, never a weight. */
export interface MorphPayload {
  type: "morph";
  t: number;
  lo: number;
  hi: number;
  alpha: number;
}

export type ModMethod = "gesture" | "joystick" | "objects";

export interface InputMessage {
  type: "input";
  t: number;
  method: ModMethod;
  triggers?: boolean;
  rate?: number;
  side?: "left" | "right";
  tilt?: number;
  touching?: "plus" | "minus" | null;
}

export interface WeightTick {
  type: "weight";
  t: number;
  kg: number;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type StreamMessage = WeightTick | ErrorMessage;

export interface SessionReport {
  n_records: number;
  by_kind: Record<string, {
    n: number;
    mean_signed_pct: number;
    mean_absolute_pct: number;
    regression: unknown;
  }>;
  amt_by_method?: Record<string, {
    n: number;
    mean_signed_pct: number;
    mean_absolute_pct: number;
  }>;
}
