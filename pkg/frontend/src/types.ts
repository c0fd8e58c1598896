// Wire types mirroring the /api/v1 JSON schemas.

export type WireGroup =
  | "root"
  | "head"
  | "left_hand"
  | "right_hand"
  | "left_foot"
  | "right_foot";

export const WIRE_GROUPS: WireGroup[] = [
  "root",
  "head",
  "left_hand",
  "right_hand",
  "left_foot",
  "right_foot",
];

export interface Waypoint {
  frame: number;
  position: [number, number, number];
}

export interface Control {
  joint_group: WireGroup;
  waypoints: Waypoint[];
}

export interface TrajectorySpec {
  length: number;
  controls: Control[];
}

export interface OptimizeSettings {
  tolerance: number;
  max_iterations: number;
}

export interface GenerationRequest {
  text: string;
  trajectory: TrajectorySpec;
  seed: number;
  num_samples: number;
  optimize: OptimizeSettings;
}

export interface MotionJson {
  fps: number;
  num_joints: number;
  frames: number;
  feature_dim: number;
  features: number[][];
  global_positions?: number[][][];
}

export interface ControlErrors {
  traj_err_fraction: number;
  loc_err_fraction: number;
  avg_err_cm: number;
  threshold_m: number;
}

export interface PerSampleEntry {
  seed_index: number;
  trace?: {
    objective: number[];
    grad_norm: number[];
    iterations: number;
    converged: boolean;
  };
  control_errors?: ControlErrors;
}

export interface JobResult {
  motions: MotionJson[];
  per_sample: PerSampleEntry[];
  control_errors: ControlErrors | null;
}

export type JobStatus = "pending" | "running" | "done" | "error" | "cancelled";

export interface JobSnapshot {
  id: string;
  status: JobStatus;
  progress: number;
  trace_tail: { objective: number[] };
  result: JobResult | null;
  error: string | null;
}
