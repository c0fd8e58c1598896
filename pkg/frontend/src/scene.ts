// Editor scene state and its export to the TrajectorySpec wire form.
//
// A layer is either a parametric shape (circle / line / arc / spiral on the
// ground plane with an elevation) or a hand-drawn stroke. Shapes are sampled
// at the layer's frame range; strokes are resampled by arc length at the
// midpoints of equal-length segments, so n frames land on the n segment
// centers of the stroke.

import type { Control, JobResult, TrajectorySpec, Waypoint, WireGroup } from "./types.js";

export type ShapeKind = "circle" | "line" | "arc" | "spiral";

export interface FrameRange {
  start: number;
  end: number; // inclusive
  count: number;
}

export interface ShapeParams {
  cx: number;
  cz: number;
  radius: number; // circle/arc/spiral start radius; line: unused
  radiusEnd?: number; // spiral end radius
  startAngle?: number; // radians
  endAngle?: number; // arc end angle
  turns?: number; // circle/spiral revolutions
  x0?: number;
  z0?: number;
  x1?: number;
  z1?: number; // line endpoints
}

export interface ShapeLayer {
  kind: "shape";
  group: WireGroup;
  shape: ShapeKind;
  params: ShapeParams;
  elevation: number; // meters above ground, per-layer
  frames: FrameRange;
}

export interface StrokePoint {
  x: number;
  z: number;
  y?: number; // optional per-point elevation override
}

export interface StrokeLayer {
  kind: "stroke";
  group: WireGroup;
  points: StrokePoint[];
  elevation: number;
  frames: FrameRange;
}

export type TrajectoryLayer = ShapeLayer | StrokeLayer;

export interface PlaybackState {
  cursor: number;
  playing: boolean;
  sample: number;
}

export interface EditorScene {
  prompt: string;
  length: number;
  seed: number;
  numSamples: number;
  tolerance: number;
  layers: TrajectoryLayer[];
  playback: PlaybackState;
  lastJobId: string | null;
  result: JobResult | null;
}

export class SceneConflictError extends Error {}

export function emptyScene(length = 64): EditorScene {
  return {
    prompt: "",
    length,
    seed: 0,
    numSamples: 1,
    tolerance: 1e-6,
    layers: [],
    playback: { cursor: 0, playing: false, sample: 0 },
    lastJobId: null,
    result: null,
  };
}

export function layerFrames(range: FrameRange): number[] {
  if (range.count < 1) throw new SceneConflictError("frame count must be >= 1");
  if (range.end < range.start) throw new SceneConflictError("frame range is reversed");
  if (range.count === 1) return [Math.round((range.start + range.end) / 2)];
  const frames: number[] = [];
  for (let i = 0; i < range.count; i++) {
    frames.push(Math.round(range.start + (i * (range.end - range.start)) / (range.count - 1)));
  }
  for (let i = 1; i < frames.length; i++) {
    if (frames[i] <= frames[i - 1]) {
      throw new SceneConflictError(
        `frame assignments must be strictly increasing (count ${range.count} over ` +
          `[${range.start}, ${range.end}])`,
      );
    }
  }
  return frames;
}

export function sampleShape(layer: ShapeLayer, t: number): [number, number, number] {
  const p = layer.params;
  switch (layer.shape) {
    case "circle": {
      const turns = p.turns ?? 1;
      const a = (p.startAngle ?? 0) + 2 * Math.PI * turns * t;
      return [p.cx + p.radius * Math.cos(a), layer.elevation, p.cz + p.radius * Math.sin(a)];
    }
    case "arc": {
      const a0 = p.startAngle ?? 0;
      const a1 = p.endAngle ?? Math.PI;
      const a = a0 + (a1 - a0) * t;
      return [p.cx + p.radius * Math.cos(a), layer.elevation, p.cz + p.radius * Math.sin(a)];
    }
    case "spiral": {
      const turns = p.turns ?? 2;
      const a = (p.startAngle ?? 0) + 2 * Math.PI * turns * t;
      const r = p.radius + ((p.radiusEnd ?? 0) - p.radius) * t;
      return [p.cx + r * Math.cos(a), layer.elevation, p.cz + r * Math.sin(a)];
    }
    case "line": {
      const x = (p.x0 ?? 0) + ((p.x1 ?? 0) - (p.x0 ?? 0)) * t;
      const z = (p.z0 ?? 0) + ((p.z1 ?? 0) - (p.z0 ?? 0)) * t;
      return [x, layer.elevation, z];
    }
  }
}

export function resampleStroke(
  points: StrokePoint[],
  count: number,
  elevation: number,
): [number, number, number][] {
  if (points.length < 2) throw new SceneConflictError("stroke needs at least two points");
  const lengths: number[] = [0];
  let total = 0;
  for (let i = 1; i < points.length; i++) {
    const dx = points[i].x - points[i - 1].x;
    const dz = points[i].z - points[i - 1].z;
    total += Math.hypot(dx, dz);
    lengths.push(total);
  }
  if (total === 0) throw new SceneConflictError("stroke has zero length");
  const out: [number, number, number][] = [];
  for (let i = 0; i < count; i++) {
    const s = ((i + 0.5) * total) / count; // midpoint of segment i of count
    let seg = 1;
    while (seg < lengths.length - 1 && lengths[seg] < s) seg++;
    const t = (s - lengths[seg - 1]) / (lengths[seg] - lengths[seg - 1]);
    const a = points[seg - 1];
    const b = points[seg];
    const y = a.y !== undefined && b.y !== undefined
      ? a.y + (b.y - a.y) * t
      : elevation;
    out.push([a.x + (b.x - a.x) * t, y, a.z + (b.z - a.z) * t]);
  }
  return out;
}

export function layerWaypoints(layer: TrajectoryLayer): Waypoint[] {
  const frames = layerFrames(layer.frames);
  let positions: [number, number, number][];
  if (layer.kind === "shape") {
    positions = frames.map((_, i) =>
      sampleShape(layer, frames.length === 1 ? 0 : i / (frames.length - 1)),
    );
  } else {
    positions = resampleStroke(layer.points, frames.length, layer.elevation);
  }
  return frames.map((frame, i) => ({ frame, position: positions[i] }));
}

export function buildTrajectorySpec(scene: EditorScene): TrajectorySpec {
  const seen = new Set<WireGroup>();
  const controls: Control[] = [];
  for (const layer of scene.layers) {
    if (seen.has(layer.group)) {
      throw new SceneConflictError(`two layers target the ${layer.group} group`);
    }
    seen.add(layer.group);
    const waypoints = layerWaypoints(layer);
    for (const wp of waypoints) {
      if (wp.frame < 0 || wp.frame >= scene.length) {
        throw new SceneConflictError(
          `frame ${wp.frame} outside the clip length ${scene.length}`,
        );
      }
    }
    controls.push({ joint_group: layer.group, waypoints });
  }
  return { length: scene.length, controls };
}
