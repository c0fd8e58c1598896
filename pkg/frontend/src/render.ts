// Pure playback rendering: a frame becomes a list of draw commands so tests
// can assert on content without a canvas; a small adapter paints them.

import { GROUP_COLORS, KEY_JOINT_OF_GROUP, PARENTS } from "./skeleton.js";
import type { JobResult, TrajectorySpec, WireGroup } from "./types.js";

export type View = "top" | "side";

export interface DrawCommand {
  kind: "polyline" | "circle" | "text";
  view: View;
  style: string;
  dashed?: boolean;
  points?: [number, number][]; // view-plane coordinates (meters)
  center?: [number, number];
  radius?: number; // view-plane radius (meters)
  text?: string;
  at?: [number, number];
}

export interface FrameRender {
  commands: DrawCommand[];
  cursor: number;
  sample: number;
  dataError?: string;
}

function project(view: View, p: [number, number, number]): [number, number] {
  return view === "top" ? [p[0], p[2]] : [p[0], p[1]];
}

export function renderPlayback(
  result: JobResult,
  spec: TrajectorySpec,
  cursor: number,
  sample: number,
  thresholdM = 0.5,
): FrameRender {
  const commands: DrawCommand[] = [];
  const motion = result.motions[sample];
  if (!motion) {
    return { commands, cursor, sample, dataError: `no sample ${sample}` };
  }
  if (!motion.global_positions) {
    // client-side recovery from features is deliberately not attempted
    return { commands, cursor, sample, dataError: "motion has no global_positions" };
  }
  const frame = Math.max(0, Math.min(cursor, motion.frames - 1));
  const pose = motion.global_positions[frame] as [number, number, number][];

  for (const view of ["top", "side"] as View[]) {
    for (const control of spec.controls) {
      if (!control.waypoints.length) continue;
      commands.push({
        kind: "polyline",
        view,
        style: `traj-${control.joint_group}`,
        dashed: true,
        points: control.waypoints.map((wp) => project(view, wp.position)),
      });
    }
    for (let j = 1; j < PARENTS.length; j++) {
      commands.push({
        kind: "polyline",
        view,
        style: "bone",
        points: [project(view, pose[PARENTS[j]] as any), project(view, pose[j] as any)],
      });
    }
    for (const control of spec.controls) {
      const joint = KEY_JOINT_OF_GROUP[control.joint_group];
      for (const wp of control.waypoints) {
        const at = motion.global_positions[Math.min(wp.frame, motion.frames - 1)][joint];
        const dev = Math.hypot(
          at[0] - wp.position[0],
          at[1] - wp.position[1],
          at[2] - wp.position[2],
        );
        commands.push({
          kind: "circle",
          view,
          style: dev > thresholdM ? "keyframe-over" : "keyframe-ok",
          center: project(view, wp.position),
          radius: 0.03,
        });
      }
    }
  }
  commands.push({
    kind: "text",
    view: "top",
    style: "hud",
    text: `frame ${frame + 1}/${motion.frames}  sample ${sample + 1}/${result.motions.length}`,
    at: [0, 0],
  });
  return { commands, cursor: frame, sample };
}

/** Mean keyframe deviation (cm) as the overlay computes it, for consistency checks. */
export function overlayMeanErrorCm(result: JobResult, spec: TrajectorySpec, sample: number): number {
  const motion = result.motions[sample];
  if (!motion?.global_positions) return NaN;
  let sum = 0;
  let n = 0;
  for (const control of spec.controls) {
    const joint = KEY_JOINT_OF_GROUP[control.joint_group];
    for (const wp of control.waypoints) {
      const at = motion.global_positions[Math.min(wp.frame, motion.frames - 1)][joint];
      sum += Math.hypot(
        at[0] - wp.position[0],
        at[1] - wp.position[1],
        at[2] - wp.position[2],
      );
      n += 1;
    }
  }
  return n ? (100 * sum) / n : NaN;
}

export interface Viewport {
  width: number;
  height: number;
  scale: number; // pixels per meter
  centerX: number; // meters at canvas center (view-plane x)
  centerY: number;
}

const STYLE_COLORS: Record<string, string> = {
  bone: "#c9d1d9",
  "keyframe-ok": "#2ea043",
  "keyframe-over": "#f85149",
  hud: "#8b949e",
};

function styleColor(style: string): string {
  if (style.startsWith("traj-")) {
    return GROUP_COLORS[style.slice(5) as WireGroup] ?? "#8b949e";
  }
  return STYLE_COLORS[style] ?? "#8b949e";
}

export function drawToCanvas(
  ctx: CanvasRenderingContext2D,
  frame: FrameRender,
  view: View,
  vp: Viewport,
): void {
  const toPx = (p: [number, number]): [number, number] => [
    vp.width / 2 + (p[0] - vp.centerX) * vp.scale,
    view === "top"
      ? vp.height / 2 + (p[1] - vp.centerY) * vp.scale
      : vp.height / 2 - (p[1] - vp.centerY) * vp.scale,
  ];
  ctx.clearRect(0, 0, vp.width, vp.height);
  for (const cmd of frame.commands) {
    if (cmd.view !== view) continue;
    ctx.strokeStyle = ctx.fillStyle = styleColor(cmd.style);
    ctx.setLineDash(cmd.dashed ? [4, 4] : []);
    if (cmd.kind === "polyline" && cmd.points) {
      ctx.beginPath();
      cmd.points.forEach((p, i) => {
        const [x, y] = toPx(p);
        i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
      });
      ctx.stroke();
    } else if (cmd.kind === "circle" && cmd.center) {
      ctx.beginPath();
      const [x, y] = toPx(cmd.center);
      ctx.arc(x, y, (cmd.radius ?? 0.03) * vp.scale, 0, 2 * Math.PI);
      ctx.fill();
    } else if (cmd.kind === "text" && cmd.text && cmd.at) {
      ctx.font = "12px sans-serif";
      ctx.fillText(cmd.text, 8, 16);
    }
  }
  ctx.setLineDash([]);
}
