import { describe, expect, it } from "vitest";

import {
  buildTrajectorySpec,
  emptyScene,
  layerFrames,
  resampleStroke,
  SceneConflictError,
  ShapeLayer,
  StrokeLayer,
} from "../src/scene.js";

function circleLayer(count: number): ShapeLayer {
  return {
    kind: "shape",
    group: "root",
    shape: "circle",
    params: { cx: 0.5, cz: -0.25, radius: 1.0, turns: 1 },
    elevation: 0.9,
    frames: { start: 0, end: 59, count },
  };
}

describe("buildTrajectorySpec", () => {
  it("empty scene exports a spec with every frame masked", () => {
    const spec = buildTrajectorySpec(emptyScene(32));
    expect(spec.length).toBe(32);
    expect(spec.controls).toEqual([]);
  });

  it("circle layer at radius 1.0 over 60 frames puts every waypoint on the circle", () => {
    const scene = emptyScene(60);
    scene.layers.push(circleLayer(60));
    const spec = buildTrajectorySpec(scene);
    expect(spec.controls).toHaveLength(1);
    const control = spec.controls[0];
    expect(control.waypoints).toHaveLength(60);
    const frames = control.waypoints.map((wp) => wp.frame);
    expect(new Set(frames).size).toBe(60);
    for (const wp of control.waypoints) {
      const dx = wp.position[0] - 0.5;
      const dz = wp.position[2] + 0.25;
      expect(Math.abs(Math.hypot(dx, dz) - 1.0)).toBeLessThan(1e-6);
      expect(wp.position[1]).toBe(0.9);
    }
  });

  it("rejects two layers on one group", () => {
    const scene = emptyScene(60);
    scene.layers.push(circleLayer(10));
    scene.layers.push({ ...circleLayer(5), frames: { start: 0, end: 30, count: 5 } });
    expect(() => buildTrajectorySpec(scene)).toThrow(SceneConflictError);
  });

  it("rejects frames outside the clip", () => {
    const scene = emptyScene(30);
    scene.layers.push(circleLayer(60)); // frames run to 59
    expect(() => buildTrajectorySpec(scene)).toThrow(SceneConflictError);
  });
});

describe("layerFrames", () => {
  it("spreads frames evenly and strictly increasing", () => {
    expect(layerFrames({ start: 0, end: 9, count: 4 })).toEqual([0, 3, 6, 9]);
    expect(layerFrames({ start: 5, end: 5, count: 1 })).toEqual([5]);
  });

  it("rejects impossible assignments", () => {
    expect(() => layerFrames({ start: 0, end: 2, count: 5 })).toThrow(SceneConflictError);
    expect(() => layerFrames({ start: 4, end: 1, count: 2 })).toThrow(SceneConflictError);
  });
});

describe("resampleStroke", () => {
  it("places n waypoints at the midpoints of n equal arc-length segments", () => {
    // straight stroke of 7 points with total length 6: thirds have midpoints 1, 3, 5
    const points = Array.from({ length: 7 }, (_, i) => ({ x: i, z: 0 }));
    const out = resampleStroke(points, 3, 1.0);
    expect(out).toHaveLength(3);
    const xs = out.map((p) => p[0]);
    expect(xs[0]).toBeCloseTo(1.0, 9);
    expect(xs[1]).toBeCloseTo(3.0, 9);
    expect(xs[2]).toBeCloseTo(5.0, 9);
    for (const p of out) expect(p[1]).toBe(1.0);
  });

  it("matches an independent arc-length oracle on a bent stroke", () => {
    const points = [
      { x: 0, z: 0 },
      { x: 1, z: 0 },
      { x: 1, z: 2 },
    ]; // segment lengths 1 and 2, total 3
    const out = resampleStroke(points, 3, 0.5);
    // midpoints at s = 0.5, 1.5, 2.5 -> (0.5,0), (1,0.5), (1,1.5)
    expect(out[0][0]).toBeCloseTo(0.5, 9);
    expect(out[0][2]).toBeCloseTo(0.0, 9);
    expect(out[1][0]).toBeCloseTo(1.0, 9);
    expect(out[1][2]).toBeCloseTo(0.5, 9);
    expect(out[2][0]).toBeCloseTo(1.0, 9);
    expect(out[2][2]).toBeCloseTo(1.5, 9);
  });

  it("interpolates per-point elevations when both ends define them", () => {
    const out = resampleStroke(
      [
        { x: 0, z: 0, y: 0.0 },
        { x: 2, z: 0, y: 1.0 },
      ],
      2,
      0.9,
    );
    expect(out[0][1]).toBeCloseTo(0.25, 9);
    expect(out[1][1]).toBeCloseTo(0.75, 9);
  });

  it("rejects degenerate strokes", () => {
    expect(() => resampleStroke([{ x: 0, z: 0 }], 2, 0)).toThrow(SceneConflictError);
    expect(() =>
      resampleStroke([{ x: 1, z: 1 }, { x: 1, z: 1 }], 2, 0),
    ).toThrow(SceneConflictError);
  });
});

describe("stroke layer export", () => {
  it("assigns resampled waypoints to the layer frames", () => {
    const scene = emptyScene(16);
    const layer: StrokeLayer = {
      kind: "stroke",
      group: "left_hand",
      points: Array.from({ length: 7 }, (_, i) => ({ x: i * 0.1, z: 0.2 })),
      elevation: 1.1,
      frames: { start: 2, end: 14, count: 3 },
    };
    scene.layers.push(layer);
    const spec = buildTrajectorySpec(scene);
    expect(spec.controls[0].joint_group).toBe("left_hand");
    expect(spec.controls[0].waypoints.map((w) => w.frame)).toEqual([2, 8, 14]);
  });
});
