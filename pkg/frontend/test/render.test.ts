import { describe, expect, it } from "vitest";

import { overlayMeanErrorCm, renderPlayback } from "../src/render.js";
import { KEY_JOINT_OF_GROUP, PARENTS } from "../src/skeleton.js";
import type { JobResult, TrajectorySpec } from "../src/types.js";

function makeResult(frames = 4, joints = 22, jitter = 0): JobResult {
  const positions = Array.from({ length: frames }, (_, t) =>
    Array.from({ length: joints }, (_, j) => [0.1 * j + jitter * t, 0.9, 0.05 * j]),
  );
  return {
    motions: [
      {
        fps: 20,
        num_joints: joints,
        frames,
        feature_dim: 137,
        features: Array.from({ length: frames }, () => Array(137).fill(0)),
        global_positions: positions,
      },
    ],
    per_sample: [{ seed_index: 0 }],
    control_errors: null,
  };
}

function specWithRootWaypoint(frame: number, position: [number, number, number]): TrajectorySpec {
  return {
    length: 4,
    controls: [{ joint_group: "root", waypoints: [{ frame, position }] }],
  };
}

describe("renderPlayback", () => {
  it("is a pure function of its inputs", () => {
    const result = makeResult();
    const spec = specWithRootWaypoint(1, [0, 0.9, 0]);
    const a = renderPlayback(result, spec, 0, 0);
    const b = renderPlayback(result, spec, 0, 0);
    expect(a).toEqual(b);
  });

  it("draws one bone per non-root joint in each view", () => {
    const frame = renderPlayback(makeResult(), { length: 4, controls: [] }, 0, 0);
    const bones = frame.commands.filter((c) => c.style === "bone");
    expect(bones).toHaveLength(2 * (PARENTS.length - 1));
  });

  it("marks keyframes over the threshold with the over style", () => {
    const result = makeResult();
    const rootAt0 = result.motions[0].global_positions![0][KEY_JOINT_OF_GROUP.root];
    const near: [number, number, number] = [rootAt0[0] + 0.1, rootAt0[1], rootAt0[2]];
    const far: [number, number, number] = [rootAt0[0] + 0.6, rootAt0[1], rootAt0[2]];
    const okFrame = renderPlayback(result, specWithRootWaypoint(0, near), 0, 0);
    const overFrame = renderPlayback(result, specWithRootWaypoint(0, far), 0, 0);
    expect(okFrame.commands.some((c) => c.style === "keyframe-ok")).toBe(true);
    expect(okFrame.commands.some((c) => c.style === "keyframe-over")).toBe(false);
    expect(overFrame.commands.some((c) => c.style === "keyframe-over")).toBe(true);
  });

  it("draws input trajectories as dashed polylines", () => {
    const spec: TrajectorySpec = {
      length: 4,
      controls: [
        {
          joint_group: "left_hand",
          waypoints: [
            { frame: 0, position: [0, 1, 0] },
            { frame: 2, position: [0.5, 1, 0.2] },
          ],
        },
      ],
    };
    const frame = renderPlayback(makeResult(), spec, 0, 0);
    const dashed = frame.commands.filter((c) => c.dashed && c.style === "traj-left_hand");
    expect(dashed.length).toBeGreaterThan(0);
  });

  it("reports a data error instead of deriving missing positions", () => {
    const result = makeResult();
    delete result.motions[0].global_positions;
    const frame = renderPlayback(result, { length: 4, controls: [] }, 0, 0);
    expect(frame.dataError).toMatch(/global_positions/);
    expect(frame.commands).toHaveLength(0);
  });

  it("clamps the cursor into the motion", () => {
    const frame = renderPlayback(makeResult(4), { length: 4, controls: [] }, 99, 0);
    expect(frame.cursor).toBe(3);
  });
});

describe("overlayMeanErrorCm", () => {
  it("averages keyframe deviations in centimeters", () => {
    const result = makeResult();
    const rootAt0 = result.motions[0].global_positions![0][KEY_JOINT_OF_GROUP.root];
    const spec = specWithRootWaypoint(0, [rootAt0[0] + 0.25, rootAt0[1], rootAt0[2]]);
    expect(overlayMeanErrorCm(result, spec, 0)).toBeCloseTo(25.0, 6);
  });
});
