// Headless application core: scene editing, submission, polling, playback.
// DOM wiring lives in dom.ts; tests drive this class directly.

import { ApiClient } from "./client.js";
import {
  buildTrajectorySpec,
  EditorScene,
  emptyScene,
  StrokePoint,
  TrajectoryLayer,
} from "./scene.js";
import { FrameRender, renderPlayback } from "./render.js";
import type { GenerationRequest, JobSnapshot, TrajectorySpec, WireGroup } from "./types.js";

export type AppPhase = "editing" | "polling" | "done" | "error";

export class AppCore {
  scene: EditorScene;
  phase: AppPhase = "editing";
  lastSnapshot: JobSnapshot | null = null;
  lastSpec: TrajectorySpec | null = null;
  errorMessage: string | null = null;
  onUpdate: (() => void) | null = null;
  private polling = false;

  constructor(
    public client: ApiClient,
    length = 64,
  ) {
    this.scene = emptyScene(length);
  }

  setPrompt(text: string): void {
    this.scene.prompt = text;
  }

  addLayer(layer: TrajectoryLayer): void {
    if (this.scene.layers.some((l) => l.group === layer.group)) {
      throw new Error(`layer for ${layer.group} already exists`);
    }
    this.scene.layers.push(layer);
  }

  removeLayer(group: WireGroup): void {
    this.scene.layers = this.scene.layers.filter((l) => l.group !== group);
  }

  addStrokePoint(group: WireGroup, point: StrokePoint, frames?: { start: number; end: number }): void {
    let layer = this.scene.layers.find((l) => l.group === group);
    if (!layer) {
      layer = {
        kind: "stroke",
        group,
        points: [],
        elevation: group === "root" ? 0.9 : 1.0,
        frames: {
          start: frames?.start ?? 0,
          end: frames?.end ?? this.scene.length - 1,
          count: 0,
        },
      };
      this.scene.layers.push(layer);
    }
    if (layer.kind !== "stroke") throw new Error(`layer for ${group} is parametric`);
    layer.points.push(point);
    layer.frames.count = Math.min(layer.points.length, layer.frames.end - layer.frames.start + 1);
  }

  moveWaypoint(group: WireGroup, index: number, point: StrokePoint): void {
    const layer = this.scene.layers.find((l) => l.group === group);
    if (!layer || layer.kind !== "stroke") throw new Error(`no stroke layer for ${group}`);
    layer.points[index] = { ...layer.points[index], ...point };
  }

  buildSpec(): TrajectorySpec {
    return buildTrajectorySpec(this.scene);
  }

  buildRequest(): GenerationRequest {
    return {
      text: this.scene.prompt,
      trajectory: this.buildSpec(),
      seed: this.scene.seed,
      num_samples: this.scene.numSamples,
      optimize: { tolerance: this.scene.tolerance, max_iterations: 1000 },
    };
  }

  /** Submit the scene and poll to a terminal state; one in-flight loop. */
  async submitAndPoll(intervalMs = 200): Promise<JobSnapshot> {
    if (this.polling) throw new Error("a job is already in flight");
    const request = this.buildRequest();
    this.lastSpec = request.trajectory;
    this.errorMessage = null;
    this.polling = true;
    this.phase = "polling";
    this.onUpdate?.();
    try {
      const id = await this.client.submitJob(request);
      this.scene.lastJobId = id;
      const snap = await this.client.pollUntilDone(id, {
        intervalMs,
        onUpdate: (s) => {
          this.lastSnapshot = s;
          this.onUpdate?.();
        },
      });
      this.lastSnapshot = snap;
      if (snap.status === "done" && snap.result) {
        this.scene.result = snap.result;
        this.scene.playback.sample = 0;
        this.phase = "done";
      } else {
        this.errorMessage = snap.error ?? `job ${snap.status}`;
        this.phase = "error";
      }
      return snap;
    } catch (err) {
      this.phase = "error";
      this.errorMessage = String(err);
      throw err;
    } finally {
      this.polling = false;
      this.onUpdate?.();
    }
  }

  setCursor(frame: number): void {
    this.scene.playback.cursor = frame;
  }

  selectSample(index: number): void {
    // switching samples preserves the cursor (and the camera, which is static state)
    const count = this.scene.result?.motions.length ?? 0;
    if (count) this.scene.playback.sample = ((index % count) + count) % count;
  }

  stepPlayback(): void {
    const motion = this.scene.result?.motions[this.scene.playback.sample];
    if (!motion) return;
    this.scene.playback.cursor = (this.scene.playback.cursor + 1) % motion.frames;
  }

  renderCurrent(thresholdM = 0.5): FrameRender | null {
    if (!this.scene.result || !this.lastSpec) return null;
    return renderPlayback(
      this.scene.result,
      this.lastSpec,
      this.scene.playback.cursor,
      this.scene.playback.sample,
      thresholdM,
    );
  }

  progressText(): string {
    const snap = this.lastSnapshot;
    if (!snap) return "";
    const tail = snap.trace_tail?.objective ?? [];
    const last = tail.length ? ` obj ${tail[tail.length - 1].toExponential(2)}` : "";
    return `${snap.status} ${(snap.progress * 100).toFixed(0)}%${last}`;
  }
}
