// Browser wiring: canvas input, controls, playback loop, progress display.

import { AppCore } from "./app.js";
import { drawToCanvas, Viewport } from "./render.js";
import { GROUP_COLORS } from "./skeleton.js";
import type { WireGroup } from "./types.js";
import { WIRE_GROUPS } from "./types.js";

export function mountApp(root: HTMLElement, app: AppCore): void {
  root.innerHTML = `
    <div class="toolbar">
      <input id="prompt" type="text" placeholder="describe the motion, e.g. 'a person walks in a circle to the left'"/>
      <select id="group"></select>
      <label>elev <input id="elevation" type="number" step="0.05" value="0.9" style="width:4.5em"/></label>
      <label>frames <input id="length" type="number" value="${app.scene.length}" style="width:4.5em"/></label>
      <label>seed <input id="seed" type="number" value="0" style="width:4em"/></label>
      <label>samples <input id="samples" type="number" value="1" min="1" max="8" style="width:3.5em"/></label>
      <button id="circle">+ circle</button>
      <button id="clear">clear layer</button>
      <button id="submit">generate</button>
      <span id="status"></span>
    </div>
    <div class="panes">
      <canvas id="top" width="640" height="480"></canvas>
      <canvas id="side" width="320" height="480"></canvas>
    </div>
    <div class="playbar">
      <button id="play">play</button>
      <input id="scrub" type="range" min="0" value="0"/>
      <button id="prev">&lt; sample</button>
      <button id="next">sample &gt;</button>
      <span id="errors"></span>
    </div>`;

  const el = <T extends HTMLElement>(id: string) => root.querySelector(`#${id}`) as T;
  const groupSel = el<HTMLSelectElement>("group");
  for (const g of WIRE_GROUPS) {
    const opt = document.createElement("option");
    opt.value = g;
    opt.textContent = g;
    opt.style.color = GROUP_COLORS[g];
    groupSel.appendChild(opt);
  }

  const topCanvas = el<HTMLCanvasElement>("top");
  const sideCanvas = el<HTMLCanvasElement>("side");
  const topVp: Viewport = { width: 640, height: 480, scale: 120, centerX: 1.0, centerY: 0 };
  const sideVp: Viewport = { width: 320, height: 480, scale: 120, centerX: 1.0, centerY: 0.9 };

  const repaint = () => {
    el<HTMLSpanElement>("status").textContent = app.errorMessage ?? app.progressText();
    const frame = app.renderCurrent();
    if (frame) {
      if (frame.dataError) {
        el<HTMLSpanElement>("errors").textContent = `data error: ${frame.dataError}`;
        return;
      }
      drawToCanvas(topCanvas.getContext("2d")!, frame, "top", topVp);
      drawToCanvas(sideCanvas.getContext("2d")!, frame, "side", sideVp);
      const motion = app.scene.result!.motions[app.scene.playback.sample];
      el<HTMLInputElement>("scrub").max = String(motion.frames - 1);
      el<HTMLInputElement>("scrub").value = String(frame.cursor);
      const errs = app.scene.result!.control_errors;
      el<HTMLSpanElement>("errors").textContent = errs
        ? `avg err ${errs.avg_err_cm.toFixed(1)} cm (threshold ${100 * errs.threshold_m} cm)`
        : "";
    } else {
      drawSceneOnly();
    }
  };
  app.onUpdate = repaint;

  const drawSceneOnly = () => {
    const ctx = topCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, topVp.width, topVp.height);
    for (const layer of app.scene.layers) {
      if (layer.kind !== "stroke") continue;
      ctx.strokeStyle = GROUP_COLORS[layer.group];
      ctx.setLineDash([4, 4]);
      ctx.beginPath();
      layer.points.forEach((p, i) => {
        const x = topVp.width / 2 + (p.x - topVp.centerX) * topVp.scale;
        const y = topVp.height / 2 + (p.z - topVp.centerY) * topVp.scale;
        i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
      });
      ctx.stroke();
    }
    ctx.setLineDash([]);
  };

  topCanvas.addEventListener("click", (ev) => {
    const rect = topCanvas.getBoundingClientRect();
    const x = (ev.clientX - rect.left - topVp.width / 2) / topVp.scale + topVp.centerX;
    const z = (ev.clientY - rect.top - topVp.height / 2) / topVp.scale + topVp.centerY;
    const group = groupSel.value as WireGroup;
    const elev = Number(el<HTMLInputElement>("elevation").value);
    app.addStrokePoint(group, { x, z, y: elev });
    drawSceneOnly();
  });

  el<HTMLButtonElement>("circle").addEventListener("click", () => {
    const group = groupSel.value as WireGroup;
    app.removeLayer(group);
    app.addLayer({
      kind: "shape",
      group,
      shape: "circle",
      params: { cx: 1.0, cz: 0, radius: 1.0, turns: 1 },
      elevation: Number(el<HTMLInputElement>("elevation").value),
      frames: { start: 0, end: app.scene.length - 1, count: Math.min(32, app.scene.length) },
    });
    drawSceneOnly();
  });

  el<HTMLButtonElement>("clear").addEventListener("click", () => {
    app.removeLayer(groupSel.value as WireGroup);
    drawSceneOnly();
  });

  el<HTMLInputElement>("prompt").addEventListener("input", (ev) => {
    app.setPrompt((ev.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("length").addEventListener("change", (ev) => {
    app.scene.length = Number((ev.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("seed").addEventListener("change", (ev) => {
    app.scene.seed = Number((ev.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("samples").addEventListener("change", (ev) => {
    app.scene.numSamples = Number((ev.target as HTMLInputElement).value);
  });

  el<HTMLButtonElement>("submit").addEventListener("click", () => {
    app.submitAndPoll().catch(() => repaint());
  });

  let playing = false;
  let raf = 0;
  const tick = () => {
    if (!playing) return;
    app.stepPlayback();
    repaint();
    raf = requestAnimationFrame(tick);
  };
  el<HTMLButtonElement>("play").addEventListener("click", (ev) => {
    playing = !playing;
    (ev.target as HTMLButtonElement).textContent = playing ? "pause" : "play";
    if (playing) raf = requestAnimationFrame(tick);
    else cancelAnimationFrame(raf);
  });
  el<HTMLInputElement>("scrub").addEventListener("input", (ev) => {
    app.setCursor(Number((ev.target as HTMLInputElement).value));
    repaint();
  });
  el<HTMLButtonElement>("prev").addEventListener("click", () => {
    app.selectSample(app.scene.playback.sample - 1);
    repaint();
  });
  el<HTMLButtonElement>("next").addEventListener("click", () => {
    app.selectSample(app.scene.playback.sample + 1);
    repaint();
  });

  repaint();
}
