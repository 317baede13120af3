/**
 * Annotator bootstrap: one canvas, keyboard-first controls, server state
 * as the single source of truth.  Every accepted click goes straight to
 * the service; the overlay repaints from the server's annotation map, so
 * a reload always reproduces exactly what was acknowledged.
 */

import { AnnoClient } from "./api.js";
import { drawAnnotations, drawDetections, jointColor, outlierJointsAt } from "./overlay.js";
import * as st from "./state.js";
import { insideImage, panBy, toDisplay, toImage, zoomAt } from "./transform.js";
import { AnnotationMap, GroundTruthDoc, OutlierMap, SessionInfo } from "./types.js";

const client = new AnnoClient("");

interface App {
  session: SessionInfo;
  /** session id serving each stream; both map to the primary until the pair resolves */
  streams: Record<st.Stream, string>;
  state: st.ViewState;
  annotations: AnnotationMap;
  detections: GroundTruthDoc | null;
  outliers: OutlierMap;
  frames: Map<string, HTMLImageElement>;
  canvas: HTMLCanvasElement;
  status: HTMLElement;
}

let app: App | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false) {
  const status = el<HTMLElement>("status");
  status.textContent = text;
  status.className = isError ? "error" : "";
}

function frameKey(stream: string, frame: number): string {
  return `${stream}:${frame}`;
}

async function loadFrame(a: App, frame: number): Promise<HTMLImageElement> {
  const key = frameKey(a.state.stream, frame);
  const cached = a.frames.get(key);
  if (cached) return cached;
  const img = new Image();
  await new Promise<void>((resolve, reject) => {
    img.onload = () => resolve();
    img.onerror = () => reject(new Error(`failed to fetch frame ${frame}`));
    img.src = client.frameUrl(a.streams[a.state.stream], frame);
  });
  if (a.frames.size > 64) a.frames.clear();
  a.frames.set(key, img);
  return img;
}

function manifestStream(manifest: string): st.Stream {
  return /(^|\/)on\.json$/.test(manifest) ? "on" : "off";
}

/**
 * Annotation happens on the session the user opened; the counterpart
 * stream (same demux directory, index-aligned frames) is served by a
 * read-only sibling session created on demand.
 */
async function ensurePairedSession(a: App, manifest: string, operator: string) {
  const mine = manifestStream(manifest);
  const other: st.Stream = mine === "on" ? "off" : "on";
  const otherManifest = manifest.replace(/(on|off)\.json$/, `${other}.json`);
  if (otherManifest === manifest) return;
  try {
    const info = await client.createSession(otherManifest, operator + ":readonly");
    a.streams[other] = info.id;
  } catch {
    /* stream toggle simply redisplays the same sequence */
  }
}

async function repaint() {
  if (!app) return;
  const a = app;
  const ctx = a.canvas.getContext("2d")!;
  ctx.fillStyle = "#181818";
  ctx.fillRect(0, 0, a.canvas.width, a.canvas.height);
  let img: HTMLImageElement;
  try {
    img = await loadFrame(a, a.state.frame);
  } catch (e) {
    setStatus(String(e), true);
    return;
  }
  const t = a.state.transform;
  const origin = toDisplay(t, 0, 0);
  ctx.imageSmoothingEnabled = t.zoom < 1;
  ctx.drawImage(img, origin.x, origin.y, a.session.width * t.zoom, a.session.height * t.zoom);

  if (a.state.overlays.detections && a.detections) {
    drawDetections(ctx, t, a.detections, a.state.frame);
  }
  if (a.state.overlays.annotations) {
    drawAnnotations(ctx, t, a.annotations, a.state.frame, st.activeJoint(a.state));
  }
  paintSidebar(a);
}

function paintSidebar(a: App) {
  const list = el<HTMLElement>("joints");
  list.innerHTML = "";
  const anns = a.annotations[String(a.state.frame)] ?? {};
  for (const joint of a.state.joints) {
    const li = document.createElement("li");
    const mark = joint in anns ? (anns[joint].visible ? "+" : "~") : "·";
    li.textContent = `${mark} ${joint}`;
    li.style.color = jointColor(joint);
    if (joint === st.activeJoint(a.state)) li.className = "active";
    li.onclick = () => {
      a.state = st.setJoint(a.state, joint);
      void repaint();
    };
    list.appendChild(li);
  }
  const outlierJoints = a.state.overlays.outliers
    ? outlierJointsAt(a.outliers, a.state.frame)
    : [];
  el<HTMLElement>("frameinfo").textContent =
    `frame ${a.state.frame + 1}/${a.state.frameCount}  [${a.state.stream}]` +
    (outlierJoints.length ? `  outlier: ${outlierJoints.join(", ")}` : "");
}

async function annotateClick(displayX: number, displayY: number) {
  if (!app) return;
  const a = app;
  const p = toImage(a.state.transform, displayX, displayY);
  if (!insideImage(p.x, p.y, a.session.width, a.session.height)) return;
  const joint = st.activeJoint(a.state);
  try {
    await client.putAnnotation(a.session.id, a.state.frame, joint, { x: p.x, y: p.y, visible: true });
  } catch (e) {
    setStatus(String(e), true);
    return;
  }
  a.annotations = await client.getAnnotations(a.session.id);
  a.state = st.advanceAfterAnnotate(a.state, a.annotations);
  setStatus(`${joint} @ (${p.x.toFixed(1)}, ${p.y.toFixed(1)}) on frame ${a.state.frame}`);
  void repaint();
}

async function markInvisible() {
  if (!app) return;
  const a = app;
  const joint = st.activeJoint(a.state);
  try {
    await client.putAnnotation(a.session.id, a.state.frame, joint, { visible: false });
  } catch (e) {
    setStatus(String(e), true);
    return;
  }
  a.annotations = await client.getAnnotations(a.session.id);
  a.state = st.advanceAfterAnnotate(a.state, a.annotations);
  setStatus(`${joint} marked not visible on frame ${a.state.frame}`);
  void repaint();
}

function bindKeyboard() {
  window.addEventListener("keydown", (ev) => {
    if (!app) return;
    const a = app;
    if ((ev.target as HTMLElement).tagName === "INPUT") return;
    const step = ev.shiftKey ? 10 : 1;
    switch (ev.key) {
      case "ArrowRight":
      case ".":
        a.state = st.scrub(a.state, step);
        break;
      case "ArrowLeft":
      case ",":
        a.state = st.scrub(a.state, -step);
        break;
      case "Tab":
        a.state = st.cycleJoint(a.state, ev.shiftKey ? -1 : 1);
        ev.preventDefault();
        break;
      case "j":
        a.state = st.cycleJoint(a.state, 1);
        break;
      case "J":
        a.state = st.cycleJoint(a.state, -1);
        break;
      case "v":
        void markInvisible();
        return;
      case "s":
        a.state = st.toggleStream(a.state);
        break;
      case "a":
        a.state = st.toggleOverlay(a.state, "annotations");
        break;
      case "d":
        a.state = st.toggleOverlay(a.state, "detections");
        break;
      case "o":
        a.state = st.toggleOverlay(a.state, "outliers");
        break;
      case "n": {
        const next = st.nextOutlierFrame(a.outliers, a.state.frame + 1, a.state.frameCount);
        if (next !== null) a.state = { ...a.state, frame: next };
        break;
      }
      case "+":
      case "=":
        a.state = st.withTransform(
          a.state,
          zoomAt(a.state.transform, 2, a.canvas.width / 2, a.canvas.height / 2)
        );
        break;
      case "-":
        a.state = st.withTransform(
          a.state,
          zoomAt(a.state.transform, 0.5, a.canvas.width / 2, a.canvas.height / 2)
        );
        break;
      default:
        return;
    }
    ev.preventDefault();
    void repaint();
  });
}

function bindCanvas(canvas: HTMLCanvasElement) {
  let panning: { x: number; y: number } | null = null;

  canvas.addEventListener("mousedown", (ev) => {
    if (ev.button === 1 || ev.shiftKey) {
      panning = { x: ev.offsetX, y: ev.offsetY };
      ev.preventDefault();
    }
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (panning && app) {
      app.state = st.withTransform(
        app.state,
        panBy(app.state.transform, ev.offsetX - panning.x, ev.offsetY - panning.y)
      );
      panning = { x: ev.offsetX, y: ev.offsetY };
      void repaint();
    }
  });
  window.addEventListener("mouseup", () => (panning = null));
  canvas.addEventListener("click", (ev) => {
    if (!panning && !ev.shiftKey) void annotateClick(ev.offsetX, ev.offsetY);
  });
  canvas.addEventListener("wheel", (ev) => {
    if (!app) return;
    app.state = st.withTransform(
      app.state,
      zoomAt(app.state.transform, ev.deltaY < 0 ? 1.25 : 0.8, ev.offsetX, ev.offsetY)
    );
    ev.preventDefault();
    void repaint();
  });
}

function bindOutlierFile() {
  el<HTMLInputElement>("outliers-file").addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file || !app) return;
    try {
      const doc = JSON.parse(await file.text());
      // accept either a bare map or the eval summary layout
      app.outliers = (doc.outlier_frames ?? doc) as OutlierMap;
      app.state = st.toggleOverlay(app.state, "outliers");
      if (!app.state.overlays.outliers) app.state = st.toggleOverlay(app.state, "outliers");
      setStatus(`loaded outlier flags for ${Object.keys(app.outliers).length} joints`);
      void repaint();
    } catch (e) {
      setStatus(`could not parse outliers file: ${e}`, true);
    }
  });
}

async function openSession(manifest: string, operator: string) {
  const info = await client.createSession(manifest, operator);
  const canvas = el<HTMLCanvasElement>("view");
  canvas.width = Math.max(info.width, 640);
  canvas.height = Math.max(info.height, 480);
  const state = st.initialState(info.joints, info.frame_count);
  state.stream = manifestStream(manifest);
  app = {
    session: info,
    streams: { on: info.id, off: info.id },
    state,
    annotations: await client.getAnnotations(info.id),
    detections: await client.getDetections(info.id),
    outliers: {},
    frames: new Map(),
    canvas,
    status: el<HTMLElement>("status"),
  };
  await ensurePairedSession(app, manifest, operator);
  window.location.hash = `session=${info.id}`;
  el<HTMLElement>("setup").style.display = "none";
  el<HTMLElement>("workspace").style.display = "flex";
  setStatus(
    `session ${info.id} (${info.frame_count} frames, export: /sessions/${info.id}/export)`
  );
  await repaint();
}

function main() {
  bindKeyboard();
  bindCanvas(el<HTMLCanvasElement>("view"));
  bindOutlierFile();
  el<HTMLButtonElement>("open").addEventListener("click", () => {
    const manifest = el<HTMLInputElement>("manifest").value.trim();
    const operator = el<HTMLInputElement>("operator").value.trim() || "anonymous";
    if (!manifest) {
      setStatus("enter the manifest path of a demuxed sequence", true);
      return;
    }
    openSession(manifest, operator).catch((e) => setStatus(String(e), true));
  });
}

main();
