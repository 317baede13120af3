/**
 * View state and its transitions.  All transitions are pure so they can be
 * unit-tested without a DOM; main.ts owns the single mutable instance and
 * repaints after every change.
 */

import { IDENTITY, ViewTransform } from "./transform.js";
import { AnnotationMap } from "./types.js";

export type Stream = "on" | "off";

export interface OverlayToggles {
  annotations: boolean;
  detections: boolean;
  outliers: boolean;
}

export interface ViewState {
  frame: number;
  frameCount: number;
  joints: string[];
  jointIndex: number;
  stream: Stream;
  overlays: OverlayToggles;
  transform: ViewTransform;
}

export function initialState(joints: string[], frameCount: number): ViewState {
  if (joints.length === 0) throw new Error("need at least one joint");
  if (frameCount < 1) throw new Error("need at least one frame");
  return {
    frame: 0,
    frameCount,
    joints: [...joints],
    jointIndex: 0,
    stream: "on",
    overlays: { annotations: true, detections: false, outliers: false },
    transform: { ...IDENTITY },
  };
}

export function activeJoint(s: ViewState): string {
  return s.joints[s.jointIndex];
}

export function clampFrame(s: ViewState, frame: number): number {
  return Math.min(s.frameCount - 1, Math.max(0, frame));
}

/** Move by delta frames, clamped to the sequence bounds. */
export function scrub(s: ViewState, delta: number): ViewState {
  const frame = clampFrame(s, s.frame + delta);
  return frame === s.frame ? s : { ...s, frame };
}

export function cycleJoint(s: ViewState, delta: number): ViewState {
  const n = s.joints.length;
  return { ...s, jointIndex: ((s.jointIndex + delta) % n + n) % n };
}

export function setJoint(s: ViewState, joint: string): ViewState {
  const idx = s.joints.indexOf(joint);
  return idx < 0 ? s : { ...s, jointIndex: idx };
}

/**
 * After an accepted annotation, advance to the next joint of the current
 * frame that has no annotation yet (canonical order, wrapping); stay put
 * when the frame is fully annotated.
 */
export function advanceAfterAnnotate(s: ViewState, annotations: AnnotationMap): ViewState {
  const done = annotations[String(s.frame)] ?? {};
  const n = s.joints.length;
  for (let step = 1; step <= n; step++) {
    const idx = (s.jointIndex + step) % n;
    if (!(s.joints[idx] in done)) return { ...s, jointIndex: idx };
  }
  return s;
}

/** Switch between the on/off sequences; frame index is preserved. */
export function toggleStream(s: ViewState): ViewState {
  return { ...s, stream: s.stream === "on" ? "off" : "on" };
}

export function toggleOverlay(s: ViewState, layer: keyof OverlayToggles): ViewState {
  return { ...s, overlays: { ...s.overlays, [layer]: !s.overlays[layer] } };
}

export function withTransform(s: ViewState, transform: ViewTransform): ViewState {
  return { ...s, transform };
}

/** Next frame at or after `from` flagged for any joint, or null. */
export function nextOutlierFrame(
  outliers: Record<string, number[]>,
  from: number,
  frameCount: number
): number | null {
  let best: number | null = null;
  for (const frames of Object.values(outliers)) {
    for (const f of frames) {
      if (f >= from && f < frameCount && (best === null || f < best)) best = f;
    }
  }
  return best;
}
