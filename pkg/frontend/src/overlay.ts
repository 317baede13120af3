/** Canvas overlay painting for annotations, detections and outlier flags. */

import { toDisplay, ViewTransform } from "./transform.js";
import { AnnotationMap, GroundTruthDoc, OutlierMap } from "./types.js";

export const JOINT_COLORS: Record<string, string> = {
  left_hip: "#ff5252",
  right_hip: "#ff9800",
  left_knee: "#4caf50",
  right_knee: "#00bcd4",
  left_ankle: "#7c4dff",
  right_ankle: "#e040fb",
};

export function jointColor(joint: string): string {
  return JOINT_COLORS[joint] ?? "#ffffff";
}

function cross(ctx: CanvasRenderingContext2D, x: number, y: number, r: number, color: string) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(x - r, y);
  ctx.lineTo(x + r, y);
  ctx.moveTo(x, y - r);
  ctx.lineTo(x, y + r);
  ctx.stroke();
}

function ring(ctx: CanvasRenderingContext2D, x: number, y: number, r: number, color: string) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.stroke();
}

export function drawAnnotations(
  ctx: CanvasRenderingContext2D,
  t: ViewTransform,
  annotations: AnnotationMap,
  frame: number,
  activeJoint: string
) {
  const anns = annotations[String(frame)] ?? {};
  for (const [joint, ann] of Object.entries(anns)) {
    if (!ann.visible || ann.x === undefined || ann.y === undefined) continue;
    const d = toDisplay(t, ann.x, ann.y);
    cross(ctx, d.x, d.y, joint === activeJoint ? 9 : 6, jointColor(joint));
  }
}

export function drawDetections(
  ctx: CanvasRenderingContext2D,
  t: ViewTransform,
  detections: GroundTruthDoc,
  frame: number
) {
  const entry = detections.frames.find((f) => f.index === frame);
  if (!entry) return;
  for (const [joint, kp] of Object.entries(entry.points)) {
    if (!kp.visible || kp.x === undefined || kp.y === undefined) continue;
    const d = toDisplay(t, kp.x, kp.y);
    ring(ctx, d.x, d.y, 7, jointColor(joint));
  }
}

export function outlierJointsAt(outliers: OutlierMap, frame: number): string[] {
  return Object.entries(outliers)
    .filter(([, frames]) => frames.includes(frame))
    .map(([joint]) => joint);
}
