/** Typed client for the annotation service; the one place that talks HTTP. */

import { Annotation, AnnotationMap, GroundTruthDoc, SessionInfo } from "./types.js";

async function asError(resp: Response): Promise<Error> {
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    /* non-JSON error body; keep the status line */
  }
  return new Error(message);
}

export class AnnoClient {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) throw await asError(resp);
    return (await resp.json()) as T;
  }

  async createSession(
    manifest: string,
    operator: string,
    joints?: string[],
    detections?: string
  ): Promise<SessionInfo> {
    const resp = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ manifest, operator, joints, detections }),
    });
    if (!resp.ok) throw await asError(resp);
    return (await resp.json()) as SessionInfo;
  }

  getSession(id: string): Promise<SessionInfo> {
    return this.getJson(`/sessions/${id}`);
  }

  frameUrl(id: string, frame: number): string {
    return this.url(`/sessions/${id}/frames/${frame}`);
  }

  async putAnnotation(id: string, frame: number, joint: string, ann: Annotation): Promise<void> {
    const resp = await fetch(this.url(`/sessions/${id}/annotations/${frame}/${joint}`), {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(ann),
    });
    if (!resp.ok) throw await asError(resp);
  }

  async getAnnotations(id: string): Promise<AnnotationMap> {
    const body = await this.getJson<{ annotations: AnnotationMap }>(`/sessions/${id}/annotations`);
    return body.annotations;
  }

  exportSession(id: string): Promise<GroundTruthDoc> {
    return this.getJson(`/sessions/${id}/export`);
  }

  async getDetections(id: string): Promise<GroundTruthDoc | null> {
    const resp = await fetch(this.url(`/sessions/${id}/detections`));
    if (resp.status === 404) return null;
    if (!resp.ok) throw await asError(resp);
    return (await resp.json()) as GroundTruthDoc;
  }
}
