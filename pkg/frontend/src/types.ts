export interface SessionInfo {
  id: string;
  manifest: string;
  operator: string;
  joints: string[];
  frame_count: number;
  width: number;
  height: number;
  fps: number;
  created: string;
  modified: string;
  annotated_frames: number;
}

export interface Annotation {
  x?: number;
  y?: number;
  visible: boolean;
}

/** frame index (as string key) -> joint -> annotation */
export type AnnotationMap = Record<string, Record<string, Annotation>>;

export interface KeypointEntry {
  x?: number;
  y?: number;
  visible: boolean;
  confidence?: number;
}

export interface DocFrame {
  index: number;
  time_ms: number;
  points: Record<string, KeypointEntry>;
}

export interface GroundTruthDoc {
  meta: {
    sequence_id: string;
    effective_fps: number;
    width: number;
    height: number;
    producer: string;
  };
  joints: string[];
  frames: DocFrame[];
}

/** joint -> outlier frame indices, as produced by the eval workflow */
export type OutlierMap = Record<string, number[]>;
