/** Payload types of the annotation service HTTP API (schema_version 1). */

export const API_SCHEMA_VERSION = 1;

export interface CirclePayload {
  person_id: number;
  x: number;
  y: number;
  radius: number;
  lost: boolean;
}

export interface FramePayload {
  schema_version: number;
  frame: number;
  timestamp: number;
  /** Valid returns only, Cartesian sensor frame (X forward, Y left). */
  points: [number, number][];
  circles: CirclePayload[];
}

export interface MetaPayload {
  schema_version: number;
  frames: number;
  sensor: {
    num_points: number;
    angle_min: number;
    angle_increment: number;
    range_max: number;
    frequency: number;
  };
}

export interface TrackPayload {
  schema_version: number;
  frame: number;
  circles: CirclePayload[];
}

export interface AnnotationRecord {
  scan_index: number;
  timestamp: number;
  person_id: number;
  x: number;
  y: number;
  radius: number;
}

export interface ExportPayload {
  schema_version: number;
  annotations: AnnotationRecord[];
  point_classes: Record<string, number[]>;
}
