/** Shared wire types: the label document consumed by the CLI and service, and
 * the service request/response bodies. Coordinates are source-image pixels,
 * origin top-left, y down. */

export type Point = [number, number];

export interface LabelDocument {
  objects: { polygon: Point[] }[];
  lines: { polyline: Point[] }[];
}

export type Choice = "even" | "weak" | "strong";

export interface RetargetRequest {
  image_id: string;
  labels: LabelDocument | null;
  ratio: number;
  choice: Choice;
  chessboard: boolean;
  extremal?: "auto" | "on" | "off";
  beta?: number;
  mesh_vertices?: number;
  include_mesh?: boolean;
  preview_scale?: number;
}

export interface PreviewMetrics {
  solve_ms: number;
  min_jacobian: number;
  max_abs_mu: number;
  object_scale: number | null;
  extremal: boolean;
  residual: number;
}

export interface MeshOverlay {
  vertices_source: Point[];
  vertices_warped: Point[];
  faces: [number, number, number][];
}

export interface PreviewResponse {
  png: string; // base64
  width: number;
  height: number;
  full_size: [number, number];
  metrics: PreviewMetrics;
  mesh?: MeshOverlay;
}

export interface UploadResponse {
  id: string;
  width: number;
  height: number;
}

export interface ExtremalSuggestion {
  message: string;
  suggested_beta?: number;
}
