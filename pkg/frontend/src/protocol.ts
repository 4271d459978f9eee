// Wire protocol types for the gateway socket (JSON text messages, version 1).

export const PROTOCOL_VERSION = 1;

export interface HelloMsg {
  type: "hello";
  protocol_version: number;
}

export interface ViewInfo {
  view_id: string;
  title: string;
  kind: string;
}

export interface ViewListMsg {
  type: "view_list";
  views: ViewInfo[];
}

export interface ItemStyle {
  stroke: string;
  fill: string | null;
  line_width: number;
}

export interface SerializedItem {
  id?: string;
  kind: string;
  geometry?: Record<string, unknown>;
  rotation?: number;
  style?: ItemStyle;
  locked?: boolean;
  selected?: boolean;
  metadata?: Record<string, string>;
  segment?: number[];
  // point batches
  count?: number;
  points?: number[];
}

export interface LayerEntry {
  layer_id: string;
  name: string;
  visible: boolean;
  reserved: string;
  items: SerializedItem[];
}

export interface SeriesSnapshot {
  name: string;
  style: { color: string; line_width: number; marker: string };
  x: number[];
  y: number[];
}

export interface Hist1dSnapshot {
  name: string;
  n_bins: number;
  lo: number;
  hi: number;
  counts: number[];
  underflow: number;
  overflow: number;
}

export interface Hist2dSnapshot {
  name: string;
  nx: number;
  ny: number;
  xrange: number[];
  yrange: number[];
  counts: number[][];
  out_of_range: number;
}

export interface PlotSnapshot {
  title: string;
  x_label: string;
  y_label: string;
  series: SeriesSnapshot[];
  hist1d: Hist1dSnapshot[];
  hist2d: Hist2dSnapshot[];
  fits: { kind: string; params: number[]; chi2: number; converged: boolean }[];
  y_max_hint?: number;
}

export interface FrameMsg {
  type: "frame";
  view_id: string;
  seq: number;
  view_kind: string;
  layers: LayerEntry[];
  viewport?: number[];
  world_bounds?: number[];
  plot?: PlotSnapshot;
  projection?: string;
}

export interface PlotDataMsg {
  type: "plot_data";
  series: string;
  x: number;
  y: number;
}

export interface SimStateMsg {
  type: "sim_state";
  state: string;
  step_count: number;
  sim_time_ms: number;
}

export interface ErrorMsg {
  type: "error";
  code: string;
  detail?: string;
}

export interface HoverInfoMsg {
  type: "hover_info";
  view_id: string;
  x: number;
  y: number;
  item_id: string | null;
  metadata: Record<string, string>;
  world?: number[];
}

export type ServerMessage =
  | HelloMsg
  | ViewListMsg
  | FrameMsg
  | PlotDataMsg
  | SimStateMsg
  | ErrorMsg
  | HoverInfoMsg;

export type InputKind =
  | "tool"
  | "drag"
  | "click"
  | "hover"
  | "layer_toggle"
  | "sim_control"
  | "item_edit";

export interface InputMsg {
  type: "input";
  kind: InputKind;
  view_id: string;
  payload: Record<string, unknown>;
}

export type ClientMessage = HelloMsg | InputMsg;

const SERVER_TYPES = new Set([
  "hello", "view_list", "frame", "plot_data", "sim_state", "error", "hover_info",
]);

export function decodeServerMessage(text: string): ServerMessage {
  const obj = JSON.parse(text);
  if (typeof obj !== "object" || obj === null || !SERVER_TYPES.has(obj.type)) {
    throw new Error(`unknown server message: ${text.slice(0, 80)}`);
  }
  return obj as ServerMessage;
}

export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
