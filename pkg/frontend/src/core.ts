// Shell core: domain-stateless session model for the MDI desktop.
//
// All truth lives server-side.  This class turns server frames into paint
// operations, user gestures into single wire messages, and nothing else.
// It is DOM-free so the whole behavior is unit-testable; the renderer and
// window chrome consume its outputs.

import {
  ClientMessage,
  FrameMsg,
  HoverInfoMsg,
  InputKind,
  PROTOCOL_VERSION,
  PlotSnapshot,
  SerializedItem,
  ServerMessage,
  ViewInfo,
} from "./protocol.js";

export type Tool = "pointer" | "pan" | "zoom_in" | "zoom_out" | "box_zoom";

export interface WindowFrame {
  viewId: string;
  title: string;
  kind: string;
  x: number;
  y: number;
  width: number;
  height: number;
  z: number;
  minimized: boolean;
}

export type PaintOp =
  | { op: "clear"; viewId: string }
  | { op: "layer"; layerId: string; name: string; reserved: string }
  | { op: "item"; item: SerializedItem }
  | { op: "points"; count: number; points: number[] }
  | { op: "plot"; plot: PlotSnapshot };

export interface Overlay {
  viewId: string;
  x: number;
  y: number;
  lines: string[];
}

export interface Clock {
  now(): number;
}

const HOVER_DWELL_MS = 150;
const HOVER_MOVE_PX = 4;
const CASCADE_STEP = 28;

interface HoverAnchor {
  viewId: string;
  x: number;
  y: number;
  since: number;
  requested: boolean;
}

export class ShellCore {
  readonly windows = new Map<string, WindowFrame>();
  readonly tools = new Map<string, Tool>();
  readonly feedback = new Map<string, string>();
  readonly lastPaint = new Map<string, PaintOp[]>();
  overlay: Overlay | null = null;
  status = "disconnected";
  connectionError = "";

  private readonly lastSeq = new Map<string, number>();
  private hover: HoverAnchor | null = null;
  private nextZ = 1;

  constructor(
    private readonly send: (msg: ClientMessage) => void,
    private readonly clock: Clock = { now: () => Date.now() },
    readonly onPaint?: (viewId: string, ops: PaintOp[]) => void,
  ) {}

  // -- connection ------------------------------------------------------------

  connected(): void {
    this.connectionError = "";
    this.status = "connected";
    this.send({ type: "hello", protocol_version: PROTOCOL_VERSION });
  }

  disconnected(): void {
    this.status = "disconnected";
  }

  handle(msg: ServerMessage): void {
    if (this.connectionError) return; // refused sessions stay inert
    switch (msg.type) {
      case "hello":
        if (msg.protocol_version !== PROTOCOL_VERSION) {
          this.connectionError =
            `protocol mismatch: server ${msg.protocol_version}, shell ${PROTOCOL_VERSION}`;
          this.windows.clear();
        }
        break;
      case "error":
        if (msg.code === "VersionMismatch") {
          this.connectionError = msg.detail ?? "version mismatch";
          this.windows.clear();
        } else {
          this.feedback.set("last_error", `${msg.code}: ${msg.detail ?? ""}`);
        }
        break;
      case "view_list":
        this.rebuildWindows(msg.views);
        break;
      case "frame": {
        const ops = this.renderFrame(msg);
        if (ops && this.onPaint) this.onPaint(msg.view_id, ops);
        break;
      }
      case "sim_state":
        this.status = `${msg.state} @ step ${msg.step_count}`;
        this.feedback.set("sim_state", msg.state);
        this.feedback.set("step_count", String(msg.step_count));
        break;
      case "plot_data":
        // Plot content arrives inside plot-view frames; the stream is
        // informational here.
        this.feedback.set(`series:${msg.series}`, `${msg.x}, ${msg.y}`);
        break;
      case "hover_info":
        this.applyHoverInfo(msg);
        break;
    }
  }

  // -- windows -----------------------------------------------------------------

  private rebuildWindows(views: ViewInfo[]): void {
    this.windows.clear();
    this.lastSeq.clear();
    this.lastPaint.clear();
    views.forEach((view, i) => {
      this.windows.set(view.view_id, {
        viewId: view.view_id,
        title: view.title,
        kind: view.kind,
        x: 30 + i * CASCADE_STEP,
        y: 30 + i * CASCADE_STEP,
        width: 560,
        height: 440,
        z: this.nextZ++,
        minimized: false,
      });
      if (!this.tools.has(view.view_id)) this.tools.set(view.view_id, "pointer");
    });
  }

  focus(viewId: string): void {
    const win = this.windows.get(viewId);
    if (!win) return;
    win.z = this.nextZ++;
  }

  topWindow(): WindowFrame | null {
    let top: WindowFrame | null = null;
    for (const win of this.windows.values()) {
      if (!top || win.z > top.z) top = win;
    }
    return top;
  }

  // -- frames -> paint ops --------------------------------------------------------

  renderFrame(frame: FrameMsg): PaintOp[] | null {
    if (!this.windows.has(frame.view_id)) {
      console.warn(`frame for unknown view ${frame.view_id} ignored`);
      return null;
    }
    const last = this.lastSeq.get(frame.view_id) ?? -1;
    if (frame.seq <= last) return null; // stale frame
    this.lastSeq.set(frame.view_id, frame.seq);

    const ops: PaintOp[] = [{ op: "clear", viewId: frame.view_id }];
    for (const layer of frame.layers) {
      if (!layer.visible) continue;
      ops.push({
        op: "layer",
        layerId: layer.layer_id,
        name: layer.name,
        reserved: layer.reserved,
      });
      for (const item of layer.items) {
        if (item.kind === "point_batch") {
          ops.push({
            op: "points",
            count: item.count ?? 0,
            points: depthSort(item.points ?? []),
          });
        } else {
          ops.push({ op: "item", item });
        }
      }
    }
    if (frame.plot) ops.push({ op: "plot", plot: frame.plot });
    this.lastPaint.set(frame.view_id, ops);
    return ops;
  }

  renderedSeq(viewId: string): number {
    return this.lastSeq.get(viewId) ?? -1;
  }

  // -- control panel / toolbar -------------------------------------------------------

  setTool(viewId: string, tool: Tool): void {
    this.tools.set(viewId, tool); // exactly one active tool per view
  }

  controlAction(viewId: string, op: "start" | "pause" | "resume" | "step" | "reset" | "cancel"): void {
    this.sendInput("sim_control", viewId, { op });
  }

  toggleLayer(viewId: string, layerId: string): void {
    this.sendInput("layer_toggle", viewId, { layer_id: layerId });
  }

  // -- pointer gestures -----------------------------------------------------------------

  dragGesture(viewId: string, x0: number, y0: number, x1: number, y1: number): void {
    const tool = this.tools.get(viewId) ?? "pointer";
    if (tool === "pointer") {
      this.sendInput("drag", viewId, { x0, y0, x1, y1 });
    } else if (tool === "pan") {
      this.sendInput("tool", viewId, { op: "pan", dx: x1 - x0, dy: y1 - y0 });
    } else if (tool === "box_zoom") {
      const rect = [
        Math.min(x0, x1),
        Math.min(y0, y1),
        Math.abs(x1 - x0),
        Math.abs(y1 - y0),
      ];
      this.sendInput("tool", viewId, { op: "box_zoom", rect });
    } else {
      // zoom tools treat a drag like a click at the release point
      this.clickGesture(viewId, x1, y1);
    }
  }

  clickGesture(viewId: string, x: number, y: number): void {
    const tool = this.tools.get(viewId) ?? "pointer";
    if (tool === "zoom_in" || tool === "zoom_out") {
      this.sendInput("tool", viewId, { op: tool, x, y });
    } else {
      this.sendInput("click", viewId, { x, y });
    }
  }

  orbitGesture(viewId: string, dyaw: number, dpitch: number): void {
    this.sendInput("tool", viewId, { op: "orbit", dyaw, dpitch });
  }

  // -- hover feedback ---------------------------------------------------------------------

  pointerMoved(viewId: string, x: number, y: number): void {
    const h = this.hover;
    if (h && h.viewId === viewId && Math.hypot(x - h.x, y - h.y) <= HOVER_MOVE_PX) {
      return; // still dwelling on the same spot
    }
    this.hover = { viewId, x, y, since: this.clock.now(), requested: false };
    if (this.overlay) this.overlay = null; // moved away: clear the overlay
    this.feedback.set("pointer", `${x.toFixed(0)}, ${y.toFixed(0)}`);
  }

  pointerLeft(): void {
    this.hover = null;
    this.overlay = null;
  }

  tick(): void {
    const h = this.hover;
    if (!h || h.requested) return;
    if (this.clock.now() - h.since >= HOVER_DWELL_MS) {
      h.requested = true;
      this.sendInput("hover", h.viewId, { x: h.x, y: h.y });
    }
  }

  private applyHoverInfo(msg: HoverInfoMsg): void {
    const h = this.hover;
    // Ignore replies for positions the pointer already left.
    if (!h || h.viewId !== msg.view_id || Math.hypot(msg.x - h.x, msg.y - h.y) > HOVER_MOVE_PX) {
      return;
    }
    if (msg.item_id === null) {
      this.overlay = null;
      const world = msg.world ?? [];
      this.feedback.set(
        "position",
        world.length === 2 ? `${world[0].toFixed(3)}, ${world[1].toFixed(3)}` : "",
      );
      return;
    }
    const lines = Object.entries(msg.metadata).map(([k, v]) => `${k}: ${v}`);
    if (lines.length === 0) lines.push(msg.item_id);
    this.overlay = { viewId: msg.view_id, x: msg.x, y: msg.y, lines };
    this.feedback.set("item", msg.item_id);
    for (const [k, v] of Object.entries(msg.metadata)) {
      this.feedback.set(k, v);
    }
  }

  private sendInput(kind: InputKind, viewId: string, payload: Record<string, unknown>): void {
    this.send({ type: "input", kind, view_id: viewId, payload });
  }
}

// Painter's order for projected point batches: far (large depth) first.
export function depthSort(flat: number[]): number[] {
  const n = Math.floor(flat.length / 3);
  const order = Array.from({ length: n }, (_, i) => i);
  order.sort((a, b) => flat[b * 3 + 2] - flat[a * 3 + 2]);
  const out = new Array<number>(n * 3);
  order.forEach((src, dst) => {
    out[dst * 3] = flat[src * 3];
    out[dst * 3 + 1] = flat[src * 3 + 1];
    out[dst * 3 + 2] = flat[src * 3 + 2];
  });
  return out;
}
