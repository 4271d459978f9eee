// Browser entry: socket lifecycle, window chrome, and input wiring.
// Domain state stays server-side; this file is plumbing between DOM events,
// the ShellCore, and the canvas renderer.

import { PaintOp, ShellCore, Tool, WindowFrame } from "./core.js";
import {
  FrameMsg,
  LayerEntry,
  ServerMessage,
  decodeServerMessage,
  encodeClientMessage,
} from "./protocol.js";
import { CANON_H, CANON_W, renderFrameToCanvas } from "./render.js";

const TOOLS: Tool[] = ["pointer", "pan", "zoom_in", "zoom_out", "box_zoom"];
const SIM_OPS = ["start", "pause", "resume", "step", "reset", "cancel"] as const;

interface ViewDom {
  root: HTMLDivElement;
  canvas: HTMLCanvasElement;
  layerBox: HTMLDivElement;
  feedback: HTMLDivElement;
  toolButtons: Map<Tool, HTMLButtonElement>;
  lastFrame: FrameMsg | null;
  pendingOps: PaintOp[] | null;
}

class ShellApp {
  private ws: WebSocket | null = null;
  private backoff = 500;
  private core: ShellCore;
  private views = new Map<string, ViewDom>();
  private desktop: HTMLDivElement;
  private statusBar: HTMLDivElement;
  private overlayDiv: HTMLDivElement;
  private frames = new Map<string, FrameMsg>();

  constructor(private url: string) {
    this.desktop = document.getElementById("desktop") as HTMLDivElement;
    this.statusBar = document.getElementById("status") as HTMLDivElement;
    this.overlayDiv = document.createElement("div");
    this.overlayDiv.className = "hover-overlay";
    this.overlayDiv.style.display = "none";
    document.body.appendChild(this.overlayDiv);
    this.core = new ShellCore(
      (msg) => this.ws?.readyState === WebSocket.OPEN && this.ws.send(encodeClientMessage(msg)),
      { now: () => performance.now() },
      (viewId, ops) => this.queuePaint(viewId, ops),
    );
    setInterval(() => this.core.tick(), 40);
    const paintLoop = () => {
      this.paintPending();
      this.syncChrome();
      requestAnimationFrame(paintLoop);
    };
    requestAnimationFrame(paintLoop);
    this.connect();
  }

  private connect(): void {
    this.statusBar.textContent = `connecting to ${this.url} ...`;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoff = 500;
      this.core.connected();
    };
    ws.onmessage = (ev) => {
      let msg: ServerMessage;
      try {
        msg = decodeServerMessage(String(ev.data));
      } catch (err) {
        console.warn(err);
        return;
      }
      if (msg.type === "view_list") this.rebuildDom(msg.views.map((v) => v.view_id));
      if (msg.type === "frame") this.frames.set(msg.view_id, msg);
      this.core.handle(msg);
    };
    ws.onclose = () => {
      this.core.disconnected();
      this.statusBar.textContent = `disconnected; retrying in ${this.backoff} ms`;
      setTimeout(() => this.connect(), this.backoff);
      this.backoff = Math.min(this.backoff * 2, 10_000);
    };
  }

  private queuePaint(viewId: string, ops: PaintOp[]): void {
    const dom = this.views.get(viewId);
    if (dom) dom.pendingOps = ops; // client-side latest-wins per view
  }

  private paintPending(): void {
    for (const [viewId, dom] of this.views) {
      if (!dom.pendingOps) continue;
      const frame = this.frames.get(viewId);
      if (frame) {
        renderFrameToCanvas(dom.canvas, frame, dom.pendingOps);
        this.updateLayerPanel(dom, frame.layers);
        dom.lastFrame = frame;
      }
      dom.pendingOps = null;
    }
  }

  private syncChrome(): void {
    if (this.core.connectionError) {
      this.statusBar.textContent = `ERROR: ${this.core.connectionError}`;
      this.statusBar.classList.add("error");
      return;
    }
    this.statusBar.classList.remove("error");
    this.statusBar.textContent = this.core.status;
    for (const [viewId, win] of this.core.windows) {
      const dom = this.views.get(viewId);
      if (!dom) continue;
      dom.root.style.left = `${win.x}px`;
      dom.root.style.top = `${win.y}px`;
      dom.root.style.zIndex = String(win.z);
      dom.root.style.display = win.minimized ? "none" : "flex";
      const fb = [...this.core.feedback.entries()]
        .map(([k, v]) => `<div><b>${k}</b> ${v}</div>`)
        .join("");
      dom.feedback.innerHTML = fb;
      for (const [tool, btn] of dom.toolButtons) {
        btn.classList.toggle("active", this.core.tools.get(viewId) === tool);
      }
    }
    const ov = this.core.overlay;
    if (ov) {
      const dom = this.views.get(ov.viewId);
      if (dom) {
        const rect = dom.canvas.getBoundingClientRect();
        this.overlayDiv.style.display = "block";
        this.overlayDiv.style.left = `${rect.left + (ov.x / CANON_W) * rect.width + 12}px`;
        this.overlayDiv.style.top = `${rect.top + (ov.y / CANON_H) * rect.height + 12}px`;
        this.overlayDiv.innerHTML = ov.lines.map((l) => `<div>${l}</div>`).join("");
      }
    } else {
      this.overlayDiv.style.display = "none";
    }
  }

  private rebuildDom(viewIds: string[]): void {
    for (const dom of this.views.values()) dom.root.remove();
    this.views.clear();
    this.frames.clear();
    // Windows exist in the core after handle(view_list); defer DOM creation
    // one microtask so the core state is current.
    queueMicrotask(() => {
      for (const viewId of viewIds) {
        const win = this.core.windows.get(viewId);
        if (win) this.views.set(viewId, this.buildWindow(win));
      }
    });
  }

  private buildWindow(win: WindowFrame): ViewDom {
    const root = document.createElement("div");
    root.className = "window";
    root.style.width = `${win.width}px`;
    root.addEventListener("mousedown", () => this.core.focus(win.viewId));

    const title = document.createElement("div");
    title.className = "titlebar";
    title.textContent = `${win.title} [${win.kind}]`;
    this.makeDraggable(title, win);
    root.appendChild(title);

    const toolbar = document.createElement("div");
    toolbar.className = "toolbar";
    const toolButtons = new Map<Tool, HTMLButtonElement>();
    for (const tool of TOOLS) {
      const btn = document.createElement("button");
      btn.textContent = tool.replace("_", " ");
      btn.onclick = () => this.core.setTool(win.viewId, tool);
      toolbar.appendChild(btn);
      toolButtons.set(tool, btn);
    }
    root.appendChild(toolbar);

    const body = document.createElement("div");
    body.className = "body";
    const canvas = document.createElement("canvas");
    canvas.width = 640;
    canvas.height = 480;
    canvas.className = "content";
    this.wireCanvas(canvas, win.viewId);
    body.appendChild(canvas);

    const side = document.createElement("div");
    side.className = "side";
    const controls = document.createElement("div");
    controls.className = "controls";
    controls.innerHTML = "<div class='panel-title'>simulation</div>";
    for (const op of SIM_OPS) {
      const btn = document.createElement("button");
      btn.textContent = op;
      btn.onclick = () => this.core.controlAction(win.viewId, op);
      controls.appendChild(btn);
    }
    side.appendChild(controls);

    const layerBox = document.createElement("div");
    layerBox.className = "layers";
    layerBox.innerHTML = "<div class='panel-title'>layers</div>";
    side.appendChild(layerBox);

    const feedback = document.createElement("div");
    feedback.className = "feedback";
    side.appendChild(feedback);

    body.appendChild(side);
    root.appendChild(body);
    this.desktop.appendChild(root);
    return { root, canvas, layerBox, feedback, toolButtons, lastFrame: null, pendingOps: null };
  }

  private updateLayerPanel(dom: ViewDom, layers: LayerEntry[]): void {
    const seen = new Set<string>();
    for (const layer of layers) seen.add(layer.layer_id);
    const existing = new Set(
      [...dom.layerBox.querySelectorAll("label")].map((l) => l.dataset.layer ?? ""),
    );
    if ([...seen].every((id) => existing.has(id))) return;
    dom.layerBox.innerHTML = "<div class='panel-title'>layers</div>";
    const viewId = dom.canvas.dataset.viewId ?? "";
    for (const layer of layers) {
      const label = document.createElement("label");
      label.dataset.layer = layer.layer_id;
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked = layer.visible;
      box.onchange = () => this.core.toggleLayer(viewId, layer.layer_id);
      label.appendChild(box);
      label.appendChild(document.createTextNode(layer.name));
      dom.layerBox.appendChild(label);
    }
  }

  private wireCanvas(canvas: HTMLCanvasElement, viewId: string): void {
    canvas.dataset.viewId = viewId;
    const toCanon = (ev: MouseEvent): [number, number] => {
      const rect = canvas.getBoundingClientRect();
      return [
        ((ev.clientX - rect.left) / rect.width) * CANON_W,
        ((ev.clientY - rect.top) / rect.height) * CANON_H,
      ];
    };
    let down: [number, number] | null = null;
    let orbit = false;
    canvas.addEventListener("mousedown", (ev) => {
      down = toCanon(ev);
      orbit = ev.shiftKey || ev.button === 2;
    });
    canvas.addEventListener("mousemove", (ev) => {
      const [x, y] = toCanon(ev);
      if (down && orbit) {
        this.core.orbitGesture(viewId, (x - down[0]) * 0.01, (y - down[1]) * 0.01);
        down = [x, y];
      } else {
        this.core.pointerMoved(viewId, x, y);
      }
    });
    canvas.addEventListener("mouseup", (ev) => {
      if (!down) return;
      const [x, y] = toCanon(ev);
      const [x0, y0] = down;
      down = null;
      if (orbit) return;
      if (Math.hypot(x - x0, y - y0) < 3) this.core.clickGesture(viewId, x, y);
      else this.core.dragGesture(viewId, x0, y0, x, y);
    });
    canvas.addEventListener("mouseleave", () => this.core.pointerLeft());
    canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
  }

  private makeDraggable(handle: HTMLElement, win: WindowFrame): void {
    handle.addEventListener("mousedown", (ev) => {
      const startX = ev.clientX - win.x;
      const startY = ev.clientY - win.y;
      const move = (m: MouseEvent) => {
        win.x = m.clientX - startX;
        win.y = m.clientY - startY;
      };
      const up = () => {
        document.removeEventListener("mousemove", move);
        document.removeEventListener("mouseup", up);
      };
      document.addEventListener("mousemove", move);
      document.addEventListener("mouseup", up);
      ev.preventDefault();
    });
  }
}

const params = new URLSearchParams(location.search);
const server = params.get("server") ?? `ws://${location.hostname || "127.0.0.1"}:7350`;
new ShellApp(server);
