import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { PaintOp, ShellCore, depthSort } from "../src/core.js";
import { ClientMessage, FrameMsg, ServerMessage } from "../src/protocol.js";

const here = dirname(fileURLToPath(import.meta.url));
const FIXTURES: FrameMsg[] = JSON.parse(
  readFileSync(join(here, "fixtures", "frames.json"), "utf-8"),
);

class FakeClock {
  t = 0;
  now = () => this.t;
  advance(ms: number) {
    this.t += ms;
  }
}

function makeCore() {
  const sent: ClientMessage[] = [];
  const clock = new FakeClock();
  const core = new ShellCore((msg) => sent.push(msg), clock);
  return { core, sent, clock };
}

function viewListFor(frames: FrameMsg[]): ServerMessage {
  const seen = new Map<string, string>();
  for (const f of frames) seen.set(f.view_id, f.view_kind);
  return {
    type: "view_list",
    views: [...seen.entries()].map(([id, kind]) => ({
      view_id: id,
      title: id,
      kind,
    })),
  };
}

function opsLayerNames(ops: PaintOp[]): string[] {
  return ops.filter((o) => o.op === "layer").map((o) => (o as any).name);
}

describe("paint order (recorded fixtures)", () => {
  it("emits layer ops exactly in frame order for every fixture", () => {
    for (const frame of FIXTURES) {
      const { core } = makeCore();
      core.handle(viewListFor([frame]));
      const ops = core.renderFrame(frame);
      expect(ops).not.toBeNull();
      const expected = frame.layers.filter((l) => l.visible).map((l) => l.name);
      expect(opsLayerNames(ops!)).toEqual(expected);
    }
  });

  it("keeps connection first and annotation last", () => {
    for (const frame of FIXTURES) {
      const { core } = makeCore();
      core.handle(viewListFor([frame]));
      const names = opsLayerNames(core.renderFrame(frame)!);
      expect(names[0]).toBe("connection");
      expect(names[names.length - 1]).toBe("annotation");
    }
  });

  it("draws items inside their owning layer segment", () => {
    const frame = FIXTURES[0]; // network frame with items
    const { core } = makeCore();
    core.handle(viewListFor([frame]));
    const ops = core.renderFrame(frame)!;
    let current = "";
    const byLayer = new Map<string, number>();
    for (const op of ops) {
      if (op.op === "layer") current = op.name;
      if (op.op === "item") byLayer.set(current, (byLayer.get(current) ?? 0) + 1);
    }
    for (const layer of frame.layers) {
      expect(byLayer.get(layer.name) ?? 0).toBe(
        layer.items.filter((i) => i.kind !== "point_batch").length,
      );
    }
  });

  it("turns point batches into one depth-sorted points op", () => {
    const frame = FIXTURES.find((f) => f.view_kind === "content3d")!;
    const { core } = makeCore();
    core.handle(viewListFor([frame]));
    const ops = core.renderFrame(frame)!;
    const pts = ops.filter((o) => o.op === "points") as Extract<PaintOp, { op: "points" }>[];
    expect(pts.length).toBe(1);
    const flat = pts[0].points;
    for (let i = 3; i < flat.length; i += 3) {
      expect(flat[i + 2]).toBeLessThanOrEqual(flat[i - 1]); // far first
    }
    expect(pts[0].count).toBe(Math.floor(flat.length / 3));
  });

  it("exposes plot snapshots as a plot op", () => {
    const frame = FIXTURES.find((f) => f.view_kind === "plot")!;
    const { core } = makeCore();
    core.handle(viewListFor([frame]));
    const ops = core.renderFrame(frame)!;
    const plotOps = ops.filter((o) => o.op === "plot") as Extract<PaintOp, { op: "plot" }>[];
    expect(plotOps.length).toBe(1);
    expect(plotOps[0].plot.series[0].name).toBe("entropy");
    expect(plotOps[0].plot.y_max_hint).toBeCloseTo(Math.log(1000) + 0.2, 10);
  });
});

describe("frame monotonicity", () => {
  it("drops stale frames and accepts new ones", () => {
    const frame = FIXTURES[0];
    const { core } = makeCore();
    core.handle(viewListFor([frame]));
    const f6 = { ...frame, seq: 6 };
    const f5 = { ...frame, seq: 5 };
    const f7 = { ...frame, seq: 7 };
    expect(core.renderFrame(f6)).not.toBeNull();
    expect(core.renderFrame(f5)).toBeNull(); // out of order: dropped
    expect(core.renderFrame(f6)).toBeNull(); // duplicate: dropped
    expect(core.renderFrame(f7)).not.toBeNull();
    expect(core.renderedSeq(frame.view_id)).toBe(7);
  });

  it("ignores frames for unknown views", () => {
    const { core } = makeCore();
    expect(core.renderFrame(FIXTURES[0])).toBeNull();
  });
});

describe("control panel and toolbar inputs", () => {
  const OPS = ["start", "pause", "resume", "step", "reset", "cancel"] as const;

  it("each sim control action emits exactly one correct wire message", () => {
    for (const op of OPS) {
      const { core, sent } = makeCore();
      core.controlAction("view-1", op);
      expect(sent).toEqual([
        { type: "input", kind: "sim_control", view_id: "view-1", payload: { op } },
      ]);
    }
  });

  it("layer checkbox toggles emit exactly one layer_toggle", () => {
    const { core, sent } = makeCore();
    core.toggleLayer("view-1", "layer-1");
    expect(sent).toEqual([
      {
        type: "input",
        kind: "layer_toggle",
        view_id: "view-1",
        payload: { layer_id: "layer-1" },
      },
    ]);
  });

  it("pointer drag emits a drag input under the pointer tool", () => {
    const { core, sent } = makeCore();
    core.dragGesture("view-1", 10, 20, 30, 25);
    expect(sent).toEqual([
      {
        type: "input",
        kind: "drag",
        view_id: "view-1",
        payload: { x0: 10, y0: 20, x1: 30, y1: 25 },
      },
    ]);
  });

  it("pan and box_zoom tools emit tool inputs", () => {
    const { core, sent } = makeCore();
    core.setTool("view-1", "pan");
    core.dragGesture("view-1", 0, 0, 15, -5);
    core.setTool("view-1", "box_zoom");
    core.dragGesture("view-1", 40, 60, 10, 20);
    expect(sent).toEqual([
      {
        type: "input",
        kind: "tool",
        view_id: "view-1",
        payload: { op: "pan", dx: 15, dy: -5 },
      },
      {
        type: "input",
        kind: "tool",
        view_id: "view-1",
        payload: { op: "box_zoom", rect: [10, 20, 30, 40] },
      },
    ]);
  });

  it("zoom tools emit zoom at the click point", () => {
    const { core, sent } = makeCore();
    core.setTool("view-1", "zoom_in");
    core.clickGesture("view-1", 100, 150);
    expect(sent).toEqual([
      {
        type: "input",
        kind: "tool",
        view_id: "view-1",
        payload: { op: "zoom_in", x: 100, y: 150 },
      },
    ]);
  });

  it("exactly one active tool per view", () => {
    const { core } = makeCore();
    core.setTool("view-1", "pan");
    core.setTool("view-1", "zoom_in");
    expect(core.tools.get("view-1")).toBe("zoom_in");
  });
});

describe("hover feedback", () => {
  it("sends one hover request after the dwell and shows server metadata", () => {
    const { core, sent, clock } = makeCore();
    core.handle(viewListFor([FIXTURES[0]]));
    core.pointerMoved("view-1", 100, 100);
    core.tick();
    expect(sent.filter((m) => m.type === "input")).toHaveLength(0); // no dwell yet
    clock.advance(149);
    core.tick();
    expect(sent.filter((m) => m.type === "input")).toHaveLength(0);
    clock.advance(2);
    core.tick();
    core.tick(); // second tick must not re-send
    const hovers = sent.filter((m) => m.type === "input");
    expect(hovers).toEqual([
      {
        type: "input",
        kind: "hover",
        view_id: "view-1",
        payload: { x: 100, y: 100 },
      },
    ]);
    core.handle({
      type: "hover_info",
      view_id: "view-1",
      x: 100,
      y: 100,
      item_id: "item-3",
      metadata: { name: "node-3" },
    });
    expect(core.overlay).not.toBeNull();
    expect(core.overlay!.lines).toContain("name: node-3");
    expect(core.feedback.get("name")).toBe("node-3");
  });

  it("dwell over empty space shows coordinates, no overlay", () => {
    const { core, clock } = makeCore();
    core.handle(viewListFor([FIXTURES[0]]));
    core.pointerMoved("view-1", 10, 10);
    clock.advance(200);
    core.tick();
    core.handle({
      type: "hover_info",
      view_id: "view-1",
      x: 10,
      y: 10,
      item_id: null,
      metadata: {},
      world: [1.25, 73.75],
    });
    expect(core.overlay).toBeNull();
    expect(core.feedback.get("position")).toBe("1.250, 73.750");
  });

  it("rapid movement produces zero hover requests", () => {
    const { core, sent, clock } = makeCore();
    for (let i = 0; i < 60; i++) {
      core.pointerMoved("view-1", i * 10, i * 10); // > 4 px each time
      clock.advance(30); // always below the 150 ms dwell
      core.tick();
    }
    expect(sent.filter((m) => m.type === "input")).toHaveLength(0);
  });

  it("moving past 4 px clears the overlay", () => {
    const { core, clock } = makeCore();
    core.handle(viewListFor([FIXTURES[0]]));
    core.pointerMoved("view-1", 50, 50);
    clock.advance(200);
    core.tick();
    core.handle({
      type: "hover_info",
      view_id: "view-1",
      x: 50,
      y: 50,
      item_id: "item-1",
      metadata: { name: "gateway" },
    });
    expect(core.overlay).not.toBeNull();
    core.pointerMoved("view-1", 53, 53); // within 4 px: overlay stays
    expect(core.overlay).not.toBeNull();
    core.pointerMoved("view-1", 60, 60); // beyond 4 px: cleared
    expect(core.overlay).toBeNull();
  });
});

describe("session lifecycle", () => {
  it("version mismatch surfaces an error and leaves no windows", () => {
    const { core } = makeCore();
    core.handle({ type: "hello", protocol_version: 2 });
    expect(core.connectionError).toContain("mismatch");
    core.handle(viewListFor(FIXTURES)); // refused session stays inert
    expect(core.windows.size).toBe(0);
  });

  it("server VersionMismatch error behaves the same", () => {
    const { core } = makeCore();
    core.handle({ type: "error", code: "VersionMismatch", detail: "server speaks 1" });
    expect(core.connectionError).toBe("server speaks 1");
    expect(core.windows.size).toBe(0);
  });

  it("creates one window per view and rebuilds on a fresh view_list", () => {
    const { core } = makeCore();
    core.handle({
      type: "view_list",
      views: [
        { view_id: "a", title: "A", kind: "content2d" },
        { view_id: "b", title: "B", kind: "plot" },
      ],
    });
    expect(core.windows.size).toBe(2);
    // reconnect: truth comes from the fresh list
    core.handle({
      type: "view_list",
      views: [{ view_id: "c", title: "C", kind: "content3d" }],
    });
    expect([...core.windows.keys()]).toEqual(["c"]);
    expect(core.renderedSeq("a")).toBe(-1); // stale seq state dropped too
  });

  it("exactly one window holds the top z-order after any focus sequence", () => {
    const { core } = makeCore();
    core.handle({
      type: "view_list",
      views: ["a", "b", "c"].map((id) => ({ view_id: id, title: id, kind: "plot" })),
    });
    for (const id of ["b", "a", "c", "b"]) core.focus(id);
    const zs = [...core.windows.values()].map((w) => w.z);
    expect(new Set(zs).size).toBe(zs.length); // all distinct: unique top
    expect(core.topWindow()!.viewId).toBe("b");
  });

  it("sim_state updates the status line", () => {
    const { core } = makeCore();
    core.handle({ type: "sim_state", state: "Running", step_count: 42, sim_time_ms: 10.0 });
    expect(core.status).toBe("Running @ step 42");
  });
});

describe("depthSort", () => {
  it("orders triples by descending depth", () => {
    const flat = [0, 0, 0.2, 1, 1, 0.9, 2, 2, 0.5];
    expect(depthSort(flat)).toEqual([1, 1, 0.9, 2, 2, 0.5, 0, 0, 0.2]);
  });
});
