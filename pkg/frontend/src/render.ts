// Canvas painter for view frames.  Consumes the core's paint ops in order;
// the op sequence already encodes layer order (connection first, annotation
// last), so drawing is a single pass.

import { PaintOp } from "./core.js";
import { FrameMsg, PlotSnapshot, SerializedItem } from "./protocol.js";

// Server-side canonical screen rectangle the viewport transform targets.
export const CANON_W = 800;
export const CANON_H = 600;

type Ctx = CanvasRenderingContext2D;

interface ViewTransform {
  a: number; b: number; c: number; d: number; e: number; f: number;
  worldPerPixel: number;
}

function frameTransform(frame: FrameMsg, canvasW: number, canvasH: number): ViewTransform {
  const [a, b, c, d, e, f] = frame.viewport ?? [1, 0, 0, 1, 0, 0];
  const sx = canvasW / CANON_W;
  const sy = canvasH / CANON_H;
  const t = { a: a * sx, b: b * sy, c: c * sx, d: d * sy, e: e * sx, f: f * sy };
  const det = Math.abs(t.a * t.d - t.b * t.c);
  return { ...t, worldPerPixel: det > 0 ? 1 / Math.sqrt(det) : 1 };
}

export function renderFrameToCanvas(canvas: HTMLCanvasElement, frame: FrameMsg, ops: PaintOp[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.fillStyle = "#fcfcfc";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const t = frameTransform(frame, canvas.width, canvas.height);

  for (const op of ops) {
    if (op.op === "item") {
      drawItem(ctx, t, op.item);
    } else if (op.op === "points") {
      drawPoints(ctx, canvas, op.points);
    } else if (op.op === "plot") {
      drawPlot(ctx, canvas, op.plot);
    }
  }
  if (frame.projection === "unavailable") {
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.fillStyle = "#888";
    ctx.font = "13px sans-serif";
    ctx.fillText("3D unit not present in this build", 12, 22);
  }
}

function withWorldSpace(ctx: Ctx, t: ViewTransform, draw: () => void): void {
  ctx.save();
  ctx.setTransform(t.a, t.b, t.c, t.d, t.e, t.f);
  draw();
  ctx.restore();
}

function pivotOf(item: SerializedItem): [number, number] {
  const g = item.geometry as Record<string, number> & { points?: number[][] };
  switch (item.kind) {
    case "rectangle":
    case "image":
    case "ellipse":
      return [g.x + g.w / 2, g.y + g.h / 2];
    case "line":
      return [(g.x1 + g.x2) / 2, (g.y1 + g.y2) / 2];
    case "polygon":
    case "polyline": {
      const pts = g.points ?? [];
      const xs = pts.map((p) => p[0]);
      const ys = pts.map((p) => p[1]);
      return [(Math.min(...xs) + Math.max(...xs)) / 2, (Math.min(...ys) + Math.max(...ys)) / 2];
    }
    case "radarc":
      return [g.cx, g.cy];
    default:
      return [g.x ?? 0, g.y ?? 0];
  }
}

function drawItem(ctx: Ctx, t: ViewTransform, item: SerializedItem): void {
  const style = item.style ?? { stroke: "#202020", fill: null, line_width: 1 };
  const g = item.geometry as Record<string, number> & { points?: number[][]; lines?: string[] };

  if (item.kind === "connector" && item.segment) {
    const [x1, y1, x2, y2] = item.segment;
    withWorldSpace(ctx, t, () => {
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.lineWidth = Math.max(style.line_width, 1) * t.worldPerPixel;
      ctx.strokeStyle = style.stroke;
      ctx.stroke();
    });
    return;
  }

  if (item.kind === "text") {
    // Text draws in screen space so the y-flip cannot mirror the glyphs.
    const sx = t.a * g.x + t.c * g.y + t.e;
    const sy = t.b * g.x + t.d * g.y + t.f;
    ctx.save();
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.fillStyle = style.stroke;
    ctx.font = "12px sans-serif";
    (g.lines ?? []).forEach((line, i) => ctx.fillText(line, sx, sy + 14 * i));
    ctx.restore();
    return;
  }

  withWorldSpace(ctx, t, () => {
    const rot = item.rotation ?? 0;
    if (rot !== 0) {
      const [cx, cy] = pivotOf(item);
      ctx.translate(cx, cy);
      ctx.rotate(rot);
      ctx.translate(-cx, -cy);
    }
    ctx.beginPath();
    switch (item.kind) {
      case "rectangle":
      case "image":
        ctx.rect(g.x, g.y, g.w, g.h);
        break;
      case "ellipse":
        ctx.ellipse(g.x + g.w / 2, g.y + g.h / 2, g.w / 2, g.h / 2, 0, 0, Math.PI * 2);
        break;
      case "line":
        ctx.moveTo(g.x1, g.y1);
        ctx.lineTo(g.x2, g.y2);
        break;
      case "point":
        ctx.arc(g.x, g.y, 3 * t.worldPerPixel, 0, Math.PI * 2);
        break;
      case "polygon":
      case "polyline": {
        const pts = g.points ?? [];
        pts.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        if (item.kind === "polygon") ctx.closePath();
        break;
      }
      case "radarc": {
        // Wedge from start to end angle; canvas sweep order matches the
        // world angles because we draw inside the world transform.
        ctx.moveTo(g.cx, g.cy);
        ctx.arc(g.cx, g.cy, g.radius, g.start, g.end);
        ctx.closePath();
        break;
      }
    }
    if (style.fill) {
      ctx.fillStyle = style.fill;
      ctx.fill();
    }
    ctx.lineWidth = Math.max(style.line_width, 0.75) * t.worldPerPixel;
    ctx.strokeStyle = item.selected ? "#ff7f0e" : style.stroke;
    ctx.stroke();
    if (item.locked) {
      ctx.setLineDash([2 * t.worldPerPixel, 2 * t.worldPerPixel]);
      ctx.strokeStyle = "#c04040";
      ctx.stroke();
      ctx.setLineDash([]);
    }
  });
}

function drawPoints(ctx: Ctx, canvas: HTMLCanvasElement, flat: number[]): void {
  // NDC [-1,1] (y up) onto the canvas; input is already painter-ordered.
  ctx.save();
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  const n = Math.floor(flat.length / 3);
  for (let i = 0; i < n; i++) {
    const x = (flat[i * 3] + 1) * 0.5 * canvas.width;
    const y = (1 - flat[i * 3 + 1]) * 0.5 * canvas.height;
    const depth = flat[i * 3 + 2];
    const shade = Math.max(0, Math.min(255, Math.round(40 + 200 * depth)));
    ctx.fillStyle = `rgb(${shade}, ${Math.round(60 + 120 * (1 - depth))}, ${255 - shade})`;
    ctx.fillRect(x, y, 1.6, 1.6);
  }
  ctx.restore();
}

function drawPlot(ctx: Ctx, canvas: HTMLCanvasElement, plot: PlotSnapshot): void {
  ctx.save();
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  const mL = 46, mR = 12, mT = 24, mB = 34;
  const W = canvas.width - mL - mR;
  const H = canvas.height - mT - mB;

  // Data extent across series and 1D histograms.
  let xMin = Infinity, xMax = -Infinity, yMin = 0, yMax = -Infinity;
  for (const s of plot.series) {
    for (const v of s.x) { xMin = Math.min(xMin, v); xMax = Math.max(xMax, v); }
    for (const v of s.y) { yMax = Math.max(yMax, v); }
  }
  for (const h of plot.hist1d) {
    xMin = Math.min(xMin, h.lo);
    xMax = Math.max(xMax, h.hi);
    for (const c of h.counts) yMax = Math.max(yMax, c);
  }
  if (plot.y_max_hint !== undefined) yMax = plot.y_max_hint;
  if (!isFinite(xMin) || xMin === xMax) { xMin = 0; xMax = 1; }
  if (!isFinite(yMax) || yMax <= yMin) yMax = 1;

  const px = (x: number) => mL + ((x - xMin) / (xMax - xMin)) * W;
  const py = (y: number) => mT + H - ((y - yMin) / (yMax - yMin)) * H;

  // Axes.
  ctx.strokeStyle = "#444";
  ctx.lineWidth = 1;
  ctx.strokeRect(mL, mT, W, H);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(plot.title, mL, 14);
  ctx.fillText(plot.x_label, mL + W / 2, canvas.height - 10);
  ctx.fillText(`${yMax.toFixed(2)}`, 4, mT + 10);
  ctx.fillText(`${yMin.toFixed(2)}`, 4, mT + H);

  // 2D histogram heatmap under everything else.
  for (const h2 of plot.hist2d) {
    let peak = 0;
    for (const row of h2.counts) for (const c of row) peak = Math.max(peak, c);
    if (peak === 0) continue;
    const cw = W / h2.nx;
    const ch = H / h2.ny;
    for (let i = 0; i < h2.nx; i++) {
      for (let j = 0; j < h2.ny; j++) {
        const v = h2.counts[i][j] / peak;
        if (v === 0) continue;
        ctx.fillStyle = `rgba(31, 119, 180, ${0.15 + 0.85 * v})`;
        ctx.fillRect(mL + i * cw, mT + H - (j + 1) * ch, cw + 0.5, ch + 0.5);
      }
    }
  }

  // 1D histogram bars.
  for (const h of plot.hist1d) {
    const bw = (h.hi - h.lo) / h.n_bins;
    ctx.fillStyle = "rgba(100, 149, 200, 0.55)";
    for (let i = 0; i < h.n_bins; i++) {
      const x0 = px(h.lo + i * bw);
      const x1 = px(h.lo + (i + 1) * bw);
      const y = py(h.counts[i]);
      ctx.fillRect(x0, y, Math.max(x1 - x0 - 0.5, 0.5), mT + H - y);
    }
  }

  // Series polylines.
  for (const s of plot.series) {
    if (s.x.length === 0) continue;
    ctx.beginPath();
    s.x.forEach((x, i) => {
      const X = px(x);
      const Y = py(s.y[i]);
      if (i === 0) ctx.moveTo(X, Y);
      else ctx.lineTo(X, Y);
    });
    ctx.strokeStyle = s.style.color || "#1f77b4";
    ctx.lineWidth = s.style.line_width || 1.5;
    ctx.stroke();
  }

  // Fit results as a caption; the shell does not evaluate models.
  plot.fits.forEach((fit, i) => {
    ctx.fillStyle = "#555";
    const ps = fit.params.map((p) => p.toPrecision(4)).join(", ");
    ctx.fillText(`${fit.kind}: [${ps}] chi2=${fit.chi2.toPrecision(4)}`, mL + 4, mT + 14 + 13 * i);
  });
  ctx.restore();
}
