"""Wire protocol service: streams view frames to shells, routes shell input.

Wire format: JSON text messages over a WebSocket (each frame is length-
prefixed by the socket framing), protocol version 1.  Frames are full
snapshots per view with server-side latest-wins coalescing; all scene and
engine access is marshaled onto one owner thread, so connection reader
and writer threads never touch shared state directly.
"""

from __future__ import annotations

import collections
import copy
import json
import math
import os
import queue
import socket
import tempfile
import threading
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import scene as sc
from .bus import (MessageBus, TOPIC_PLOT_DATA, TOPIC_SIM_REFRESH,
                  TOPIC_SIM_STATE, TOPIC_VIEW_DIRTY)
from .engine import Engine, IllegalState, TimingParams, VirtualClock
from .kinetics import (ENTROPY_SERIES, GasParams, GasSimulation,
                       entropy_csv_bytes)
from .plots import (GaussianSumModel, Histogram1D, Histogram2D, PlotDocument,
                    fit)

PROTOCOL_VERSION = 1

MESSAGE_TYPES = ("hello", "view_list", "frame", "plot_data", "sim_state",
                 "input", "error", "hover_info")

INPUT_KINDS = ("tool", "drag", "click", "hover", "layer_toggle",
               "sim_control", "item_edit")

_REQUIRED = {
    "hello": ("protocol_version",),
    "view_list": ("views",),
    "frame": ("view_id", "seq", "view_kind", "layers"),
    "plot_data": ("series", "x", "y"),
    "sim_state": ("state", "step_count", "sim_time_ms"),
    "input": ("kind", "view_id"),
    "error": ("code",),
    "hover_info": ("view_id", "x", "y"),
}


class WireError(ValueError):
    """Malformed wire data; the message carries a byte offset when known."""


def encode(message: dict) -> bytes:
    if message.get("type") not in MESSAGE_TYPES:
        raise WireError(f"unknown message type {message.get('type')!r}")
    return json.dumps(message, separators=(",", ":"), allow_nan=False).encode("utf-8")


def decode(data) -> dict:
    """Parse and validate one wire message.  Unknown fields pass through."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        message = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise WireError(f"invalid UTF-8 at byte {exc.start}") from None
    except json.JSONDecodeError as exc:
        raise WireError(f"bad JSON at byte {exc.pos}: {exc.msg}") from None
    if not isinstance(message, dict):
        raise WireError("message must be an object")
    mtype = message.get("type")
    if mtype not in MESSAGE_TYPES:
        raise WireError(f"unknown message type {mtype!r}")
    for key in _REQUIRED[mtype]:
        if key not in message:
            raise WireError(f"{mtype}: missing field {key!r}")
    if mtype == "input" and message["kind"] not in INPUT_KINDS:
        raise WireError(f"unknown input kind {message['kind']!r}")
    return message


# --------------------------------------------------------------------------
# frame snapshots
# --------------------------------------------------------------------------


def serialize_item(view: sc.View, item: sc.Item) -> dict:
    out = {
        "id": item.id,
        "kind": item.kind.value,
        "geometry": copy.deepcopy(item.geometry),
        "rotation": item.rotation,
        "style": {"stroke": item.style.stroke, "fill": item.style.fill,
                  "line_width": item.style.line_width},
        "locked": item.locked,
        "selected": item.selected,
        "metadata": dict(item.metadata),
    }
    if item.kind is sc.ItemKind.CONNECTOR:
        out["segment"] = list(view.connector_segment(item))
    return out


def _document_snapshot(doc: PlotDocument) -> dict:
    d = doc.to_dict()
    d.pop("format_version", None)
    return d


def snapshot_frame(view: sc.View, seq: int, *, cloud=None, camera=None,
                   aspect: float = sc.DEFAULT_SCREEN_W / sc.DEFAULT_SCREEN_H,
                   cloud_layer_id: Optional[str] = None,
                   plot_doc: Optional[PlotDocument] = None) -> dict:
    """Full snapshot of a view's visible layers, in render order.

    content3d views get the projected point batch in place of items on the
    cloud layer (the first user layer when not named).  When the 3D unit is
    absent from the build the batch is omitted and the frame says so.
    """
    frame = {
        "type": "frame",
        "view_id": view.id,
        "seq": seq,
        "view_kind": view.kind.value,
        "viewport": list(view.viewport.as_tuple()),
        "world_bounds": list(view.world_bounds),
        "layers": [],
    }
    batch = None
    if view.kind is sc.ViewKind.CONTENT3D and cloud is not None and camera is not None:
        try:
            from .view3d import project_cloud
        except ImportError:
            frame["projection"] = "unavailable"
        else:
            pts = project_cloud(camera, aspect, cloud)
            # 5 decimals is sub-pixel at any sane canvas size and keeps the
            # flat array compact on the wire.
            batch = {"kind": "point_batch", "count": int(pts.shape[0]),
                     "points": [round(float(v), 5) for v in pts.reshape(-1)]}
    if cloud_layer_id is None:
        for layer in view.layers:
            if layer.reserved is sc.ReservedRole.NONE:
                cloud_layer_id = layer.id
                break
    for layer in view.layers:
        if not layer.visible:
            continue
        entry = {
            "layer_id": layer.id,
            "name": layer.name,
            "visible": True,
            "reserved": layer.reserved.value,
            "items": [],
        }
        if batch is not None and layer.id == cloud_layer_id:
            entry["items"] = [batch]
        else:
            entry["items"] = [serialize_item(view, item) for item in layer.items]
        frame["layers"].append(entry)
    if view.kind is sc.ViewKind.PLOT and plot_doc is not None:
        frame["plot"] = _document_snapshot(plot_doc)
    return frame


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


DEMOS = ("kinetics", "network", "plots")


@dataclass
class ServerConfig:
    port: int = 7350
    demo: str = "kinetics"
    headless: bool = False
    steps: Optional[int] = None
    seed: Optional[int] = None
    export_path: Optional[str] = None
    refresh_ms: float = 33.0
    grid_m: int = 10
    figures_dir: Optional[str] = None
    host: str = "127.0.0.1"

    def __post_init__(self) -> None:
        if self.demo not in DEMOS:
            raise ValueError(f"unknown demo {self.demo!r}")
        if self.headless and not self.steps:
            raise ValueError("headless mode requires --steps")
        if self.refresh_ms <= 0:
            raise ValueError("refresh interval must be positive")


# --------------------------------------------------------------------------
# owner loop
# --------------------------------------------------------------------------


class OwnerLoop:
    """The single thread that owns scene state and dispatches the bus."""

    _STOP = object()

    def __init__(self, bus: MessageBus, tick_ms: float = 5.0, on_tick=None) -> None:
        self.bus = bus
        self.tick_s = tick_ms / 1000.0
        self.on_tick = on_tick
        self._q: queue.Queue = queue.Queue()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True, name="simdesk-owner")
        self._thread.start()

    def stop(self) -> None:
        if self._thread is None:
            return
        self._q.put(self._STOP)
        self._thread.join(timeout=5)
        self._thread = None

    def post(self, fn) -> None:
        self._q.put(fn)

    def call(self, fn, timeout: float = 5.0):
        """Run fn on the owner thread and return its result."""
        done = threading.Event()
        box: list = [None, None]

        def wrapper():
            try:
                box[0] = fn()
            except BaseException as exc:  # re-raised on the caller
                box[1] = exc
            finally:
                done.set()

        self._q.put(wrapper)
        if not done.wait(timeout):
            raise TimeoutError("owner loop call timed out")
        if box[1] is not None:
            raise box[1]
        return box[0]

    def _run(self) -> None:
        while True:
            try:
                fn = self._q.get(timeout=self.tick_s)
            except queue.Empty:
                fn = None
            if fn is self._STOP:
                return
            while True:
                if fn is not None:
                    fn()
                try:
                    fn = self._q.get_nowait()
                except queue.Empty:
                    break
                if fn is self._STOP:
                    return
            self.bus.dispatch_pending()
            if self.on_tick is not None:
                self.on_tick(time.monotonic() * 1000.0)


# --------------------------------------------------------------------------
# connections
# --------------------------------------------------------------------------


class _Connection:
    """Per-client outbox with latest-wins frame coalescing."""

    def __init__(self, ws) -> None:
        self.ws = ws
        self._lock = threading.Lock()
        self._wake = threading.Event()
        self._control: collections.deque = collections.deque()
        self._frames: dict[str, dict] = {}
        self.closed = False
        self._writer = threading.Thread(target=self._write_loop, daemon=True,
                                        name="simdesk-conn-writer")
        self._writer.start()

    def send_control(self, message: dict) -> None:
        with self._lock:
            if self.closed:
                return
            self._control.append(message)
        self._wake.set()

    def offer_frame(self, view_id: str, frame: dict) -> None:
        with self._lock:
            if self.closed:
                return
            self._frames[view_id] = frame
        self._wake.set()

    def close(self) -> None:
        with self._lock:
            self.closed = True
        self._wake.set()

    def _write_loop(self) -> None:
        while True:
            self._wake.wait(timeout=0.5)
            self._wake.clear()
            while True:
                with self._lock:
                    if self.closed:
                        return
                    if self._control:
                        msg = self._control.popleft()
                    elif self._frames:
                        _, msg = next(iter(self._frames.items()))
                        del self._frames[msg["view_id"]]
                    else:
                        msg = None
                if msg is None:
                    break
                try:
                    self.ws.send(encode(msg).decode("utf-8"))
                except Exception:
                    self.close()
                    return


# --------------------------------------------------------------------------
# gateway service
# --------------------------------------------------------------------------


class GatewayService:
    """Builds the selected demo and mediates between bus, scene, and clients."""

    def __init__(self, config: ServerConfig) -> None:
        self.config = config
        self.bus = MessageBus()
        self.desktop = sc.Desktop()
        self.engine: Optional[Engine] = None
        self.sim: Optional[GasSimulation] = None
        self.plot_doc: Optional[PlotDocument] = None
        self.cameras: dict[str, object] = {}
        self._conns: list[_Connection] = []
        self._conn_lock = threading.Lock()
        self._seq: dict[str, int] = {}
        self._dirty: set[str] = set()
        self._last_push: dict[str, float] = {}
        self.frames_built: collections.Counter = collections.Counter()
        self.loop = OwnerLoop(self.bus, tick_ms=min(5.0, config.refresh_ms / 4.0),
                              on_tick=self._tick)
        self._build_demo()
        self.bus.subscribe(TOPIC_SIM_REFRESH, self._on_refresh)
        self.bus.subscribe(TOPIC_VIEW_DIRTY, self._on_dirty)
        self.bus.subscribe(TOPIC_PLOT_DATA, self._forward_plot_data)
        self.bus.subscribe(TOPIC_SIM_STATE, self._forward_sim_state)

    # -- demo construction ----------------------------------------------------

    def _build_demo(self) -> None:
        demo = self.config.demo
        seed = self.config.seed if self.config.seed is not None else GasParams.seed
        if demo == "kinetics":
            gas = self.desktop.create_view("Gas", sc.ViewKind.CONTENT3D, (0.0, 0.0, 1.0, 1.0))
            gas.add_layer("cloud")
            plot = self.desktop.create_view("Entropy", sc.ViewKind.PLOT, (0.0, 0.0, 1.0, 1.0))
            params = GasParams(seed=seed, entropy_grid_m=self.config.grid_m)
            self.sim = GasSimulation(params, bus=self.bus, view_scope=plot.id)
            self.engine = Engine(self.bus, TimingParams(refresh_interval=self.config.refresh_ms))
            self.engine.attach(self.sim)
            self.plot_doc = PlotDocument("Entropy", "t", "s")
            self.plot_doc.add_series(ENTROPY_SERIES)
            self.plot_doc.bind_series_to_topic(self.bus, ENTROPY_SERIES)
            self._plot_view_id = plot.id
            try:
                from .view3d import Camera
            except ImportError:
                pass
            else:
                self.cameras[gas.id] = Camera(
                    eye=(2.4, -1.7, 1.6), look_at=(0.5, 0.5, 0.5), up=(0.0, 0.0, 1.0),
                    fov_y=50.0, near=0.05, far=50.0)
        elif demo == "network":
            view = self.desktop.create_view("Network", sc.ViewKind.CONTENT2D,
                                            (0.0, 0.0, 100.0, 75.0))
            nodes = view.add_layer("nodes")
            spots = [(15, 50, "gateway"), (45, 55, "switch"), (70, 30, "server"),
                     (25, 15, "sensor")]
            items = []
            for x, y, name in spots:
                items.append(view.add_item(
                    nodes.id, sc.ItemKind.RECTANGLE, {"x": x, "y": y, "w": 12.0, "h": 8.0},
                    style=sc.Style(stroke="#333333", fill="#cfe8ff"),
                    metadata={"name": name, "addr": f"10.0.0.{len(items) + 1}"}))
            conn = view.connection_layer
            for a, b in ((0, 1), (1, 2), (1, 3)):
                view.add_item(conn.id, sc.ItemKind.CONNECTOR,
                              {"from_id": items[a].id, "to_id": items[b].id})
            view.add_item(view.annotation_layer.id, sc.ItemKind.TEXT,
                          {"x": 5.0, "y": 70.0, "lines": ["drag nodes; connectors follow"]})
            self.engine = Engine(self.bus, TimingParams(refresh_interval=self.config.refresh_ms))
        elif demo == "plots":
            plot = self.desktop.create_view("Peaks", sc.ViewKind.PLOT, (0.0, 0.0, 1.0, 1.0))
            self._plot_view_id = plot.id
            rng = np.random.Generator(np.random.PCG64(seed))
            doc = PlotDocument("Peaks", "x", "count")
            hist = Histogram1D(80, -6.0, 6.0, name="peaks")
            weights = np.array([120.0, 200.0, 150.0])
            mus = np.array([-3.0, 0.0, 3.0])
            comp = rng.choice(3, size=24_000, p=weights / weights.sum())
            hist.fill_array(rng.normal(mus[comp], 0.5))
            doc.hists1d.append(hist)
            width = (hist.hi - hist.lo) / hist.n_bins
            guess = []
            for mu in mus:
                peak = float(hist.counts[int((mu - hist.lo) / width)])
                guess.extend([max(peak, 1.0), mu + 0.2, 0.65])
            doc.fits.append(fit(hist, GaussianSumModel(3), guess))
            h2 = Histogram2D(40, 40, (-3.0, 3.0), (-3.0, 3.0), name="pair")
            xy = rng.multivariate_normal([0, 0], [[1.0, 0.6], [0.6, 1.0]], size=20_000)
            h2.fill_array(xy[:, 0], xy[:, 1])
            doc.hists2d.append(h2)
            self.plot_doc = doc
            self.engine = Engine(self.bus, TimingParams(refresh_interval=self.config.refresh_ms))

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        self.loop.start()

    def stop(self) -> None:
        if self.engine is not None and self.engine.state.value in ("Running", "Paused"):
            try:
                self.engine.cancel()
            except IllegalState:
                pass
            self.engine.wait(timeout=5)
        self.loop.stop()
        with self._conn_lock:
            conns = list(self._conns)
        for conn in conns:
            conn.close()

    # -- bus handlers (owner thread) --------------------------------------------

    def _on_refresh(self, env) -> None:
        for view in self.desktop.views:
            self._dirty.add(view.id)

    def _on_dirty(self, env) -> None:
        if env.scope is not None:
            self._dirty.add(env.scope)
        else:
            for view in self.desktop.views:
                self._dirty.add(view.id)

    def _forward_plot_data(self, env) -> None:
        msg = {"type": "plot_data", "series": env.payload.get("series"),
               "x": env.payload.get("x"), "y": env.payload.get("y")}
        self._broadcast_control(msg)
        # Plot content changed, so the plot view needs a fresh frame.
        if getattr(self, "_plot_view_id", None):
            self._dirty.add(self._plot_view_id)

    def _forward_sim_state(self, env) -> None:
        msg = {"type": "sim_state", "state": env.payload.get("state"),
               "step_count": env.payload.get("step_count"),
               "sim_time_ms": env.payload.get("sim_time_ms")}
        self._broadcast_control(msg)

    def _broadcast_control(self, msg: dict) -> None:
        with self._conn_lock:
            conns = list(self._conns)
        for conn in conns:
            conn.send_control(msg)

    # -- frames ------------------------------------------------------------------

    def build_frame(self, view_id: str) -> dict:
        view = self.desktop.view(view_id)
        self._seq[view_id] = self._seq.get(view_id, 0) + 1
        kwargs = {}
        if view.kind is sc.ViewKind.CONTENT3D and self.sim is not None:
            kwargs["cloud"] = self.sim.snapshot_positions()
            kwargs["camera"] = self.cameras.get(view_id)
        if view.kind is sc.ViewKind.PLOT:
            kwargs["plot_doc"] = self.plot_doc
        frame = snapshot_frame(view, self._seq[view_id], **kwargs)
        if frame.get("plot") is not None and self.config.demo == "kinetics":
            # Stable entropy axis: the ceiling is ln(m^3) for the active grid.
            frame["plot"]["y_max_hint"] = math.log(self.config.grid_m ** 3) + 0.2
        self.frames_built[view_id] += 1
        self._last_push[view_id] = time.monotonic() * 1000.0
        return frame

    def _tick(self, now_ms: float) -> None:
        if not self._dirty:
            return
        pushed = []
        for view_id in list(self._dirty):
            last = self._last_push.get(view_id, -1e18)
            if now_ms - last < self.config.refresh_ms:
                continue  # stays dirty; sent when the interval elapses
            frame = self.build_frame(view_id)
            pushed.append(view_id)
            with self._conn_lock:
                conns = list(self._conns)
            for conn in conns:
                conn.offer_frame(view_id, frame)
        for view_id in pushed:
            self._dirty.discard(view_id)

    # -- connection management -----------------------------------------------------

    def attach_connection(self, conn: _Connection) -> None:
        with self._conn_lock:
            self._conns.append(conn)

        def initial():
            views = [{"view_id": v.id, "title": v.title, "kind": v.kind.value}
                     for v in self.desktop.views]
            conn.send_control({"type": "view_list", "views": views})
            for v in self.desktop.views:
                conn.offer_frame(v.id, self.build_frame(v.id))

        self.loop.call(initial)

    def detach_connection(self, conn: _Connection) -> None:
        conn.close()
        with self._conn_lock:
            if conn in self._conns:
                self._conns.remove(conn)

    # -- input handling (owner thread) -----------------------------------------------

    def handle_input(self, conn: Optional[_Connection], msg: dict) -> None:
        try:
            self._handle_input_inner(conn, msg)
        except (sc.SceneError, IllegalState, ValueError, KeyError) as exc:
            code = type(exc).__name__
            if conn is not None:
                conn.send_control({"type": "error", "code": code, "detail": str(exc)})

    def _handle_input_inner(self, conn, msg: dict) -> None:
        kind = msg["kind"]
        view_id = msg["view_id"]
        payload = msg.get("payload", {})
        self.bus.publish(f"input.{view_id}", {"kind": kind, **payload}, scope=view_id)
        if kind == "sim_control":
            self._sim_control(payload.get("op"))
            return
        view = self.desktop.view(view_id)
        if kind == "layer_toggle":
            layer = view.layer(payload["layer_id"])
            visible = payload.get("visible")
            view.set_layer_visibility(layer.id, not layer.visible if visible is None else visible)
        elif kind == "drag":
            x0, y0 = float(payload["x0"]), float(payload["y0"])
            x1, y1 = float(payload["x1"]), float(payload["y1"])
            hits = view.hit_test(x0, y0)
            if not hits:
                return
            wx0, wy0 = view.screen_to_world(x0, y0)
            wx1, wy1 = view.screen_to_world(x1, y1)
            view.drag_item(hits[0], wx1 - wx0, wy1 - wy0)
        elif kind == "click":
            hits = view.hit_test(float(payload["x"]), float(payload["y"]))
            if hits:
                item = view.item(hits[0])
                view.select_item(hits[0], not item.selected)
        elif kind == "hover":
            sx, sy = float(payload["x"]), float(payload["y"])
            hits = view.hit_test(sx, sy)
            reply = {"type": "hover_info", "view_id": view_id, "x": sx, "y": sy,
                     "item_id": hits[0] if hits else None,
                     "metadata": dict(view.item(hits[0]).metadata) if hits else {}}
            wx, wy = view.screen_to_world(sx, sy)
            reply["world"] = [wx, wy]
            if conn is not None:
                conn.send_control(reply)
            return
        elif kind == "item_edit":
            sc.apply_item_edit(view, payload["item_id"], dict(payload["edit"]))
        elif kind == "tool":
            self._tool(view, payload)
        else:
            raise ValueError(f"unknown input kind {kind!r}")
        self.bus.publish(TOPIC_VIEW_DIRTY, {}, scope=view_id, coalesce_key="dirty")

    def _tool(self, view: sc.View, payload: dict) -> None:
        op = payload.get("op")
        if op == "pan":
            view.pan_screen(float(payload["dx"]), float(payload["dy"]))
        elif op in ("zoom_in", "zoom_out"):
            factor = float(payload.get("factor", 1.25))
            if op == "zoom_out":
                factor = 1.0 / factor
            view.zoom_about(float(payload.get("x", sc.DEFAULT_SCREEN_W / 2)),
                            float(payload.get("y", sc.DEFAULT_SCREEN_H / 2)), factor)
        elif op == "box_zoom":
            x, y, w, h = (float(v) for v in payload["rect"])
            # Screen rect corners to world; y flip makes min/max per axis.
            wx0, wy0 = view.screen_to_world(x, y)
            wx1, wy1 = view.screen_to_world(x + w, y + h)
            view.fit_world_rect(min(wx0, wx1), min(wy0, wy1),
                                abs(wx1 - wx0), abs(wy1 - wy0))
        elif op == "orbit":
            camera = self.cameras.get(view.id)
            if camera is None:
                raise ValueError("view has no camera")
            from .view3d import orbit
            new_cam, _ = orbit(camera, float(payload.get("dyaw", 0.0)),
                               float(payload.get("dpitch", 0.0)))
            self.cameras[view.id] = new_cam
        else:
            raise ValueError(f"unknown tool op {op!r}")

    def _sim_control(self, op: str) -> None:
        engine = self.engine
        if engine is None:
            raise IllegalState("this demo has no engine")
        if op == "start":
            engine.start()
        elif op == "pause":
            engine.pause()
        elif op == "resume":
            engine.resume()
        elif op == "cancel":
            engine.cancel()
        elif op == "reset":
            engine.reset()
        elif op == "step":
            engine.step_n(1)
        else:
            raise ValueError(f"unknown sim_control op {op!r}")


# --------------------------------------------------------------------------
# websocket server
# --------------------------------------------------------------------------


class GatewayServer:
    """Owns the listening socket; start() returns once accepting."""

    def __init__(self, config: ServerConfig) -> None:
        self.config = config
        self.service = GatewayService(config)
        self._server = None
        self._thread: Optional[threading.Thread] = None
        self.port: Optional[int] = None

    def start(self) -> int:
        from websockets.sync.server import serve as ws_serve

        sock = socket.create_server((self.config.host, self.config.port))
        self.port = sock.getsockname()[1]
        self.service.start()
        self._server = ws_serve(self._handler, sock=sock)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True, name="simdesk-ws")
        self._thread.start()
        return self.port

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        self.service.stop()

    def _handler(self, ws) -> None:
        service = self.service
        try:
            raw = ws.recv(timeout=10)
            hello = decode(raw)
            if hello["type"] != "hello":
                ws.send(encode({"type": "error", "code": "BadHandshake",
                                "detail": "expected hello"}).decode())
                return
            if hello["protocol_version"] != PROTOCOL_VERSION:
                ws.send(encode({"type": "error", "code": "VersionMismatch",
                                "detail": f"server speaks {PROTOCOL_VERSION}"}).decode())
                return
            ws.send(encode({"type": "hello", "protocol_version": PROTOCOL_VERSION}).decode())
        except WireError as exc:
            try:
                ws.send(encode({"type": "error", "code": "WireError",
                                "detail": str(exc)}).decode())
            except Exception:
                pass
            return
        except Exception:
            return
        conn = _Connection(ws)
        service.attach_connection(conn)
        try:
            for raw in ws:
                try:
                    msg = decode(raw)
                except WireError as exc:
                    conn.send_control({"type": "error", "code": "WireError", "detail": str(exc)})
                    continue
                if msg["type"] == "input":
                    service.loop.post(lambda m=msg: service.handle_input(conn, m))
                # Non-input client messages are ignored (forward compatible).
        except Exception:
            pass
        finally:
            service.detach_connection(conn)


def serve(config: ServerConfig) -> None:
    """Run the gateway until interrupted."""
    server = GatewayServer(config)
    port = server.start()
    print(f"simdesk gateway: demo={config.demo} ws://{config.host}:{port}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()


# --------------------------------------------------------------------------
# headless batch mode
# --------------------------------------------------------------------------


class ClockTickingSim:
    """Wraps a simulation so each step advances a virtual clock.

    Keeps engine timing live in headless runs while the run itself stays
    wall-clock free.
    """

    def __init__(self, inner, clock: VirtualClock, tick_ms: float = 1.0) -> None:
        self.inner = inner
        self.clock = clock
        self.tick_ms = tick_ms

    def step(self) -> bool:
        self.clock.advance(self.tick_ms)
        return self.inner.step()

    def reset(self) -> None:
        self.inner.reset()


def _write_atomic(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".simdesk-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def run_headless(config: ServerConfig) -> int:
    """Run the selected demo for config.steps on a virtual clock; 0 on success."""
    if not config.headless or not config.steps:
        print("headless mode requires --steps")
        return 2
    if config.demo != "kinetics":
        print(f"demo {config.demo!r} has no headless batch mode")
        return 2
    if config.export_path:
        directory = os.path.dirname(os.path.abspath(config.export_path))
        if not os.path.isdir(directory):
            print(f"export directory does not exist: {directory}")
            return 1
    seed = config.seed if config.seed is not None else GasParams.seed
    params = GasParams(seed=seed, entropy_grid_m=config.grid_m)
    bus = MessageBus()
    clock = VirtualClock()
    sim = GasSimulation(params, bus=bus, max_steps=config.steps)
    engine = Engine(bus, TimingParams(refresh_interval=config.refresh_ms), clock)
    engine.attach(ClockTickingSim(sim, clock))
    initial_positions = sim.snapshot_positions() if config.figures_dir else None
    engine.start()
    if not engine.wait(timeout=3600):
        print("simulation did not finish")
        return 1
    if engine.state.value != "Completed":
        print(f"simulation ended in state {engine.state.value}")
        return 1
    try:
        if config.export_path:
            _write_atomic(config.export_path, entropy_csv_bytes(sim.samples))
        if config.figures_dir:
            from .report import write_kinetics_report
            write_kinetics_report(config.figures_dir, sim.samples, params,
                                  initial_positions, sim.snapshot_positions())
    except OSError as exc:
        print(f"export failed: {exc}")
        return 1
    return 0
