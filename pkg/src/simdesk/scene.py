"""Desktop -> View -> Layer -> Item containment hierarchy.

Items live in world coordinates; each view owns a single affine
world->screen transform, so pan/zoom edits the viewport and never the
items.  Every view carries two reserved layers: the connection layer is
always first (connectors draw underneath everything) and the annotation
layer is always last (annotations draw on top).  Neither can be moved or
removed; visibility toggling is allowed.

All mutation is expected to happen on one owner thread; other threads
interact through the message bus or through serialized frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

DEFAULT_SCREEN_W = 800.0
DEFAULT_SCREEN_H = 600.0

# Minimum pick radius in pixels for zero-area primitives.
PICK_RADIUS_PX = 4.0

_UNSET = object()


class SceneError(Exception):
    pass


class UnknownLayer(SceneError):
    pass


class UnknownItem(SceneError):
    pass


class UnknownView(SceneError):
    pass


class ReservedLayer(SceneError):
    """Reserved layers cannot be moved or deleted."""


class InvalidPosition(SceneError):
    """Layer reorder would displace a reserved layer."""


class ConnectorPlacement(SceneError):
    """Connectors are restricted to the connection layer."""


class DanglingReference(SceneError):
    """Connector endpoint does not name an existing item."""


class Locked(SceneError):
    """Item is locked; only unlock is permitted."""


class CapabilityDenied(SceneError):
    """The item's capability flags forbid this edit."""


class SingularViewport(SceneError):
    """Viewport transform is not invertible."""


class ItemKind(str, Enum):
    CONNECTOR = "connector"
    ELLIPSE = "ellipse"
    IMAGE = "image"
    LINE = "line"
    POINT = "point"
    POLYGON = "polygon"
    POLYLINE = "polyline"
    RADARC = "radarc"
    RECTANGLE = "rectangle"
    TEXT = "text"


class ViewKind(str, Enum):
    CONTENT2D = "content2d"
    CONTENT3D = "content3d"
    PLOT = "plot"
    TEXT = "text"


class ReservedRole(str, Enum):
    NONE = "none"
    CONNECTION = "connection"
    ANNOTATION = "annotation"


@dataclass
class Affine:
    """2D affine map: sx = a*x + c*y + e, sy = b*x + d*y + f."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0
    e: float = 0.0
    f: float = 0.0

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return self.a * x + self.c * y + self.e, self.b * x + self.d * y + self.f

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "Affine":
        det = self.det()
        if abs(det) < 1e-300 or not math.isfinite(det):
            raise SingularViewport(f"determinant {det}")
        a, b, c, d, e, f = self.a, self.b, self.c, self.d, self.e, self.f
        return Affine(
            d / det, -b / det, -c / det, a / det,
            (c * f - d * e) / det, (b * e - a * f) / det,
        )

    def compose(self, other: "Affine") -> "Affine":
        """self * other: apply ``other`` first, then self."""
        return Affine(
            self.a * other.a + self.c * other.b,
            self.b * other.a + self.d * other.b,
            self.a * other.c + self.c * other.d,
            self.b * other.c + self.d * other.d,
            self.a * other.e + self.c * other.f + self.e,
            self.b * other.e + self.d * other.f + self.f,
        )

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)


def _fit_viewport(world_bounds: tuple[float, float, float, float]) -> Affine:
    """World rect onto the default screen rect, y flipped (screen y is down)."""
    x, y, w, h = world_bounds
    return Affine(
        a=DEFAULT_SCREEN_W / w,
        b=0.0,
        c=0.0,
        d=-DEFAULT_SCREEN_H / h,
        e=-x * DEFAULT_SCREEN_W / w,
        f=DEFAULT_SCREEN_H + y * DEFAULT_SCREEN_H / h,
    )


@dataclass
class Style:
    stroke: str = "#202020"
    fill: Optional[str] = None
    line_width: float = 1.0


@dataclass
class Caps:
    draggable: bool = True
    rotatable: bool = True
    selectable: bool = True
    resizable: bool = True
    lockable: bool = True
    deletable: bool = True
    editable: bool = True


@dataclass
class Item:
    id: str
    kind: ItemKind
    geometry: dict
    rotation: float = 0.0
    style: Style = field(default_factory=Style)
    caps: Caps = field(default_factory=Caps)
    locked: bool = False
    selected: bool = False
    metadata: dict = field(default_factory=dict)


@dataclass
class Layer:
    id: str
    name: str
    visible: bool = True
    reserved: ReservedRole = ReservedRole.NONE
    items: list[Item] = field(default_factory=list)


# --------------------------------------------------------------------------
# geometry validation / measures
# --------------------------------------------------------------------------

_RECT_KINDS = (ItemKind.RECTANGLE, ItemKind.IMAGE, ItemKind.ELLIPSE)


def _finite(*vals: float) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals)


def validate_geometry(kind: ItemKind, geom: dict) -> None:
    if kind in _RECT_KINDS:
        if not _finite(geom.get("x"), geom.get("y"), geom.get("w"), geom.get("h")):
            raise ValueError(f"{kind.value}: x,y,w,h must be finite")
        if geom["w"] < 0 or geom["h"] < 0:
            raise ValueError(f"{kind.value}: negative extent")
    elif kind is ItemKind.LINE:
        if not _finite(geom.get("x1"), geom.get("y1"), geom.get("x2"), geom.get("y2")):
            raise ValueError("line: endpoints must be finite")
    elif kind is ItemKind.POINT:
        if not _finite(geom.get("x"), geom.get("y")):
            raise ValueError("point: x,y must be finite")
    elif kind in (ItemKind.POLYGON, ItemKind.POLYLINE):
        pts = geom.get("points")
        minimum = 3 if kind is ItemKind.POLYGON else 2
        if not isinstance(pts, list) or len(pts) < minimum:
            raise ValueError(f"{kind.value}: needs at least {minimum} points")
        for p in pts:
            if len(p) != 2 or not _finite(p[0], p[1]):
                raise ValueError(f"{kind.value}: points must be finite pairs")
    elif kind is ItemKind.RADARC:
        if not _finite(geom.get("cx"), geom.get("cy"), geom.get("radius"),
                       geom.get("start"), geom.get("end")):
            raise ValueError("radarc: cx,cy,radius,start,end must be finite")
        if geom["radius"] <= 0:
            raise ValueError("radarc: radius must be positive")
    elif kind is ItemKind.TEXT:
        if not _finite(geom.get("x"), geom.get("y")):
            raise ValueError("text: anchor must be finite")
        if not isinstance(geom.get("lines"), list):
            raise ValueError("text: lines must be a list")
    elif kind is ItemKind.CONNECTOR:
        if not geom.get("from_id") or not geom.get("to_id"):
            raise ValueError("connector: from_id and to_id required")
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown kind {kind}")


def geometry_pivot(item: Item) -> tuple[float, float]:
    """Rotation pivot / connector anchor: bounding-box center, except the
    radarc center point and the text anchor (their natural pivots)."""
    g = item.geometry
    k = item.kind
    if k in _RECT_KINDS:
        return g["x"] + g["w"] / 2.0, g["y"] + g["h"] / 2.0
    if k is ItemKind.LINE:
        return (g["x1"] + g["x2"]) / 2.0, (g["y1"] + g["y2"]) / 2.0
    if k is ItemKind.POINT:
        return g["x"], g["y"]
    if k in (ItemKind.POLYGON, ItemKind.POLYLINE):
        xs = [p[0] for p in g["points"]]
        ys = [p[1] for p in g["points"]]
        return (min(xs) + max(xs)) / 2.0, (min(ys) + max(ys)) / 2.0
    if k is ItemKind.RADARC:
        return g["cx"], g["cy"]
    if k is ItemKind.TEXT:
        return g["x"], g["y"]
    raise ValueError(f"no intrinsic pivot for {k}")


def _rotate_about(px: float, py: float, cx: float, cy: float, theta: float) -> tuple[float, float]:
    ct, st = math.cos(theta), math.sin(theta)
    dx, dy = px - cx, py - cy
    return cx + ct * dx - st * dy, cy + st * dx + ct * dy


def _dist_to_segment(px, py, x1, y1, x2, y2) -> float:
    vx, vy = x2 - x1, y2 - y1
    wx, wy = px - x1, py - y1
    vv = vx * vx + vy * vy
    if vv == 0.0:
        return math.hypot(wx, wy)
    t = max(0.0, min(1.0, (wx * vx + wy * vy) / vv))
    return math.hypot(px - (x1 + t * vx), py - (y1 + t * vy))


def _polygon_contains(pts: list, px: float, py: float) -> bool:
    # Even-odd rule.
    inside = False
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xin = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xin:
                inside = not inside
    return inside


# --------------------------------------------------------------------------
# view / desktop
# --------------------------------------------------------------------------


class View:
    def __init__(self, view_id: str, title: str, kind: ViewKind,
                 world_bounds: tuple[float, float, float, float]) -> None:
        x, y, w, h = world_bounds
        if not _finite(x, y, w, h) or w <= 0 or h <= 0:
            raise ValueError(f"degenerate world bounds {world_bounds}")
        self.id = view_id
        self.title = title
        self.kind = ViewKind(kind)
        self.world_bounds = (float(x), float(y), float(w), float(h))
        self.viewport = _fit_viewport(self.world_bounds)
        self.layers: list[Layer] = [
            Layer("connection", "connection", reserved=ReservedRole.CONNECTION),
            Layer("annotation", "annotation", reserved=ReservedRole.ANNOTATION),
        ]
        self._next_layer = 1
        self._next_item = 1

    # -- lookup --------------------------------------------------------------

    def layer(self, layer_id: str) -> Layer:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise UnknownLayer(layer_id)

    @property
    def connection_layer(self) -> Layer:
        return self.layers[0]

    @property
    def annotation_layer(self) -> Layer:
        return self.layers[-1]

    def find_item(self, item_id: str) -> tuple[Layer, Item]:
        for layer in self.layers:
            for item in layer.items:
                if item.id == item_id:
                    return layer, item
        raise UnknownItem(item_id)

    def item(self, item_id: str) -> Item:
        return self.find_item(item_id)[1]

    def iter_items(self) -> Iterable[Item]:
        for layer in self.layers:
            yield from layer.items

    # -- layer operations ------------------------------------------------------

    def add_layer(self, name: str) -> Layer:
        layer = Layer(f"layer-{self._next_layer}", name)
        self._next_layer += 1
        self.layers.insert(len(self.layers) - 1, layer)  # just below annotation
        return layer

    def reorder_layer(self, layer_id: str, new_position: int) -> None:
        layer = self.layer(layer_id)
        if layer.reserved is not ReservedRole.NONE:
            raise ReservedLayer(f"{layer_id} cannot be moved")
        if not 1 <= new_position <= len(self.layers) - 2:
            raise InvalidPosition(f"position {new_position} would displace a reserved layer")
        self.layers.remove(layer)
        self.layers.insert(new_position, layer)

    def remove_layer(self, layer_id: str) -> None:
        layer = self.layer(layer_id)
        if layer.reserved is not ReservedRole.NONE:
            raise ReservedLayer(f"{layer_id} cannot be removed")
        self.layers.remove(layer)
        self._sweep_connectors({item.id for item in layer.items})

    def set_layer_visibility(self, layer_id: str, visible: bool) -> None:
        self.layer(layer_id).visible = bool(visible)

    def _sweep_connectors(self, removed_ids: set[str]) -> None:
        """Drop connectors whose endpoints no longer exist."""
        if not removed_ids:
            return
        conn = self.connection_layer
        conn.items = [
            it for it in conn.items
            if it.kind is not ItemKind.CONNECTOR
            or (it.geometry["from_id"] not in removed_ids
                and it.geometry["to_id"] not in removed_ids)
        ]

    # -- item operations -------------------------------------------------------

    def add_item(self, layer_id: str, kind, geometry: dict, *,
                 rotation: float = 0.0, style: Optional[Style] = None,
                 caps: Optional[Caps] = None, metadata: Optional[dict] = None) -> Item:
        layer = self.layer(layer_id)
        kind = ItemKind(kind)
        validate_geometry(kind, geometry)
        if kind is ItemKind.CONNECTOR:
            if layer.reserved is not ReservedRole.CONNECTION:
                raise ConnectorPlacement("connectors live on the connection layer only")
            known = {it.id for it in self.iter_items()}
            for end in (geometry["from_id"], geometry["to_id"]):
                if end not in known:
                    raise DanglingReference(end)
            if caps is None:
                # Connector geometry is derived from its endpoints.
                caps = Caps(draggable=False, rotatable=False, resizable=False)
        item = Item(
            id=f"item-{self._next_item}",
            kind=kind,
            geometry=dict(geometry),
            rotation=float(rotation),
            style=style or Style(),
            caps=caps or Caps(),
            metadata=dict(metadata or {}),
        )
        self._next_item += 1
        layer.items.append(item)
        return item

    def connector_segment(self, item: Item) -> tuple[float, float, float, float]:
        """Connector endpoints, re-derived from the referenced items' centers."""
        if item.kind is not ItemKind.CONNECTOR:
            raise ValueError("not a connector")
        _, a = self.find_item(item.geometry["from_id"])
        _, b = self.find_item(item.geometry["to_id"])
        ax, ay = geometry_pivot(a)
        bx, by = geometry_pivot(b)
        return ax, ay, bx, by

    def _check_edit(self, item: Item, cap: str) -> None:
        if item.locked:
            raise Locked(item.id)
        if not getattr(item.caps, cap):
            raise CapabilityDenied(f"{item.id}: {cap} is off")

    @staticmethod
    def _geometry_edit_guard(item: Item) -> None:
        if item.kind is ItemKind.CONNECTOR:
            raise CapabilityDenied("connector geometry is derived from its endpoints")

    def drag_item(self, item_id: str, dx: float, dy: float) -> None:
        _, item = self.find_item(item_id)
        self._check_edit(item, "draggable")
        self._geometry_edit_guard(item)
        if not _finite(dx, dy):
            raise ValueError("drag delta must be finite")
        g = item.geometry
        k = item.kind
        if k in _RECT_KINDS or k in (ItemKind.POINT, ItemKind.TEXT):
            g["x"] += dx
            g["y"] += dy
        elif k is ItemKind.LINE:
            g["x1"] += dx
            g["y1"] += dy
            g["x2"] += dx
            g["y2"] += dy
        elif k in (ItemKind.POLYGON, ItemKind.POLYLINE):
            g["points"] = [[px + dx, py + dy] for px, py in g["points"]]
        elif k is ItemKind.RADARC:
            g["cx"] += dx
            g["cy"] += dy

    def rotate_item(self, item_id: str, dtheta: float) -> None:
        _, item = self.find_item(item_id)
        self._check_edit(item, "rotatable")
        self._geometry_edit_guard(item)
        if not _finite(dtheta):
            raise ValueError("rotation delta must be finite")
        item.rotation += dtheta

    def resize_item(self, item_id: str, bounds: tuple[float, float, float, float]) -> None:
        _, item = self.find_item(item_id)
        self._check_edit(item, "resizable")
        self._geometry_edit_guard(item)
        x, y, w, h = bounds
        if not _finite(x, y, w, h) or w < 0 or h < 0:
            raise ValueError(f"bad bounds {bounds}")
        g = item.geometry
        k = item.kind
        if k in _RECT_KINDS:
            g.update(x=x, y=y, w=w, h=h)
        elif k is ItemKind.POINT:
            g.update(x=x + w / 2.0, y=y + h / 2.0)
        elif k is ItemKind.TEXT:
            g.update(x=x, y=y)
        elif k is ItemKind.RADARC:
            g.update(cx=x + w / 2.0, cy=y + h / 2.0, radius=max(min(w, h) / 2.0, 1e-12))
        elif k is ItemKind.LINE:
            self._map_points_into(item, [(g["x1"], g["y1"]), (g["x2"], g["y2"])], bounds,
                                  assign=lambda ps: g.update(x1=ps[0][0], y1=ps[0][1],
                                                             x2=ps[1][0], y2=ps[1][1]))
        elif k in (ItemKind.POLYGON, ItemKind.POLYLINE):
            self._map_points_into(item, [tuple(p) for p in g["points"]], bounds,
                                  assign=lambda ps: g.update(points=[list(p) for p in ps]))

    @staticmethod
    def _map_points_into(item: Item, pts: list, bounds, assign) -> None:
        x, y, w, h = bounds
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ox, oy = min(xs), min(ys)
        ow, oh = max(xs) - ox, max(ys) - oy
        sx = w / ow if ow > 0 else 0.0
        sy = h / oh if oh > 0 else 0.0
        mapped = [
            (x + (px - ox) * sx if ow > 0 else x + w / 2.0,
             y + (py - oy) * sy if oh > 0 else y + h / 2.0)
            for px, py in pts
        ]
        assign(mapped)

    def set_item_style(self, item_id: str, *, stroke=None, fill=_UNSET,
                       line_width=None) -> None:
        # Styling rides the "editable" capability; there is no separate flag.
        _, item = self.find_item(item_id)
        self._check_edit(item, "editable")
        if stroke is not None:
            item.style.stroke = str(stroke)
        if fill is not _UNSET:
            item.style.fill = None if fill is None else str(fill)
        if line_width is not None:
            lw = float(line_width)
            if lw < 0 or not math.isfinite(lw):
                raise ValueError("line_width must be finite and >= 0")
            item.style.line_width = lw

    def set_item_locked(self, item_id: str, locked: bool) -> None:
        _, item = self.find_item(item_id)
        if not item.caps.lockable:
            raise CapabilityDenied(f"{item_id}: lockable is off")
        # Unlocking is the one edit a locked item accepts.
        item.locked = bool(locked)

    def select_item(self, item_id: str, selected: bool = True) -> None:
        _, item = self.find_item(item_id)
        self._check_edit(item, "selectable")
        item.selected = bool(selected)

    def delete_item(self, item_id: str) -> None:
        layer, item = self.find_item(item_id)
        if item.locked:
            raise Locked(item_id)
        if not item.caps.deletable:
            raise CapabilityDenied(f"{item_id}: deletable is off")
        layer.items.remove(item)
        self._sweep_connectors({item_id})

    def set_item_metadata(self, item_id: str, entries: dict) -> None:
        _, item = self.find_item(item_id)
        self._check_edit(item, "editable")
        item.metadata.update({str(k): str(v) for k, v in entries.items()})

    # -- traversal / picking ---------------------------------------------------

    def render_order(self) -> list[tuple[str, str]]:
        """(layer_id, item_id) pairs, bottom to top, hidden layers omitted."""
        out = []
        for layer in self.layers:
            if not layer.visible:
                continue
            for item in layer.items:
                out.append((layer.id, item.id))
        return out

    def world_to_screen(self, x: float, y: float) -> tuple[float, float]:
        return self.viewport.apply(x, y)

    def screen_to_world(self, sx: float, sy: float) -> tuple[float, float]:
        return self.viewport.inverse().apply(sx, sy)

    def world_per_pixel(self) -> float:
        det = self.viewport.det()
        if det == 0 or not math.isfinite(det):
            raise SingularViewport(f"determinant {det}")
        return 1.0 / math.sqrt(abs(det))

    def pick_tolerance(self, item: Item) -> float:
        """Stroke pick radius in world units: max(line_width, 4 px)."""
        return max(item.style.line_width, PICK_RADIUS_PX) * self.world_per_pixel()

    def item_contains(self, item: Item, wx: float, wy: float) -> bool:
        g = item.geometry
        k = item.kind
        tol = self.pick_tolerance(item)
        if k is ItemKind.CONNECTOR:
            x1, y1, x2, y2 = self.connector_segment(item)
            return _dist_to_segment(wx, wy, x1, y1, x2, y2) <= tol
        if item.rotation != 0.0:
            cx, cy = geometry_pivot(item)
            wx, wy = _rotate_about(wx, wy, cx, cy, -item.rotation)
        if k in (ItemKind.RECTANGLE, ItemKind.IMAGE):
            return g["x"] <= wx <= g["x"] + g["w"] and g["y"] <= wy <= g["y"] + g["h"]
        if k is ItemKind.ELLIPSE:
            rx, ry = g["w"] / 2.0, g["h"] / 2.0
            if rx == 0 or ry == 0:
                return False
            nx = (wx - (g["x"] + rx)) / rx
            ny = (wy - (g["y"] + ry)) / ry
            return nx * nx + ny * ny <= 1.0
        if k is ItemKind.LINE:
            return _dist_to_segment(wx, wy, g["x1"], g["y1"], g["x2"], g["y2"]) <= tol
        if k is ItemKind.POINT:
            return math.hypot(wx - g["x"], wy - g["y"]) <= tol
        if k is ItemKind.POLYLINE:
            pts = g["points"]
            return any(
                _dist_to_segment(wx, wy, pts[i][0], pts[i][1], pts[i + 1][0], pts[i + 1][1]) <= tol
                for i in range(len(pts) - 1)
            )
        if k is ItemKind.POLYGON:
            return _polygon_contains(g["points"], wx, wy)
        if k is ItemKind.RADARC:
            dx, dy = wx - g["cx"], wy - g["cy"]
            r = math.hypot(dx, dy)
            if r > g["radius"]:
                return False
            if r == 0.0:
                return True
            sweep = (g["end"] - g["start"]) % (2.0 * math.pi)
            if sweep == 0.0 and g["end"] != g["start"]:
                sweep = 2.0 * math.pi
            delta = (math.atan2(dy, dx) - g["start"]) % (2.0 * math.pi)
            return delta <= sweep
        if k is ItemKind.TEXT:
            return math.hypot(wx - g["x"], wy - g["y"]) <= tol
        return False  # pragma: no cover

    def hit_test(self, sx: float, sy: float) -> list[str]:
        """Item ids containing the screen point, topmost first."""
        wx, wy = self.screen_to_world(sx, sy)
        hits = []
        for layer_id, item_id in reversed(self.render_order()):
            _, item = self.find_item(item_id)
            if self.item_contains(item, wx, wy):
                hits.append(item_id)
        return hits

    # -- viewport tools ----------------------------------------------------------

    def pan_screen(self, dx_px: float, dy_px: float) -> None:
        self.viewport = Affine(e=dx_px, f=dy_px).compose(self.viewport)

    def zoom_about(self, sx: float, sy: float, factor: float) -> None:
        if factor <= 0 or not math.isfinite(factor):
            raise ValueError("zoom factor must be positive")
        z = Affine(a=factor, d=factor, e=sx * (1 - factor), f=sy * (1 - factor))
        self.viewport = z.compose(self.viewport)

    def fit_world_rect(self, x: float, y: float, w: float, h: float) -> None:
        if w <= 0 or h <= 0 or not _finite(x, y, w, h):
            raise ValueError("degenerate zoom rect")
        self.viewport = _fit_viewport((x, y, w, h))


class Desktop:
    """Owns the views; view ids are unique across the desktop."""

    def __init__(self) -> None:
        self.views: list[View] = []
        self.active_view_id: Optional[str] = None
        self._next_view = 1

    def create_view(self, title: str, kind, world_bounds) -> View:
        view = View(f"view-{self._next_view}", title, ViewKind(kind), tuple(world_bounds))
        self._next_view += 1
        self.views.append(view)
        if self.active_view_id is None:
            self.active_view_id = view.id
        return view

    def view(self, view_id: str) -> View:
        for v in self.views:
            if v.id == view_id:
                return v
        raise UnknownView(view_id)

    def set_active(self, view_id: str) -> None:
        self.view(view_id)
        self.active_view_id = view_id


# --------------------------------------------------------------------------
# edit dispatcher (wire-facing)
# --------------------------------------------------------------------------

EDIT_OPS = ("drag", "rotate", "resize", "set_style", "set_locked", "select",
            "delete", "set_metadata")


def apply_item_edit(view: View, item_id: str, edit: dict) -> None:
    """Apply one wire-format edit: {"op": ..., ...}."""
    op = edit.get("op")
    if op == "drag":
        view.drag_item(item_id, float(edit["dx"]), float(edit["dy"]))
    elif op == "rotate":
        view.rotate_item(item_id, float(edit["dtheta"]))
    elif op == "resize":
        view.resize_item(item_id, tuple(edit["bounds"]))
    elif op == "set_style":
        kwargs = {}
        if "stroke" in edit:
            kwargs["stroke"] = edit["stroke"]
        if "fill" in edit:
            kwargs["fill"] = edit["fill"]
        if "line_width" in edit:
            kwargs["line_width"] = edit["line_width"]
        view.set_item_style(item_id, **kwargs)
    elif op == "set_locked":
        view.set_item_locked(item_id, bool(edit["locked"]))
    elif op == "select":
        view.select_item(item_id, bool(edit.get("selected", True)))
    elif op == "delete":
        view.delete_item(item_id)
    elif op == "set_metadata":
        view.set_item_metadata(item_id, dict(edit["entries"]))
    else:
        raise ValueError(f"unknown edit op {op!r}")
