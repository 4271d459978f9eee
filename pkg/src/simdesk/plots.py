"""Plot data model: series, 1D/2D histograms, curve fitting, persistence.

Fitting is damped iterative nonlinear least squares with a Levenberg-style
damping schedule (start 1e-3, x10 when the residual grows, /10 when it
shrinks).  Gaussian widths are fit in log space internally so iterates can
never leave the sigma > 0 region; reported parameters are back-transformed.
Documents persist as versioned, human-readable JSON (format version "1").
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .bus import MessageBus, TOPIC_PLOT_DATA

FORMAT_VERSION = "1"


class FitError(Exception):
    pass


class SingularJacobian(FitError):
    pass


class PlotFormatError(ValueError):
    """Malformed persisted document; message carries a position or path."""


class UnknownSeries(KeyError):
    pass


@dataclass
class SeriesStyle:
    color: str = "#1f77b4"
    line_width: float = 1.5
    marker: str = ""


@dataclass
class DataSeries:
    name: str
    xs: list[float] = field(default_factory=list)
    ys: list[float] = field(default_factory=list)
    style: SeriesStyle = field(default_factory=SeriesStyle)

    def append(self, x: float, y: float) -> None:
        if not math.isfinite(x):
            raise ValueError("x must be finite")
        self.xs.append(float(x))
        self.ys.append(float(y))

    def __len__(self) -> int:
        return len(self.xs)


class Histogram1D:
    """Fixed-width bins over the half-open range [lo, hi)."""

    def __init__(self, n_bins: int, lo: float, hi: float, name: str = "") -> None:
        if n_bins < 1:
            raise ValueError("n_bins must be positive")
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError("need finite lo < hi")
        self.name = name
        self.n_bins = int(n_bins)
        self.lo = float(lo)
        self.hi = float(hi)
        self.counts = np.zeros(self.n_bins, dtype=np.int64)
        self.underflow = 0
        self.overflow = 0

    def fill(self, x: float) -> None:
        if not math.isfinite(x):
            raise ValueError("non-finite fill value")
        if x < self.lo:
            self.underflow += 1
        elif x >= self.hi:
            self.overflow += 1
        else:
            idx = int((x - self.lo) * self.n_bins / (self.hi - self.lo))
            self.counts[min(idx, self.n_bins - 1)] += 1

    def fill_array(self, xs) -> None:
        xs = np.asarray(xs, dtype=float)
        if not np.all(np.isfinite(xs)):
            raise ValueError("non-finite fill value")
        self.underflow += int(np.count_nonzero(xs < self.lo))
        self.overflow += int(np.count_nonzero(xs >= self.hi))
        inside = xs[(xs >= self.lo) & (xs < self.hi)]
        idx = np.minimum(
            ((inside - self.lo) * self.n_bins / (self.hi - self.lo)).astype(np.int64),
            self.n_bins - 1,
        )
        self.counts += np.bincount(idx, minlength=self.n_bins)

    def total_fills(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def bin_centers(self) -> np.ndarray:
        width = (self.hi - self.lo) / self.n_bins
        return self.lo + width * (np.arange(self.n_bins) + 0.5)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Histogram1D)
            and self.name == other.name
            and (self.n_bins, self.lo, self.hi) == (other.n_bins, other.lo, other.hi)
            and np.array_equal(self.counts, other.counts)
            and (self.underflow, self.overflow) == (other.underflow, other.overflow)
        )


class Histogram2D:
    def __init__(self, nx: int, ny: int, xrange: tuple[float, float],
                 yrange: tuple[float, float], name: str = "") -> None:
        if nx < 1 or ny < 1:
            raise ValueError("bin counts must be positive")
        lox, hix = xrange
        loy, hiy = yrange
        if not (lox < hix and loy < hiy):
            raise ValueError("need lo < hi on both axes")
        self.name = name
        self.nx, self.ny = int(nx), int(ny)
        self.lox, self.hix = float(lox), float(hix)
        self.loy, self.hiy = float(loy), float(hiy)
        self.counts = np.zeros((self.nx, self.ny), dtype=np.int64)
        self.out_of_range = 0

    def fill(self, x: float, y: float) -> None:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("non-finite fill value")
        if not (self.lox <= x < self.hix and self.loy <= y < self.hiy):
            self.out_of_range += 1
            return
        ix = min(int((x - self.lox) * self.nx / (self.hix - self.lox)), self.nx - 1)
        iy = min(int((y - self.loy) * self.ny / (self.hiy - self.loy)), self.ny - 1)
        self.counts[ix, iy] += 1

    def fill_array(self, xs, ys) -> None:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("non-finite fill value")
        ok = (xs >= self.lox) & (xs < self.hix) & (ys >= self.loy) & (ys < self.hiy)
        self.out_of_range += int(np.count_nonzero(~ok))
        ix = np.minimum(((xs[ok] - self.lox) * self.nx / (self.hix - self.lox)).astype(np.int64),
                        self.nx - 1)
        iy = np.minimum(((ys[ok] - self.loy) * self.ny / (self.hiy - self.loy)).astype(np.int64),
                        self.ny - 1)
        np.add.at(self.counts, (ix, iy), 1)

    def total_fills(self) -> int:
        return int(self.counts.sum()) + self.out_of_range

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Histogram2D)
            and self.name == other.name
            and (self.nx, self.ny) == (other.nx, other.ny)
            and (self.lox, self.hix, self.loy, self.hiy)
            == (other.lox, other.hix, other.loy, other.hiy)
            and np.array_equal(self.counts, other.counts)
            and self.out_of_range == other.out_of_range
        )


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------


def gaussian_sum_eval(params, x):
    """Sum of k Gaussians; params laid out [A1, mu1, sigma1, ..., Ak, muk, sigmak]."""
    params = np.asarray(params, dtype=float)
    if params.size % 3 != 0 or params.size == 0:
        raise ValueError("params length must be a positive multiple of 3")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x, dtype=float)
    for i in range(0, params.size, 3):
        amp, mu, sigma = params[i], params[i + 1], params[i + 2]
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        out += amp * np.exp(-((x - mu) ** 2) / (2.0 * sigma * sigma))
    return out


def gaussian_sum_gradient(params, x):
    """Analytic d(model)/d(param): shape (len(x), 3k), columns in params order."""
    params = np.asarray(params, dtype=float)
    x = np.asarray(x, dtype=float)
    grad = np.empty((x.size, params.size), dtype=float)
    for i in range(0, params.size, 3):
        amp, mu, sigma = params[i], params[i + 1], params[i + 2]
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        z = (x - mu) / sigma
        e = np.exp(-0.5 * z * z)
        grad[:, i] = e
        grad[:, i + 1] = amp * e * z / sigma
        grad[:, i + 2] = amp * e * z * z / sigma
    return grad


@dataclass(frozen=True)
class PolynomialModel:
    degree: int

    @property
    def kind(self) -> str:
        return f"polynomial({self.degree})"

    @property
    def n_params(self) -> int:
        return self.degree + 1


@dataclass(frozen=True)
class GaussianSumModel:
    k: int

    @property
    def kind(self) -> str:
        return f"gaussian_sum({self.k})"

    @property
    def n_params(self) -> int:
        return 3 * self.k


@dataclass(frozen=True)
class CustomModel:
    fn: Callable  # fn(params, x) -> y
    jac: Optional[Callable] = None  # jac(params, x) -> (n, m)
    n_params: int = 0
    kind: str = "custom"


ModelSpec = Union[PolynomialModel, GaussianSumModel, CustomModel]


@dataclass
class FitModel:
    kind: str
    params: np.ndarray
    chi2: float
    converged: bool
    iterations: int

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FitModel)
            and self.kind == other.kind
            and np.array_equal(self.params, other.params)
            and (self.chi2, self.converged, self.iterations)
            == (other.chi2, other.converged, other.iterations)
        )


def _numeric_jacobian(fn, params, x):
    m = params.size
    base = fn(params, x)
    J = np.empty((base.size, m))
    for j in range(m):
        h = 1e-7 * max(abs(params[j]), 1.0)
        p = params.copy()
        p[j] += h
        J[:, j] = (fn(p, x) - base) / h
    return J


def _damped_least_squares(f, jac, y, w, p0, rel_tol, max_iter):
    """Minimize sum(w * (y - f(p))^2).  Returns (p, chi2, converged, iters)."""
    p = np.asarray(p0, dtype=float).copy()
    r = y - f(p)
    chi2 = float(np.sum(w * r * r))
    lam = 1e-3
    iterations = 0
    converged = False
    last_accepted = False
    while iterations < max_iter:
        iterations += 1
        J = jac(p)
        A = J.T @ (w[:, None] * J)
        g = J.T @ (w * r)
        scale = np.diag(A).copy()
        scale[scale <= 0] = 1.0
        try:
            delta = np.linalg.solve(A + lam * np.diag(scale), g)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from None
        if not np.all(np.isfinite(delta)):
            raise SingularJacobian("non-finite step")
        p_try = p + delta
        r_try = y - f(p_try)
        chi2_try = float(np.sum(w * r_try * r_try))
        if chi2_try <= chi2:
            rel_change = float(np.max(np.abs(delta) / np.maximum(np.abs(p), 1.0)))
            p, r, chi2 = p_try, r_try, chi2_try
            lam = max(lam / 10.0, 1e-15)
            last_accepted = True
            if rel_change < rel_tol:
                converged = True
                break
        else:
            lam *= 10.0
            last_accepted = False
            if lam > 1e12:
                break
    else:
        # Ran out of iterations while the residual was still shrinking.
        converged = last_accepted
    return p, chi2, converged, iterations


def _fit_data(target):
    if isinstance(target, Histogram1D):
        x = target.bin_centers()
        y = target.counts.astype(float)
        w = 1.0 / np.maximum(y, 1.0)
        return x, y, w
    if isinstance(target, DataSeries):
        x = np.asarray(target.xs, dtype=float)
        y = np.asarray(target.ys, dtype=float)
        return x, y, np.ones_like(x)
    raise TypeError(f"cannot fit a {type(target).__name__}")


def fit(target, model: ModelSpec, initial_guess, *,
        rel_tol: float = 1e-8, max_iter: int = 200) -> FitModel:
    """Weighted least-squares fit of ``model`` to a histogram or series."""
    x, y, w = _fit_data(target)
    p0 = np.asarray(initial_guess, dtype=float)
    if not np.all(np.isfinite(p0)):
        raise ValueError("initial guess must be finite")

    if isinstance(model, PolynomialModel):
        if p0.size != model.n_params:
            raise ValueError(f"expected {model.n_params} parameters")
        if x.size < model.n_params:
            raise ValueError("fewer data points than parameters")
        # The linear case is exactly solvable; no damping loop needed.
        V = np.vander(x, model.n_params, increasing=True)
        sw = np.sqrt(w)
        params, *_ = np.linalg.lstsq(sw[:, None] * V, sw * y, rcond=None)
        resid = y - V @ params
        return FitModel(model.kind, params, float(np.sum(w * resid * resid)), True, 1)

    if isinstance(model, GaussianSumModel):
        if p0.size != model.n_params:
            raise ValueError(f"expected {model.n_params} parameters")
        if x.size < model.n_params:
            raise ValueError("fewer data points than parameters")
        sigmas = p0[2::3]
        if np.any(sigmas <= 0):
            raise ValueError("initial sigma must be positive")

        def to_external(t):
            ext = t.copy()
            ext[2::3] = np.exp(t[2::3])
            return ext

        def f_int(t):
            return gaussian_sum_eval(to_external(t), x)

        def jac_int(t):
            ext = to_external(t)
            J = gaussian_sum_gradient(ext, x)
            # Chain rule for the log-sigma coordinates: df/dlog(s) = s * df/ds.
            J[:, 2::3] *= ext[2::3][None, :]
            return J

        t0 = p0.copy()
        t0[2::3] = np.log(sigmas)
        t, chi2, converged, iters = _damped_least_squares(
            f_int, jac_int, y, w, t0, rel_tol, max_iter)
        return FitModel(model.kind, to_external(t), chi2, converged, iters)

    if isinstance(model, CustomModel):
        if model.n_params and p0.size != model.n_params:
            raise ValueError(f"expected {model.n_params} parameters")
        fn = model.fn

        def f(p):
            return np.asarray(fn(p, x), dtype=float)

        if model.jac is not None:
            def jac(p):
                return np.asarray(model.jac(p, x), dtype=float)
        else:
            def jac(p):
                return _numeric_jacobian(lambda q, xv: np.asarray(fn(q, xv), float), p, x)

        if x.size < p0.size:
            raise ValueError("fewer data points than parameters")
        p, chi2, converged, iters = _damped_least_squares(f, jac, y, w, p0, rel_tol, max_iter)
        return FitModel(model.kind, p, chi2, converged, iters)

    raise TypeError(f"unknown model spec {model!r}")


# --------------------------------------------------------------------------
# document + persistence
# --------------------------------------------------------------------------


class PlotDocument:
    def __init__(self, title: str = "", x_label: str = "", y_label: str = "") -> None:
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.series: dict[str, DataSeries] = {}
        self.hists1d: list[Histogram1D] = []
        self.hists2d: list[Histogram2D] = []
        self.fits: list[FitModel] = []

    def add_series(self, name: str, style: Optional[SeriesStyle] = None) -> DataSeries:
        s = DataSeries(name, style=style or SeriesStyle())
        self.series[name] = s
        return s

    def bind_series_to_topic(self, bus: MessageBus, series_name: str,
                             topic: str = TOPIC_PLOT_DATA) -> int:
        """Append (x, y) from matching envelopes on every dispatch."""
        if series_name not in self.series:
            raise UnknownSeries(series_name)
        series = self.series[series_name]

        def handler(env):
            payload = env.payload
            if payload.get("series") == series_name:
                series.append(float(payload["x"]), float(payload["y"]))

        return bus.subscribe(topic, handler)

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "title": self.title,
            "x_label": self.x_label,
            "y_label": self.y_label,
            "series": [
                {
                    "name": s.name,
                    "style": {"color": s.style.color, "line_width": s.style.line_width,
                              "marker": s.style.marker},
                    "x": list(s.xs),
                    "y": list(s.ys),
                }
                for s in self.series.values()
            ],
            "hist1d": [
                {
                    "name": h.name, "n_bins": h.n_bins, "lo": h.lo, "hi": h.hi,
                    "counts": h.counts.tolist(),
                    "underflow": h.underflow, "overflow": h.overflow,
                }
                for h in self.hists1d
            ],
            "hist2d": [
                {
                    "name": h.name, "nx": h.nx, "ny": h.ny,
                    "xrange": [h.lox, h.hix], "yrange": [h.loy, h.hiy],
                    "counts": h.counts.tolist(),
                    "out_of_range": h.out_of_range,
                }
                for h in self.hists2d
            ],
            "fits": [
                {
                    "kind": f.kind, "params": f.params.tolist(), "chi2": f.chi2,
                    "converged": f.converged, "iterations": f.iterations,
                }
                for f in self.fits
            ],
        }

    def save(self) -> bytes:
        return json.dumps(self.to_dict(), indent=1).encode("utf-8")

    @staticmethod
    def load(data: bytes) -> "PlotDocument":
        try:
            obj = json.loads(data.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise PlotFormatError(f"not UTF-8 at byte {exc.start}") from None
        except json.JSONDecodeError as exc:
            raise PlotFormatError(f"bad JSON at byte {exc.pos}: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise PlotFormatError("top level must be an object")
        if obj.get("format_version") != FORMAT_VERSION:
            raise PlotFormatError(f"unsupported format_version {obj.get('format_version')!r}")
        try:
            doc = PlotDocument(obj.get("title", ""), obj.get("x_label", ""),
                               obj.get("y_label", ""))
            for s in obj.get("series", []):
                style = SeriesStyle(**s.get("style", {}))
                series = doc.add_series(s["name"], style)
                series.xs = [float(v) for v in s["x"]]
                series.ys = [float(v) for v in s["y"]]
            for h in obj.get("hist1d", []):
                hist = Histogram1D(h["n_bins"], h["lo"], h["hi"], h.get("name", ""))
                counts = np.asarray(h["counts"], dtype=np.int64)
                if counts.shape != (hist.n_bins,):
                    raise PlotFormatError(f"hist1d {hist.name!r}: counts length mismatch")
                hist.counts = counts
                hist.underflow = int(h["underflow"])
                hist.overflow = int(h["overflow"])
                doc.hists1d.append(hist)
            for h in obj.get("hist2d", []):
                hist = Histogram2D(h["nx"], h["ny"], tuple(h["xrange"]), tuple(h["yrange"]),
                                   h.get("name", ""))
                counts = np.asarray(h["counts"], dtype=np.int64)
                if counts.shape != (hist.nx, hist.ny):
                    raise PlotFormatError(f"hist2d {hist.name!r}: counts shape mismatch")
                hist.counts = counts
                hist.out_of_range = int(h["out_of_range"])
                doc.hists2d.append(hist)
            for f in obj.get("fits", []):
                doc.fits.append(FitModel(f["kind"], np.asarray(f["params"], dtype=float),
                                         float(f["chi2"]), bool(f["converged"]),
                                         int(f["iterations"])))
        except PlotFormatError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise PlotFormatError(f"bad document structure: {exc!r}") from None
        return doc

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PlotDocument)
            and (self.title, self.x_label, self.y_label)
            == (other.title, other.x_label, other.y_label)
            and list(self.series) == list(other.series)
            and all(
                a.name == b.name and a.xs == b.xs and a.ys == b.ys and a.style == b.style
                for a, b in zip(self.series.values(), other.series.values())
            )
            and self.hists1d == other.hists1d
            and self.hists2d == other.hists2d
            and self.fits == other.fits
        )
