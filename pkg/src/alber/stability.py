"""Stability of a background spectrum through its Gamma_X contours.

For every offset X the curve ``Gamma_X(t) = H[D_X P](t - i tol)`` (closed
through 0) is built and the target ``4 pi p / q`` is tested for enclosure.
The spectrum is unstable iff some curve winds around, or touches, the
target. Since ``D_{-X} P = D_X P`` and the X < 0 curves are the complex
conjugates of the X > 0 ones, only ``X >= 0`` is computed and the result is
mirrored.

Everything here runs in the rescaled unit-carrier convention; spectra with a
recorded carrier ``k0 != 1`` are rescaled on entry.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigError, NumericalError
from .quadrature import CompactFunction, cauchy
from .spectra import Spectrum, dxp_eval, dxp_function, jonswap, rescale_unit_carrier
from .transforms import PhysicalParams, hilbert_at, plemelj_side

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StabilityConfig:
    """Numerical knobs of the contour criterion.

    Attributes
    ----------
    x_step : float
        Spacing of the X grid.
    x_max : float
        Initial half-width M of the X grid; grown by ``x_growth`` until the
        outermost curve satisfies ``sup|Gamma_M| < |target|/2``.
    x_cap : float
        Hard limit on M.
    plemelj_tol : float
        Offset below the real axis used for the boundary values.
    on_tol : float
        Distance (curve units) under which the target counts as on the curve.
    curve_tol : float
        Curve endpoints must satisfy ``|Gamma| < curve_tol * sup|Gamma|``.
    points_per_panel : int
        Curve samples per quadrature panel of D_X P.
    refine_kappa : bool
        Polish the margin estimate around its grid minimiser.
    """

    x_step: float = 0.02
    x_max: float = 1.0
    x_growth: float = 1.5
    x_cap: float = 400.0
    plemelj_tol: float = 1e-4
    on_tol: float = 1e-6
    curve_tol: float = 1e-3
    points_per_panel: int = 8
    refine_kappa: bool = True
    kappa_rtol: float = 1e-3

    def __post_init__(self):
        for name in ("x_step", "x_max", "x_cap", "plemelj_tol", "on_tol", "curve_tol", "kappa_rtol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.x_growth <= 1:
            raise ConfigError("x_growth must be > 1")
        if self.x_max > self.x_cap:
            raise ConfigError("x_max exceeds x_cap")


# ---------------------------------------------------------------- geometry


def _as_points(curve) -> np.ndarray:
    pts = curve.points if isinstance(curve, ContourCurve) else curve
    return np.asarray(pts, dtype=complex).ravel()


def winding_number(curve, targets) -> np.ndarray:
    """Winding number of the closed polygon around each target.

    Signed crossing count of the horizontal ray to the right of the target.
    """
    pts = _as_points(curve)
    z = np.atleast_1d(np.asarray(targets, dtype=complex))
    if pts.size < 3:
        return np.zeros(z.shape, dtype=int)
    a = pts
    b = np.roll(pts, -1)
    ax, ay, bx, by = a.real, a.imag, b.real, b.imag
    out = np.empty(z.size, dtype=int)
    for i, zi in enumerate(z.ravel()):
        x, y = zi.real, zi.imag
        left = (bx - ax) * (y - ay) - (x - ax) * (by - ay)
        up = (ay <= y) & (by > y) & (left > 0)
        down = (ay > y) & (by <= y) & (left < 0)
        out[i] = int(np.count_nonzero(up)) - int(np.count_nonzero(down))
    return out.reshape(z.shape)


def distance_to_polyline(curve, target: complex) -> float:
    pts = _as_points(curve)
    if pts.size == 1:
        return abs(pts[0] - target)
    a = pts
    b = np.roll(pts, -1)
    d = b - a
    dd = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dd > 0, ((target - a) * np.conj(d)).real / dd, 0.0)
    s = np.clip(s, 0.0, 1.0)
    return float(np.min(np.abs(a + s * d - target)))


def winding_contains(curve, target: complex, on_tol: float = 1e-6) -> str:
    """Classify ``target`` as 'inside', 'outside' or 'on-curve'."""
    pts = _as_points(curve)
    if np.all(pts == pts[0]):
        return "on-curve" if abs(pts[0] - target) <= on_tol else "outside"
    if distance_to_polyline(pts, target) < on_tol:
        return "on-curve"
    return "inside" if winding_number(pts, target)[0] != 0 else "outside"


# ---------------------------------------------------------------- curves


@dataclass(frozen=True)
class ContourCurve:
    """Samples of Gamma_X; ``points`` ends with the closing point 0."""

    X: float
    t_nodes: np.ndarray
    points: np.ndarray
    closed: bool = True
    side: str = "lower"

    @property
    def open_points(self) -> np.ndarray:
        return self.points[:-1] if self.closed else self.points

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.points)))

    def scaled(self, c: float) -> "ContourCurve":
        return ContourCurve(self.X, self.t_nodes, c * self.points, self.closed, self.side)

    def mirrored(self) -> "ContourCurve":
        """The curve of -X: complex conjugate, traversed the other way round."""
        side = "upper" if self.side == "lower" else "lower"
        return ContourCurve(-self.X, self.t_nodes, np.conj(self.points), self.closed, side)


def _default_t_nodes(f: CompactFunction, per_panel: int) -> np.ndarray:
    pn = f.panels
    u = np.linspace(-1.0, 1.0, per_panel + 1)[:-1]
    t = (pn.center[:, None] + pn.half[:, None] * u[None, :]).ravel()
    return np.append(t, pn.hi[-1])


def _outer_nodes(a: float, b: float, scale: float, n: int = 12) -> tuple[np.ndarray, np.ndarray]:
    d = scale * np.geomspace(1e-3, 1.0, n)
    return a - d[::-1], b + d


def gamma_curve(P: Spectrum, params: PhysicalParams | None = None, X: float = 0.0,
                t_grid=None, tol: float = 1e-4, curve_tol: float = 1e-3,
                points_per_panel: int = 8) -> ContourCurve:
    """Sample Gamma_X(t) = H[D_X P](t -+ i tol) and close it through 0.

    Without ``t_grid`` the nodes follow the quadrature panels of D_X P and are
    extended geometrically beyond the support until the ends are within
    ``curve_tol * sup|Gamma|`` of 0; an explicit grid that does not reach
    that far raises :class:`NumericalError` ("t-range too small").
    """
    params = params or PhysicalParams()
    side = plemelj_side(params, X if X != 0 else 1.0)
    sgn = -1.0 if side == "lower" else 1.0
    if P.is_zero:
        return ContourCurve(float(X), np.zeros(1), np.zeros(1, complex), True, side)
    f = dxp_function(P, abs(X))
    pn, vals = f.panels, f.values

    def ev(t):
        return cauchy(pn, vals, np.asarray(t) + sgn * 1j * tol)

    if t_grid is not None:
        t = np.asarray(t_grid, dtype=float)
        G = ev(t)
        sup = np.max(np.abs(G))
        if max(abs(G[0]), abs(G[-1])) > curve_tol * sup:
            raise NumericalError(f"t-range too small for X={X}: endpoint |Gamma| = "
                                 f"{max(abs(G[0]), abs(G[-1])):.3g} vs sup {sup:.3g}")
    else:
        a, b = f.support
        t = _default_t_nodes(f, points_per_panel)
        G = ev(t)
        sup = np.max(np.abs(G))
        left, right = _outer_nodes(a, b, 1.0)
        tl, tr = [left], [right]
        Gl, Gr = [ev(left)], [ev(right)]
        # Gamma decays like 1/t^2 away from the support: push the ends out
        for _ in range(40):
            if abs(Gl[0][0]) <= curve_tol * sup and abs(Gr[-1][-1]) <= curve_tol * sup:
                break
            if abs(Gl[0][0]) > curve_tol * sup:
                span = a - tl[0][0]
                new = tl[0][0] - span * np.geomspace(0.25, 2.0, 4)[::-1]
                tl.insert(0, new)
                Gl.insert(0, ev(new))
            if abs(Gr[-1][-1]) > curve_tol * sup:
                span = tr[-1][-1] - b
                new = tr[-1][-1] + span * np.geomspace(0.25, 2.0, 4)
                tr.append(new)
                Gr.append(ev(new))
        else:
            raise NumericalError(f"t-range too small for X={X} after extension")
        t = np.concatenate(tl + [t] + tr)
        G = np.concatenate(Gl + [G] + Gr)
    return ContourCurve(float(X), t, np.append(G, 0.0), True, side)


# ---------------------------------------------------------------- verdicts


@dataclass
class StabilityVerdict:
    """Outcome of the contour criterion.

    Attributes
    ----------
    unstable : bool
    target : float
    kappa_estimate : float
        min |1 - H~| over the probed boundary points (refined locally).
    unstable_X : list of (float, float)
        Closed X-intervals of grid points whose curve encloses or touches
        the target (both signs of X).
    witnesses : list of (float, int)
        Winding number per grid X (X >= 0; X < 0 mirrors with the sign flipped).
    x_max : float
        Final half-width M of the X grid.
    flags : list of str
    """

    unstable: bool
    target: float
    kappa_estimate: float
    unstable_X: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)
    x_max: float = 0.0
    flags: list = field(default_factory=list)
    kappa_at: tuple = (math.nan, math.nan)
    max_crossing: float = 0.0

    @property
    def bandwidth(self) -> tuple[float, float]:
        """(smallest, largest) |X| in the unstable set, NaN if stable."""
        pos = [iv for iv in self.unstable_X if iv[1] >= 0]
        if not pos:
            return (math.nan, math.nan)
        return (max(0.0, min(iv[0] for iv in pos)), max(iv[1] for iv in pos))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bandwidth"] = list(self.bandwidth)
        return d


def _x_grid_positive(X_grid, cfg: StabilityConfig) -> np.ndarray | None:
    if X_grid is None:
        return None
    X = np.asarray(X_grid, dtype=float)
    if X.size == 0:
        raise ConfigError("empty X grid")
    return np.unique(np.abs(X))


def _curves_up_to(P: Spectrum, params: PhysicalParams, cfg: StabilityConfig,
                  sup_limit: float, X_fixed=None) -> tuple[list[ContourCurve], float]:
    """Curves on the X >= 0 grid; the grid grows until sup|Gamma_M| < sup_limit."""
    def one(X):
        return gamma_curve(P, params, X, None, cfg.plemelj_tol, cfg.curve_tol, cfg.points_per_panel)

    if X_fixed is not None:
        curves = [one(x) for x in X_fixed]
        M = float(X_fixed[-1])
        if curves[-1].sup >= sup_limit:
            log.warning("user X grid ends at %g with sup|Gamma| = %.3g >= %.3g", M,
                        curves[-1].sup, sup_limit)
        return curves, M
    h = cfg.x_step
    n = int(round(cfg.x_max / h))
    curves = [one(i * h) for i in range(n + 1)]
    while curves[-1].sup >= sup_limit:
        n_new = int(math.ceil(n * cfg.x_growth))
        if n_new * h > cfg.x_cap:
            raise NumericalError(
                f"X grid reached the cap {cfg.x_cap} with sup|Gamma_M| = {curves[-1].sup:.3g}"
                f" still >= {sup_limit:.3g}")
        curves.extend(one(i * h) for i in range(n + 1, n_new + 1))
        n = n_new
    return curves, n * h


def _extent(P, params, cfg: StabilityConfig, sup_limit: float) -> float:
    """Smallest M = x_max * growth^j (on the X grid) with sup|Gamma_M| < sup_limit."""
    M = cfg.x_max
    while True:
        c = gamma_curve(P, params, M, None, cfg.plemelj_tol, cfg.curve_tol, cfg.points_per_panel)
        if c.sup < sup_limit:
            return M
        M = cfg.x_step * math.ceil(M * cfg.x_growth / cfg.x_step)
        if M > cfg.x_cap:
            raise NumericalError(f"X extent reached the cap {cfg.x_cap}")


def _real_crossings(pts: np.ndarray) -> np.ndarray:
    im = pts.imag
    s = np.nonzero((im[:-1] <= 0) != (im[1:] <= 0))[0]
    if s.size == 0:
        return np.zeros(0)
    r0, r1, i0, i1 = pts.real[s], pts.real[s + 1], im[s], im[s + 1]
    return r0 - i0 * (r1 - r0) / (i1 - i0)


def _intervals(xs: np.ndarray, flags: np.ndarray, h: float) -> list[tuple[float, float]]:
    out = []
    start = None
    prev = None
    for x, f in zip(xs, flags):
        if f and start is None:
            start = x
        if f:
            prev = x
        if not f and start is not None:
            out.append((float(start), float(prev)))
            start = None
    if start is not None:
        out.append((float(start), float(prev)))
    return out


def _classify(curves: list[ContourCurve], target: float, on_tol: float, scale: float = 1.0):
    """Per-curve status for Gamma scaled by ``scale`` (curves are unscaled)."""
    t_eff = target / scale
    tol_eff = on_tol / scale
    status, wind = [], []
    for c in curves:
        s = winding_contains(c.points, t_eff, tol_eff)
        w = int(winding_number(c.points, t_eff)[0]) if s != "outside" else 0
        status.append(s)
        wind.append(w)
    return status, wind


def _assemble(curves, status, wind, target, scale, h) -> tuple[bool, list, list, list, float]:
    Xs = np.array([c.X for c in curves])
    bad = np.array([s != "outside" for s in status])
    flags = []
    if len(bad) > 1 and bad[0] != bad[1]:
        flags.append("x0_flip")
    pos = _intervals(Xs, bad, h)
    neg = [(-b, -a) for a, b in reversed(pos)]
    ivs = neg + pos
    # merge the two halves through X = 0
    merged = []
    for iv in ivs:
        if merged and iv[0] <= merged[-1][1] + 1e-12:
            merged[-1] = (merged[-1][0], max(merged[-1][1], iv[1]))
        else:
            merged.append(iv)
    witnesses = [(float(x), int(w)) for x, w in zip(Xs, wind)]
    crossing = max((float(np.max(_real_crossings(c.points), initial=0.0)) for c in curves), default=0.0)
    return bool(bad.any()), merged, witnesses, flags, crossing * scale


def _kappa_grid(curves, target, scale) -> tuple[float, float, float, int]:
    best = (math.inf, math.nan, math.nan, -1)
    for j, c in enumerate(curves):
        v = np.abs(1.0 - scale * c.open_points / target)
        i = int(np.argmin(v))
        if v[i] < best[0]:
            best = (float(v[i]), c.X, float(c.t_nodes[i]), j)
    return best


def _refine_kappa(P, params, cfg, target, scale, curves, start) -> tuple[float, float, float]:
    kappa, X0, t0, j = start
    if j < 0:
        return kappa, X0, t0
    c = curves[j]
    i = int(np.argmin(np.abs(c.t_nodes - t0)))
    dt = float(max(np.diff(c.t_nodes[max(i - 1, 0): i + 2]).max(), 1e-12))
    dX = cfg.x_step
    sgn = -1.0
    for _ in range(30):
        Xs = np.unique(np.clip(X0 + dX * np.linspace(-1, 1, 5), 0.0, None))
        ts = t0 + dt * np.linspace(-1, 1, 5)
        best = (kappa, X0, t0)
        for X in Xs:
            f = dxp_function(P, float(X))
            G = cauchy(f.panels, f.values, ts + sgn * 1j * cfg.plemelj_tol)
            v = np.abs(1.0 - scale * G / target)
            i = int(np.argmin(v))
            if v[i] < best[0]:
                best = (float(v[i]), float(X), float(ts[i]))
        change = (kappa - best[0]) / max(kappa, 1e-300)
        kappa, X0, t0 = best
        dX *= 0.5
        dt *= 0.5
        if change < cfg.kappa_rtol and dX < cfg.x_step / 4:
            break
    return kappa, X0, t0


def _prepare(P: Spectrum) -> Spectrum:
    return rescale_unit_carrier(P) if P.carrier != 1 else P


def is_unstable(P: Spectrum, params: PhysicalParams | None = None, X_grid=None,
                cfg: StabilityConfig = StabilityConfig(), keep_curves: bool = False):
    """Contour criterion: unstable iff some Gamma_X encloses or touches the target.

    Returns a :class:`StabilityVerdict`; with ``keep_curves`` also the list
    of X >= 0 curves.
    """
    params = params or PhysicalParams()
    target = params.target
    P = _prepare(P)
    if P.is_zero:
        v = StabilityVerdict(False, target, 1.0, [], [(0.0, 0)], 0.0, [], (0.0, math.nan), 0.0)
        return (v, []) if keep_curves else v
    Xf = _x_grid_positive(X_grid, cfg)
    curves, M = _curves_up_to(P, params, cfg, abs(target) / 2, Xf)
    v = _verdict_from_curves(P, params, cfg, curves, M, 1.0)
    return (v, curves) if keep_curves else v


def _verdict_from_curves(P, params, cfg, curves, M, scale) -> StabilityVerdict:
    target = params.target
    status, wind = _classify(curves, target, cfg.on_tol, scale)
    unstable, ivs, wit, flags, cross = _assemble(curves, status, wind, target, scale, cfg.x_step)
    start = _kappa_grid(curves, target, scale)
    kappa, kX, kt = start[:3]
    if cfg.refine_kappa:
        kappa, kX, kt = _refine_kappa(P, params, cfg, target, scale, curves, start)
    if unstable:
        flags.append("kappa_on_unstable_spectrum")
    return StabilityVerdict(unstable, target, float(kappa), ivs, wit, float(M), flags,
                            (float(kX), float(kt)), float(cross))


def kappa_estimate(P: Spectrum, params: PhysicalParams | None = None, X_grid=None,
                   s_grid=None, cfg: StabilityConfig = StabilityConfig()) -> float:
    """min |1 - H~(X, s)| over the boundary probe grid, locally refined.

    ``s_grid`` (curve parameter t, not the Laplace variable) overrides the
    automatic node placement. A warning is logged if the spectrum is
    unstable; the number is returned anyway.
    """
    params = params or PhysicalParams()
    P = _prepare(P)
    if P.is_zero:
        return 1.0
    target = params.target
    if s_grid is None:
        v = is_unstable(P, params, X_grid, cfg)
        if v.unstable:
            log.warning("kappa_estimate on an unstable spectrum (kappa=%.3g)", v.kappa_estimate)
        return v.kappa_estimate
    Xs = _x_grid_positive(X_grid, cfg)
    if Xs is None:
        Xs = np.arange(0.0, cfg.x_max + 0.5 * cfg.x_step, cfg.x_step)
    curves = [gamma_curve(P, params, X, s_grid, cfg.plemelj_tol, np.inf) for X in Xs]
    start = _kappa_grid(curves, target, 1.0)
    if cfg.refine_kappa:
        return _refine_kappa(P, params, cfg, target, 1.0, curves, start)[0]
    return start[0]


# ---------------------------------------------------------------- sufficient condition


@dataclass
class SufficientResult:
    status: str  # "stable" | "inconclusive"
    max_value: float
    worst: tuple = (math.nan, math.nan)
    n_points: int = 0

    def __str__(self) -> str:
        return self.status


def sufficient_stable(P: Spectrum, params: PhysicalParams | None = None, X_grid=None,
                      cfg: StabilityConfig = StabilityConfig()) -> SufficientResult:
    """Sufficient condition: H[D_X P](t*) < target at every zero t* of D_X P.

    Zeros inside the support come from sign changes on the panel nodes,
    polished with brentq; outside the support D_X P vanishes identically and
    H is sampled on a geometric grid. Returns "stable" or "inconclusive",
    never "unstable".
    """
    params = params or PhysicalParams()
    target = params.target
    P = _prepare(P)
    if P.is_zero:
        return SufficientResult("stable", 0.0)
    Xs = _x_grid_positive(X_grid, cfg)
    if Xs is None:
        M = _extent(P, params, cfg, abs(target) / 2)
        Xs = np.arange(0.0, M + 0.5 * cfg.x_step, cfg.x_step)
    worst = (-math.inf, math.nan, math.nan)
    npts = 0
    sign_t = math.copysign(1.0, target)
    for X in Xs:
        f = dxp_function(P, float(X))
        a, b = f.support
        t = _default_t_nodes(f, cfg.points_per_panel)
        v = f(t)
        scale = np.max(np.abs(v))
        # ignore sign flips of roundoff-level values far out in the tails
        v = np.where(np.abs(v) < 1e-14 * scale, 0.0, v)
        s = np.sign(v)
        nz = np.nonzero(s)[0]
        zeros = []
        for i0, i1 in zip(nz[:-1], nz[1:]):
            if s[i0] != s[i1]:
                zeros.append(optimize.brentq(lambda x: float(dxp_eval(P, float(X), x)),
                                             t[i0], t[i1], xtol=1e-14))
        left, right = _outer_nodes(a, b, 100.0, 12)
        ext = np.concatenate([left, right])
        vals_z = hilbert_at(f, np.array(zeros)) if zeros else np.zeros(0)
        vals_e = hilbert_at(f, ext)
        pts = np.concatenate([zeros, ext])
        vals = np.concatenate([vals_z, vals_e])
        npts += len(pts)
        k = int(np.argmax(sign_t * vals))
        if sign_t * vals[k] > worst[0]:
            worst = (float(sign_t * vals[k]), float(X), float(pts[k]))
    status = "stable" if worst[0] < abs(target) else "inconclusive"
    return SufficientResult(status, sign_t * worst[0], worst[1:], npts)


# ---------------------------------------------------------------- eigenvalue relation


@dataclass(frozen=True)
class Witness:
    """A solution of H[D_X P](Omega) = target."""

    X: float
    omega: complex
    residual: float
    iterations: int

    def reflected(self) -> "Witness":
        return Witness(-self.X, complex(np.conj(self.omega)), self.residual, self.iterations)


@dataclass
class CrosscheckReport:
    witness: Witness | None
    attempts: list = field(default_factory=list)
    message: str = ""


def _newton(P, X, target, omega0, sgn, max_iter=80, tol=1e-13):
    f = dxp_function(P, X)
    h = 0.5 * X
    df = CompactFunction(lambda k: (P.derivative(k + h) - P.derivative(k - h)) / X,
                         f.support, f.breakpoints)
    om = complex(omega0)
    F = complex(cauchy(f.panels, f.values, om)[0]) - target
    for it in range(1, max_iter + 1):
        dF = complex(cauchy(df.panels, df.values, om)[0])
        if dF == 0:
            return None, abs(F), it
        step = -F / dF
        lam = 1.0
        while True:
            cand = om + lam * step
            if sgn * cand.imag > 0 and np.isfinite(cand):
                Fc = complex(cauchy(f.panels, f.values, cand)[0]) - target
                if abs(Fc) < abs(F) or lam < 1e-3:
                    break
            lam *= 0.5
            if lam < 1e-6:
                return None, abs(F), it
        om, F = cand, Fc
        if abs(F) < tol or abs(lam * step) < 1e-15 * max(1.0, abs(om)):
            return om, abs(F), it
    return om, abs(F), max_iter


def eigenvalue_crosscheck(P: Spectrum, params: PhysicalParams | None = None,
                          verdict: StabilityVerdict | None = None,
                          cfg: StabilityConfig = StabilityConfig(),
                          residual_tol: float = 1e-8) -> CrosscheckReport:
    """Newton search for H[D_X P](Omega) = target with Omega strictly on the
    unstable side (below the axis for pX > 0).

    Seeds come from the curves: at each candidate X, the real-axis crossings
    of Gamma_X to the right of the target, pushed off the axis by a few
    offsets. A failed search only produces a diagnostic.
    """
    params = params or PhysicalParams()
    target = params.target
    P = _prepare(P)
    if P.is_zero:
        return CrosscheckReport(None, [], "zero spectrum")
    verdict, curves = is_unstable(P, params, None, cfg, keep_curves=True) if verdict is None \
        else (verdict, None)
    if curves is None:
        _, curves = is_unstable(P, params, None, StabilityConfig(**{**asdict(cfg), "refine_kappa": False}),
                                keep_curves=True)
    # candidate X: deepest enclosure first; X = 0 itself has no solutions
    cands = []
    for c in curves:
        if c.X == 0:
            continue
        cr = _real_crossings(c.points)
        best = float(np.max(cr, initial=-np.inf))
        cands.append((best, c))
    cands.sort(key=lambda x: -x[0])
    if verdict.unstable and not any(b > target for b, _ in cands):
        # the band sits at X = 0 only; try offsets below the grid step
        extra = [gamma_curve(P, params, cfg.x_step * s, None, cfg.plemelj_tol, cfg.curve_tol)
                 for s in (0.5, 0.25, 0.1)]
        cands = [(float(np.max(_real_crossings(c.points), initial=-np.inf)), c) for c in extra] + cands
    sgn = -1.0 if plemelj_side(params, 1.0) == "lower" else 1.0
    attempts = []
    for best, c in cands[:4]:
        pts = c.open_points
        im = pts.imag
        s = np.nonzero((im[:-1] <= 0) != (im[1:] <= 0))[0]
        seeds_t = []
        for i in s:
            r = pts.real[i] - im[i] * (pts.real[i + 1] - pts.real[i]) / (im[i + 1] - im[i])
            if r > target or not verdict.unstable:
                w = im[i] / (im[i] - im[i + 1])
                seeds_t.append((r, c.t_nodes[i] + w * (c.t_nodes[i + 1] - c.t_nodes[i])))
        seeds_t.sort(key=lambda x: -x[0])
        for _, t0 in seeds_t[:2]:
            for d in (0.01, 0.05, 0.1, 0.002):
                om, res, it = _newton(P, c.X, target, t0 + sgn * 1j * d, sgn)
                attempts.append((c.X, t0, d, om, res))
                if om is not None and res < residual_tol and sgn * om.imag > 0:
                    return CrosscheckReport(Witness(c.X, om, res, it), attempts, "converged")
    msg = "no witness found" if verdict.unstable else "stable: no witness expected"
    if verdict.unstable:
        log.warning("eigenvalue cross-check did not converge (%d attempts)", len(attempts))
    return CrosscheckReport(None, attempts, msg)


# ---------------------------------------------------------------- scans


@dataclass
class ScanResult:
    gammas: np.ndarray
    alphas: np.ndarray
    unstable: np.ndarray  # (n_gamma, n_alpha) bool
    kappa: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    errors: dict = field(default_factory=dict)

    def rows(self):
        for i, g in enumerate(self.gammas):
            for j, a in enumerate(self.alphas):
                yield (float(g), float(a), bool(self.unstable[i, j]), float(self.kappa[i, j]),
                       float(self.band_lo[i, j]), float(self.band_hi[i, j]))


def _scan_column(gamma: float, alphas: Sequence[float], k0: float, cfg: StabilityConfig,
                 params: PhysicalParams):
    n = len(alphas)
    out = np.full((4, n), np.nan)
    try:
        P1 = _prepare(jonswap(1.0, gamma, k0))
        amax = max(alphas)
        curves, M = _curves_up_to(P1, params, cfg, abs(params.target) / (2 * amax))
        for j, a in enumerate(alphas):
            v = _verdict_from_curves(P1, params, cfg, curves, M, a)
            lo, hi = v.bandwidth
            out[:, j] = (float(v.unstable), v.kappa_estimate, lo, hi)
        return out, None
    except (NumericalError, ValueError) as exc:
        return out, f"{type(exc).__name__}: {exc}"


def scan_plane(gamma_grid, alpha_grid, k0: float = 1.0, cfg: StabilityConfig = StabilityConfig(),
               params: PhysicalParams | None = None, workers: int = 1) -> ScanResult:
    """Verdicts on the (gamma, alpha) plane for JONSWAP spectra.

    Gamma_X is linear in P, so per gamma the unit-alpha curves are computed
    once and each alpha is a rescaled test (target/alpha). Columns are
    independent and may run in a process pool; results are merged by index.
    """
    params = params or PhysicalParams()
    gammas = np.asarray(gamma_grid, dtype=float)
    alphas = np.asarray(alpha_grid, dtype=float)
    if gammas.size == 0 or alphas.size == 0:
        raise ConfigError("empty scan grid")
    if np.any(alphas <= 0) or np.any(gammas < 1):
        raise ConfigError("need alpha > 0 and gamma >= 1")
    args = [(float(g), tuple(map(float, alphas)), k0, cfg, params) for g in gammas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_scan_column, *zip(*args)))
    else:
        results = [_scan_column(*a) for a in args]
    shape = (gammas.size, alphas.size)
    res = ScanResult(gammas, alphas, np.zeros(shape, bool), np.full(shape, np.nan),
                     np.full(shape, np.nan), np.full(shape, np.nan))
    for i, (out, err) in enumerate(results):
        if err:
            res.errors[float(gammas[i])] = err
            log.warning("scan column gamma=%g failed: %s", gammas[i], err)
            continue
        res.unstable[i] = out[0] > 0.5
        res.kappa[i], res.band_lo[i], res.band_hi[i] = out[1], out[2], out[3]
    return res


def separatrix_alpha(gamma, C: float, k0: float = 1.0) -> np.ndarray:
    """alpha on the curve alpha*gamma/beta = C, beta = k0 Hs / 2 = 2 k0 sqrt(m0).

    With m0 = alpha * m1(gamma) (m1 the integral of the unit-alpha spectrum)
    this is alpha = 4 C^2 k0^2 m1(gamma) / gamma^2.
    """
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    m1 = np.array([jonswap(1.0, float(x)).integral for x in g])
    return 4 * C**2 * k0**2 * m1 / g**2


def span_rows(curves: Sequence[ContourCurve]):
    """(X, min Re Gamma_X, max Re Gamma_X) including the mirrored X < 0."""
    rows = [(c.X, float(np.min(c.points.real)), float(np.max(c.points.real))) for c in curves]
    neg = [(-x, lo, hi) for x, lo, hi in reversed(rows) if x > 0]
    return neg + rows
