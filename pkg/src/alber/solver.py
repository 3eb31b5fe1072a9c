"""Time-domain solver for the linearised and weakly nonlinear Alber-Fourier
equation.

Unknown ``f(X, k, t)`` is the inverse Fourier transform in ``x`` of the
inhomogeneity ``w(x, k, t)``. Its density ``n(X, t) = int f dk`` satisfies the
second-kind Volterra equation::

    n(X, t) = n_f(X, t) + int_0^t h(X, t - tau) n(X, tau) dtau

with the free density ``n_f(X, t) = w0_check(X, 2 pi p X t)``. Everything in
here works on uniform time grids starting at ``t = 0``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, NumericalError
from .quadrature import gauss_legendre
from .spectra import Spectrum
from .transforms import KernelTable, PhysicalParams, inverse_fourier

log = logging.getLogger(__name__)

MAX_STEP_GROWTH = 10.0
DEFAULT_R = (2, 3)


# ------------------------------------------------------------ initial data


@dataclass(frozen=True)
class GaussianPacket:
    """w0(x, k) = amp exp(-x^2 / (2 s_x^2)) exp(-(k - k_c)^2 / (2 s_k^2))."""

    amp: float = 1.0
    s_x: float = 0.5
    s_k: float = 0.5
    k_c: float = 1.0

    def __post_init__(self):
        if not (self.s_x > 0 and self.s_k > 0):
            raise ConfigError("Gaussian widths must be positive")
        if not np.isfinite(self.amp):
            raise ConfigError("amplitude must be finite")

    def w0_check(self, A, B):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        env = np.exp(-2 * math.pi**2 * (self.s_x**2 * A**2 + self.s_k**2 * B**2))
        return self.amp * 2 * math.pi * self.s_x * self.s_k * env * np.exp(2j * math.pi * self.k_c * B)

    def f0(self, X, k):
        X = np.asarray(X, dtype=float)
        k = np.asarray(k, dtype=float)
        gx = math.sqrt(2 * math.pi) * self.s_x * np.exp(-2 * math.pi**2 * self.s_x**2 * X**2)
        return (self.amp * gx * np.exp(-((k - self.k_c) ** 2) / (2 * self.s_k**2))).astype(complex)

    def l1_norm(self) -> float:
        """Exact ||f0||_{L^1_{X,k}}."""
        return abs(self.amp) * math.sqrt(2 * math.pi) * self.s_k

    def extent(self, rel: float = 1e-17) -> tuple[float, float]:
        """Half-widths in A and B beyond which |w0_check| < rel * max."""
        c = math.sqrt(-math.log(rel) / (2 * math.pi**2))
        return c / self.s_x, c / self.s_k


@dataclass
class InitialData:
    """Sampled w0_check(A, B) plus the decay constants D_r.

    ``D_r = max |w0_check| (1 + |A|^r + |B|^r)`` over the grid, so the bound
    ``|w0_check| <= D_r / (1 + |A|^r + |B|^r)`` holds on the grid by
    construction; ``edge_ratio`` records how much of that maximum sits on the
    grid boundary (a large value means the grid is too small to trust D_r).
    """

    A: np.ndarray
    B: np.ndarray
    w0_check: np.ndarray
    decay: dict
    edge_ratio: dict
    source: str = "table"
    packet: GaussianPacket | None = None
    hermitian: bool = True

    @classmethod
    def gaussian(cls, amp: float = 1.0, s_x: float = 0.5, s_k: float = 0.5, k_c: float = 1.0,
                 n: int = 257, r_values: Sequence[float] = DEFAULT_R) -> "InitialData":
        g = GaussianPacket(amp, s_x, s_k, k_c)
        ea, eb = g.extent()
        # the weight |B|^r pushes the maximum of the D_r product outwards
        ra = max(ea, 1.5 * max(r_values) ** 0.5 / (math.pi * s_x))
        rb = max(eb, 1.5 * max(r_values) ** 0.5 / (math.pi * s_k))
        A = np.linspace(-ra, ra, n)
        B = np.linspace(-rb, rb, n)
        w = g.w0_check(A[:, None], B[None, :])
        D, edge = _decay_constants(A, B, w, r_values)
        return cls(A, B, w, D, edge, source=f"gaussian(amp={amp},s_x={s_x},s_k={s_k},k_c={k_c})",
                   packet=g)

    @classmethod
    def from_table(cls, path: str | Path, r_values: Sequence[float] = DEFAULT_R) -> "InitialData":
        """Read ``A B value`` or ``A B re im`` rows on a rectangular grid."""
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                s = line.split("#", 1)[0].strip()
                if not s:
                    continue
                parts = s.replace(",", " ").split()
                if len(parts) not in (3, 4):
                    raise ConfigError(f"{path}:{lineno}: expected 3 or 4 columns, got {len(parts)}")
                try:
                    vals = [float(x) for x in parts]
                except ValueError:
                    raise ConfigError(f"{path}:{lineno}: non-numeric field") from None
                if not all(np.isfinite(vals)):
                    raise ConfigError(f"{path}:{lineno}: non-finite value")
                rows.append(vals if len(vals) == 4 else vals + [0.0])
        if not rows:
            raise ConfigError(f"{path}: no data rows")
        arr = np.array(rows)
        A = np.unique(arr[:, 0])
        B = np.unique(arr[:, 1])
        if A.size * B.size != arr.shape[0] or A.size < 2 or B.size < 2:
            raise ConfigError(f"{path}: rows do not form a full rectangular grid")
        w = np.full((A.size, B.size), np.nan, dtype=complex)
        w[np.searchsorted(A, arr[:, 0]), np.searchsorted(B, arr[:, 1])] = arr[:, 2] + 1j * arr[:, 3]
        if np.isnan(w).any():
            raise ConfigError(f"{path}: duplicate grid points")
        return cls.from_grid(A, B, w, r_values, source=str(path))

    @classmethod
    def from_grid(cls, A, B, w, r_values: Sequence[float] = DEFAULT_R, source: str = "grid") -> "InitialData":
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        w = np.asarray(w, dtype=complex)
        if w.shape != (A.size, B.size):
            raise ConfigError("w0_check must have shape (len(A), len(B))")
        if np.any(np.diff(A) <= 0) or np.any(np.diff(B) <= 0):
            raise ConfigError("A and B grids must be increasing")
        D, edge = _decay_constants(A, B, w, r_values)
        herm = (np.allclose(A, -A[::-1]) and np.allclose(B, -B[::-1])
                and np.allclose(w, np.conj(w[::-1, ::-1]), atol=1e-12 * np.max(np.abs(w), initial=0)))
        return cls(A, B, w, D, edge, source=source, hermitian=bool(herm))

    @cached_property
    def _interp(self):
        kw = dict(bounds_error=False, fill_value=np.nan)
        return (RegularGridInterpolator((self.A, self.B), self.w0_check.real, **kw),
                RegularGridInterpolator((self.A, self.B), self.w0_check.imag, **kw))

    def w0_at(self, A, B) -> np.ndarray:
        """w0_check at arbitrary points; analytic for built-in packets,
        bilinear (zero outside the grid, with a warning) for tables."""
        A, B = np.broadcast_arrays(np.asarray(A, float), np.asarray(B, float))
        if self.packet is not None:
            return self.packet.w0_check(A, B)
        pts = np.stack([A.ravel(), B.ravel()], axis=-1)
        re, im = (f(pts) for f in self._interp)
        out = (re + 1j * im).reshape(A.shape)
        bad = np.isnan(out)
        if bad.any():
            warnings.warn(f"{int(bad.sum())} points outside the w0_check grid set to 0", RuntimeWarning,
                          stacklevel=2)
            out[bad] = 0.0
        return out

    def f0(self, X, k) -> np.ndarray:
        """f0(X, k) = int exp(-2 pi i k B) w0_check(X, B) dB."""
        X, k = np.broadcast_arrays(np.asarray(X, float), np.asarray(k, float))
        if self.packet is not None:
            return self.packet.f0(X, k)
        rows = self.w0_at(X.ravel()[:, None], self.B[None, :])
        ph = np.exp(-2j * math.pi * k.ravel()[:, None] * self.B[None, :])
        return trapezoid(rows * ph, self.B, axis=1).reshape(X.shape)

    def l1_norm(self, X, k) -> float:
        """Discrete ||f0||_{L^1} on the given uniform grids (trapezoid)."""
        F = np.abs(self.f0(np.asarray(X)[:, None], np.asarray(k)[None, :]))
        return float(trapezoid(trapezoid(F, k, axis=1), X))

    def hypotheses(self, exponents: Sequence[tuple[float, float]]) -> dict:
        """Which configured r satisfy ``r - 1/2 > a > b >= 0`` for each (a, b)."""
        out = {}
        for a, b in exponents:
            out[(a, b)] = {r: bool(r - 0.5 > a > b >= 0) for r in self.decay}
        return out


def _decay_constants(A, B, w, r_values) -> tuple[dict, dict]:
    D, edge = {}, {}
    mag = np.abs(w)
    for r in r_values:
        if r <= 0:
            raise ConfigError("decay exponents r must be positive")
        prod = mag * (1 + np.abs(A)[:, None] ** r + np.abs(B)[None, :] ** r)
        D[r] = float(prod.max())
        border = max(prod[0].max(), prod[-1].max(), prod[:, 0].max(), prod[:, -1].max())
        edge[r] = float(border / D[r]) if D[r] > 0 else 0.0
    return D, edge


def free_density(w0: InitialData, params: PhysicalParams, X, t) -> np.ndarray:
    """n_f(X, t) = w0_check(X, 2 pi p X t)."""
    X, t = np.broadcast_arrays(np.asarray(X, float), np.asarray(t, float))
    return w0.w0_at(X, 2 * math.pi * params.p * X * t)


def free_density_direct(w0: InitialData, params: PhysicalParams, X: float, t: float,
                        k_range: tuple[float, float] | None = None, n: int = 4001) -> complex:
    """int exp(4 pi^2 i p k X t) f0(X, k) dk by composite Gauss-Legendre; an
    oracle for :func:`free_density` that never touches w0_check."""
    if k_range is None:
        g = w0.packet
        if g is None:
            raise ConfigError("k_range is required for tabulated initial data")
        k_range = (g.k_c - 12 * g.s_k, g.k_c + 12 * g.s_k)
    x, wts = gauss_legendre(16)
    edges = np.linspace(*k_range, n // 16 + 1)
    c = 0.5 * (edges[1:] + edges[:-1])
    h = 0.5 * np.diff(edges)
    k = (c[:, None] + h[:, None] * x[None, :]).ravel()
    wk = (h[:, None] * wts[None, :]).ravel()
    vals = np.exp(4j * math.pi**2 * params.p * k * X * t) * w0.f0(np.full_like(k, X), k)
    return complex(np.sum(wk * vals))


# ---------------------------------------------------------------- Volterra


def _uniform_step(t: np.ndarray) -> float:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2 or t[0] != 0:
        raise ConfigError("time grid must be 1-D, start at 0 and have at least two points")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * dt.mean():
        raise ConfigError("time grid must be uniform and increasing")
    return float(dt.mean())


def _march(h: np.ndarray, nf: np.ndarray, dt: float) -> np.ndarray:
    """Product trapezoidal marching for rows of n = nf + h * n.

    ``h`` and ``nf`` have shape (rows, N). The rule is::

        n_i = nf_i + dt (h_i n_0 / 2 + sum_{0<j<i} h_{i-j} n_j + h_0 n_i / 2)
    """
    h = np.atleast_2d(h).astype(complex)
    nf = np.atleast_2d(nf).astype(complex)
    rows, N = nf.shape
    n = np.zeros_like(nf)
    denom = 1.0 - 0.5 * dt * h[:, 0]
    if np.any(np.abs(denom) < 1e-12):
        raise NumericalError("Volterra step singular: 1 - dt h(0)/2 = 0; refine the time step")
    n[:, 0] = nf[:, 0] / denom
    hr = h[:, ::-1]  # hr[:, N-1-m] = h[:, m]
    running = np.abs(n[:, 0])
    tiny = 1e-300
    for i in range(1, N):
        conv = 0.5 * h[:, i] * n[:, 0]
        if i > 1:
            # sum_{j=1}^{i-1} h_{i-j} n_j
            conv = conv + np.einsum("rj,rj->r", hr[:, N - i : N - 1], n[:, 1:i])
        n[:, i] = (nf[:, i] + dt * conv) / denom
        a = np.abs(n[:, i])
        grow = a > MAX_STEP_GROWTH * np.maximum(running, tiny)
        if np.any(grow & (a > 1e-200)) and i > 1:
            r = int(np.argmax(grow))
            raise NumericalError(
                f"Volterra growth factor > {MAX_STEP_GROWTH:g} in one step at t index {i} (row {r}); "
                "refine the time step")
        running = np.maximum(running, a)
    return n


def solve_volterra(kernel: KernelTable | np.ndarray, n_free, t_grid=None) -> np.ndarray:
    """Solve n = n_free + int_0^t h(t - tau) n(tau) dtau on a uniform grid.

    ``kernel`` is a :class:`KernelTable` (its ``times`` are used when
    ``t_grid`` is omitted) or an array of kernel samples on ``t_grid``.
    """
    if isinstance(kernel, KernelTable):
        t = kernel.times if t_grid is None else np.asarray(t_grid, float)
        hv = kernel.values
    else:
        if t_grid is None:
            raise ConfigError("t_grid is required with a raw kernel array")
        t = np.asarray(t_grid, float)
        hv = np.asarray(kernel)
    nf = np.asarray(n_free)
    if hv.shape[-1] != t.size or nf.shape[-1] != t.size:
        raise ConfigError("kernel, n_free and t_grid lengths differ")
    dt = _uniform_step(t)
    out = _march(hv, nf, dt)
    return out[0] if nf.ndim == 1 else out


def kernel_matrix(P: Spectrum, params: PhysicalParams, X: np.ndarray, t: np.ndarray) -> np.ndarray:
    """h(X_i, t_j) for all grid pairs; P_check evaluated once per distinct
    argument 2 pi p X t."""
    X = np.asarray(X, float)
    t = np.asarray(t, float)
    if P.is_zero:
        return np.zeros((X.size, t.size), complex)
    y = 2 * math.pi * params.p * X[:, None] * t[None, :]
    yu, inv = np.unique(np.round(y, 12), return_inverse=True)
    pc = inverse_fourier(P, yu)[inv].reshape(y.shape)
    h = 2 * params.q * np.sin(2 * math.pi**2 * params.p * X[:, None] ** 2 * t[None, :]) * pc
    h[:, 0] = 0.0
    return h


@dataclass
class DensityTrace:
    """n(X, t) and n_f(X, t) on a shared (X, t) grid."""

    X_grid: np.ndarray
    t_grid: np.ndarray
    n_free: np.ndarray
    n: np.ndarray
    weighted_norms: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n.shape != self.n_free.shape or self.n.shape != (self.X_grid.size, self.t_grid.size):
            raise ConfigError("n and n_free must share the (X, t) grid")

    def truncated(self, T: float) -> "DensityTrace":
        m = self.t_grid <= T * (1 + 1e-12)
        return DensityTrace(self.X_grid, self.t_grid[m], self.n_free[:, m], self.n[:, m], {}, dict(self.meta))

    def rows(self):
        """(X, t, re n, im n, re n_f, im n_f) in X-major order."""
        for i, X in enumerate(self.X_grid):
            for j, t in enumerate(self.t_grid):
                yield (float(X), float(t), float(self.n[i, j].real), float(self.n[i, j].imag),
                       float(self.n_free[i, j].real), float(self.n_free[i, j].imag))


def solve_trace(w0: InitialData, P: Spectrum, params: PhysicalParams, X_grid, t_grid) -> DensityTrace:
    """Free density and Volterra solution for every X in ``X_grid``.

    For Hermitian data (real w0) only |X| is solved; negative X follow from
    n(-X, t) = conj(n(X, t)).
    """
    X = np.asarray(X_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if X.ndim != 1 or X.size == 0:
        raise ConfigError("X_grid must be a non-empty 1-D array")
    _uniform_step(t)
    if w0.hermitian:
        Xs, inv = np.unique(np.abs(X), return_inverse=True)
    else:
        Xs, inv = X, np.arange(X.size)
    nf = free_density(w0, params, Xs[:, None], t[None, :])
    h = kernel_matrix(P, params, Xs, t)
    n = solve_volterra(h, nf, t)
    flip = (X < 0)[:, None] if w0.hermitian else np.zeros((X.size, 1), bool)
    n_full = np.where(flip, np.conj(n[inv]), n[inv])
    nf_full = np.where(flip, np.conj(nf[inv]), nf[inv])
    return DensityTrace(X, t, nf_full, n_full, meta={"initial_data": w0.source, "spectrum": P.source,
                                                     "p": params.p, "q": params.q})


# -------------------------------------------------------------- norms


@dataclass(frozen=True)
class NormEntry:
    value: float
    coarse: float
    error_estimate: float

    @property
    def extrapolated(self) -> float:
        return self.value + (self.value - self.coarse) / 3.0


def _weighted_l2(X, t, F, a, b) -> float:
    w = np.abs(X)[:, None] ** a * t[None, :] ** b
    G = np.abs(w * F) ** 2
    return float(math.sqrt(max(trapezoid(trapezoid(G, t, axis=1), X), 0.0)))


def weighted_norms(trace: DensityTrace, exponents: Sequence[tuple[float, float]],
                   which: str = "n", T: float | None = None) -> dict:
    """Discrete ||X^a t^b n||_{L^2_{X,t}} by trapezoid in X and t.

    Each entry carries the same norm on the every-other-node grid and the
    Richardson error estimate (fine - coarse) / 3 of the second-order rule.
    ``which`` selects ``"n"`` or ``"n_free"``; ``T`` restricts to ``t <= T``.
    """
    if which not in ("n", "n_free"):
        raise ConfigError("which must be 'n' or 'n_free'")
    tr = trace.truncated(T) if T is not None else trace
    F = tr.n if which == "n" else tr.n_free
    X, t = tr.X_grid, tr.t_grid
    # the coarse grid must end on the same nodes as the fine one
    iX = X.size - 1 if X.size % 2 == 0 else X.size
    it = t.size - 1 if t.size % 2 == 0 else t.size
    out = {}
    for a, b in exponents:
        fine = _weighted_l2(X[:iX], t[:it], F[:iX, :it], a, b)
        coarse = _weighted_l2(X[:iX:2], t[:it:2], F[:iX:2, :it:2], a, b)
        full = _weighted_l2(X, t, F, a, b)
        out[(a, b)] = NormEntry(full, coarse, abs(fine - coarse) / 3.0)
    return out


# ------------------------------------------------------- phase space


def _delta_p(P: Spectrum, X, k) -> np.ndarray:
    """P(k - X/2) - P(k + X/2)."""
    X = np.asarray(X, float)
    k = np.asarray(k, float)
    return P(k - 0.5 * X) - P(k + 0.5 * X)


def _trapezoid_matrix(t: np.ndarray, idx: Sequence[int]) -> np.ndarray:
    """W[j, m] = trapezoid weight of node j in int_0^{t[idx[m]]}."""
    dt = _uniform_step(t)
    W = np.zeros((t.size, len(idx)))
    for m, i in enumerate(idx):
        if i > 0:
            W[: i + 1, m] = dt
            W[0, m] = W[i, m] = 0.5 * dt
    return W


def _duhamel(trace: DensityTrace, params: PhysicalParams, k: np.ndarray, idx: Sequence[int]) -> np.ndarray:
    """S[m, i, l] = sum_j W[j, m] exp(-i phi_i k_l tau_j) n(X_i, tau_j),
    phi = 4 pi^2 p X."""
    W = _trapezoid_matrix(trace.t_grid, idx)
    tau = trace.t_grid
    out = np.empty((len(idx), trace.X_grid.size, k.size), complex)
    for i, X in enumerate(trace.X_grid):
        phi = 4 * math.pi**2 * params.p * X
        E = np.exp(-1j * phi * k[:, None] * tau[None, :])  # (nk, N)
        out[:, i, :] = ((E * trace.n[i][None, :]) @ W).T
    return out


def _time_indices(t: np.ndarray, times) -> list[int]:
    if times is None:
        return list(range(t.size))
    idx = []
    for s in np.atleast_1d(times):
        j = int(np.argmin(np.abs(t - s)))
        if abs(t[j] - s) > 1e-9 * max(1.0, abs(s)):
            raise ConfigError(f"time {s} is not a node of the trace grid")
        idx.append(j)
    return idx


def auto_k_grid(P: Spectrum, w0: InitialData, params: PhysicalParams, X_values, T: float,
                mass_tol: float = 1e-9, max_nodes: int = 40000) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights over the bulk of P and f0.

    Panel edges sit at the support ends and breakpoints of P shifted by
    +-X/2 for every X in ``X_values`` (where P(k -+ X/2) has its kinks), and
    panels are short enough for the phase exp(4 pi^2 i p k X t) up to T.
    """
    Xs = np.unique(np.abs(np.atleast_1d(np.asarray(X_values, float))))
    X_max = float(Xs.max(initial=0.0))
    lo, hi = _bulk(P, mass_tol) if not P.is_zero else (np.inf, -np.inf)
    if w0.packet is not None:
        g = w0.packet
        lo, hi = min(lo, g.k_c - 10 * g.s_k), max(hi, g.k_c + 10 * g.s_k)
    elif not np.isfinite(lo):
        raise ConfigError("cannot size a k grid without a spectrum or a built-in packet")
    lo -= 0.5 * X_max
    hi += 0.5 * X_max
    kinks = [] if P.is_zero else [*P.support, *P.breakpoints]
    cuts = np.unique([c + s * 0.5 * X for c in kinks for X in Xs for s in (-1, 1)])
    edges = np.unique(np.concatenate([[lo, hi], cuts[(cuts > lo) & (cuts < hi)]]))
    omega = 4 * math.pi**2 * abs(params.p) * X_max * T
    hmax = 6.0 / max(omega, 1e-300)
    npan = np.maximum(1, np.ceil(np.diff(edges) / (2 * hmax)).astype(int))
    if npan.sum() * 16 > max_nodes:
        raise ConfigError(f"phase-space grid would need {npan.sum() * 16} k nodes (> {max_nodes}); "
                          "reduce X_max or T, or pass k_grid")
    edges = np.concatenate([np.linspace(a, b, m + 1)[:-1] for a, b, m in zip(edges[:-1], edges[1:], npan)]
                           + [[edges[-1]]])
    x, wts = gauss_legendre(16)
    c = 0.5 * (edges[1:] + edges[:-1])
    h = 0.5 * np.diff(edges)
    return (c[:, None] + h[:, None] * x).ravel(), (h[:, None] * wts).ravel()


def _bulk(P: Spectrum, mass_tol: float) -> tuple[float, float]:
    """Smallest interval leaving at most mass_tol of int P outside."""
    k, v = (a.ravel() for a in P.grid)
    cm = np.cumsum(P.panels.weights.ravel() * v)
    tot = cm[-1]
    lo = k[np.searchsorted(cm, 0.5 * mass_tol * tot)]
    hi = k[min(np.searchsorted(cm, (1 - 0.5 * mass_tol) * tot), k.size - 1)]
    return float(lo), float(hi)


@dataclass
class PhaseSpaceField:
    """f(X, k, t) on an (X, k) grid at stored times."""

    X: np.ndarray
    k: np.ndarray
    k_weights: np.ndarray
    times: np.ndarray
    values: np.ndarray  # (n_times, n_X, n_k)
    p: float
    consistency_residual: float = 0.0
    flagged: bool = False

    def phase(self, t: float) -> np.ndarray:
        """Propagator phase exp(4 pi^2 i p k X t) on the grid."""
        return np.exp(4j * math.pi**2 * self.p * self.X[:, None] * self.k[None, :] * t)

    def density(self) -> np.ndarray:
        """int f dk by the stored k weights, shape (n_times, n_X)."""
        return np.einsum("mil,l->mi", self.values, self.k_weights)


def reconstruct_f(f0: InitialData, P: Spectrum, params: PhysicalParams, trace: DensityTrace,
                  k_grid=None, times=None, tol: float = 1e-6) -> PhaseSpaceField:
    """f from the mild formula with trapezoidal time quadrature::

        f(t) = e^{i phi k t} f0 - q i (P(k - X/2) - P(k + X/2))
                 int_0^t e^{i phi k (t - tau)} n(X, tau) dtau,   phi = 4 pi^2 p X

    ``k_grid`` is an array of nodes (trapezoid weights) or a (nodes, weights)
    pair; by default Gauss-Legendre panels from :func:`auto_k_grid`. The
    residual ``max |int f dk - n| / max |n|`` is recorded and flagged when it
    exceeds ``tol``.
    """
    idx = _time_indices(trace.t_grid, times)
    ts = trace.t_grid[idx]
    if k_grid is None:
        k, wk = auto_k_grid(P, f0, params, trace.X_grid, float(ts.max(initial=0)))
    elif isinstance(k_grid, tuple):
        k, wk = (np.asarray(a, float) for a in k_grid)
    else:
        k = np.asarray(k_grid, float)
        if k.size < 2 or np.any(np.diff(k) <= 0):
            raise ConfigError("k_grid must be increasing with at least two nodes")
        wk = np.zeros_like(k)
        wk[:-1] += 0.5 * np.diff(k)
        wk[1:] += 0.5 * np.diff(k)
    X = trace.X_grid
    F0 = f0.f0(X[:, None], k[None, :])
    D = _delta_p(P, X[:, None], k[None, :]) if not P.is_zero else np.zeros((X.size, k.size))
    vals = np.empty((len(idx), X.size, k.size), complex)
    S = _duhamel(trace, params, k, idx) if not P.is_zero else np.zeros_like(vals)
    for m, t in enumerate(ts):
        ph = np.exp(4j * math.pi**2 * params.p * X[:, None] * k[None, :] * t)
        vals[m] = ph * (F0 - 1j * params.q * D * S[m])
    field_ = PhaseSpaceField(X, k, wk, ts, vals, params.p)
    dens = field_.density()
    ref = trace.n[:, idx].T
    scale = max(float(np.max(np.abs(ref), initial=0.0)), 1e-300)
    res = float(np.max(np.abs(dens - ref), initial=0.0)) / scale
    field_.consistency_residual = res
    field_.flagged = res > tol
    if field_.flagged:
        log.warning("density consistency residual %.3g exceeds %.3g", res, tol)
    return field_


# ------------------------------------------------------------- scattering


@dataclass
class ScatteringData:
    """J(X, k, t) = U(-t) f(t) - f0 at checkpoints and J_inf = J(T_max).

    ``distance[m]`` is sup_k int |J(t_m) - J_inf| dX; ``sup_J[m]`` is
    sup_k int |J(t_m)| dX. ``tail_estimate`` bounds the part of J_inf beyond
    T_max from the decay of int |X n| dX.
    """

    X: np.ndarray
    k: np.ndarray
    checkpoints: np.ndarray
    J: np.ndarray
    J_infinity: np.ndarray
    wave_op: np.ndarray
    distance: np.ndarray
    sup_J: np.ndarray
    tail_estimate: float
    decay_exponent: float


def _sup_k_l1x(X: np.ndarray, G: np.ndarray) -> float:
    return float(np.max(trapezoid(np.abs(G), X, axis=0), initial=0.0))


def _tail_bound(trace: DensityTrace, P: Spectrum, params: PhysicalParams) -> tuple[float, float]:
    """Fit g(t) = int |X n| dX ~ C t^-beta on the last quarter of the trace
    and bound |q| sup|P'| int_T^inf g; infinite when beta <= 1."""
    t = trace.t_grid
    g = trapezoid(np.abs(trace.X_grid[:, None] * trace.n), trace.X_grid, axis=0)
    m = t >= 0.75 * t[-1]
    m &= t > 0
    if m.sum() < 3 or np.any(g[m] <= 0):
        return (0.0, np.inf) if np.all(g[m] == 0) else (np.inf, 0.0)
    beta = -np.polyfit(np.log(t[m]), np.log(g[m]), 1)[0]
    if beta <= 1:
        return np.inf, float(beta)
    k = P.panels.nodes
    dp = float(np.max(np.abs(P.derivative(k)), initial=0.0)) if not P.is_zero else 0.0
    return abs(params.q) * dp * float(g[-1] * t[-1] / (beta - 1)), float(beta)


def scattering_limit(f0: InitialData, P: Spectrum, params: PhysicalParams, trace: DensityTrace,
                     T_max: float | None = None, k_grid=None, checkpoints=None,
                     tail_tol: float | None = None) -> ScatteringData:
    """Partial wave operator integrals up to ``T_max`` (default: end of trace).

    ``checkpoints`` default to ``T_max * [0, 1/8, ..., 1/2]`` so that the
    distance to J_inf is measured well before the end of the run. With
    ``tail_tol`` set, raises :class:`NumericalError` ("T_max too small") when
    the tail estimate exceeds ``tail_tol`` times sup_k int |J_inf| dX.
    """
    if T_max is not None:
        trace = trace.truncated(T_max)
    T = float(trace.t_grid[-1])
    if checkpoints is None:
        dt = trace.t_grid[1] - trace.t_grid[0]
        checkpoints = np.round(T * np.arange(5) / 8 / dt) * dt
    cps = np.asarray(checkpoints, float)
    if k_grid is None:
        lo, hi = _bulk(P, 1e-6) if not P.is_zero else (0.0, 2.0)
        k_grid = np.linspace(max(lo, 1e-6), hi, 241)
    k = np.asarray(k_grid, float)
    idx = _time_indices(trace.t_grid, cps) + [trace.t_grid.size - 1]
    X = trace.X_grid
    if P.is_zero:
        J = np.zeros((len(idx), X.size, k.size), complex)
    else:
        D = _delta_p(P, X[:, None], k[None, :])
        J = -1j * params.q * D[None] * _duhamel(trace, params, k, idx)
    J_inf = J[-1]
    J = J[:-1]
    dist = np.array([_sup_k_l1x(X, Jm - J_inf) for Jm in J])
    supJ = np.array([_sup_k_l1x(X, Jm) for Jm in J])
    tail, beta = _tail_bound(trace, P, params) if not P.is_zero else (0.0, np.inf)
    ref = _sup_k_l1x(X, J_inf)
    if tail_tol is not None and ref > 0 and tail > tail_tol * ref:
        raise NumericalError(f"T_max too small: tail estimate {tail:.3g} exceeds "
                             f"{tail_tol:g} x sup_k int |J_inf| dX = {tail_tol * ref:.3g}")
    F0 = f0.f0(X[:, None], k[None, :])
    return ScatteringData(X, k, trace.t_grid[idx[:-1]], J, J_inf, F0 + J_inf, dist, supJ, tail, beta)


# ---------------------------------------------------------------- Picard


@dataclass
class PicardReport:
    iterations: int
    distances: list
    ratios: list
    bound: float
    M: float
    T0: float
    T0_limit: float
    converged: bool

    @property
    def max_ratio(self) -> float:
        return max(self.ratios, default=0.0)


def contraction_limit(p_l1: float, epsilon: float, q: float, M: float) -> float:
    """Largest admissible T0: 1 / (|q| max(4 ||P||, 4 eps) (M + 1))."""
    return 1.0 / (abs(q) * max(4 * p_l1, 4 * epsilon) * (M + 1))


def _shift_k(F: np.ndarray, shift: float, dk: float) -> np.ndarray:
    """F(k - shift) on a uniform k grid by linear interpolation, zero outside."""
    s = shift / dk
    i0 = int(math.floor(s))
    r = s - i0
    out = np.zeros_like(F)
    nk = F.shape[-1]

    def take(j):
        g = np.zeros_like(F)
        if j >= 0:
            if j < nk:
                g[..., j:] = F[..., : nk - j]
        elif -j < nk:
            g[..., : nk + j] = F[..., -j:]
        return g

    out += (1 - r) * take(i0)
    if r > 0:
        out += r * take(i0 + 1)
    return out


class _Bracket:
    """B[m, f] on a symmetric uniform X grid and a uniform k grid."""

    def __init__(self, P: Spectrum, params: PhysicalParams, X: np.ndarray, k: np.ndarray):
        self.q = params.q
        self.eps = params.epsilon
        self.X = X
        self.k = k
        self.dX = float(X[1] - X[0])
        self.dk = float(k[1] - k[0])
        self.wX = np.full(X.size, self.dX)
        self.wX[[0, -1]] *= 0.5
        self.wk = np.full(k.size, self.dk)
        self.wk[[0, -1]] *= 0.5
        self.D = _delta_p(P, X[:, None], k[None, :]) if not P.is_zero else np.zeros((X.size, k.size))
        c = X.size // 2
        self.offsets = np.arange(X.size) - c  # X[l] = offsets[l] * dX

    def density(self, F: np.ndarray) -> np.ndarray:
        return F @ self.wk

    def __call__(self, m: np.ndarray, F: np.ndarray) -> np.ndarray:
        out = 1j * self.q * self.D * m[:, None]
        if self.eps == 0:
            return out
        nX = self.X.size
        conv = np.zeros_like(F)
        for l, off in enumerate(self.offsets):
            if m[l] == 0:
                continue
            # rows X_i - s = X_{i - off}
            G = np.zeros_like(F)
            if off >= 0:
                G[off:] = F[: nX - off]
            else:
                G[: nX + off] = F[-off:]
            s = off * self.dX
            conv += self.wX[l] * m[l] * (_shift_k(G, 0.5 * s, self.dk) - _shift_k(G, -0.5 * s, self.dk))
        return out + 1j * self.eps * self.q * conv


def picard_solve(f0: InitialData, P: Spectrum, params: PhysicalParams, T0: float, tol: float = 1e-10,
                 X_grid=None, k_grid=None, nt: int = 21, max_iter: int = 60,
                 density: Callable | np.ndarray | None = None,
                 check_bound: bool = True) -> tuple[PhaseSpaceField, PicardReport]:
    """Fixed-point iteration of the mild map::

        G g(t) = U(t) f0 - int_0^t U(t - tau) B[int g(tau) dk, g(tau)] dtau

    on uniform grids (trapezoid in X, k and tau). ``density`` freezes the
    density argument of B (an array of shape (nt, nX)); with ``epsilon = 0``
    the map is then constant and converges in one step.
    """
    if T0 <= 0:
        raise ConfigError("T0 must be positive")
    X = np.linspace(-2.0, 2.0, 65) if X_grid is None else np.asarray(X_grid, float)
    if k_grid is None:
        lo, hi = (P.support if not P.is_zero else (1.0, 1.0))
        g = f0.packet
        klo = min(lo, g.k_c - 8 * g.s_k if g else lo) - 0.5 * X.max()
        khi = max(hi, g.k_c + 8 * g.s_k if g else hi) + 0.5 * X.max()
        k = np.linspace(klo, khi, 161)
    else:
        k = np.asarray(k_grid, float)
    for name, grid in (("X", X), ("k", k)):
        d = np.diff(grid)
        if grid.size < 3 or np.any(d <= 0) or np.ptp(d) > 1e-9 * d.mean():
            raise ConfigError(f"{name} grid must be uniform, increasing, with at least 3 nodes")
    if not np.allclose(X, -X[::-1]) or X.size % 2 == 0:
        raise ConfigError("X grid must be symmetric about 0 with an odd number of nodes")
    br = _Bracket(P, params, X, k)
    t = np.linspace(0.0, T0, nt)
    F0 = f0.f0(X[:, None], k[None, :])
    l1 = lambda G: float(np.einsum("i,l,...il->...", br.wX, br.wk, np.abs(G)))  # noqa: E731
    M = 2 * l1(F0)
    p_l1 = float(abs(P.integral)) if not P.is_zero else 0.0
    limit = contraction_limit(p_l1, params.epsilon, params.q, M) if (p_l1 or params.epsilon) else np.inf
    if check_bound and not T0 < limit:
        raise ConfigError(f"T0 = {T0:g} is not below the contraction limit {limit:.4g}")
    bound = 2 * T0 * abs(params.q) * (p_l1 + 2 * params.epsilon * M)
    phi = 4 * math.pi**2 * params.p * X[:, None, None] * k[None, None, :]  # (nX, 1, nk)
    U = np.exp(1j * phi[:, 0, :][None] * t[:, None, None])  # U(t_m), (nt, nX, nk)
    free = U * F0[None]
    frozen = None if density is None else np.asarray(density, complex)
    if frozen is not None and frozen.shape != (nt, X.size):
        raise ConfigError(f"frozen density must have shape {(nt, X.size)}")

    def G_map(Gs):
        V = np.empty_like(Gs)
        for j in range(nt):
            m = frozen[j] if frozen is not None else br.density(Gs[j])
            V[j] = np.conj(U[j]) * br(m, Gs[j])
        I = cumulative_trapezoid(V, t, axis=0, initial=0)
        return free - U * I

    g = free
    dists, ratios = [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = G_map(g)
        norm_new = max(l1(new[j]) for j in range(nt))
        if norm_new > M * (1 + 1e-12):
            raise NumericalError(f"Picard iterate left the ball: ||G g|| = {norm_new:.4g} > M = {M:.4g}; "
                                 "T0 too large or discretisation too coarse")
        d = max(l1(new[j] - g[j]) for j in range(nt))
        # ratios at roundoff level say nothing about the map
        if dists and dists[-1] > 1e-12 * M and d > 0:
            ratios.append(d / dists[-1])
        dists.append(d)
        g = new
        if d < tol * max(M, 1e-300):
            converged = True
            break
    field_ = PhaseSpaceField(X, k, br.wk, t, g, params.p)
    return field_, PicardReport(it, dists, ratios, bound, M, T0, limit, converged)
