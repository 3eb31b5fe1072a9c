"""Command-line front end: ``alber stability|scan|simulate|scatter|selftest``.

Configuration comes from an optional ``key=value`` file (``--config``) and
flag overrides. Every output file carries the resolved configuration, its
hash and a hash of the file body; the output directory and worker count are
not part of the configuration, so they never change the bytes written.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import click
import numpy as np

from . import scatter as scatter_mod
from .errors import ConfigError, NumericalError
from .solver import InitialData, scattering_limit, solve_trace, weighted_norms
from .spectra import FitConfig, JonswapParams, Spectrum, jonswap, load_table
from .stability import (
    StabilityConfig,
    eigenvalue_crosscheck,
    is_unstable,
    scan_plane,
    separatrix_alpha,
    span_rows,
)
from .transforms import PhysicalParams

log = logging.getLogger(__name__)

SEPARATRIX_C = (0.77, 0.974)
FREE_EXPONENTS = ((1.0, 0.0), (1.4, 1.0), (2.1, 0.0))
RUNTIME_KEYS = ("out", "workers")


@dataclass
class RunConfig:
    """Everything that determines a run's numbers."""

    command: str = "stability"
    spectrum: str = "jonswap"  # jonswap | table | zero
    jonswap: str = "alpha=0.02,gamma=3.3,k0=1"
    table: str = ""
    threshold: float = 1e-10
    p: float = 1.0 / (16 * math.pi**2)
    q: float = 1.0
    epsilon: float = 0.0
    tol: float = 1e-4
    on_tol: float = 1e-6
    curve_tol: float = 1e-3
    x_step: float = 0.02
    crosscheck: bool = True
    gamma_grid: str = "1:10:30"
    alpha_grid: str = "1e-3:0.5:30"
    periods: float = 50.0
    dt: float = 0.5
    x_max: float = 2.5
    dx: float = 0.02
    packet: str = "amp=1,s_x=0.5,s_k=0.5,k_c=1"
    w0_table: str = ""
    trace_stride: int = 2
    diagram: str = ""
    practice: str = "dnv"
    quantum_gamma: float = 0.01
    quantum_alpha: float = 1e-4
    seed: int = 0
    out: str = "."
    workers: int = 1

    def __post_init__(self):
        for name in ("threshold", "tol", "on_tol", "curve_tol", "x_step", "periods", "dt",
                     "x_max", "dx", "quantum_gamma", "quantum_alpha"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.spectrum not in ("jonswap", "table", "zero"):
            raise ConfigError("spectrum must be jonswap, table or zero")
        if self.workers < 1 or self.trace_stride < 1:
            raise ConfigError("workers and trace_stride must be >= 1")

    # -- serialisation

    def resolved(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in RUNTIME_KEYS}

    def to_text(self, runtime: bool = True) -> str:
        items = dataclasses.asdict(self) if runtime else self.resolved()
        return "".join(f"{k}={_fmt(v)}\n" for k, v in sorted(items.items()))

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        vals = dataclasses.asdict(base) if base else {}
        for lineno, line in enumerate(text.splitlines(), 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise ConfigError(f"config line {lineno}: expected key=value")
            k, v = (x.strip() for x in s.split("=", 1))
            if k not in types:
                raise ConfigError(f"config line {lineno}: unknown key {k!r}")
            vals[k] = _parse(v, types[k], k)
        return cls(**vals)

    def hash(self) -> str:
        return hashlib.sha256(self.to_text(runtime=False).encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(v: str, typ, key: str):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            if v.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(v)
            return v.lower() in ("true", "1", "yes")
        if typ == "int":
            return int(v)
        if typ == "float":
            return float(v)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {v!r}") from None
    return v


def _kv(text: str, what: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ConfigError(f"{what}: expected k=v, got {part!r}")
        k, v = (x.strip() for x in part.split("=", 1))
        try:
            out[k] = float(v)
        except ValueError:
            raise ConfigError(f"{what}: {k} is not a number: {v!r}") from None
    return out


def _grid(text: str, log_spaced: bool) -> np.ndarray:
    try:
        parts = [float(x) for x in text.split(":")]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; use lo:hi:n or a single value") from None
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3 or parts[2] < 1 or parts[2] != int(parts[2]):
        raise ConfigError(f"bad grid {text!r}; use lo:hi:n")
    lo, hi, n = parts[0], parts[1], int(parts[2])
    if log_spaced:
        if lo <= 0 or hi <= 0:
            raise ConfigError("log-spaced grids need positive ends")
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


# ------------------------------------------------------------ building blocks


def build_spectrum(cfg: RunConfig) -> Spectrum:
    if cfg.spectrum == "zero":
        return Spectrum.zero()
    if cfg.spectrum == "table":
        if not cfg.table:
            raise ConfigError("spectrum=table needs a table path")
        return load_table(cfg.table, cfg.threshold)
    kw = _kv(cfg.jonswap, "jonswap")
    unknown = set(kw) - {f.name for f in fields(JonswapParams)}
    if unknown:
        raise ConfigError(f"jonswap: unknown keys {sorted(unknown)}")
    JonswapParams(**kw)  # validates
    return jonswap(threshold=cfg.threshold, **kw)


def build_params(cfg: RunConfig) -> PhysicalParams:
    return PhysicalParams(cfg.p, cfg.q, cfg.epsilon)


def build_stability_cfg(cfg: RunConfig) -> StabilityConfig:
    return StabilityConfig(x_step=cfg.x_step, plemelj_tol=cfg.tol, on_tol=cfg.on_tol, curve_tol=cfg.curve_tol)


def build_initial_data(cfg: RunConfig) -> InitialData:
    if cfg.w0_table:
        return InitialData.from_table(cfg.w0_table)
    kw = _kv(cfg.packet, "packet")
    unknown = set(kw) - {"amp", "s_x", "s_k", "k_c"}
    if unknown:
        raise ConfigError(f"packet: unknown keys {sorted(unknown)}")
    return InitialData.gaussian(**kw)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        return [x.real, x.imag]
    return x


class Writer:
    """Single-threaded output with embedded config and hashes."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    def json(self, name: str, payload: dict) -> Path:
        body = json.dumps(_clean(payload), sort_keys=True, indent=2)
        doc = {"config": _clean(self.cfg.resolved()), "config_hash": self.cfg.hash(),
               "content_sha256": hashlib.sha256(body.encode()).hexdigest(), "result": json.loads(body)}
        path = self.dir / name
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        self.written.append(name)
        return path

    def csv(self, name: str, header: list[str], rows) -> Path:
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for r in rows:
            buf.write(",".join(_fmt(float(v)) if isinstance(v, (float, np.floating)) else _fmt(v)
                               for v in r) + "\n")
        body = buf.getvalue()
        cfg_line = ";".join(f"{k}={_fmt(v)}" for k, v in sorted(self.cfg.resolved().items()))
        head = (f"# config: {cfg_line}\n# config_hash: {self.cfg.hash()}\n"
                f"# content_sha256: {hashlib.sha256(body.encode()).hexdigest()}\n")
        path = self.dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(head + body)
        self.written.append(name)
        return path


# ---------------------------------------------------------------- commands


def cmd_stability(cfg: RunConfig) -> dict:
    P = build_spectrum(cfg)
    params = build_params(cfg)
    scfg = build_stability_cfg(cfg)
    v, curves = is_unstable(P, params, None, scfg, keep_curves=True)
    w = Writer(cfg)
    result = {"verdict": "unstable" if v.unstable else "stable", **v.to_dict()}
    if cfg.crosscheck and v.unstable:
        rep = eigenvalue_crosscheck(P, params, v, scfg)
        result["crosscheck"] = {"message": rep.message,
                                "witness": None if rep.witness is None else
                                {"X": rep.witness.X, "omega": rep.witness.omega,
                                 "residual": rep.witness.residual}}
    w.json("verdict.json", result)
    for c in sorted(list(curves) + [c.mirrored() for c in curves if c.X > 0], key=lambda c: c.X):
        w.csv(f"curves/X_{c.X:+.4f}.csv", ["t", "re", "im"],
              [(t, z.real, z.imag) for t, z in zip(c.t_nodes, c.open_points)])
    w.csv("span.csv", ["X", "re_min", "re_max"], span_rows(curves))
    w.csv("bandwidth.csv", ["X_lo", "X_hi"], v.unstable_X)
    return {k: result[k] for k in ("verdict", "kappa_estimate", "bandwidth", "x_max", "flags")}


def cmd_scan(cfg: RunConfig) -> dict:
    gammas = _grid(cfg.gamma_grid, log_spaced=False)
    alphas = _grid(cfg.alpha_grid, log_spaced=True)
    res = scan_plane(gammas, alphas, 1.0, build_stability_cfg(cfg), build_params(cfg), cfg.workers)
    w = Writer(cfg)
    w.csv("scan.csv", ["gamma", "alpha", "unstable", "kappa", "bandwidth_lo", "bandwidth_hi"],
          [(g, a, int(u), k, lo, hi) for g, a, u, k, lo, hi in res.rows()])
    seps = [separatrix_alpha(gammas, C) for C in SEPARATRIX_C]
    w.csv("separatrix.csv", ["gamma"] + [f"alpha_C{C:g}" for C in SEPARATRIX_C],
          [(g, *(s[i] for s in seps)) for i, g in enumerate(gammas)])
    summary = {"cells": int(res.unstable.size), "unstable_cells": int(res.unstable.sum()),
               "errors": {str(k): v for k, v in res.errors.items()}}
    w.json("scan.json", summary)
    return summary


def _time_grid(cfg: RunConfig) -> np.ndarray:
    T = 2 * math.pi * cfg.periods
    n = max(2, int(math.ceil(T / cfg.dt)))
    n += n % 2  # T/2 must be a node
    return np.linspace(0.0, T, n + 1)


def cmd_simulate(cfg: RunConfig) -> dict:
    P = build_spectrum(cfg)
    params = build_params(cfg)
    w0 = build_initial_data(cfg)
    t = _time_grid(cfg)
    nX = int(round(cfg.x_max / cfg.dx))
    X = np.linspace(-nX * cfg.dx, nX * cfg.dx, 2 * nX + 1)
    tr = solve_trace(w0, P, params, X, t)
    T = float(t[-1])
    checkpoints = [T / 4, T / 2, T]
    norms = {}
    for Tc in checkpoints:
        e = weighted_norms(tr, [(1.0, 0.0)], "n", Tc)[(1.0, 0.0)]
        f = weighted_norms(tr, FREE_EXPONENTS, "n_free", Tc)
        norms[f"{Tc!r}"] = {
            "X_n": {"value": e.value, "coarse": e.coarse, "error_estimate": e.error_estimate},
            "free": {f"{a:g},{b:g}": {"value": v.value, "ratio_to_D": {str(r): v.value / D
                                                                      for r, D in w0.decay.items()},
                                      "error_estimate": v.error_estimate}
                     for (a, b), v in f.items()},
        }
    ratio = norms[f"{T!r}"]["X_n"]["value"] / max(norms[f"{T / 2!r}"]["X_n"]["value"], 1e-300)
    summary = {
        "T": T, "dt": float(t[1] - t[0]), "n_X": int(X.size), "n_t": int(t.size),
        "X_n_ratio_T_over_half_T": ratio,
        "growth": bool(ratio >= 2.0),
        "saturating": bool(ratio < 1.05),
        "max_abs_n": float(np.max(np.abs(tr.n))),
        "max_abs_n_minus_n_free": float(np.max(np.abs(tr.n - tr.n_free))),
        "decay_constants": {str(r): D for r, D in w0.decay.items()},
        "estimate_hypotheses": {f"{a:g},{b:g}": {str(r): ok for r, ok in d.items()}
                             for (a, b), d in w0.hypotheses(FREE_EXPONENTS).items()},
    }
    if not summary["growth"]:
        sd = scattering_limit(w0, P, params, tr)
        summary["scattering"] = {"checkpoints": sd.checkpoints, "distance": sd.distance,
                                 "sup_J": sd.sup_J, "tail_estimate": sd.tail_estimate,
                                 "decay_exponent": sd.decay_exponent}
    w = Writer(cfg)
    s = cfg.trace_stride
    sub = type(tr)(tr.X_grid, tr.t_grid[::s], tr.n_free[:, ::s], tr.n[:, ::s])
    w.csv("trace.csv", ["X", "t", "re_n", "im_n", "re_nf", "im_nf"], sub.rows())
    w.json("norms.json", norms)
    w.json("summary.json", summary)
    return summary


def cmd_scatter(cfg: RunConfig) -> dict:
    d = scatter_mod.load_scatter(cfg.diagram) if cfg.diagram else scatter_mod.load_bundled()
    rep = scatter_mod.analyze(d, FitConfig(cfg.practice), build_stability_cfg(cfg), build_params(cfg),
                              (cfg.quantum_gamma, cfg.quantum_alpha), cfg.workers)
    w = Writer(cfg)
    out = rep.to_dict()
    w.json("report.json", out)
    w.csv("stars.csv", ["gamma", "alpha", "count", "unstable"],
          [(g, a, c, int(u)) for g, a, c, u in rep.star_rows()])
    return {k: out[k] for k in ("unstable_likelihood", "total_count", "unstable_count", "failed")}


def cmd_selftest(cfg: RunConfig) -> dict:
    from .selftest import run_selftest

    results = run_selftest()
    Writer(cfg).json("selftest.json", {"checks": results})
    if not all(r["passed"] for r in results):
        raise NumericalError("self-test failed: " + ", ".join(r["name"] for r in results if not r["passed"]))
    return {"checks": len(results), "passed": sum(r["passed"] for r in results)}


COMMANDS = {"stability": cmd_stability, "scan": cmd_scan, "simulate": cmd_simulate,
            "scatter": cmd_scatter, "selftest": cmd_selftest}


# -------------------------------------------------------------------- click


def _run(command: str, opts: dict) -> None:
    try:
        base = RunConfig(command=command)
        if opts.get("config"):
            try:
                text = Path(opts["config"]).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            base = RunConfig.from_text(text, base)
            base.command = command
        over = {k: v for k, v in opts.items() if v is not None and k != "config"}
        if over.get("jonswap") is not None:
            over.setdefault("spectrum", "jonswap")
        if over.get("table") is not None:
            over["spectrum"] = "table"
        if over.pop("zero_spectrum", False):
            over["spectrum"] = "zero"
        cfg = RunConfig(**{**dataclasses.asdict(base), **over})
        result = COMMANDS[command](cfg)
    except (ConfigError, ValueError, OSError) as exc:
        click.echo(json.dumps({"error": "config", "type": type(exc).__name__, "message": str(exc)}), err=True)
        sys.exit(2)
    except NumericalError as exc:
        click.echo(json.dumps({"error": "numerical", "type": type(exc).__name__, "message": str(exc)}),
                   err=True)
        sys.exit(3)
    click.echo(json.dumps(_clean(result), sort_keys=True))


def _common(f):
    opts = [
        click.option("--config", type=click.Path(dir_okay=False), help="key=value config file"),
        click.option("--jonswap", help="JONSWAP parameters, e.g. alpha=0.02,gamma=3.3,k0=1"),
        click.option("--table", help="two-column spectrum table (k, P)"),
        click.option("--zero-spectrum", is_flag=True, default=None, help="use P = 0"),
        click.option("--p", "p", type=float), click.option("--q", "q", type=float),
        click.option("--epsilon", type=float), click.option("--tol", type=float, help="Plemelj offset"),
        click.option("--out", help="output directory"),
        click.option("--workers", type=int),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
def main(verbose):
    """Modulational stability of wave spectra via the Alber equation."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr)


@main.command()
@_common
@click.option("--no-crosscheck", "crosscheck", flag_value=False, default=None)
def stability(**opts):
    """Contour verdict, Gamma_X curves and real-part spans."""
    _run("stability", opts)


@main.command()
@_common
@click.option("--gamma-grid", help="lo:hi:n (linear)")
@click.option("--alpha-grid", help="lo:hi:n (log-spaced)")
def scan(**opts):
    """Verdict matrix over the (gamma, alpha) plane."""
    _run("scan", opts)


@main.command()
@_common
@click.option("--periods", type=float, help="run length in carrier periods")
@click.option("--dt", type=float)
@click.option("--x-max", "x_max", type=float)
@click.option("--dx", type=float)
@click.option("--packet", help="Gaussian packet, e.g. amp=1,s_x=0.5,s_k=0.5,k_c=1")
@click.option("--w0-table", "w0_table", help="tabulated w0_check (A B re [im])")
@click.option("--trace-stride", "trace_stride", type=int)
def simulate(**opts):
    """Volterra solve, weighted norms and scattering diagnostics."""
    _run("simulate", opts)


@main.command()
@_common
@click.option("--diagram", help="scatter CSV (default: bundled North-Atlantic-style table)")
@click.option("--practice", help="sea-state fitting practice")
def scatter(**opts):
    """Likelihood of unstable sea states over a scatter diagram."""
    _run("scatter", opts)


@main.command()
@_common
def selftest(**opts):
    """Quick oracle checks of the numerical core."""
    _run("selftest", opts)


if __name__ == "__main__":
    main()
