"""Wave scatter diagrams: fit every sea state to JONSWAP (gamma, alpha), decide
stability, and aggregate the likelihood of unstable sea states."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import ConfigError
from .spectra import FitConfig, SeaState, fit_sea_state
from .stability import StabilityConfig, _scan_column
from .transforms import PhysicalParams

log = logging.getLogger(__name__)

HEADER = ["hs", "t", "period_kind", "count"]
BUNDLED = "north_atlantic.csv"
BUNDLED_SHA256 = "5c30dabf5a2ac792cb3e0b816aab09599e9573aed108881103da71c059e7ba9e"


@dataclass(frozen=True)
class ScatterDiagram:
    states: tuple[SeaState, ...]
    source: str = ""

    def __post_init__(self):
        if not self.states:
            raise ConfigError("scatter diagram has no sea states")
        if not self.total_count > 0:
            raise ConfigError("scatter diagram total count must be > 0")

    @property
    def total_count(self) -> float:
        return math.fsum(s.count for s in self.states)


def load_scatter(path: str | Path) -> ScatterDiagram:
    """Read a CSV with header ``hs,t,period_kind,count``; '#' lines are comments.

    Malformed rows raise :class:`ConfigError` naming the line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scatter diagram {path}: {exc}") from None
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), 1)
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ConfigError(f"{path}: empty scatter diagram")
    first_no, first = lines[0]
    head = [h.strip().lower() for h in next(csv.reader([first]))]
    if head != HEADER:
        raise ConfigError(f"{path}:{first_no}: expected header {','.join(HEADER)}, got {first.strip()!r}")
    states = []
    for lineno, ln in lines[1:]:
        parts = [p.strip() for p in next(csv.reader([ln]))]
        if len(parts) != 4:
            raise ConfigError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        try:
            hs, t, count = float(parts[0]), float(parts[1]), float(parts[3])
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: non-numeric field in {ln.strip()!r}") from None
        if not all(map(math.isfinite, (hs, t, count))):
            raise ConfigError(f"{path}:{lineno}: non-finite field")
        if count < 0:
            raise ConfigError(f"{path}:{lineno}: negative count {count:g}")
        try:
            states.append(SeaState(hs, t, parts[2].lower(), count))
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if not states:
        raise ConfigError(f"{path}: no data rows")
    return ScatterDiagram(tuple(states), str(path))


def bundled_path() -> Path:
    return Path(str(resources.files("alber") / "data" / BUNDLED))


def load_bundled() -> ScatterDiagram:
    """The North-Atlantic-style diagram shipped with the package (total 100000)."""
    p = bundled_path()
    digest = hashlib.sha256(p.read_bytes()).hexdigest()
    if digest != BUNDLED_SHA256:
        log.warning("bundled scatter diagram checksum mismatch: %s", digest)
    return load_scatter(p)


@dataclass
class StateResult:
    state: SeaState
    gamma: float = math.nan
    alpha: float = math.nan
    unstable: bool | None = None
    kappa: float = math.nan
    flags: tuple[str, ...] = ()
    error: str | None = None


@dataclass
class LikelihoodReport:
    states: list
    unstable_likelihood: float
    total_count: float
    unstable_count: float
    failed: int
    practice: dict
    quantum: tuple[float, float]
    cells: int = 0
    meta: dict = field(default_factory=dict)

    def star_rows(self):
        """(gamma, alpha, count, unstable) per successfully analysed state."""
        for r in self.states:
            if r.error is None:
                yield (r.gamma, r.alpha, r.state.count, bool(r.unstable))

    def to_dict(self) -> dict:
        return {
            "unstable_likelihood": self.unstable_likelihood,
            "total_count": self.total_count,
            "unstable_count": self.unstable_count,
            "failed": self.failed,
            "practice": self.practice,
            "quantum": list(self.quantum),
            "distinct_cells": self.cells,
            "states": [
                {"hs": r.state.hs, "t": r.state.t, "period_kind": r.state.period_kind,
                 "count": r.state.count, "gamma": r.gamma, "alpha": r.alpha,
                 "unstable": r.unstable, "kappa": r.kappa, "flags": list(r.flags), "error": r.error}
                for r in self.states
            ],
        }


def _quantize(x: float, q: float) -> float:
    return round(round(x / q) * q, 12)


def analyze(diagram: ScatterDiagram, fit_cfg: FitConfig = FitConfig(),
            stability_cfg: StabilityConfig = StabilityConfig(), params: PhysicalParams | None = None,
            quantum: tuple[float, float] = (0.01, 1e-4), workers: int = 1) -> LikelihoodReport:
    """Fit, decide and aggregate.

    Verdicts are memoised on (gamma, alpha) cells of size ``quantum``; all
    cells sharing a gamma reuse one set of unit-alpha curves. States whose
    fit or verdict fails are excluded from both sums and counted in
    ``failed``.
    """
    params = params or PhysicalParams()
    if not (quantum[0] > 0 and quantum[1] > 0):
        raise ConfigError("quantum must be positive")
    results = []
    for s in diagram.states:
        r = StateResult(s)
        try:
            fit = fit_sea_state(s, fit_cfg)
            r.gamma, r.alpha, r.flags = fit.gamma, fit.alpha, fit.flags
        except (ValueError, ArithmeticError) as exc:
            r.error = f"fit: {exc}"
        results.append(r)
    cells: dict[float, set] = {}
    for r in results:
        if r.error is None:
            g, a = _quantize(r.gamma, quantum[0]), max(_quantize(r.alpha, quantum[1]), quantum[1])
            cells.setdefault(max(g, 1.0), set()).add(a)
    groups = sorted((g, tuple(sorted(a))) for g, a in cells.items())
    args = [(g, alphas, 1.0, stability_cfg, params) for g, alphas in groups]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(_scan_column, *zip(*args)))
    else:
        outs = [_scan_column(*a) for a in args]
    memo = {}
    for (g, alphas), (out, err) in zip(groups, outs):
        for j, a in enumerate(alphas):
            memo[(g, a)] = (None, math.nan, err) if err else (bool(out[0, j] > 0.5), float(out[1, j]), None)
    unstable_count = 0.0
    counted = 0.0
    failed = 0
    for r in results:
        if r.error is None:
            key = (max(_quantize(r.gamma, quantum[0]), 1.0), max(_quantize(r.alpha, quantum[1]), quantum[1]))
            r.unstable, r.kappa, err = memo[key]
            if err:
                r.error = f"stability: {err}"
        if r.error is not None:
            failed += 1
            continue
        counted += r.state.count
        if r.unstable:
            unstable_count += r.state.count
    if failed:
        log.warning("%d sea states excluded after fit/verdict failures", failed)
    lik = unstable_count / counted if counted > 0 else 0.0
    practice = asdict(fit_cfg)
    return LikelihoodReport(results, float(lik), float(counted), float(unstable_count), failed,
                            practice, tuple(quantum), sum(len(a) for _, a in groups),
                            {"source": diagram.source})


def star_plot_rows(report: LikelihoodReport) -> Sequence[tuple]:
    return list(report.star_rows())
