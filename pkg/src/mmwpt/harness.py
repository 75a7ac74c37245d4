"""Parameter sweeps, cross-engine reports and plot-ready CSV/JSON output."""
from __future__ import annotations

import concurrent.futures as cf
import io
import json
import logging
import os
import struct
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analytic import (
    avg_interference_power,
    avg_power_lower,
    rate_upper,
    stable_transmit_power,
)
from .beamforming import GainKernelParams, mean_interference_gain
from .montecarlo import TrialBatchSpec, mc_harvest, mc_rate
from .params import ConfigError, SystemParams

__all__ = [
    "SweepRow",
    "SweepResult",
    "default_densities",
    "derive_seed",
    "worker_count",
    "run_fig1",
    "run_fig2",
    "evaluate_point",
]

log = logging.getLogger(__name__)

DEFAULT_ANTENNAS = (16, 64)
DEFAULT_TRIALS = 100_000


def default_densities(n: int = 9) -> list[float]:
    """Log grid from 1e-6 to 1e-2 BS/m^2 (1 to 1e4 per km^2)."""
    return [float(x) for x in np.logspace(-6, -2, n)]


def derive_seed(global_seed: int, density: float, m_bs: int) -> int:
    """Per-point seed from (global seed, density bits, M); schedule independent."""
    hi, lo = struct.unpack("<II", struct.pack("<d", float(density)))
    ss = np.random.SeedSequence([int(global_seed), hi, lo, int(m_bs)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def worker_count(n_tasks: int) -> int:
    """Worker processes for a sweep: MMWPT_THREADS if set, else the CPU count."""
    raw = os.environ.get("MMWPT_THREADS")
    if raw is None or raw.strip() == "":
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"must be a positive integer, got {raw!r}", "MMWPT_THREADS") from None
        if cap < 1:
            raise ConfigError(f"must be a positive integer, got {raw!r}", "MMWPT_THREADS")
    return max(1, min(cap, n_tasks))


@dataclass(frozen=True)
class SweepRow:
    """One (density, M) point. ``None`` marks a column that was not computed."""

    bs_density: float
    m_bs: int
    seed: int
    analytic_total_w: Optional[float] = None
    analytic_lower_w: Optional[float] = None
    mc_total_w: Optional[float] = None
    mc_ci_w: Optional[float] = None
    pu_stable_w: Optional[float] = None
    pu_stable_mc_w: Optional[float] = None
    rate_upper: Optional[float] = None
    rate_exact: Optional[float] = None
    rate_mc_upper: Optional[float] = None
    # derived, kept in the file for readability
    density_per_km2: Optional[float] = None
    rate_upper_bps: Optional[float] = None
    rate_exact_bps: Optional[float] = None
    rate_mc_upper_bps: Optional[float] = None


COLUMNS = tuple(f.name for f in fields(SweepRow))
_INT_COLUMNS = ("m_bs", "seed")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _parse(name: str, s: str):
    if s == "":
        return None
    return int(s) if name in _INT_COLUMNS else float(s)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.m_bs, r.bs_density))
        for r in self.rows:
            if (r.analytic_total_w is not None and r.analytic_lower_w is not None
                    and r.analytic_total_w < r.analytic_lower_w):
                raise ValueError(f"analytic total below lower bound at rho={r.bs_density}, M={r.m_bs}")

    # -- CSV
    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.metadata):
            buf.write(f"# {k}: {json.dumps(self.metadata[k], sort_keys=True)}\n")
        buf.write(",".join(COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(getattr(r, c)) for c in COLUMNS) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        meta, rows, header = {}, [], None
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                meta[key] = json.loads(val)
            elif header is None:
                header = line.split(",")
                if tuple(header) != COLUMNS:
                    raise ValueError(f"unexpected CSV header: {line!r}")
            elif line.strip():
                cells = line.split(",")
                rows.append(SweepRow(**{c: _parse(c, s) for c, s in zip(header, cells)}))
        return cls(rows, meta)

    # -- JSON
    def to_json(self) -> str:
        return json.dumps({"metadata": self.metadata, "rows": [asdict(r) for r in self.rows]},
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SweepResult":
        doc = json.loads(text)
        return cls([SweepRow(**r) for r in doc["rows"]], doc["metadata"])

    def write(self, path: str | Path, as_json: bool = False) -> None:
        Path(path).write_text(self.to_json() if as_json else self.to_csv())


# ---------------------------------------------------------------------------
# Point evaluation

@dataclass(frozen=True)
class _PointTask:
    params: SystemParams
    seed: int
    n_trials: int
    mc: bool
    hbar: float
    figure: str


def _bps(rate, bw):
    return None if rate is None else rate * bw


def _fig1_point(t: _PointTask) -> SweepRow:
    p = t.params
    lower = avg_power_lower(p)
    total = lower + avg_interference_power(p, hbar=t.hbar)
    row = dict(analytic_total_w=total, analytic_lower_w=lower,
               pu_stable_w=stable_transmit_power(p, total))
    if t.mc:
        rep = mc_harvest(p, TrialBatchSpec(n_trials=t.n_trials, seed=t.seed))
        row.update(mc_total_w=rep.total_w, mc_ci_w=rep.ci_halfwidth_w, pu_stable_mc_w=rep.pu_stable_w)
    return SweepRow(bs_density=p.bs_density, m_bs=p.m_bs, seed=t.seed,
                    density_per_km2=p.bs_density * 1e6, **row)


def _fig2_point(t: _PointTask) -> SweepRow:
    p = t.params
    total = avg_power_lower(p) + avg_interference_power(p, hbar=t.hbar)
    pu = stable_transmit_power(p, total)
    # no harvested power (eta = 0) means no uplink transmission at all
    upper = rate_upper(p, pu_w=pu).rate_upper if pu > 0 else 0.0
    exact = mc_up = None
    if t.mc and pu > 0:
        rep = mc_rate(p, TrialBatchSpec(n_trials=t.n_trials, seed=t.seed), pu_w=pu)
        exact, mc_up = rep.rate_exact, rep.rate_upper
    elif t.mc:
        exact = mc_up = 0.0
    bw = p.bandwidth_hz
    return SweepRow(bs_density=p.bs_density, m_bs=p.m_bs, seed=t.seed,
                    analytic_total_w=total, pu_stable_w=pu,
                    rate_upper=upper, rate_exact=exact, rate_mc_upper=mc_up,
                    density_per_km2=p.bs_density * 1e6,
                    rate_upper_bps=_bps(upper, bw), rate_exact_bps=_bps(exact, bw),
                    rate_mc_upper_bps=_bps(mc_up, bw))


_POINT_FN = {"fig1": _fig1_point, "fig2": _fig2_point}


def _run_task(t: _PointTask) -> SweepRow:
    return _POINT_FN[t.figure](t)


def _sweep(figure: str, params: SystemParams, densities: Sequence[float], m_values: Sequence[int],
           n_trials: int, seed: int, mc: bool, out_path, as_json: bool) -> SweepResult:
    densities = [float(d) for d in densities]
    m_values = [int(m) for m in m_values]
    if not densities or not m_values:
        raise ConfigError("density and antenna lists must be non-empty", "densities")
    if any(not d > 0 for d in densities):
        raise ConfigError("densities must be > 0", "densities")
    if n_trials < 1:
        raise ConfigError("must be >= 1", "trials")
    # hbar is computed once per M here, before any worker starts
    hbars = {m: mean_interference_gain(GainKernelParams(m, params.n_ue, params.spacing_ratio))
             for m in m_values}
    tasks = [
        _PointTask(params.with_(bs_density=d, m_bs=m), derive_seed(seed, d, m), n_trials, mc, hbars[m], figure)
        for m in m_values for d in densities
    ]
    metadata = {
        "tool": "mmwpt",
        "tool_version": __version__,
        "figure": figure,
        "params": params.to_dict(),
        "global_seed": seed,
        "n_trials": n_trials if mc else 0,
        "monte_carlo": mc,
        "densities": densities,
        "antennas": m_values,
        "complete": True,
    }
    rows: list[SweepRow] = []
    error = None
    workers = worker_count(len(tasks))
    try:
        if workers == 1:
            for t in tasks:
                rows.append(_run_task(t))
        else:
            with cf.ProcessPoolExecutor(max_workers=workers) as pool:
                for row in pool.map(_run_task, tasks):
                    rows.append(row)
    except Exception as exc:  # noqa: BLE001 - flagged in the partial output, then re-raised
        error = exc
        metadata["complete"] = False
        metadata["error"] = f"{type(exc).__name__}: {exc}"
    result = SweepResult(rows, metadata)
    if out_path is not None:
        result.write(out_path, as_json)
    if error is not None:
        raise error
    return result


def run_fig1(params: SystemParams, densities: Sequence[float] | None = None,
             m_values: Sequence[int] = DEFAULT_ANTENNAS, out_path=None, *,
             n_trials: int = DEFAULT_TRIALS, seed: int = 0, mc: bool = True,
             as_json: bool = False) -> SweepResult:
    """Mean harvested power and stable transmit power over (density, M)."""
    return _sweep("fig1", params, densities or default_densities(), m_values,
                  n_trials, seed, mc, out_path, as_json)


def run_fig2(params: SystemParams, densities: Sequence[float] | None = None,
             m_values: Sequence[int] = DEFAULT_ANTENNAS, out_path=None, *,
             n_trials: int = DEFAULT_TRIALS, seed: int = 0, mc: bool = True,
             as_json: bool = False) -> SweepResult:
    """Noise-only upper-bound rate and Monte Carlo SNR/SINR rates over (density, M)."""
    return _sweep("fig2", params, densities or default_densities(), m_values,
                  n_trials, seed, mc, out_path, as_json)


def evaluate_point(params: SystemParams, n_trials: int = 20_000, seed: int = 0,
                   mc: bool = True) -> dict:
    """Every engine at one parameter set, as a flat JSON-ready dict."""
    lower = avg_power_lower(params)
    en2 = avg_interference_power(params)
    total = lower + en2
    pu = stable_transmit_power(params, total)
    out = {
        "params": params.to_dict(),
        "analytic_lower_w": lower,
        "analytic_interference_w": en2,
        "analytic_total_w": total,
        "pu_stable_w": pu,
        "rate_upper": rate_upper(params, pu_w=pu).rate_upper if pu > 0 and params.noise_watts > 0 else None,
    }
    if mc:
        batch = TrialBatchSpec(n_trials=n_trials, seed=seed)
        rep = mc_harvest(params, batch)
        out.update(mc_en1_w=rep.en1_mean_w, mc_en2_w=rep.en2_mean_w, mc_total_w=rep.total_w,
                   mc_ci_w=rep.ci_halfwidth_w, mc_n_empty=rep.n_empty)
        if pu > 0:
            rr = mc_rate(params, batch, pu_w=pu)
            out.update(rate_exact=rr.rate_exact, rate_mc_upper=rr.rate_upper)
        out.update(n_trials=n_trials, seed=seed)
    if out.get("rate_upper") is not None:
        out["rate_upper_bps"] = out["rate_upper"] * params.bandwidth_hz
    return out

