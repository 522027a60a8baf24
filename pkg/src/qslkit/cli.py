"""Command-line driver for reproducible sweeps.

Every output starts with comment lines recording the tool version, a hash of
the configuration, the seed and the random generator, so that a file can be
regenerated byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from . import batteries as bt
from . import bounds as bd
from . import brachistochrone as br
from .ensembles import GENERATOR_NAME, SampleStream
from .errors import DomainError, ResourceError

COMMANDS = ("bounds-sweep", "deffner-region", "brach", "brach-sweep", "perturb", "battery", "conjecture")
EXIT_USAGE = 2
EXIT_RESOURCE = 3

# default three-level cell for the work-per-copy table
CELL_ENERGIES = (0.0, 0.579, 1.0)
CELL_POPULATIONS = (0.538, 0.237, 0.224)


@dataclass
class ExperimentConfig:
    command: str
    d: int = 3
    d_list: list = field(default_factory=list)
    n_cells: int = 3
    k: int = 2
    m: int = 1
    samples: int = 100
    seed: int = 0
    epsilon: Optional[float] = None
    constraint: str = "c0"
    variant: str = "forward"
    mode: str = "mixed"
    kind: str = "convex"
    deltas: list = field(default_factory=list)
    analytic: bool = False
    max_iter: int = br.DEFAULT_MAX_ITER
    out: str = "-"
    format: str = "csv"
    threads: int = 1

    def hashed_fields(self) -> dict:
        """Fields that determine the output; ``out`` and ``threads`` do not."""
        data = asdict(self)
        data.pop("out")
        data.pop("threads")
        return data

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def meta(self) -> dict:
        return {
            "tool": f"qslkit {__version__}",
            "command": self.command,
            "config_hash": self.config_hash(),
            "seed": self.seed,
            "generator": GENERATOR_NAME,
        }


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


class Table:
    """Rows with fixed columns plus a summary dict."""

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        self.rows: list[list] = []
        self.summary: dict = {}

    def add(self, rec: dict) -> None:
        self.rows.append([rec.get(c, "") for c in self.columns])

    def to_csv(self, meta: dict) -> str:
        buf = io.StringIO()
        for key, val in meta.items():
            buf.write(f"# {key}={val}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self, meta: dict) -> str:
        data = {
            "meta": meta,
            "columns": self.columns,
            "rows": [[_jsonable(v) for v in row] for row in self.rows],
            "summary": _jsonable(self.summary),
        }
        return json.dumps(data, indent=1, sort_keys=True) + "\n"


def _map(fn: Callable, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # map keeps input order


# ---------------------------------------------------------------- commands


def cmd_bounds_sweep(cfg: ExperimentConfig) -> Table:
    if cfg.analytic:
        if cfg.d != 2:
            raise DomainError("analytic mode is defined for d = 2")
        cols = ["theta", "lam", "T_Theta", "T_Phi", "T_L", "orbit_T_Theta", "orbit_T_Phi", "orbit_T_L"]
        tab = Table(cols)
        thetas = (math.pi / 8, math.pi / 4, math.pi / 2)
        lams = [0.5 * (i + 1) / (cfg.samples + 1) for i in range(cfg.samples)]

        def row(job):
            theta, lam = job
            exact = bd.qubit_analytic_bounds(theta, lam)
            rho, sigma, orbit = bd.qubit_scenario(theta, lam)
            reps = bd.all_bounds(rho, sigma, orbit)
            rec = {"theta": theta, "lam": lam, **exact}
            for name in ("T_Theta", "T_Phi", "T_L"):
                rec["orbit_" + name] = reps[name].value
            return rec

        for rec in _map(row, [(t, l) for t in thetas for l in lams], cfg.threads):
            tab.add(rec)
        return tab
    stream = SampleStream(cfg.seed, cfg.d)
    tab = Table(bd.SWEEP_COLUMNS)

    def sample(i):
        rec = bd.tightness_sample(cfg.d, stream.at(i))
        rec.update(sample=i, seed=cfg.seed)
        return rec

    recs = _map(sample, range(cfg.samples), cfg.threads)
    for rec in recs:
        tab.add(rec)
    tab.summary = bd.summarize_sweep(recs, cfg.d).to_json()
    return tab


def cmd_deffner_region(cfg: ExperimentConfig) -> Table:
    tab = Table(["x", "y", "probability"])
    n = max(cfg.samples, 1)
    lo = 1.0 / cfg.d
    grid = [lo + (1.0 - lo) * i / max(n - 1, 1) for i in range(n)]
    jobs = [(x, y) for x in grid for y in grid]
    probs = _map(lambda xy: bd.deffner_region_probability(*xy), jobs, cfg.threads)
    for (x, y), p in zip(jobs, probs):
        tab.add({"x": x, "y": y, "probability": p})
    return tab


def _eps(cfg: ExperimentConfig) -> float:
    if cfg.epsilon is not None:
        return cfg.epsilon
    return br.DEFAULT_EPS_PURE if cfg.mode == "pure" else br.DEFAULT_EPS_MIXED


def _brach_run(cfg: ExperimentConfig, d: int, i: int) -> br.BrachistochroneRun:
    rng = SampleStream(cfg.seed, d, i).generator()
    rho, sigma = br.random_pair(d, rng, cfg.mode)
    phi = br.random_phases(d, rng)
    return br.solve(rho, sigma, phi, eps=_eps(cfg), variant=cfg.variant, max_iter=cfg.max_iter)


def cmd_brach(cfg: ExperimentConfig):
    run = _brach_run(cfg, cfg.d, 0)
    if cfg.format == "json":
        return run
    tab = Table(["iteration", "parallel_fraction", "eta_star", "qsl_ratio", "endpoint_error"])
    for j, rec in enumerate(run.history):
        tab.add({
            "iteration": j, "parallel_fraction": rec.parallel_fraction, "eta_star": rec.eta_star,
            "qsl_ratio": rec.qsl_ratio, "endpoint_error": rec.endpoint_error,
        })
    tab.summary = {"converged": run.converged, "iterations": run.iterations}
    return tab


BRACH_COLUMNS = ("d", "sample", "converged", "iterations", "qsl_ratio", "eta", "eta_star")


def brach_sweep_records(cfg: ExperimentConfig) -> list[dict]:
    dims = cfg.d_list or [cfg.d]
    jobs = [(d, i) for d in dims for i in range(cfg.samples)]

    def one(job):
        d, i = job
        run = _brach_run(cfg, d, i)
        fin = run.final
        eta = br.efficiency_eta(fin.h, run.problem.rho) if fin.h_norm > 0 else 1.0
        return {
            "d": d, "sample": i, "converged": run.converged, "iterations": run.iterations,
            "qsl_ratio": fin.qsl_ratio, "eta": eta, "eta_star": fin.eta_star,
        }

    return _map(one, jobs, cfg.threads)


def iteration_trend(records: list[dict]) -> dict:
    """Median iterations per dimension and the fit a + b log d."""
    from scipy.stats import spearmanr

    dims = sorted({r["d"] for r in records})
    med = [float(np.median([r["iterations"] for r in records if r["d"] == d])) for d in dims]
    out = {"dims": dims, "median_iterations": med}
    if len(dims) >= 2:
        b, a = np.polyfit(np.log(dims), med, 1)
        out.update(fit_a=float(a), fit_b=float(b), spearman=float(spearmanr(dims, med)[0]))
    return out


def cmd_brach_sweep(cfg: ExperimentConfig) -> Table:
    recs = brach_sweep_records(cfg)
    tab = Table(BRACH_COLUMNS)
    for r in recs:
        tab.add(r)
    if recs:
        tab.summary = iteration_trend(recs)
        tab.summary["unconverged"] = sum(1 for r in recs if not r["converged"])
    return tab


def cmd_perturb(cfg: ExperimentConfig) -> Table:
    deltas = cfg.deltas or [0.0, 1e-4, 1e-3, 1e-2, 1e-1]
    tab = Table(["delta", "sample", "deviation"])

    def one(job):
        delta, i = job
        rng = SampleStream(cfg.seed, cfg.d, i).generator()
        rho, sigma = br.random_pair(cfg.d, rng, cfg.mode)
        phi = br.random_phases(cfg.d, rng)
        dev = br.perturbation_study(
            rho, sigma, delta, cfg.kind, rng, eps=_eps(cfg), phi0=phi,
            variant=cfg.variant, max_iter=cfg.max_iter,
        )
        return {"delta": delta, "sample": i, "deviation": dev}

    for rec in _map(one, [(dl, i) for dl in deltas for i in range(cfg.samples)], cfg.threads):
        tab.add(rec)
    return tab


def cmd_battery(cfg: ExperimentConfig) -> Table:
    tab = Table(["table", "N", "k", "m", "constraint", "quantity", "value"])
    pops = np.asarray(CELL_POPULATIONS) / sum(CELL_POPULATIONS)
    rho = np.diag(pops).astype(complex)
    h0 = np.diag(CELL_ENERGIES).astype(complex)
    limit = bt.ergotropy_gibbs_bound(rho, h0)
    for n in range(1, cfg.n_cells + 1):
        tab.add({"table": "wmax", "N": n, "quantity": "w_max", "value": bt.wmax_per_copy(rho, h0, n)})
        tab.add({"table": "wmax", "N": n, "quantity": "gibbs_limit", "value": limit})
    for n in range(1, cfg.n_cells + 1):
        lad = bt.advantage_ladder(n, 1.0)
        tab.add({"table": "ladder", "N": n, "quantity": "tau_parallel", "value": lad.tau_parallel})
        tab.add({"table": "ladder", "N": n, "quantity": "tau_collective", "value": lad.tau_collective})
        tab.add({"table": "ladder", "N": n, "quantity": "gamma", "value": int(lad.gamma)})
        c1, c2 = bt.advantage_separable_ball(n, 1.0)
        tab.add({"table": "separable", "N": n, "constraint": "c1", "quantity": "gamma", "value": c1})
        tab.add({"table": "separable", "N": n, "constraint": "c2", "quantity": "gamma", "value": c2})
    if cfg.k <= cfg.n_cells:
        ground = np.diag([1.0, 0.0]).astype(complex)
        excited = np.diag([0.0, 1.0]).astype(complex)
        bound = bt.advantage_upper_bounds(
            cfg.n_cells, cfg.k, cfg.m, cfg.constraint, rho=ground, sigma=excited
        )
        tab.add({
            "table": "bound", "N": cfg.n_cells, "k": cfg.k, "m": cfg.m,
            "constraint": cfg.constraint, "quantity": "gamma_max", "value": bound.value,
        })
    tab.add({"table": "trotter", "k": cfg.k, "m": cfg.m, "quantity": "overhead_bound",
             "value": bt.trotter_overhead_bound(cfg.k, cfg.m)})
    return tab


def cmd_conjecture(cfg: ExperimentConfig) -> Table:
    tab = Table(["sample", "P"])
    stream = SampleStream(cfg.seed, 1000 * cfg.n_cells + cfg.k)
    if not 1 <= cfg.k <= cfg.n_cells <= 6:
        raise DomainError("need 1 <= k <= n-cells <= 6")

    def one(i):
        x, y = bt.conjecture_terms(cfg.n_cells, cfg.k, stream.at(i).generator())
        return bt.conjecture_ratio(x, y)

    vals = _map(one, range(cfg.samples), cfg.threads)
    for i, p in enumerate(vals):
        tab.add({"sample": i, "P": p})
    tab.summary = {
        "max_p": max(vals) if vals else 0.0,
        "violations": [i for i, p in enumerate(vals) if p > 1.0],
    }
    return tab


HANDLERS = {
    "bounds-sweep": cmd_bounds_sweep,
    "deffner-region": cmd_deffner_region,
    "brach": cmd_brach,
    "brach-sweep": cmd_brach_sweep,
    "perturb": cmd_perturb,
    "battery": cmd_battery,
    "conjecture": cmd_conjecture,
}


# ---------------------------------------------------------------- plumbing


def _float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default settings")
    common.add_argument("--d", type=int)
    common.add_argument("--d-list", type=_int_list, help="comma-separated dimensions")
    common.add_argument("--n-cells", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--constraint", choices=("c0", "c1", "c2", "opnorm"))
    common.add_argument("--variant", choices=br.VARIANTS)
    common.add_argument("--mode", choices=("pure", "mixed"))
    common.add_argument("--kind", choices=("convex", "unitary"))
    common.add_argument("--deltas", type=_float_list, help="comma-separated perturbation strengths")
    common.add_argument("--analytic", action="store_true", default=None)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--out", help="output file, '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int)
    parser = argparse.ArgumentParser(prog="qslkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qslkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    values["command"] = args.command
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise DomainError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.samples < 0:
        raise DomainError("--samples must be non-negative")
    if cfg.threads < 1:
        raise DomainError("--threads must be at least 1")
    if cfg.d < 2 or any(d < 2 for d in cfg.d_list):
        raise DomainError("dimensions must be at least 2")
    if cfg.n_cells < 1 or cfg.k < 1 or cfg.m < 1:
        raise DomainError("--n-cells, --k and --m must be positive")
    if cfg.epsilon is not None and not 0.0 < cfg.epsilon < 1.0:
        raise DomainError("--epsilon must lie in (0, 1)")
    if cfg.max_iter < 1:
        raise DomainError("--max-iter must be at least 1")


def render(cfg: ExperimentConfig, result) -> str:
    meta = cfg.meta()
    if isinstance(result, br.BrachistochroneRun):
        return json.dumps(_jsonable(result.to_json(meta)), indent=1, sort_keys=True) + "\n"
    if cfg.format == "json":
        return result.to_json(meta)
    text = result.to_csv(meta)
    if result.summary:
        text += "# summary=" + json.dumps(_jsonable(result.summary), sort_keys=True) + "\n"
    return text


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        result = HANDLERS[cfg.command](cfg)
        text = render(cfg, result)
    except ResourceError as exc:
        print(f"qslkit: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (DomainError, ValueError, OSError) as exc:
        print(f"qslkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
