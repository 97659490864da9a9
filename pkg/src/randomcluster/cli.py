"""Command-line entry point: seeds, dispatch, and reproducible outputs.

Subcommands: `oracle` (exact small-lattice answers), `sweeny` (chain run +
configuration snapshot), `coupling` (label-chain run + cloud dump),
`observable` (observable values + residual report), `experiment <name>`
(any estimator), and `selftest` (the invariant suite).

Every run writes one CSV of result rows -- columns (experiment, q, p, n,
rho, bc, seed, replicas, value, std_error, extra) with '.' decimals, LF
line endings, UTF-8 and a header row -- plus a JSON manifest with the full
configuration echo, code version and wall time.  For a fixed configuration
and master seed the CSV is byte-identical across runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import BoundaryCondition, build_box
from .measure import (ModelParams, exact_distribution, exact_event_probability,
                      exact_mean, self_dual_point, vertical_crossing_event)

_EXPERIMENTS = ("crossing", "correlation_length", "one_arm", "four_arm",
                "pivotal", "edge_intensity", "edge_intensity_derivative",
                "influence", "clouds", "kesten")


@dataclass
class RunConfig:
    subcommand: str = "selftest"
    experiment: str = "crossing"
    q: float = 2.0
    p: float | None = None           # defaults to the self-dual point
    p_grid: list = field(default_factory=list)
    n: int = 8
    n_grid: list = field(default_factory=list)
    rho: float = 1.0
    m: int | None = None             # explicit height where it matters
    bc: str = "free"
    torus: bool = False
    sampler: str = "sweeny"
    replicas: int = 8
    samples: int = 2000
    sweeps: int | None = None
    burn_in: int | None = None
    thin: int = 2
    epsilon: float = 0.25
    dp: float = 0.02
    master_seed: int = 20120601
    out: str = "runs"
    strict: bool = False

    def echo(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_sources(args: argparse.Namespace) -> "RunConfig":
        cfg = RunConfig()
        if getattr(args, "config", None):
            with open(args.config, "r", encoding="utf-8") as fh:
                data = json.load(fh)
            unknown = set(data) - {f.name for f in dataclasses.fields(RunConfig)}
            if unknown:
                raise SystemExit(f"unknown config keys: {sorted(unknown)}")
            for k, v in data.items():
                setattr(cfg, k, v)
        for f in dataclasses.fields(RunConfig):
            v = getattr(args, f.name, None)
            if v is not None:
                setattr(cfg, f.name, v)
        cfg.validate()
        return cfg

    def validate(self):
        if self.q < 1.0:
            raise SystemExit("q must be >= 1 (positive association fails below)")
        if self.p is None and not self.p_grid:
            self.p = self_dual_point(self.q)
        for p in ([self.p] if self.p is not None else []) + list(self.p_grid):
            if not 0.0 <= p <= 1.0:
                raise SystemExit(f"p={p} outside [0,1]")
        if self.sampler not in ("sweeny", "coupling"):
            raise SystemExit(f"unknown sampler {self.sampler!r}")
        if self.bc not in ("free", "wired"):
            raise SystemExit(f"unknown boundary condition {self.bc!r}")
        if self.subcommand == "experiment" and self.experiment not in _EXPERIMENTS:
            raise SystemExit(f"unknown experiment {self.experiment!r}; "
                             f"choose from {_EXPERIMENTS}")
        if self.n_grid and sorted(self.n_grid) != list(self.n_grid):
            raise SystemExit("n_grid must be increasing")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


class ResultWriter:
    HEADER = ["experiment", "q", "p", "n", "rho", "bc", "seed", "replicas",
              "value", "std_error", "extra"]

    def __init__(self):
        self.rows: list[list[str]] = []

    def add(self, experiment, q, p, n, rho, bc, seed, replicas, value,
            std_error, extra: dict | None = None):
        blob = json.dumps(extra or {}, sort_keys=True, separators=(",", ":"),
                          default=_fmt)
        self.rows.append([experiment, _fmt(q), _fmt(p), _fmt(n), _fmt(rho),
                          str(bc), _fmt(seed), _fmt(replicas), _fmt(value),
                          _fmt(std_error), blob])

    def write(self, path: Path):
        lines = [",".join(self.HEADER)]
        for row in self.rows:
            lines.append(",".join('"' + c.replace('"', '""') + '"'
                                  if ("," in c or '"' in c) else c
                                  for c in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _budget(cfg: RunConfig):
    from .experiments import SamplingBudget
    return SamplingBudget(replicas=cfg.replicas, samples=cfg.samples,
                          thin=cfg.thin, burn_in=cfg.burn_in)


def _out_dir(cfg: RunConfig) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_manifest(cfg: RunConfig, outputs: list[str], t0: float, path: Path):
    manifest = {
        "config": cfg.echo(),
        "version": __version__,
        "outputs": outputs,
        "wall_time_seconds": time.time() - t0,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def _bc_of(cfg: RunConfig) -> BoundaryCondition:
    return BoundaryCondition.wired() if cfg.bc == "wired" else BoundaryCondition.free()


def _cmd_oracle(cfg: RunConfig, w: ResultWriter) -> int:
    m = cfg.m if cfg.m is not None else int(round(cfg.rho * cfg.n))
    domain = build_box(cfg.n, m)
    params = ModelParams(cfg.p, cfg.q)
    dist = exact_distribution(domain, params, _bc_of(cfg))
    crossing = exact_event_probability(dist, vertical_crossing_event(domain))
    mean_open = exact_mean(dist, lambda c: c.n_open) / domain.n_edges
    extra = {"partition_function": dist.partition_function,
             "edges": domain.n_edges, "mean_open_fraction": mean_open}
    w.add("oracle_vertical_crossing", cfg.q, cfg.p, cfg.n, cfg.rho, cfg.bc,
          cfg.master_seed, 0, crossing, 0.0, extra)
    return 0


def _cmd_sweeny(cfg: RunConfig, w: ResultWriter, out_dir: Path,
                outputs: list[str]) -> int:
    from .dynamics import burn_in_sweeps, make_chain, run
    m = cfg.m if cfg.m is not None else int(round(cfg.rho * cfg.n))
    domain = build_box(cfg.n, m)
    params = ModelParams(cfg.p, cfg.q)
    chain = make_chain(domain, params, _bc_of(cfg), seed=cfg.master_seed)
    sweeps = cfg.sweeps if cfg.sweeps is not None else burn_in_sweeps(domain)
    acc = []
    run(chain, sweeps, thin=max(1, cfg.thin), collect=lambda c: acc.append(c))
    final = acc[-1] if acc else chain.cfg
    snap = out_dir / "sweeny_snapshot.csv"
    lines = ["edge,open"] + [f"{e},{int(final.open[e])}" for e in range(domain.n_edges)]
    snap.write_text("\n".join(lines) + "\n", encoding="utf-8")
    outputs.append(str(snap))
    w.add("sweeny_open_fraction", cfg.q, cfg.p, cfg.n, cfg.rho, cfg.bc,
          cfg.master_seed, 1, final.n_open / domain.n_edges, 0.0,
          {"sweeps": sweeps, "snapshot": snap.name})
    return 0


def _cmd_coupling(cfg: RunConfig, w: ResultWriter, out_dir: Path,
                  outputs: list[str]) -> int:
    from .coupling import CouplingChain, clouds
    from .dynamics import burn_in_sweeps
    m = cfg.m if cfg.m is not None else int(round(cfg.rho * cfg.n))
    domain = build_box(cfg.n, m)
    chain = CouplingChain(domain, cfg.q, seed=cfg.master_seed)
    sweeps = cfg.sweeps if cfg.sweeps is not None else burn_in_sweeps(domain)
    chain.run_steps(sweeps * domain.n_edges)
    dump = out_dir / "coupling_labels.csv"
    chain.state.dump_csv(dump)
    outputs.append(str(dump))
    cl = clouds(chain.state)
    multi = [c for c in cl if len(c.edges) > 1]
    w.add("coupling_multi_clouds", cfg.q, float("nan"), cfg.n, cfg.rho,
          "free", cfg.master_seed, 1, float(len(multi)), 0.0,
          {"sweeps": sweeps, "n_clouds": len(cl),
           "largest": max(len(c.edges) for c in cl), "labels": dump.name})
    return 0


def _cmd_observable(cfg: RunConfig, w: ResultWriter, out_dir: Path,
                    outputs: list[str]) -> int:
    from .observable import (bottom_arc_box, check_boundary_connection,
                             check_free_arc_relation,
                             check_massive_harmonicity, check_vertex_relation,
                             massive_walk_identity, observable_exact)
    m = cfg.m if cfg.m is not None else 1
    domain, bc = bottom_arc_box(cfg.n, m)
    params = ModelParams(cfg.p, 2.0)
    if cfg.q != 2.0:
        raise SystemExit("the observable is defined for q = 2 only")
    f = observable_exact(domain, bc, params)
    dump = out_dir / "observable.csv"
    lines = ["medial_edge,direction,re_f,im_f,abs_f"]
    for idx, direction, re, im, mod in f.dump_rows():
        lines.append(f"{idx},{direction},{_fmt(re)},{_fmt(im)},{_fmt(mod)}")
    dump.write_text("\n".join(lines) + "\n", encoding="utf-8")
    outputs.append(str(dump))

    dist = exact_distribution(domain, params, bc)
    checks = {
        "vertex_relation": check_vertex_relation(f),
        "free_arc_relation": check_free_arc_relation(f)[0],
        "boundary_connection": check_boundary_connection(f, dist),
        "massive_harmonicity": check_massive_harmonicity(f)[0],
        "walk_reconstruction": massive_walk_identity(f),
        "ray_classes": f.max_ray_residual(),
    }
    for name, residual in checks.items():
        w.add(f"observable_{name}", 2.0, cfg.p, cfg.n, float(m), str(bc),
              cfg.master_seed, 0, residual, 0.0, {})
    worst = max(checks.values())
    return 0 if (worst < 1e-8 or not cfg.strict) else 3


def _cmd_experiment(cfg: RunConfig, w: ResultWriter) -> int:
    from . import experiments as X
    budget = _budget(cfg)
    name = cfg.experiment
    ps = cfg.p_grid if cfg.p_grid else [cfg.p]
    ns = cfg.n_grid if cfg.n_grid else [cfg.n]
    rc = 0
    if name == "crossing":
        for p in ps:
            for n in ns:
                est = X.crossing_probability(n, cfg.rho, p, cfg.q, bc=cfg.bc,
                                             sampler=cfg.sampler, budget=budget,
                                             seed=cfg.master_seed)
                w.add("crossing", cfg.q, p, n, cfg.rho, cfg.bc,
                      cfg.master_seed, cfg.replicas, est.value, est.std_error, {})
    elif name == "correlation_length":
        grid = cfg.n_grid if cfg.n_grid else [4, 8, 16, 32]
        for p in ps:
            res = X.correlation_length(cfg.epsilon, cfg.rho, p, cfg.q,
                                       bc=cfg.bc, n_grid=grid, budget=budget,
                                       seed=cfg.master_seed)
            extra = {"epsilon": cfg.epsilon, "censored": res.censored,
                     "table": [[n, e.value, e.std_error] for n, e in res.table]}
            w.add("correlation_length", cfg.q, p, res.length or -1, cfg.rho,
                  cfg.bc, cfg.master_seed, cfg.replicas,
                  float(res.length if res.length else float("nan")),
                  0.0, extra)
            if res.censored and cfg.strict:
                rc = 2
    elif name == "one_arm":
        for n in ns:
            est = X.one_arm_probability(n, cfg.p, cfg.q, bc=cfg.bc,
                                        budget=budget, seed=cfg.master_seed)
            w.add("one_arm", cfg.q, cfg.p, n, 1.0, cfg.bc, cfg.master_seed,
                  cfg.replicas, est.value, est.std_error, {})
    elif name == "four_arm":
        for n in ns:
            est = X.four_arm_probability(n, cfg.p, cfg.q, bc=cfg.bc,
                                         budget=budget, seed=cfg.master_seed)
            w.add("four_arm", cfg.q, cfg.p, n, 1.0, cfg.bc, cfg.master_seed,
                  cfg.replicas, est.value, est.std_error, {"scale": n})
    elif name == "pivotal":
        for n in ns:
            est = X.pivotal_count(n, cfg.p, cfg.q, bc=cfg.bc, budget=budget,
                                  seed=cfg.master_seed)
            w.add("pivotal", cfg.q, cfg.p, n, 1.0, cfg.bc, cfg.master_seed,
                  cfg.replicas, est.value, est.std_error, {})
    elif name == "edge_intensity":
        for p in ps:
            for n in ns:
                est = X.edge_intensity(p, cfg.q, n, bc=cfg.bc, budget=budget,
                                       seed=cfg.master_seed, torus=cfg.torus)
                w.add("edge_intensity", cfg.q, p, n, 1.0,
                      "torus" if cfg.torus else cfg.bc, cfg.master_seed,
                      cfg.replicas, est.value, est.std_error, {})
    elif name == "edge_intensity_derivative":
        for n in ns:
            out = X.edge_intensity_derivative(cfg.p, cfg.q, n, bc=cfg.bc,
                                              dp=cfg.dp, budget=budget,
                                              seed=cfg.master_seed,
                                              torus=cfg.torus)
            for key in ("finite_difference", "fluctuation", "variance_proxy"):
                est = out[key]
                w.add(f"ei_derivative_{key}", cfg.q, cfg.p, n, 1.0,
                      "torus" if cfg.torus else cfg.bc, cfg.master_seed,
                      cfg.replicas, est.value, est.std_error, {"dp": cfg.dp})
    elif name == "influence":
        for n in ns:
            est = X.influence(cfg.p, cfg.q, n, bc=cfg.bc, budget=budget,
                              seed=cfg.master_seed)
            w.add("influence", cfg.q, cfg.p, n, 1.0, cfg.bc, cfg.master_seed,
                  cfg.replicas, est.value, est.std_error,
                  {"edge": est.params.get("edge")})
    elif name == "clouds":
        for n in ns:
            summary = X.cloud_statistics(n, cfg.q, sweeps=cfg.sweeps,
                                         budget=budget, seed=cfg.master_seed)
            w.add("clouds_multi_fraction", cfg.q, float("nan"), n, 1.0,
                  "free", cfg.master_seed, cfg.replicas,
                  summary["multi_cloud_fraction"],
                  summary["multi_cloud_fraction_se"],
                  {k: summary[k] for k in ("size_histogram", "level_histogram",
                                           "max_cloud_size",
                                           "max_cloud_diameter_halved")})
    elif name == "kesten":
        grid = cfg.p_grid if cfg.p_grid else [0.53, 0.55, 0.58]
        table = X.kesten_relation_check(cfg.epsilon, grid, q=cfg.q,
                                        budget=budget, seed=cfg.master_seed,
                                        n_grid=cfg.n_grid or (4, 8, 16, 32, 64))
        for row in table["rows"]:
            w.add("kesten_product", cfg.q, row["p"], row["L"] or -1, 1.0,
                  cfg.bc, cfg.master_seed, cfg.replicas,
                  row["product"] if row["product"] else float("nan"),
                  0.0, {"alpha4": row.get("alpha4"),
                        "censored": row["censored"]})
        w.add("kesten_spread", cfg.q, float("nan"), -1, 1.0, cfg.bc,
              cfg.master_seed, cfg.replicas, table["spread"], 0.0,
              {"epsilon": cfg.epsilon})
        if cfg.strict and any(r["censored"] for r in table["rows"]):
            rc = 2
    return rc


def run_selftest(verbose: bool = True) -> int:
    """Fast invariant suite: exact identities at full precision, stochastic
    checks at smoke tolerances.  Returns 0 when everything passes."""
    from .selftest import run_all
    return run_all(verbose=verbose)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="randomcluster",
        description="Two-dimensional random-cluster models near criticality")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", type=str, default=None,
                        help="JSON config file; flags override its entries")
        sp.add_argument("--q", type=float, default=None)
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--p-grid", dest="p_grid", type=float, nargs="*",
                        default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--n-grid", dest="n_grid", type=int, nargs="*",
                        default=None)
        sp.add_argument("--m", type=int, default=None)
        sp.add_argument("--rho", type=float, default=None)
        sp.add_argument("--bc", choices=("free", "wired"), default=None)
        sp.add_argument("--torus", action="store_const", const=True,
                        default=None)
        sp.add_argument("--sampler", choices=("sweeny", "coupling"),
                        default=None)
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--sweeps", type=int, default=None)
        sp.add_argument("--burn-in", dest="burn_in", type=int, default=None)
        sp.add_argument("--thin", type=int, default=None)
        sp.add_argument("--epsilon", type=float, default=None)
        sp.add_argument("--dp", type=float, default=None)
        sp.add_argument("--master-seed", dest="master_seed", type=int,
                        default=None)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--strict", action="store_const", const=True,
                        default=None)

    for name in ("oracle", "sweeny", "coupling", "observable", "selftest"):
        common(sub.add_parser(name))
    spx = sub.add_parser("experiment")
    spx.add_argument("experiment", choices=_EXPERIMENTS)
    common(spx)
    return ap


def parse(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = RunConfig.from_sources(args)
    return cfg


def dispatch(cfg: RunConfig) -> int:
    t0 = time.time()
    print("config:", json.dumps(cfg.echo(), sort_keys=True, default=_fmt))
    if cfg.subcommand == "selftest":
        return run_selftest()
    out_dir = _out_dir(cfg)
    writer = ResultWriter()
    outputs: list[str] = []
    if cfg.subcommand == "oracle":
        rc = _cmd_oracle(cfg, writer)
    elif cfg.subcommand == "sweeny":
        rc = _cmd_sweeny(cfg, writer, out_dir, outputs)
    elif cfg.subcommand == "coupling":
        rc = _cmd_coupling(cfg, writer, out_dir, outputs)
    elif cfg.subcommand == "observable":
        rc = _cmd_observable(cfg, writer, out_dir, outputs)
    elif cfg.subcommand == "experiment":
        rc = _cmd_experiment(cfg, writer)
    else:
        raise SystemExit(f"unknown subcommand {cfg.subcommand!r}")
    csv_path = out_dir / f"{cfg.subcommand}_results.csv"
    writer.write(csv_path)
    outputs.append(str(csv_path))
    _write_manifest(cfg, outputs, t0, out_dir / f"{cfg.subcommand}_manifest.json")
    for row in writer.rows:
        print(" ".join(row[:1] + row[8:10]))
    return rc


def main(argv=None) -> int:
    cfg = parse(argv)
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
