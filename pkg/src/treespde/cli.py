"""Command-line entry point: ``treespde <subcommand> [--config FILE] [overrides]``.

Exit codes: 0 ok, 1 invalid input, 2 verification failure, 3 divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, dump_json, load_config, resolve_edges
from .engine import run_trajectories
from .experiments import (
    CATALOG, ergodicity_curves, ergodicity_initial_values, feller_sweep, reachability,
)
from .graph import GraphError, MetricTree, preset
from .nulldec import certify_sharpness, decide_strong_feller, decompose, noise_free_bound, tree_kernel
from .spectral import build_basis

log = logging.getLogger("treespde")

EXIT_OK, EXIT_INVALID, EXIT_VERIFY, EXIT_DIVERGED = 0, 1, 2, 3
DIVERGENCE_LIMIT = 0.01
COMMANDS = ("analyze", "spectrum", "simulate", "feller", "irreducibility", "ergodicity", "verify")
MANIFEST_VERSION = 1


@dataclass
class Outcome:
    status: int = EXIT_OK
    artifacts: list[str] = field(default_factory=list)
    diverged: int = 0
    total: int = 0
    notes: list[str] = field(default_factory=list)


def _fmt(x) -> str:
    """Shortest round-tripping decimal, so CSVs are full precision and byte-stable."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _edge_names(tree: MetricTree, edges) -> list[str]:
    return [tree.edge_label(j) for j in sorted(edges)]


def _vertices(vs) -> list[int]:
    return sorted(v + 1 for v in vs)


def _catalog(tree: MetricTree) -> list[list[int]] | None:
    entry = CATALOG.get(tree.name)
    return entry["noise_free"] if entry else None


# ---------------------------------------------------------------- subcommands

def cmd_analyze(cfg: RunConfig, out: Path) -> Outcome:
    tree = cfg.tree()
    dec = decompose(tree)
    bound, mbound = noise_free_bound(tree)
    kb = tree_kernel(tree)
    verdicts = []
    for nc in cfg.noise_configs(tree, _catalog(tree)):
        v = decide_strong_feller(tree, nc)
        verdicts.append({
            "noise_free_edges": _edge_names(tree, nc.noise_free),
            "strong_feller": v.is_strong_feller,
            "irreducible": v.is_irreducible,
            "witness": [str(x) for x in v.witness] if v.witness is not None else None,
            "assumption_status": v.assumption_status,
            "reason": v.reason,
        })
    report = {
        "graph": tree.name,
        "n": tree.n,
        "m": tree.m,
        "edges": [[u + 1, v + 1] for u, v in tree.edges],
        "kernel_basis": [[str(x) for x in v] for v in kb.vectors],
        "supp": _vertices(dec.supp),
        "core": _vertices(dec.core),
        "s_trees": [_vertices(s) for s in dec.s_trees],
        "n_trees": [_vertices(s) for s in dec.n_trees],
        "s_atoms": [[_vertices(a) for a in atoms] for atoms in dec.s_atoms],
        "conn_edges": _edge_names(tree, dec.conn_edges),
        "bond_edges": [_edge_names(tree, b) for b in dec.bond_edges],
        "bound": bound,
        "matching_bound": mbound,
        "verdicts": verdicts,
    }
    if tree.m <= 20:
        cert = certify_sharpness(tree)
        report["sharpness"] = {
            "max_noise_free": cert.max_noise_free,
            "subsets_checked": cert.subsets_checked,
            "admissible_maximal": [_edge_names(tree, Z) for Z in cert.admissible_maximal],
        }
    (out / "analysis.json").write_text(dump_json(report), encoding="utf-8")
    return Outcome(artifacts=["analysis.json"])


def cmd_spectrum(cfg: RunConfig, out: Path, samples: int = 0) -> Outcome:
    tree = cfg.tree()
    basis = build_basis(tree, cfg.N)
    write_csv(out / "spectrum.csv", ["mode_index", "eigenvalue", "family", "generator"],
              [(k, md.eigenvalue, md.family, md.generator) for k, md in enumerate(basis.modes)])
    write_csv(out / "coefficients.csv", ["mode_index", "edge", "omega", "cos_coef", "sin_coef"],
              [(k, tree.edge_label(j), md.omega, md.a[j], md.b[j])
               for k, md in enumerate(basis.modes) for j in range(tree.m)])
    arts = ["spectrum.csv", "coefficients.csv"]
    if samples:
        x = np.linspace(0.0, 1.0, samples)
        write_csv(out / "mode_samples.csv", ["mode_index", "edge", "x", "value"],
                  [(k, tree.edge_label(j), xi, md.evaluate(j, xi))
                   for k, md in enumerate(basis.modes) for j in range(tree.m) for xi in x])
        arts.append("mode_samples.csv")
    return Outcome(artifacts=arts)


def _single_config(cfg: RunConfig, tree: MetricTree):
    configs = cfg.noise_configs(tree)
    if len(configs) != 1:
        raise ConfigError("simulate takes a single noise configuration (noise_free_edges)")
    return configs[0]


def cmd_simulate(cfg: RunConfig, out: Path, fields: int = 0) -> Outcome:
    tree = cfg.tree()
    basis = build_basis(tree, cfg.N)
    nc = _single_config(cfg, tree)
    x0 = ergodicity_initial_values(basis, cfg.seed)[cfg.initial]
    batch = run_trajectories(basis, nc, cfg.drift_preset(), x0, cfg.tau, cfg.T, 1, cfg.seed,
                             scheme=cfg.scheme, quad=cfg.quad, keep_path=True)
    path = batch.path[:, 0]
    write_csv(out / "trajectory.csv", ["step", "time"] + [f"c_{k + 1}" for k in range(basis.N)],
              [(n, t, *path[n]) for n, t in enumerate(batch.times)])
    arts = ["trajectory.csv"]
    if fields:
        x = np.linspace(0.0, 1.0, fields)
        vals = basis.values_at(x)  # (N, m, P)
        field_vals = np.einsum("sk,kmp->smp", path, vals)
        write_csv(out / "fields.csv", ["step", "time", "edge", "x", "value"],
                  [(n, t, tree.edge_label(j), xi, field_vals[n, j, p])
                   for n, t in enumerate(batch.times) for j in range(tree.m) for p, xi in enumerate(x)])
        arts.append("fields.csv")
    return Outcome(artifacts=arts, diverged=int(batch.diverged.sum()), total=1)


def cmd_feller(cfg: RunConfig, out: Path, plot: bool = False) -> Outcome:
    tree = cfg.tree()
    basis = build_basis(tree, cfg.N)
    drift = cfg.drift_preset()
    rows, series, res = [], [], Outcome()
    for nc in cfg.noise_configs(tree, _catalog(tree)):
        sw = feller_sweep(tree, nc, drift, basis, family=cfg.family, epsilons=cfg.epsilon, tau=cfg.tau,
                          T=cfg.T, M=cfg.M_traj, seed=cfg.seed, quad=cfg.quad, scheme=cfg.scheme)
        res.diverged = max(res.diverged, sw.diverged)
        res.total = cfg.M_traj
        rows += [(e, v, s, sw.noisy_label) for e, v, s in zip(sw.epsilons, sw.estimates, sw.stderrs)]
        series.append((sw.noisy_label, sw.epsilons, sw.estimates))
    write_csv(out / "feller.csv", ["epsilon", "estimate", "stderr", "noisy_edges"], rows)
    res.artifacts.append("feller.csv")
    if plot:
        _plot(out / "feller.svg", series, "epsilon", "estimate", logx=True, prefix="noisy: ")
        res.artifacts.append("feller.svg")
    return res


def cmd_irreducibility(cfg: RunConfig, out: Path, plot: bool = False) -> Outcome:
    tree = cfg.tree()
    basis = build_basis(tree, cfg.N)
    drift = cfg.drift_preset()
    rows, res = [], Outcome()
    for nc in cfg.noise_configs(tree, _catalog(tree)):
        fams = [cfg.family] if cfg.family is not None else None
        rep = reachability(tree, nc, drift, basis, delta=cfg.delta, tau=cfg.tau, T=cfg.T, M=cfg.M_traj,
                           seed=cfg.seed, quad=cfg.quad, scheme=cfg.scheme, families=fams)
        res.diverged = max(res.diverged, rep.diverged)
        res.total = cfg.M_traj
        rows += [(f, l, p, rep.noisy_label) for f, l, p in rep.entries]
    write_csv(out / "reachability.csv", ["family", "mode", "probability", "noisy_edges"], rows)
    res.artifacts.append("reachability.csv")
    if plot:
        series = {}
        for f, l, p, lab in rows:
            series.setdefault((lab, f), ([], []))
            series[(lab, f)][0].append(l)
            series[(lab, f)][1].append(p)
        _plot(out / "reachability.svg", [(f"noisy: {lab}, family {f}", x, y) for (lab, f), (x, y) in series.items()],
              "mode", "probability")
        res.artifacts.append("reachability.svg")
    return res


def cmd_ergodicity(cfg: RunConfig, out: Path, plot: bool = False) -> Outcome:
    tree = cfg.tree()
    basis = build_basis(tree, cfg.N)
    drift = cfg.drift_preset()
    nc = _single_config(cfg, tree)
    cur = ergodicity_curves(tree, nc, drift, basis, tau=cfg.tau, T=cfg.T, M=cfg.M_traj, seed=cfg.seed,
                            stride=cfg.stride, quad=cfg.quad, scheme=cfg.scheme)
    rows = [(t, lab, cur.averages[i, n], cur.stderrs[i, n])
            for n, t in enumerate(cur.times) for i, lab in enumerate(cur.labels)]
    write_csv(out / "ergodicity.csv", ["time", "init_label", "average", "stderr"], rows)
    res = Outcome(artifacts=["ergodicity.csv"], diverged=cur.diverged, total=3 * cfg.M_traj, notes=cur.warnings)
    if plot:
        _plot(out / "ergodicity.svg", [(lab, cur.times, cur.averages[i]) for i, lab in enumerate(cur.labels)],
              "time", "average of sin(|X|)")
        res.artifacts.append("ergodicity.svg")
    return res


def cmd_verify(cfg: RunConfig, out: Path, full: bool = False) -> Outcome:
    from .verify import run_suite

    checks = run_suite(quick=not full)
    lines = [c.line() for c in checks]
    (out / "verify.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        print(line)
    ok = all(c.ok for c in checks)
    return Outcome(status=EXIT_OK if ok else EXIT_VERIFY, artifacts=["verify.txt"])


def _plot(path: Path, series, xlabel: str, ylabel: str, logx: bool = False, prefix: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "treespde"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, x, y in series:
        ax.plot(x, y, marker="o", ms=3, label=f"{prefix}{label}")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------- driver

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treespde", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="YAML run configuration or an emitted manifest.json")
    p.add_argument("--graph", help="preset (chain:<m>, star:<m>, example-3.6, t-prime) or edge-list file")
    p.add_argument("--noise-free", help="comma-separated edge ids or u-v pairs, e.g. 6-7,6-8; empty for none")
    p.add_argument("--seed", type=int)
    p.add_argument("--M", type=int, dest="M_traj", help="trajectory count")
    p.add_argument("--N", type=int, help="basis size")
    p.add_argument("--out", help="output directory")
    p.add_argument("--plot", action="store_true", help="also write an SVG plot")
    p.add_argument("--samples", type=int, default=0, help="spectrum: sampled points per edge")
    p.add_argument("--fields", type=int, default=0, help="simulate: sampled field points per edge")
    p.add_argument("--full", action="store_true", help="verify: run the full-size property suite")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.graph:
        cfg.graph = args.graph
        cfg.base_dir = None
    if args.noise_free is not None:
        items = [s.strip() for s in args.noise_free.split(",") if s.strip()]
        cfg.noise_free_edges = [int(s) if s.isdigit() else s for s in items]
        cfg.noise_free_sets = None
    for key in ("seed", "M_traj", "N"):
        val = getattr(args, key)
        if val is not None:
            if val < 0 or (key != "seed" and val == 0):
                raise ConfigError(f"--{key}: must be positive")
            setattr(cfg, key, val)
    if args.out:
        cfg.output_dir = args.out
    tree = cfg.tree()
    for s in ([cfg.noise_free_edges] if cfg.noise_free_edges is not None else []) + (cfg.noise_free_sets or []):
        resolve_edges(tree, s)
    return cfg


def _portable(cfg: RunConfig) -> dict:
    d = cfg.to_dict()
    try:
        preset(cfg.graph)
    except GraphError:
        base = Path(cfg.base_dir) if cfg.base_dir else Path.cwd()
        p = Path(cfg.graph)
        d["graph"] = str(p if p.is_absolute() else (base / p).resolve())
    return d


def run(command: str, cfg: RunConfig, *, plot: bool = False, samples: int = 0, fields: int = 0,
        full: bool = False) -> int:
    cfg = cfg.resolved(command)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if command == "analyze":
        res = cmd_analyze(cfg, out)
    elif command == "spectrum":
        res = cmd_spectrum(cfg, out, samples)
    elif command == "simulate":
        res = cmd_simulate(cfg, out, fields)
    elif command == "feller":
        res = cmd_feller(cfg, out, plot)
    elif command == "irreducibility":
        res = cmd_irreducibility(cfg, out, plot)
    elif command == "ergodicity":
        res = cmd_ergodicity(cfg, out, plot)
    else:
        res = cmd_verify(cfg, out, full)
    for note in res.notes:
        log.warning(note)
    if res.total and res.diverged / res.total > DIVERGENCE_LIMIT:
        log.error("%d of %d trajectories diverged (limit %.0f%%)", res.diverged, res.total, 100 * DIVERGENCE_LIMIT)
        res.status = EXIT_DIVERGED
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "config": _portable(cfg),
        "seed": cfg.seed,
        "artifacts": res.artifacts,
        "diverged_trajectories": res.diverged,
        "exit_status": res.status,
        "versions": {
            "treespde": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
        },
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    (out / "manifest.json").write_text(dump_json(manifest), encoding="utf-8")
    return res.status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.config:
            cfg, recorded = load_config(args.config)
            if recorded and recorded != args.command:
                log.warning("manifest was recorded for %r, running %r", recorded, args.command)
        else:
            cfg = RunConfig()
        cfg = _apply_overrides(cfg, args)
        return run(args.command, cfg, plot=args.plot, samples=args.samples, fields=args.fields, full=args.full)
    except (ConfigError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
