"""Run configuration: YAML parsing with line-aware errors and per-experiment defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .engine import DRIFT_TAGS, SCHEMES, DriftPreset
from .graph import GraphError, MetricTree, NoiseConfig, load_graph


class ConfigError(ValueError):
    pass


# Numeric defaults per experiment kind: (N, tau, T, M_traj, drift)
DEFAULTS = {
    "feller": (64, 2.0**-5, 0.5, 500, "masked_sine"),
    "ergodicity": (32, 2.0**-3, 30.0, 1000, "scaled_dissipative"),
}
KIND = {"ergodicity": "ergodicity"}  # everything else uses the Feller settings

KEYS = {
    "graph", "noise_free_edges", "noise_free_sets", "drift", "N", "tau", "T", "M_traj", "seed",
    "epsilon", "delta", "quad", "family", "scheme", "output_dir", "initial", "stride",
}
DRIFT_KEYS = {"tag", "c"}
INITIAL = ("X0_1", "X0_2", "X0_3")


@dataclass
class RunConfig:
    graph: str = "chain:4"
    noise_free_edges: list | None = None  # int ids (1-based) or "u-v" strings
    noise_free_sets: list | None = None
    drift: dict | None = None
    N: int | None = None
    tau: float | None = None
    T: float | None = None
    M_traj: int | None = None
    seed: int = 0
    epsilon: list | None = None
    delta: float = 1e-6
    quad: int = 128
    family: int | None = None
    scheme: str = "phi1"
    output_dir: str = "out"
    initial: str = "X0_1"
    stride: int = 1
    base_dir: str | None = field(default=None, repr=False, compare=False)

    def resolved(self, command: str) -> "RunConfig":
        """Copy with every experiment-dependent default filled in."""
        N, tau, T, M, drift = DEFAULTS[KIND.get(command, "feller")]
        out = replace(
            self,
            N=self.N if self.N is not None else N,
            tau=self.tau if self.tau is not None else tau,
            T=self.T if self.T is not None else T,
            M_traj=self.M_traj if self.M_traj is not None else M,
            drift=dict(self.drift) if self.drift is not None else {"tag": drift},
        )
        if out.drift["tag"] == "scaled_dissipative":
            out.drift.setdefault("c", 2.0)
        if out.epsilon is None:
            out.epsilon = [10.0 ** (-4.0 * k / 7.0) for k in range(8)]
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    # -------------------------------------------------------- derived objects

    def tree(self) -> MetricTree:
        try:
            return load_graph(self.graph, Path(self.base_dir) if self.base_dir else None)
        except (GraphError, OSError) as exc:
            raise ConfigError(f"graph: {exc}") from exc

    def drift_preset(self) -> DriftPreset:
        d = self.drift or {"tag": "zero"}
        try:
            return DriftPreset(d["tag"], float(d.get("c", 2.0)))
        except ValueError as exc:
            raise ConfigError(f"drift: {exc}") from exc

    def noise_configs(self, tree: MetricTree, catalog: list[list[int]] | None = None) -> list[NoiseConfig]:
        """Explicit sets win; else the single ``noise_free_edges``; else the catalog; else all noisy."""
        if self.noise_free_sets is not None:
            sets = self.noise_free_sets
        elif self.noise_free_edges is not None:
            sets = [self.noise_free_edges]
        elif catalog is not None:
            sets = catalog
        else:
            sets = [[]]
        return [NoiseConfig.from_noise_free(tree, resolve_edges(tree, s)) for s in sets]


def resolve_edges(tree: MetricTree, ids: list) -> list[int]:
    """Map 1-based edge ids or ``"u-v"`` vertex pairs to 0-based edge indices."""
    out = []
    for e in ids:
        if isinstance(e, bool):
            raise ConfigError(f"invalid edge id {e!r}")
        if isinstance(e, int):
            if not 1 <= e <= tree.m:
                raise ConfigError(f"edge {e} does not exist; {tree.name} has edges 1..{tree.m}")
            out.append(e - 1)
        elif isinstance(e, str) and "-" in e:
            u, v = e.split("-", 1)
            try:
                out.append(tree.edge_index(int(u), int(v)))
            except (ValueError, GraphError) as exc:
                raise ConfigError(f"edge {e!r}: {exc}") from exc
        else:
            raise ConfigError(f"invalid edge id {e!r}")
    if len(set(out)) != len(out):
        raise ConfigError(f"duplicate edges in {ids!r}")
    return out


# ---------------------------------------------------------------- parsing

def _line_index(node, prefix: str = "", out: dict | None = None) -> dict[str, int]:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _line_index(v, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = v.start_mark.line + 1
            _line_index(v, path, out)
    return out


def _err(lines: dict[str, int], path: str, msg: str) -> ConfigError:
    line = lines.get(path)
    where = f" (line {line})" if line else ""
    return ConfigError(f"{path}: {msg}{where}")


def _positive(lines, key, value, kind):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _err(lines, key, f"expected a positive {kind.__name__}, got {value!r}")
    if kind is int and not float(value).is_integer():
        raise _err(lines, key, f"expected an integer, got {value!r}")
    if not value > 0:
        raise _err(lines, key, f"must be strictly positive, got {value!r}")
    return kind(value)


def parse_config(text: str, base_dir: str | None = None) -> tuple[RunConfig, str | None]:
    """Parse a YAML run configuration, or an emitted manifest (JSON is valid YAML).

    Returns the config and, for manifests, the recorded subcommand.
    """
    try:
        node = yaml.compose(text)
        try:
            # YAML 1.1 reads JSON exponents such as 1e-06 as strings
            data = json.loads(text)
        except ValueError:
            data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    lines = _line_index(node) if node is not None else {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of keys to values")
    command = None
    if "manifest_version" in data:
        command = data.get("command")
        data = data.get("config") or {}
        lines = {k[len("config."):]: v for k, v in lines.items() if k.startswith("config.")}
    unknown = sorted(set(data) - KEYS)
    if unknown:
        raise _err(lines, unknown[0], f"unknown key; expected one of {', '.join(sorted(KEYS))}")
    cfg = RunConfig(base_dir=base_dir)
    for key in ("N", "M_traj", "quad", "stride"):
        if data.get(key) is not None:
            setattr(cfg, key, _positive(lines, key, data[key], int))
    for key in ("tau", "T", "delta"):
        if data.get(key) is not None:
            setattr(cfg, key, _positive(lines, key, data[key], float))
    if "quad" in data and cfg.quad < 2:
        raise _err(lines, "quad", "needs at least 2 nodes")
    if "seed" in data:
        s = data["seed"]
        if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
            raise _err(lines, "seed", f"expected an integer in [0, 2^64), got {s!r}")
        cfg.seed = s
    if "graph" in data:
        if not isinstance(data["graph"], str):
            raise _err(lines, "graph", "expected a preset name or edge-list path")
        cfg.graph = data["graph"]
    for key in ("scheme", "initial", "output_dir"):
        if key in data:
            if not isinstance(data[key], str):
                raise _err(lines, key, "expected a string")
            setattr(cfg, key, data[key])
    if cfg.scheme not in SCHEMES:
        raise _err(lines, "scheme", f"expected one of {', '.join(SCHEMES)}")
    if cfg.initial not in INITIAL:
        raise _err(lines, "initial", f"expected one of {', '.join(INITIAL)}")
    if data.get("family") is not None:
        f = data["family"]
        if isinstance(f, bool) or not isinstance(f, int) or f < 0:
            raise _err(lines, "family", "expected a non-negative integer (0 = sigma_1 modes)")
        cfg.family = f
    if data.get("epsilon") is not None:
        eps = data["epsilon"]
        if not isinstance(eps, list) or not eps:
            raise _err(lines, "epsilon", "expected a nonempty list")
        cfg.epsilon = [_positive(lines, f"epsilon[{i}]", e, float) for i, e in enumerate(eps)]
    if data.get("drift") is not None:
        cfg.drift = _parse_drift(lines, data["drift"])

    tree = None
    try:
        tree = cfg.tree()
    except ConfigError as exc:
        raise _err(lines, "graph", str(exc).removeprefix("graph: ")) from exc
    if data.get("noise_free_edges") is not None:
        cfg.noise_free_edges = _parse_edges(lines, "noise_free_edges", data["noise_free_edges"], tree)
    if data.get("noise_free_sets") is not None:
        sets = data["noise_free_sets"]
        if not isinstance(sets, list):
            raise _err(lines, "noise_free_sets", "expected a list of edge lists")
        cfg.noise_free_sets = [_parse_edges(lines, f"noise_free_sets[{i}]", s, tree) for i, s in enumerate(sets)]
    return cfg, command


def _parse_drift(lines, d) -> dict:
    if isinstance(d, str):
        d = {"tag": d}
    if not isinstance(d, dict):
        raise _err(lines, "drift", "expected a tag or a mapping with 'tag'")
    unknown = sorted(set(d) - DRIFT_KEYS)
    if unknown:
        raise _err(lines, f"drift.{unknown[0]}", "unknown key; expected 'tag' or 'c'")
    if d.get("tag") not in DRIFT_TAGS:
        raise _err(lines, "drift.tag" if "drift.tag" in lines else "drift",
                   f"expected one of {', '.join(DRIFT_TAGS)}, got {d.get('tag')!r}")
    out = {"tag": d["tag"]}
    if "c" in d:
        out["c"] = _positive(lines, "drift.c", d["c"], float)
    return out


def _parse_edges(lines, path, value, tree) -> list:
    if not isinstance(value, list):
        raise _err(lines, path, "expected a list of edge ids")
    for i, e in enumerate(value):
        try:
            resolve_edges(tree, [e])
        except ConfigError as exc:
            raise _err(lines, f"{path}[{i}]", str(exc)) from exc
    try:
        resolve_edges(tree, value)
    except ConfigError as exc:
        raise _err(lines, path, str(exc)) from exc
    return list(value)


def load_config(path: str | Path) -> tuple[RunConfig, str | None]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    return parse_config(text, base_dir=str(p.parent.resolve()))


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
