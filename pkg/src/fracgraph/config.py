"""YAML run configurations: schema, validation and construction of solver inputs.

Schema (``k`` in expressions is the 1-based edge number)::

    edges:                      # at least two
      - length: 1.0
        nodes: 64               # cells per edge, N >= 3
        gamma: "1 + 0.5*sin(pi*x)"      # expression in x, k, or {x: [...], values: [...]}
    alpha: 0.5                  # 0 < alpha < 1
    beta: 0.75                  # 1/2 < beta < 1
    T: 1.0
    time_steps: 128             # M >= 2
    sources:
      h: "0"                    # expression in x, t, k
      g: "1"                    # expression in x, t, k
    eta:
      b: 1.0
      phi: "-1 + 0.3*cos(2*pi*x)"       # expression in x, k
    psi: "t^2"                  # expression in t, or {t: [...], values: [...]}; optional
    manufactured:               # optional; replaces psi by synthetic data
      f_true: "1 + t^2"
      refinement: 2
    options:
      tol: 1.0e-8
      max_iter: 200
      levels: [[16, 32], [32, 64], [64, 128]]
      seed: 0
      snapshots: 5
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Union

import numpy as np
import yaml

from .expr import Expression, ExpressionError

__all__ = [
    "ConfigError",
    "Table",
    "EdgeConfig",
    "SourcesConfig",
    "EtaConfig",
    "ManufacturedConfig",
    "Options",
    "Config",
    "parse_config",
    "load_config",
    "serialize_config",
]


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field, e.g. ``edges[1].length``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class Table:
    """Tabulated function, linearly interpolated (constant beyond the ends)."""

    abscissa: tuple[float, ...]
    values: tuple[float, ...]

    def __call__(self, s: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(s, dtype=float), self.abscissa, self.values)


FunctionInput = Union[Expression, Table]


@dataclass(frozen=True)
class EdgeConfig:
    length: float
    nodes: int
    gamma: FunctionInput


@dataclass(frozen=True)
class SourcesConfig:
    h: Expression = Expression("0")
    g: Expression = Expression("1")


@dataclass(frozen=True)
class EtaConfig:
    b: float
    phi: Expression


@dataclass(frozen=True)
class ManufacturedConfig:
    f_true: Expression
    refinement: int = 2


@dataclass(frozen=True)
class Options:
    tol: float = 1e-8
    max_iter: int = 200
    levels: tuple[tuple[int, int], ...] = ((16, 32), (32, 64), (64, 128))
    seed: int = 0
    snapshots: int = 5


@dataclass(frozen=True)
class Config:
    edges: tuple[EdgeConfig, ...]
    alpha: float
    beta: float
    T: float
    time_steps: int
    sources: SourcesConfig = field(default_factory=SourcesConfig)
    eta: EtaConfig | None = None
    psi: FunctionInput | None = None
    manufactured: ManufacturedConfig | None = None
    options: Options = field(default_factory=Options)

    def with_options(self, **changes) -> "Config":
        return replace(self, options=replace(self.options, **changes))

    # -- construction of solver inputs ------------------------------------

    def graph(self):
        from .graph import StarGraph

        return StarGraph.uniform([e.length for e in self.edges], [e.nodes for e in self.edges])

    def gamma_fn(self) -> Callable[[np.ndarray, int], np.ndarray]:
        inputs = [e.gamma for e in self.edges]

        def gamma(x, k):
            item = inputs[k]
            if isinstance(item, Table):
                return item(x)
            return item.evaluate(x, x=x, k=k + 1)

        return gamma

    def coefficients(self, graph=None):
        from .graph import Coefficients

        return Coefficients.from_function(self.graph() if graph is None else graph, self.gamma_fn())

    def time_grid(self):
        from .fracops import UniformGrid

        return UniformGrid(self.T, self.time_steps)

    def space_time(self, expr: Expression) -> Callable[[np.ndarray, float, int], np.ndarray]:
        def fn(x, t, k):
            return expr.evaluate(x, x=x, t=t, k=k + 1)
        return fn

    def direct_problem(self):
        from .direct import DirectProblem

        return DirectProblem(self.coefficients(), self.alpha, self.beta, self.time_grid(),
                             self.space_time(self.sources.h))

    def eta_representation(self, graph=None):
        from .graph import GraphSeries
        from .spatial import SingularRepresentation

        if self.eta is None:
            raise ConfigError("eta", "the inverse problem needs an eta section")
        graph = self.graph() if graph is None else graph
        phi = self.eta.phi
        return SingularRepresentation(
            self.beta, self.eta.b, GraphSeries.sample(graph, lambda x, k: phi.evaluate(x, x=x, k=k + 1))
        )

    def psi_values(self) -> np.ndarray:
        if self.psi is None:
            raise ConfigError("psi", "psi is required unless a manufactured section is given")
        t = self.time_grid().nodes
        if isinstance(self.psi, Table):
            return self.psi(t)
        return self.psi.evaluate(t, t=t)


# ---------------------------------------------------------------------------
# parsing


def _number(raw: Any, path: str) -> float:
    if isinstance(raw, bool):
        raise ConfigError(path, f"expected a number, got {raw!r}")
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(path, f"must be finite, got {raw!r}")
    return value


def _integer(raw: Any, path: str) -> int:
    if isinstance(raw, bool):
        raise ConfigError(path, f"expected an integer, got {raw!r}")
    if isinstance(raw, int):
        return raw
    value = _number(raw, path)
    if value != int(value):
        raise ConfigError(path, f"expected an integer, got {raw!r}")
    return int(value)


def _expression(raw: Any, path: str, allowed: set[str]) -> Expression:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raw = repr(float(raw))
    if not isinstance(raw, str):
        raise ConfigError(path, f"expected an expression string, got {raw!r}")
    try:
        return Expression(raw).require(allowed, path)
    except ExpressionError as exc:
        raise ConfigError(path, str(exc)) from None


def _table(raw: dict, path: str, key: str) -> Table:
    _no_extra(raw, {key, "values"}, path)
    for name in (key, "values"):
        if name not in raw:
            raise ConfigError(f"{path}.{name}", "missing")
        if not isinstance(raw[name], list) or len(raw[name]) < 2:
            raise ConfigError(f"{path}.{name}", "expected a list with at least two entries")
    xs = tuple(_number(v, f"{path}.{key}[{i}]") for i, v in enumerate(raw[key]))
    vs = tuple(_number(v, f"{path}.values[{i}]") for i, v in enumerate(raw["values"]))
    if len(xs) != len(vs):
        raise ConfigError(path, f"{key} and values have different lengths")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ConfigError(f"{path}.{key}", "must be strictly increasing")
    return Table(xs, vs)


def _function_input(raw: Any, path: str, allowed: set[str], key: str) -> FunctionInput:
    if isinstance(raw, dict):
        return _table(raw, path, key)
    return _expression(raw, path, allowed)


def _no_extra(raw: dict, known: set[str], path: str) -> None:
    extra = sorted(set(raw) - known)
    if extra:
        where = f"{path}.{extra[0]}" if path else extra[0]
        raise ConfigError(where, "unknown field")


def _section(raw: Any, path: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a mapping")
    return raw


def _levels(raw: Any, path: str) -> tuple[tuple[int, int], ...]:
    if isinstance(raw, str):
        return parse_levels(raw, path)
    if not isinstance(raw, list) or len(raw) < 3:
        raise ConfigError(path, "expected a list of at least three [N, M] pairs")
    out = []
    for i, item in enumerate(raw):
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError(f"{path}[{i}]", "expected a pair [N, M]")
        N, M = (_integer(v, f"{path}[{i}]") for v in item)
        if N < 3 or M < 2:
            raise ConfigError(f"{path}[{i}]", "need N >= 3 and M >= 2")
        out.append((N, M))
    return tuple(out)


def parse_levels(text: str, path: str = "levels") -> tuple[tuple[int, int], ...]:
    """``"16x32,32x64,64x128"`` -> ``((16, 32), (32, 64), (64, 128))``."""
    out = []
    for i, part in enumerate(p.strip() for p in text.split(",")):
        try:
            n, m = part.lower().split("x")
            N, M = int(n), int(m)
        except ValueError:
            raise ConfigError(f"{path}[{i}]", f"expected NxM, got {part!r}") from None
        if N < 3 or M < 2:
            raise ConfigError(f"{path}[{i}]", "need N >= 3 and M >= 2")
        out.append((N, M))
    if len(out) < 3:
        raise ConfigError(path, "a convergence study needs at least three levels")
    return tuple(out)


def _options(raw: Any) -> Options:
    raw = _section(raw, "options")
    _no_extra(raw, {f.name for f in fields(Options)}, "options")
    opts = Options()
    changes = {}
    if "tol" in raw:
        changes["tol"] = _number(raw["tol"], "options.tol")
        if changes["tol"] <= 0:
            raise ConfigError("options.tol", "must be positive")
    if "max_iter" in raw:
        changes["max_iter"] = _integer(raw["max_iter"], "options.max_iter")
        if changes["max_iter"] < 1:
            raise ConfigError("options.max_iter", "must be at least 1")
    if "levels" in raw:
        changes["levels"] = _levels(raw["levels"], "options.levels")
    if "seed" in raw:
        changes["seed"] = _integer(raw["seed"], "options.seed")
    if "snapshots" in raw:
        changes["snapshots"] = _integer(raw["snapshots"], "options.snapshots")
        if changes["snapshots"] < 1:
            raise ConfigError("options.snapshots", "must be at least 1")
    return replace(opts, **changes)


def config_from_dict(doc: Any) -> Config:
    doc = _section(doc, "")
    _no_extra(doc, {f.name for f in fields(Config)}, "")
    for key in ("edges", "alpha", "beta", "T", "time_steps"):
        if key not in doc:
            raise ConfigError(key, "missing required field")

    if not isinstance(doc["edges"], list) or len(doc["edges"]) < 2:
        raise ConfigError("edges", "expected a list of at least two edges")
    edges = []
    for i, e in enumerate(doc["edges"]):
        path = f"edges[{i}]"
        e = _section(e, path)
        _no_extra(e, {"length", "nodes", "gamma"}, path)
        for key in ("length", "nodes"):
            if key not in e:
                raise ConfigError(f"{path}.{key}", "missing required field")
        length = _number(e["length"], f"{path}.length")
        if length <= 0:
            raise ConfigError(f"{path}.length", f"must be positive, got {length}")
        nodes = _integer(e["nodes"], f"{path}.nodes")
        if nodes < 3:
            raise ConfigError(f"{path}.nodes", f"must be at least 3, got {nodes}")
        gamma = _function_input(e.get("gamma", "1"), f"{path}.gamma", {"x", "k"}, "x")
        edges.append(EdgeConfig(length, nodes, gamma))

    alpha = _number(doc["alpha"], "alpha")
    if not 0 < alpha < 1:
        raise ConfigError("alpha", f"must lie in (0, 1), got {alpha}")
    beta = _number(doc["beta"], "beta")
    if not 0.5 < beta < 1:
        raise ConfigError("beta", f"must lie in (1/2, 1), got {beta}")
    T = _number(doc["T"], "T")
    if T <= 0:
        raise ConfigError("T", f"must be positive, got {T}")
    steps = _integer(doc["time_steps"], "time_steps")
    if steps < 2:
        raise ConfigError("time_steps", f"must be at least 2, got {steps}")

    sources = SourcesConfig()
    if doc.get("sources") is not None:
        raw = _section(doc["sources"], "sources")
        _no_extra(raw, {"h", "g"}, "sources")
        sources = SourcesConfig(
            _expression(raw.get("h", "0"), "sources.h", {"x", "t", "k"}),
            _expression(raw.get("g", "1"), "sources.g", {"x", "t", "k"}),
        )

    eta = None
    if doc.get("eta") is not None:
        raw = _section(doc["eta"], "eta")
        _no_extra(raw, {"b", "phi"}, "eta")
        for key in ("b", "phi"):
            if key not in raw:
                raise ConfigError(f"eta.{key}", "missing required field")
        eta = EtaConfig(_number(raw["b"], "eta.b"), _expression(raw["phi"], "eta.phi", {"x", "k"}))

    psi = None
    if doc.get("psi") is not None:
        psi = _function_input(doc["psi"], "psi", {"t"}, "t")

    manufactured = None
    if doc.get("manufactured") is not None:
        raw = _section(doc["manufactured"], "manufactured")
        _no_extra(raw, {"f_true", "refinement"}, "manufactured")
        if "f_true" not in raw:
            raise ConfigError("manufactured.f_true", "missing required field")
        refinement = _integer(raw.get("refinement", 2), "manufactured.refinement")
        if refinement < 1:
            raise ConfigError("manufactured.refinement", "must be at least 1")
        manufactured = ManufacturedConfig(_expression(raw["f_true"], "manufactured.f_true", {"t"}), refinement)

    options = _options(doc["options"]) if doc.get("options") is not None else Options()
    return Config(tuple(edges), alpha, beta, T, steps, sources, eta, psi, manufactured, options)


def parse_config(text: str) -> Config:
    """Parse and validate a YAML document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "document"
        raise ConfigError("", f"malformed YAML at {where}: {getattr(exc, 'problem', exc)}") from None
    return config_from_dict(doc)


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# serialisation


def _function_to_doc(item: FunctionInput, key: str):
    if isinstance(item, Table):
        return {key: list(item.abscissa), "values": list(item.values)}
    return item.source


def config_to_dict(cfg: Config) -> dict:
    doc: dict[str, Any] = {
        "edges": [
            {"length": e.length, "nodes": e.nodes, "gamma": _function_to_doc(e.gamma, "x")} for e in cfg.edges
        ],
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "T": cfg.T,
        "time_steps": cfg.time_steps,
        "sources": {"h": cfg.sources.h.source, "g": cfg.sources.g.source},
    }
    if cfg.eta is not None:
        doc["eta"] = {"b": cfg.eta.b, "phi": cfg.eta.phi.source}
    if cfg.psi is not None:
        doc["psi"] = _function_to_doc(cfg.psi, "t")
    if cfg.manufactured is not None:
        doc["manufactured"] = {"f_true": cfg.manufactured.f_true.source,
                               "refinement": cfg.manufactured.refinement}
    o = cfg.options
    doc["options"] = {
        "tol": o.tol, "max_iter": o.max_iter, "levels": [list(lv) for lv in o.levels],
        "seed": o.seed, "snapshots": o.snapshots,
    }
    return doc


def serialize_config(cfg: Config) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)
