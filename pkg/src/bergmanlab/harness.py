"""Experiment configuration, symbol parsing, and command orchestration.

A flat key-value JSON config drives every command; the same config plus
the same seed yields byte-identical CSV artifacts.  Reports embed a
config hash and a grid checksum so regenerated outputs can be compared.

Exit codes used by the command runner and the console script:
  0  success
  2  invalid config, unknown command, or bad flag value
  3  symbol expression failed to parse
  4  command unsupported on the configured domain
  5  computation failed inside a module (details on stderr)
"""

from __future__ import annotations

import ast
import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, asdict, field as _dc_field

import numpy as np

from . import __version__ as _version
from . import approximation as approx
from . import diagnostics as diag
from .domains import (DomainSpec, DomainError, ball, build_grid, disc, egg,
                      polydisc)
from .geometry import (GeodesicField, GeometryError, build_net,
                       multiplicity_json, partition_of_unity)
from .kernels import KernelEngine, KernelError, engine_for, kernel_scan_csv
from .operators import (OperatorError, SymbolFn, compactness_indicator,
                        hankel_matrix, weak_null_probe)


class ConfigError(ValueError):
    pass


class SymbolParseError(ValueError):
    pass


class UnsupportedCommandError(RuntimeError):
    pass


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SYMBOL = 3
EXIT_UNSUPPORTED = 4
EXIT_COMPUTE = 5

COMMANDS = ("kernel", "metric", "distance", "net", "hankel", "omega-scan",
            "decompose", "sbg-check", "t91", "variety", "report")


# -- symbol expressions -----------------------------------------------


_ALLOWED_CALLS = ("conj", "abs2")


class _Expr:
    """Evaluator plus symbolic conjugate-derivative for one AST node."""

    def __init__(self, fn, dbar):
        self.fn = fn          # (n, d) -> (n,)
        self.dbar = dbar      # list of d functions (n, d) -> (n,)


def _const(c, d):
    return _Expr(lambda z, c=c: np.full(len(z), c, dtype=complex),
                 [lambda z: np.zeros(len(z), dtype=complex)] * d)


def _combine(a, b, op, d):
    if op == "+":
        fn = lambda z: a.fn(z) + b.fn(z)
        db = [lambda z, j=j: a.dbar[j](z) + b.dbar[j](z) for j in range(d)]
    elif op == "-":
        fn = lambda z: a.fn(z) - b.fn(z)
        db = [lambda z, j=j: a.dbar[j](z) - b.dbar[j](z) for j in range(d)]
    else:  # product rule
        fn = lambda z: a.fn(z) * b.fn(z)
        db = [lambda z, j=j: a.dbar[j](z) * b.fn(z)
              + a.fn(z) * b.dbar[j](z) for j in range(d)]
    return _Expr(fn, db)


def _var_index(name, dim, offset):
    if not (name.startswith("z") and name[1:].isdigit()):
        raise SymbolParseError(
            f"unknown name {name!r} at offset {offset}: use z1..z{dim}")
    j = int(name[1:]) - 1
    if not 0 <= j < dim:
        raise SymbolParseError(
            f"variable {name!r} out of range for dimension {dim}")
    return j


def _build(node, dim):
    if isinstance(node, ast.Expression):
        return _build(node.body, dim)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise SymbolParseError(
                f"only real constants allowed at offset {node.col_offset}")
        return _const(float(node.value), dim)
    if isinstance(node, ast.Name):
        j = _var_index(node.id, dim, node.col_offset)
        zero = [lambda z: np.zeros(len(z), dtype=complex)] * dim
        return _Expr(lambda z, j=j: z[:, j], zero)
    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            return _combine(_const(0.0, dim), _build(node.operand, dim),
                            "-", dim)
        if isinstance(node.op, ast.UAdd):
            return _build(node.operand, dim)
        raise SymbolParseError(
            f"unsupported unary operator at offset {node.col_offset}")
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Add):
            op = "+"
        elif isinstance(node.op, ast.Sub):
            op = "-"
        elif isinstance(node.op, ast.Mult):
            op = "*"
        elif isinstance(node.op, ast.Div):
            raise SymbolParseError(
                f"division rejected at offset {node.col_offset}")
        else:
            raise SymbolParseError(
                f"unsupported operator at offset {node.col_offset}")
        return _combine(_build(node.left, dim), _build(node.right, dim),
                        op, dim)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) \
                or node.func.id not in _ALLOWED_CALLS \
                or len(node.args) != 1 or node.keywords:
            raise SymbolParseError(
                f"only conj(z_j) and abs2(z_j) calls allowed "
                f"at offset {node.col_offset}")
        arg = node.args[0]
        if not isinstance(arg, ast.Name):
            raise SymbolParseError(
                f"{node.func.id} takes a bare variable "
                f"at offset {node.col_offset}")
        j = _var_index(arg.id, dim, arg.col_offset)
        if node.func.id == "conj":
            fn = lambda z, j=j: np.conj(z[:, j])
            db = [(lambda z: np.ones(len(z), dtype=complex)) if i == j
                  else (lambda z: np.zeros(len(z), dtype=complex))
                  for i in range(dim)]
        else:  # abs2(z_j) = z_j conj(z_j), dbar_j = z_j
            fn = lambda z, j=j: (z[:, j] * np.conj(z[:, j]))
            db = [(lambda z, j=j: z[:, j]) if i == j
                  else (lambda z: np.zeros(len(z), dtype=complex))
                  for i in range(dim)]
        return _Expr(fn, db)
    raise SymbolParseError(
        f"unsupported syntax at offset {getattr(node, 'col_offset', 0)}")


def symbol_parse(expr: str, dim: int) -> SymbolFn:
    """Parse an expression over z_j, conj(z_j), abs2(z_j), +, -, *, and
    real constants into a symbol with analytic conjugate derivatives."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise SymbolParseError(
            f"syntax error at offset {exc.offset}: {exc.msg}") from exc
    built = _build(tree, dim)
    def dbar(z, built=built):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        return np.stack([g(z) for g in built.dbar], axis=1)
    return SymbolFn(fn=lambda z: built.fn(np.atleast_2d(
        np.asarray(z, dtype=complex))), smoothness="C1", dbar=dbar,
        label=expr)


def bump_symbol(dim: int, radius=0.5) -> SymbolFn:
    """Smooth bump supported where every |z_j| < radius."""
    def fn(z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        s = np.abs(z) ** 2 / radius ** 2
        inside = np.all(s < 1.0, axis=1)
        out = np.zeros(len(z), dtype=complex)
        with np.errstate(divide="ignore", over="ignore"):
            body = np.exp(np.sum(1.0 - 1.0 / np.maximum(1.0 - s, 1e-300),
                                 axis=1))
        out[inside] = body[inside]
        return out
    return SymbolFn(fn=fn, smoothness="C1", label=f"bump({radius})")


def resolve_symbol(name: str, dim: int) -> SymbolFn:
    """Named built-ins, else an expression string."""
    if name == "bump":
        return bump_symbol(dim)
    return symbol_parse(name, dim)


# -- configuration ----------------------------------------------------


_DOMAINS = {
    "disc": lambda: disc(),
    "ball2": lambda: ball(2),
    "ball3": lambda: ball(3),
    "polydisc2": lambda: polydisc(2),
    "polydisc3": lambda: polydisc(3),
    "egg2": lambda: egg(2),
    "egg4": lambda: egg(4),
}

_DEFAULT_RESOLUTION = {"disc": 0.025, "ball2": 0.1, "polydisc2": 0.08,
                       "polydisc3": 0.2, "ball3": 0.2, "egg2": 0.15,
                       "egg4": 0.15}


@dataclass
class ExperimentConfig:
    domain: str = "disc"
    resolution: float = 0.0  # 0 selects the per-domain default
    scheme: str = "tensor-midpoint"
    seed: int = 20240817
    basis_degree: int = 20
    radius: float = 1.0
    radius_sweep: tuple = (0.5, 1.0, 1.5)
    approx_degree: int = 6
    symbol: str = "conj(z1)"
    net_radius: float = 0.5
    rays: int = 4
    steps: tuple = (0.3, 0.5, 0.7, 0.8, 0.9, 0.95)
    hankel_degrees: tuple = (4, 8, 12, 16)
    kernel_mode: str = "auto"  # auto | closed | numerical
    graph_neighbors: int = 8
    out_dir: str = "out"
    threads: int = 0  # 0 = library default; speed only

    def __post_init__(self):
        if self.domain not in _DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}; "
                              f"choose from {sorted(_DOMAINS)}")
        if self.resolution == 0.0:
            self.resolution = _DEFAULT_RESOLUTION[self.domain]
        for name in ("resolution", "basis_degree", "radius",
                     "approx_degree", "net_radius", "rays"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"config field {name} must be positive")
        if self.kernel_mode not in ("auto", "closed", "numerical"):
            raise ConfigError("kernel_mode must be auto|closed|numerical")
        self.radius_sweep = tuple(float(r) for r in self.radius_sweep)
        self.steps = tuple(float(t) for t in self.steps)
        self.hankel_degrees = tuple(int(n) for n in self.hankel_degrees)

    def to_json(self, path=None):
        payload = asdict(self)
        payload["radius_sweep"] = list(self.radius_sweep)
        payload["steps"] = list(self.steps)
        payload["hankel_degrees"] = list(self.hankel_degrees)
        text = json.dumps(payload, indent=2, sort_keys=True)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source):
        if os.path.exists(str(source)):
            with open(source) as fh:
                data = json.load(fh)
        else:
            data = json.loads(source)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def domain_spec(self) -> DomainSpec:
        return _DOMAINS[self.domain]()


@dataclass
class ScanReport:
    experiment_id: str
    command: str
    rows: list
    summary: dict
    provenance: dict = _dc_field(default_factory=dict)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"experiment_id": self.experiment_id,
                       "command": self.command, "rows": self.rows,
                       "summary": self.summary,
                       "provenance": self.provenance}, fh,
                      indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def _grid_checksum(grid):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(grid.nodes).tobytes())
    h.update(np.ascontiguousarray(grid.weights).tobytes())
    return h.hexdigest()[:16]


# -- orchestration ----------------------------------------------------


class _Workspace:
    """Lazily built shared objects for one run."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.dom = config.domain_spec()
        self._grid = None
        self._engine = None
        self._field = None

    @property
    def grid(self):
        if self._grid is None:
            self._grid = build_grid(self.dom, self.config.resolution,
                                    scheme=self.config.scheme,
                                    seed=self.config.seed)
        return self._grid

    @property
    def engine(self):
        cfg = self.config
        if self._engine is None:
            if cfg.kernel_mode == "numerical" \
                    or (cfg.kernel_mode == "auto"
                        and self.dom.kind in ("egg", "convex")):
                self._engine = engine_for(self.dom, self.grid,
                                          degree=cfg.basis_degree)
            else:
                if self.dom.kind in ("egg", "convex"):
                    raise UnsupportedCommandError(
                        "no closed-form kernel on this domain")
                self._engine = engine_for(self.dom)
        return self._engine

    @property
    def field(self):
        if self._field is None:
            self._field = GeodesicField(
                self.engine, self.grid,
                neighbors_per_dim=self.config.graph_neighbors)
        return self._field

    def symbol(self):
        return resolve_symbol(self.config.symbol, self.dom.dim)

    def provenance(self, extra=None):
        p = {"config_hash": self.config.config_hash(),
             "grid_checksum": _grid_checksum(self.grid),
             "version": _version, "domain": self.config.domain,
             "resolution": self.config.resolution,
             "seed": self.config.seed}
        if extra:
            p.update(extra)
        return p

    def scan_centers(self, n=5):
        """Deterministic interior sample: anchor plus ray points."""
        dirs = approx.ray_directions(self.dom, max(n - 1, 1),
                                     seed=self.config.seed)
        pts = [self.dom.anchor_point]
        for i, u in enumerate(dirs[:n - 1]):
            pts.append(approx.ray_point(self.dom, u, 0.3 + 0.1 * (i % 4)))
        return np.stack(pts)


def _cmd_kernel(ws, out):
    grid = ws.grid
    step = max(1, len(grid) // 64)
    pts = grid.nodes[::step]
    pairs = [(pts[i], pts[(i * 7 + 3) % len(pts)]) for i in range(len(pts))]
    kernel_scan_csv(ws.engine, pairs, os.path.join(out, "kernel.csv"))
    summary = {"n_pairs": len(pairs), "mode": ws.engine.mode}
    if ws.engine.mode == "numerical" \
            and ws.dom.kind in ("disc", "ball", "polydisc"):
        ref = engine_for(ws.dom)
        z = np.stack([p[0] for p in pairs])
        w = np.stack([p[1] for p in pairs])
        a = np.array([ws.engine.kernel(zi[None], wi[None])[0]
                      for zi, wi in zip(z, w)])
        b = np.array([ref.kernel(zi[None], wi[None])[0]
                      for zi, wi in zip(z, w)])
        summary["max_rel_err_vs_closed_form"] = float(
            np.max(np.abs(a - b) / np.abs(b)))
    return [], summary


def _cmd_metric(ws, out):
    idx = diag.admissible_nodes(ws.engine, ws.grid)
    z = ws.grid.nodes[idx[::max(1, len(idx) // 500)]]
    g = ws.engine.metric_batch(z)
    lam = np.linalg.eigvalsh(g)
    rows = []
    with open(os.path.join(out, "metric.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        head = []
        for j in range(ws.dom.dim):
            head += [f"re_z{j + 1}", f"im_z{j + 1}"]
        w.writerow(head + ["lambda_min", "lambda_max", "det_g"])
        for zi, li in zip(z, lam):
            rec = []
            for j in range(ws.dom.dim):
                rec += [repr(zi[j].real), repr(zi[j].imag)]
            det = float(np.prod(li))
            w.writerow(rec + [repr(float(li[0])), repr(float(li[-1])),
                              repr(det)])
            rows.append({"lambda_min": float(li[0]), "det": det})
    return rows, {"n_points": len(z),
                  "min_eigenvalue": float(np.min(lam))}


def _cmd_distance(ws, out):
    field = ws.field
    anchor = ws.dom.anchor_point
    targets = ws.scan_centers(9)[1:]
    rows = []
    with open(os.path.join(out, "distance.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "bergman_distance"])
        for i, t in enumerate(targets):
            dist = field.distance(anchor, t)
            w.writerow([i, repr(dist)])
            rows.append({"target": i, "distance": dist})
    return rows, {"n_targets": len(targets)}


def _cmd_net(ws, out):
    net = build_net(ws.field, ws.config.net_radius)
    net.to_csv(os.path.join(out, "net.csv"))
    radii = [ws.config.net_radius * s for s in (0.5, 1.0, 2.0)]
    multiplicity_json(net, radii, os.path.join(out, "multiplicity.json"))
    from .geometry import covering_audit, separation_audit
    return [], {"n_centers": len(net),
                "separation_min": separation_audit(net),
                "covering_max": covering_audit(net)}


def _cmd_hankel(ws, out):
    cfg = ws.config
    symbol = ws.symbol()
    per_var = ws.dom.kind == "polydisc"
    from .kernels import orthonormalize, reinhardt_basis
    def basis_at(n):
        if ws.engine.mode == "numerical":
            return orthonormalize(ws.dom, ws.grid, n, per_variable=per_var)
        return reinhardt_basis(ws.dom, n, per_variable=per_var)
    def build(n):
        return hankel_matrix(symbol, basis_at(n), ws.grid, guard=0,
                             per_variable=per_var)
    probe = weak_null_probe(symbol, ws.engine,
                            basis_at(max(cfg.hankel_degrees)), ws.grid,
                            ws.scan_centers(6))
    ind = compactness_indicator(build, cfg.hankel_degrees,
                                probe_values=probe)
    trunc = build(max(cfg.hankel_degrees))
    trunc.sigma_csv(os.path.join(out, "sigma.csv"),
                    degree=max(cfg.hankel_degrees))
    return [], {"compact": ind.compact, "counts": list(ind.counts),
                "sigma0": float(trunc.singular_values[0]),
                "probe": [float(p) for p in probe]}


def _cmd_omega_scan(ws, out):
    scan = approx.boundary_scan(
        ws.field, ws.symbol(), radius=ws.config.radius,
        degree=ws.config.approx_degree, n_rays=ws.config.rays,
        steps=ws.config.steps, seed=ws.config.seed)
    scan.to_csv(os.path.join(out, "omega_scan.csv"))
    scan.to_json(os.path.join(out, "omega_summary.json"))
    return [], {"sup": scan.sup, "tail_trend": scan.tail_trend,
                "decaying": scan.decaying}


def _cmd_decompose(ws, out):
    net = build_net(ws.field, ws.config.net_radius)
    part = partition_of_unity(net)
    dec = approx.decompose(ws.field, net, part, ws.symbol(),
                           degree=ws.config.approx_degree,
                           seed=ws.config.seed)
    dec.audits_json(os.path.join(out, "decomposition.json"))
    with open(os.path.join(out, "epsilon.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["center", "shell", "epsilon", "admissible"])
        for m in range(len(net)):
            w.writerow([m, int(dec.shell_index[m]),
                        repr(float(dec.epsilon[m])),
                        int(dec.epsilon_admissible[m])])
    return [], {"identity_error": dec.identity_error(),
                "eps_max": float(np.max(dec.epsilon)),
                "pair_audit_pass": all(a["holds"] for a in dec.pair_audit),
                "shell_epsilon_decay": dec.shell_epsilon_decay()}


def _cmd_sbg(ws, out):
    q = diag.sbg_check(ws.engine, ws.grid)
    c5 = diag.volume_comparison_check(ws.engine, ws.grid)
    diag.diagnostics_json([q, c5], os.path.join(out, "sbg.json"))
    return [], {"Q": q.value, "C5": c5.value,
                "near_boundary_max": q.detail["near_boundary_max"]}


def _cmd_t91(ws, out):
    rep = diag.t91_equivalences(ws.engine, ws.field, ws.scan_centers(5),
                                r=ws.config.radius)
    with open(os.path.join(out, "t91.json"), "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True, default=_jsonable)
    summary = {"all_finite": rep["all_finite"],
               "coherent": rep["coherent"],
               "cond5_skipped": rep["cond5_skipped"]}
    if rep["cond5_skipped"]:
        summary["warning"] = ("chart condition skipped: no homogeneous "
                              "chart family on this domain")
    return [], summary


def _cmd_variety(ws, out):
    if ws.dom.kind != "polydisc":
        raise UnsupportedCommandError(
            "boundary analytic discs are built in only for polydiscs")
    theta = 0.0
    def disc_map(w):
        point = [np.exp(1j * theta)] * (ws.dom.dim - 1) + [w]
        return np.array(point, dtype=complex)
    res = approx.variety_test(ws.symbol(), ws.dom, disc_map,
                              seed=ws.config.seed)
    with open(os.path.join(out, "variety.json"), "w") as fh:
        json.dump({"residual": res, "symbol": ws.config.symbol},
                  fh, indent=2, sort_keys=True)
    return [], {"residual": res}


def _cmd_report(ws, out):
    gathered = {}
    for name in sorted(os.listdir(out)):
        if name.endswith(".json") and name != "report.json":
            with open(os.path.join(out, name)) as fh:
                gathered[name] = json.load(fh)
    report = ScanReport(experiment_id=ws.config.config_hash(),
                        command="report", rows=[],
                        summary={"artifacts": sorted(gathered)},
                        provenance=ws.provenance())
    report.to_json(os.path.join(out, "report.json"))
    return [], {"artifacts": sorted(gathered)}


_DISPATCH = {
    "kernel": _cmd_kernel, "metric": _cmd_metric, "distance": _cmd_distance,
    "net": _cmd_net, "hankel": _cmd_hankel, "omega-scan": _cmd_omega_scan,
    "decompose": _cmd_decompose, "sbg-check": _cmd_sbg, "t91": _cmd_t91,
    "variety": _cmd_variety, "report": _cmd_report,
}


def run(config: ExperimentConfig, command: str) -> int:
    """Run one command; returns a documented exit code and writes
    artifacts under config.out_dir."""
    if command not in COMMANDS:
        print(f"unknown command {command!r}; choose from {COMMANDS}")
        return EXIT_CONFIG
    if config.threads > 0:
        try:
            # speed only; never changes output bytes
            from threadpoolctl import threadpool_limits
            threadpool_limits(limits=config.threads)
        except ImportError:
            pass
    os.makedirs(config.out_dir, exist_ok=True)
    ws = _Workspace(config)
    try:
        rows, summary = _DISPATCH[command](ws, config.out_dir)
    except SymbolParseError as exc:
        print(f"symbol error: {exc}")
        return EXIT_SYMBOL
    except UnsupportedCommandError as exc:
        print(f"unsupported: {exc}")
        return EXIT_UNSUPPORTED
    except (DomainError, KernelError, GeometryError, OperatorError,
            approx.ApproximationError, diag.DiagnosticsError) as exc:
        print(f"computation failed: {exc}")
        return EXIT_COMPUTE
    report = ScanReport(experiment_id=config.config_hash(),
                        command=command, rows=rows, summary=summary,
                        provenance=ws.provenance())
    report.to_json(os.path.join(config.out_dir,
                                f"{command.replace('-', '_')}_report.json"))
    return EXIT_OK
