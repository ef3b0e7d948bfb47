"""Constant estimation and coherence checks for the kernel geometry.

Each check sweeps admissible grid nodes or metric-ball scans and reports
a bracket constant: off-diagonal kernel comparability, sub-mean-value
ratios, kernel mass localization, the volume-form/kernel comparison,
the self-bounded-gradient supremum, and the five-way equivalence report
tying them together.  Finite brackets on admissible nodes are evidence
of consistency, not proofs; report wording stays at "consistent with".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as _dc_field

import numpy as np

from .domains import boundary_gap
from .geometry import ChartMap, GeodesicField, chart, metric_ball
from .kernels import KernelEngine, multi_indices, monomial_matrix


class DiagnosticsError(RuntimeError):
    pass


@dataclass
class ConstantEstimate:
    name: str
    value: float
    sample: str
    stability: float = math.nan  # relative change under grid halving
    detail: dict = _dc_field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value <= 0:
            raise DiagnosticsError(
                f"constant {self.name} is not finite positive: {self.value}")

    def with_stability(self, other: "ConstantEstimate") -> "ConstantEstimate":
        rel = abs(self.value - other.value) / max(abs(self.value), 1e-300)
        return ConstantEstimate(name=self.name, value=self.value,
                                sample=self.sample, stability=rel,
                                detail=dict(self.detail))

    def to_json_dict(self):
        return {"name": self.name, "value": self.value,
                "sample": self.sample, "stability": self.stability,
                "detail": {k: v for k, v in self.detail.items()
                           if np.isscalar(v)}}


def admissible_nodes(engine: KernelEngine, grid, gap_factor=10.0):
    """Nodes kept for sup-type scans: boundary gap >= factor * spacing.

    The threshold is capped at half the largest gap on the grid so that
    coarse grids (or domains whose gap bound is conservative) still
    retain a deep-interior sample instead of nothing.
    """
    gap = boundary_gap(grid.domain, grid.nodes)
    thr = min(gap_factor * grid.resolution, 0.5 * float(np.max(gap)))
    return np.nonzero(gap >= thr)[0]


# -- off-diagonal comparability (two-sided kernel estimate) -----------


def off_diagonal_check(engine: KernelEngine, field: GeodesicField,
                       centers, r0=1.0) -> ConstantEstimate:
    """Bracket for |B(z,zeta)|^2 / (B(z,z) B(zeta,zeta)) over pairs at
    Bergman distance <= r0."""
    grid = field.grid
    diag = engine.kernel_diag(grid.nodes).real
    lo, hi = math.inf, 0.0
    n_pairs = 0
    for zeta in np.atleast_2d(np.asarray(centers, dtype=complex)):
        dist = field.distances_from_point(zeta)
        sel = np.nonzero(dist <= r0)[0]
        if not len(sel):
            continue
        n_pairs += len(sel)
        bz = engine.kernel(grid.nodes[sel], zeta[None, :])
        bzeta = engine.kernel_diag(zeta[None, :]).real[0]
        ratio = np.abs(bz) ** 2 / (diag[sel] * bzeta)
        lo = min(lo, float(np.min(ratio)))
        hi = max(hi, float(np.max(ratio)))
    if n_pairs == 0:
        raise DiagnosticsError("no pairs within the requested distance")
    return ConstantEstimate(
        name="C3", value=max(hi, 1.0 / lo),
        sample=f"{n_pairs} pairs at distance <= {r0}",
        detail={"ratio_min": lo, "ratio_max": hi, "r0": float(r0)})


def off_diagonal_ratio(engine: KernelEngine, z, zeta) -> float:
    """Single-pair comparability ratio (diagonal gives exactly 1)."""
    z = np.asarray(z, dtype=complex).reshape(1, -1)
    zeta = np.asarray(zeta, dtype=complex).reshape(1, -1)
    num = np.abs(engine.kernel(z, zeta)[0]) ** 2
    den = engine.kernel_diag(z).real[0] * engine.kernel_diag(zeta).real[0]
    return float(num / den)


# -- sub-mean-value property on metric balls --------------------------


def mean_value_check(engine: KernelEngine, field: GeodesicField,
                     f, r, centers, degree_label="") -> ConstantEstimate:
    """Bracket for u(zeta) r^{2d} / (B(zeta,zeta) * ball integral of u),
    u = |f|^2, integrated against plain Lebesgue measure."""
    grid = field.grid
    d = field.domain.dim
    ratios = []
    skipped = 0
    for zeta in np.atleast_2d(np.asarray(centers, dtype=complex)):
        ball = metric_ball(field, zeta, r)
        if len(ball) == 0:
            skipped += 1
            continue
        vals = np.abs(f(grid.nodes[ball.members])) ** 2
        integral = float(np.sum(grid.weights[ball.members] * vals))
        if integral <= 0:
            skipped += 1
            continue
        u0 = float(np.abs(f(zeta[None, :]))[0] ** 2)
        bz = engine.kernel_diag(zeta[None, :]).real[0]
        ratios.append(u0 * r ** (2 * d) / (bz * integral))
    if not ratios:
        raise DiagnosticsError("all mean-value balls were empty")
    return ConstantEstimate(
        name="C4", value=max(max(ratios), 1e-300),
        sample=f"{len(ratios)} centers, r={r}{degree_label}",
        detail={"ratios": ratios, "skipped": skipped, "r": float(r)})


def mass_positivity_check(engine: KernelEngine, field: GeodesicField,
                          centers, r) -> list:
    """Per-center ratio of total kernel mass B(zeta,zeta) to the
    r^{-2d}-scaled mass captured inside the metric ball."""
    grid = field.grid
    d = field.domain.dim
    rows = []
    for zeta in np.atleast_2d(np.asarray(centers, dtype=complex)):
        ball = metric_ball(field, zeta, r)
        if len(ball) == 0:
            continue
        bz = engine.kernel(grid.nodes[ball.members], zeta[None, :])
        ball_mass = float(np.sum(grid.weights[ball.members]
                                 * np.abs(bz) ** 2))
        total = engine.kernel_diag(zeta[None, :]).real[0]
        rows.append({"center": zeta.tolist(),
                     "total_mass": total,
                     "ball_mass": ball_mass,
                     "ball_fraction": ball_mass / total,
                     "ratio": total * r ** (2 * d) / ball_mass})
    if not rows:
        raise DiagnosticsError("all mass-positivity balls were empty")
    return rows


# -- volume form vs kernel --------------------------------------------


def volume_comparison_check(engine: KernelEngine, grid,
                            gap_factor=10.0) -> ConstantEstimate:
    """Bracket for volume_density(z) / B(z,z) over admissible nodes."""
    idx = admissible_nodes(engine, grid, gap_factor)
    if not len(idx):
        raise DiagnosticsError("no admissible nodes for volume comparison")
    z = grid.nodes[idx]
    ratio = engine.volume_density_batch(z) / engine.kernel_diag(z).real
    lo, hi = float(np.min(ratio)), float(np.max(ratio))
    return ConstantEstimate(
        name="C5", value=max(hi, 1.0 / lo),
        sample=f"{len(idx)} admissible nodes",
        detail={"ratio_min": lo, "ratio_max": hi})


# -- self-bounded gradient --------------------------------------------


def sbg_values(engine: KernelEngine, z):
    """(d log B)^* g^{-1} (d log B) at a batch of points."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    grad = engine.dlog_kernel(z)
    g = engine.metric_batch(z)
    lam = np.linalg.eigvalsh(g)
    if np.any(lam[:, 0] <= 0):
        raise DiagnosticsError("metric not positive definite on SBG sample")
    sol = np.linalg.solve(g, grad[..., None])[..., 0]
    return np.einsum("nj,nj->n", grad.conj(), sol).real


def sbg_check(engine: KernelEngine, grid, gap_factor=10.0) -> ConstantEstimate:
    """Q = sup over admissible nodes of the squared gradient of log B in
    the metric norm, with a boundary trend flag."""
    idx = admissible_nodes(engine, grid, gap_factor)
    if not len(idx):
        raise DiagnosticsError("no admissible nodes for SBG scan")
    z = grid.nodes[idx]
    q = sbg_values(engine, z)
    gap = boundary_gap(grid.domain, z)
    order = np.argsort(gap)
    k = max(1, len(idx) // 10)
    near = float(np.max(q[order[:k]]))   # smallest gaps
    deep = float(np.max(q[order[-k:]]))  # deepest interior
    sup = float(np.max(q))
    growing = near > 2.0 * max(deep, 1e-300) and near >= 0.999 * sup
    return ConstantEstimate(
        name="Q", value=sup,
        sample=f"{len(idx)} admissible nodes",
        detail={"near_boundary_max": near, "interior_max": deep,
                "boundary_growth_flag": bool(growing),
                "argmax_gap": float(gap[np.argmax(q)])})


# -- five-way equivalence report --------------------------------------

HOMOGENEOUS_KINDS = ("disc", "ball", "polydisc")


def t91_equivalences(engine: KernelEngine, field: GeodesicField,
                     centers, r=1.0, gap_factor=10.0) -> dict:
    """Bracket constants for the five mutually equivalent conditions:
    (1) self-bounded gradient of log B, (2) kernel comparability on
    metric balls, (3) B(zeta,zeta) * Lebesgue ball volume bracket,
    (4) volume-density vs normalized-Lebesgue bracket on each ball,
    (5) chart log-Jacobian derivative bound (homogeneous models only).
    """
    grid = field.grid
    centers = np.atleast_2d(np.asarray(centers, dtype=complex))
    report = {"domain": field.domain.label, "r": float(r)}
    # (1)
    q = sbg_check(engine, grid, gap_factor)
    report["cond1_sbg_sup"] = q.value
    report["cond1_growth_flag"] = q.detail["boundary_growth_flag"]
    # (2), (3), (4) per ball
    diag = engine.kernel_diag(grid.nodes).real
    density = field.volume_density_nodes()
    c2, c3lo, c3hi, c4 = 0.0, math.inf, 0.0, 0.0
    for zeta in centers:
        ball = metric_ball(field, zeta, r)
        if len(ball) == 0:
            continue
        bz = engine.kernel_diag(zeta[None, :]).real[0]
        ratio2 = diag[ball.members] / bz
        c2 = max(c2, float(np.max(ratio2)), float(1.0 / np.min(ratio2)))
        prod = bz * ball.lebesgue_mass
        c3lo, c3hi = min(c3lo, prod), max(c3hi, prod)
        ratio4 = density[ball.members] * ball.lebesgue_mass
        c4 = max(c4, float(np.max(ratio4)), float(1.0 / np.min(ratio4)))
    if c2 == 0.0:
        raise DiagnosticsError("all equivalence balls were empty")
    report["cond2_kernel_ratio_bracket"] = c2
    report["cond3_mass_product_range"] = [c3lo, c3hi]
    report["cond3_bracket"] = max(c3hi, 1.0 / c3lo)
    report["cond4_volume_bracket"] = c4
    # (5)
    if field.domain.kind in HOMOGENEOUS_KINDS:
        sup5 = 0.0
        for zeta in centers:
            cm = chart(field.domain, zeta)
            grad = cm.dlog_absdet(np.zeros((1, field.domain.dim),
                                           dtype=complex))
            sup5 = max(sup5, float(np.linalg.norm(grad)))
        report["cond5_chart_gradient_sup"] = sup5
        report["cond5_skipped"] = False
    else:
        report["cond5_chart_gradient_sup"] = None
        report["cond5_skipped"] = True
    finite = [math.isfinite(report["cond1_sbg_sup"]),
              math.isfinite(c2), math.isfinite(report["cond3_bracket"]),
              math.isfinite(c4)]
    if not report["cond5_skipped"]:
        finite.append(math.isfinite(report["cond5_chart_gradient_sup"]))
    report["all_finite"] = bool(all(finite))
    report["coherent"] = bool(all(finite) or not any(finite))
    report["verdict"] = ("consistent with the five-way equivalence"
                         if report["coherent"] else
                         "conditions disagree: check brackets")
    return report


def volume_equivalence_bracket(engine: KernelEngine, field: GeodesicField,
                               centers, r=1.0) -> ConstantEstimate:
    """Max over centers of the two-sided constant between the metric
    volume density and 1/mu(B(zeta,r)) on the ball."""
    density = field.volume_density_nodes()
    best = 0.0
    used = 0
    for zeta in np.atleast_2d(np.asarray(centers, dtype=complex)):
        ball = metric_ball(field, zeta, r)
        if len(ball) == 0:
            continue
        used += 1
        ratio = density[ball.members] * ball.lebesgue_mass
        best = max(best, float(np.max(ratio)), float(1.0 / np.min(ratio)))
    if used == 0:
        raise DiagnosticsError("all volume-equivalence balls were empty")
    return ConstantEstimate(name="L", value=best,
                            sample=f"{used} centers, r={r}",
                            detail={"r": float(r)})


def diagnostics_json(estimates, path, extra=None):
    payload = {"constants": [e.to_json_dict() for e in estimates]}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
