"""Model domains in C^d: membership, boundary gaps, and quadrature grids.

Points are complex arrays of shape (d,); batches have shape (n, d).
All quadrature weights are in plain Lebesgue-measure units (mu), with
dmu = product over coordinates of dx_j dy_j.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import beta as beta_fn
from scipy.stats import qmc


class DomainError(ValueError):
    """Invalid domain input (dimension mismatch, exterior point, ...)."""


@dataclass(frozen=True)
class RealQuadraticInequality:
    """A real inequality c0 + b.x + x^T A x < 0 over x in R^{2d}.

    ``x`` is the realification (Re z_1, Im z_1, ..., Re z_d, Im z_d).
    ``quad`` may be None (affine inequality) or a symmetric (2d, 2d) matrix.
    """

    const: float
    lin: tuple
    quad: tuple | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        val = self.const + x @ np.asarray(self.lin)
        if self.quad is not None:
            A = np.asarray(self.quad)
            val = val + np.einsum("...i,ij,...j->...", x, A, x)
        return val

    def gradient_bound(self, radius):
        """sup of |grad| over the ball of the given radius in R^{2d}."""
        g = float(np.linalg.norm(self.lin))
        if self.quad is not None:
            g += 2.0 * float(np.linalg.norm(self.quad, 2)) * radius
        return g


@dataclass(frozen=True)
class DomainSpec:
    """A bounded open model domain in C^d."""

    kind: str  # disc | ball | polydisc | egg | convex
    dim: int
    label: str = ""
    egg_exponent: int = 2
    inequalities: tuple = ()
    bounding_radius: float = 1.0
    anchor: tuple = None

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("dimension must be a positive integer")
        if self.kind not in ("disc", "ball", "polydisc", "egg", "convex"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.kind == "disc" and self.dim != 1:
            raise DomainError("disc is one-dimensional")
        if self.kind == "egg" and self.dim != 2:
            raise DomainError("egg domains live in C^2")
        if self.anchor is None:
            object.__setattr__(self, "anchor", (0.0 + 0.0j,) * self.dim)
        a = np.asarray(self.anchor, dtype=complex)
        if not contains(self, a):
            raise DomainError("anchor point is not inside the domain")

    @property
    def anchor_point(self):
        return np.asarray(self.anchor, dtype=complex)

    @property
    def homogeneous(self):
        return self.kind in ("disc", "ball", "polydisc")


def disc(label="disc"):
    return DomainSpec(kind="disc", dim=1, label=label)


def ball(d, label=None):
    return DomainSpec(kind="ball", dim=d, label=label or f"ball({d})")


def polydisc(d, label=None):
    return DomainSpec(kind="polydisc", dim=d, label=label or f"polydisc({d})")


def egg(m, label=None):
    """The egg domain {|z1|^2 + |z2|^(2m) < 1} in C^2."""
    if m < 1:
        raise DomainError("egg exponent must be >= 1")
    return DomainSpec(kind="egg", dim=2, egg_exponent=int(m),
                      label=label or f"egg({m})")


def convex(inequalities, dim, bounding_radius, anchor, label="convex"):
    ineqs = tuple(inequalities)
    if not ineqs:
        raise DomainError("convex domain needs at least one inequality")
    return DomainSpec(kind="convex", dim=dim, inequalities=ineqs,
                      bounding_radius=float(bounding_radius),
                      anchor=tuple(np.asarray(anchor, dtype=complex)),
                      label=label)


def _realify(z):
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],), dtype=float)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def contains(dom: DomainSpec, z) -> np.ndarray | bool:
    """Strict membership test; broadcasts over a batch (n, d)."""
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != dom.dim:
        raise DomainError(
            f"point has dimension {z.shape[-1]}, domain has {dom.dim}")
    if not np.all(np.isfinite(z)):
        raise DomainError("point has non-finite coordinates")
    if dom.kind == "disc":
        res = np.abs(z[..., 0]) < 1.0
    elif dom.kind == "ball":
        res = np.sum(np.abs(z) ** 2, axis=-1) < 1.0
    elif dom.kind == "polydisc":
        res = np.all(np.abs(z) < 1.0, axis=-1)
    elif dom.kind == "egg":
        m = dom.egg_exponent
        res = np.abs(z[..., 0]) ** 2 + np.abs(z[..., 1]) ** (2 * m) < 1.0
    else:
        x = _realify(z)
        res = np.ones(z.shape[:-1], dtype=bool)
        for ineq in dom.inequalities:
            res &= ineq(x) < 0.0
        res &= np.sum(np.abs(z) ** 2, axis=-1) < dom.bounding_radius ** 2
    if res.ndim == 0:
        return bool(res)
    return res


def boundary_gap(dom: DomainSpec, z):
    """Distance (disc/ball/polydisc: exact Euclidean; else a positive
    lower bound from the defining functions) from an interior point to
    the boundary."""
    z = np.asarray(z, dtype=complex)
    inside = contains(dom, z)
    if not np.all(inside):
        raise DomainError("boundary_gap requires interior points")
    if dom.kind == "disc":
        gap = 1.0 - np.abs(z[..., 0])
    elif dom.kind == "ball":
        gap = 1.0 - np.sqrt(np.sum(np.abs(z) ** 2, axis=-1))
    elif dom.kind == "polydisc":
        gap = np.min(1.0 - np.abs(z), axis=-1)
    elif dom.kind == "egg":
        m = dom.egg_exponent
        g = np.abs(z[..., 0]) ** 2 + np.abs(z[..., 1]) ** (2 * m) - 1.0
        gap = np.abs(g) / (2.0 + 2.0 * m)
    else:
        gap = None
        for ineq in dom.inequalities:
            x = _realify(z)
            lb = np.abs(ineq(x)) / ineq.gradient_bound(
                dom.bounding_radius * math.sqrt(2 * dom.dim))
            gap = lb if gap is None else np.minimum(gap, lb)
        gap = np.minimum(gap, dom.bounding_radius
                         - np.sqrt(np.sum(np.abs(z) ** 2, axis=-1)))
    if gap.ndim == 0:
        return float(gap)
    return gap


def boundary_residual(dom: DomainSpec, z):
    """|defining function| at z; zero iff z lies on the boundary."""
    z = np.asarray(z, dtype=complex)
    if dom.kind == "disc":
        return np.abs(np.abs(z[..., 0]) - 1.0)
    if dom.kind == "ball":
        return np.abs(np.sqrt(np.sum(np.abs(z) ** 2, axis=-1)) - 1.0)
    if dom.kind == "polydisc":
        # boundary of the closed polydisc: all |z_i| <= 1, max |z_i| = 1
        over = np.max(np.maximum(np.abs(z) - 1.0, 0.0), axis=-1)
        at = np.abs(np.max(np.abs(z), axis=-1) - 1.0)
        return np.maximum(over, at)
    if dom.kind == "egg":
        m = dom.egg_exponent
        return np.abs(np.abs(z[..., 0]) ** 2
                      + np.abs(z[..., 1]) ** (2 * m) - 1.0)
    raise DomainError("boundary residual not available for convex domains")


_CONVEX_MU_SEED = 20240817
_CONVEX_MU_SAMPLES = 200_000


def lebesgue_volume(dom: DomainSpec) -> float:
    """mu(Omega), analytic where available, hit-ratio estimate otherwise."""
    d = dom.dim
    if dom.kind == "disc":
        return math.pi
    if dom.kind == "ball":
        return math.pi ** d / math.factorial(d)
    if dom.kind == "polydisc":
        return math.pi ** d
    if dom.kind == "egg":
        m = dom.egg_exponent
        return math.pi ** 2 * m / (m + 1.0)
    rng = np.random.default_rng(_CONVEX_MU_SEED)
    R = dom.bounding_radius
    x = rng.uniform(-R, R, size=(_CONVEX_MU_SAMPLES, 2 * d))
    z = x[:, 0::2] + 1j * x[:, 1::2]
    box = (2.0 * R) ** (2 * d)
    return box * float(np.mean(contains(dom, z)))


@dataclass(frozen=True)
class QuadratureGrid:
    """Deterministic quadrature nodes/weights for Lebesgue integration."""

    nodes: np.ndarray  # (n, d) complex
    weights: np.ndarray  # (n,) positive
    resolution: float
    scheme: str
    domain: DomainSpec
    mass_tolerance: float = field(default=0.05)

    def __post_init__(self):
        if len(self.nodes) == 0:
            raise DomainError("grid has no nodes (resolution too coarse?)")
        if np.any(self.weights <= 0):
            raise DomainError("grid weights must be positive")

    def __len__(self):
        return len(self.nodes)

    @property
    def total_weight(self):
        return float(np.sum(self.weights))

    def to_csv(self, path):
        d = self.domain.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = []
            for j in range(d):
                header += [f"re_z{j + 1}", f"im_z{j + 1}"]
            w.writerow(header + ["weight"])
            for node, wt in zip(self.nodes, self.weights):
                row = []
                for j in range(d):
                    row += [repr(node[j].real), repr(node[j].imag)]
                w.writerow(row + [repr(float(wt))])


def _midpoint_axis(radius, resolution):
    n = int(math.ceil(2.0 * radius / resolution))
    if n < 1:
        raise DomainError("resolution too coarse for the bounding box")
    h = 2.0 * radius / n
    return -radius + h * (np.arange(n) + 0.5), h


def _tensor_midpoint(dom, resolution):
    axis, h = _midpoint_axis(dom.bounding_radius, resolution)
    grids = np.meshgrid(*([axis] * (2 * dom.dim)), indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=-1)
    z = x[:, 0::2] + 1j * x[:, 1::2]
    keep = contains(dom, z)
    z = z[keep]
    w = np.full(len(z), h ** (2 * dom.dim))
    return z, w


def _quasi_random(dom, resolution, seed):
    R = dom.bounding_radius
    box = (2.0 * R) ** (2 * dom.dim)
    n_cand = int(math.ceil(box / resolution ** (2 * dom.dim)))
    n_cand = min(max(n_cand, 64), 2_000_000)
    sampler = qmc.Halton(d=2 * dom.dim, scramble=True, seed=seed)
    x = qmc.scale(sampler.random(n_cand), -R, R)
    z = x[:, 0::2] + 1j * x[:, 1::2]
    z = z[contains(dom, z)]
    if len(z) == 0:
        raise DomainError("no quasi-random nodes landed inside the domain")
    w = np.full(len(z), lebesgue_volume(dom) / len(z))
    return z, w


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _disc_polar(n_rad, n_theta):
    """Nodes/weights integrating z^a conj(z)^b exactly for a,b <= n_rad-1
    and |a-b| < n_theta."""
    t, wt = _gauss01(n_rad)  # t = r^2
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    r = np.sqrt(t)
    z = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    w = np.repeat(wt * math.pi / n_theta, n_theta)
    return z, w


def _product_polar(dom, n_rad, n_theta):
    d = dom.dim
    if dom.kind == "disc":
        z, w = _disc_polar(n_rad, n_theta)
        return z[:, None], w
    if dom.kind == "polydisc":
        z1, w1 = _disc_polar(n_rad, n_theta)
        zs, ws = z1[:, None], w1
        for _ in range(d - 1):
            n0 = len(ws)
            zs = np.concatenate(
                [np.repeat(zs, len(z1), axis=0),
                 np.tile(z1, n0)[:, None]], axis=1)
            ws = np.repeat(ws, len(w1)) * np.tile(w1, n0)
        return zs, ws
    if dom.kind == "ball":
        # radial part over the simplex {u_1+...+u_d < 1} by stick breaking
        t_axes = [_gauss01(n_rad) for _ in range(d)]
        mesh = np.meshgrid(*[t for t, _ in t_axes], indexing="ij")
        wmesh = np.meshgrid(*[w for _, w in t_axes], indexing="ij")
        x = np.stack([m.ravel() for m in mesh], axis=-1)
        wrad = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
        u = np.empty_like(x)
        rem = np.ones(len(x))
        for j in range(d):
            u[:, j] = x[:, j] * rem
            wrad = wrad * rem
            rem = rem * (1.0 - x[:, j])
        theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
        phases = np.exp(1j * theta)
        z = np.sqrt(u)[:, None, :].astype(complex)
        weights = wrad * (math.pi / n_theta) ** d
        mesh_t = np.meshgrid(*([np.arange(n_theta)] * d), indexing="ij")
        idx = np.stack([m.ravel() for m in mesh_t], axis=-1)
        zfull = (z * phases[idx][None, :, :]).reshape(-1, d)
        wfull = np.repeat(weights, len(idx))
        return zfull, wfull
    if dom.kind == "egg":
        m = dom.egg_exponent
        tv, wv = _gauss01(n_rad * max(1, m))  # v = |z2|^2
        tu, wu = _gauss01(n_rad)  # u = |z1|^2 / (1 - v^m)
        U, V = np.meshgrid(tu, tv, indexing="ij")
        WU, WV = np.meshgrid(wu, wv, indexing="ij")
        scale = 1.0 - V ** m
        u1 = (U * scale).ravel()
        u2 = V.ravel()
        wrad = (WU * WV * scale).ravel()
        theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
        phases = np.exp(1j * theta)
        mesh_t = np.meshgrid(np.arange(n_theta), np.arange(n_theta),
                             indexing="ij")
        idx = np.stack([mm.ravel() for mm in mesh_t], axis=-1)
        base = np.stack([np.sqrt(u1), np.sqrt(u2)], axis=-1).astype(complex)
        zfull = (base[:, None, :] * phases[idx][None, :, :]).reshape(-1, 2)
        wfull = np.repeat(wrad * (math.pi / n_theta) ** 2, len(idx))
        return zfull, wfull
    raise DomainError(f"product-polar scheme unavailable for {dom.kind}")


def build_grid(dom: DomainSpec, resolution: float, scheme="tensor-midpoint",
               seed=0, degree=None) -> QuadratureGrid:
    """Build a deterministic quadrature grid.

    schemes:
      tensor-midpoint  midpoint rule on a clipped tensor grid (default)
      quasi-random     Halton nodes with equal weights mu(Omega)/N
      product-polar    polar/Reinhardt product rule, exact for monomial
                       inner products up to ``degree`` (required argument)
    """
    if resolution <= 0 and scheme != "product-polar":
        raise DomainError("resolution must be positive")
    if scheme == "tensor-midpoint":
        z, w = _tensor_midpoint(dom, resolution)
    elif scheme == "quasi-random":
        z, w = _quasi_random(dom, resolution, seed)
    elif scheme == "product-polar":
        if degree is None:
            raise DomainError("product-polar scheme requires a degree")
        n_rad = degree + 2
        n_theta = 2 * degree + 3
        z, w = _product_polar(dom, n_rad, n_theta)
        resolution = 1.0 / (degree + 1)
    else:
        raise DomainError(f"unknown grid scheme {scheme!r}")
    if len(z) == 0:
        raise DomainError("resolution too coarse: no nodes inside domain")
    order = np.lexsort(tuple(z[:, j].imag for j in range(dom.dim - 1, -1, -1))
                       + tuple(z[:, j].real
                               for j in range(dom.dim - 1, -1, -1)))
    return QuadratureGrid(nodes=np.ascontiguousarray(z[order]),
                          weights=np.ascontiguousarray(w[order]),
                          resolution=float(resolution), scheme=scheme,
                          domain=dom)


def monomial_norm2(dom: DomainSpec, alpha) -> float:
    """Exact squared L^2(mu) norm of z^alpha on Reinhardt model domains."""
    alpha = np.asarray(alpha, dtype=int)
    d = dom.dim
    if dom.kind == "disc":
        return math.pi / (alpha[0] + 1.0)
    if dom.kind == "polydisc":
        return float(np.prod([math.pi / (a + 1.0) for a in alpha]))
    if dom.kind == "ball":
        n = int(np.sum(alpha))
        num = math.pi ** d * math.factorial(d) \
            * float(np.prod([math.factorial(a) for a in alpha]))
        return num / (d * math.factorial(n + d))
    if dom.kind == "egg":
        m = dom.egg_exponent
        a, b = int(alpha[0]), int(alpha[1])
        radial = beta_fn((b + 1.0) / m, a + 2.0) / m
        return math.pi ** 2 / (a + 1.0) * radial
    raise DomainError(f"no closed-form monomial norms for {dom.kind}")
