"""Discretized Bergman-metric geometry.

A GeodesicField is a k-nearest-neighbor graph over quadrature nodes with
edges weighted by midpoint-rule Bergman length; graph shortest paths
approximate the Bergman distance.  On top of it: metric balls, maximal
r-separated nets (farthest-first), covering multiplicities, cubic-ramp
partitions of unity, and automorphism charts on the homogeneous models.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .domains import DomainSpec, DomainError, QuadratureGrid, contains
from .kernels import KernelEngine


class GeometryError(RuntimeError):
    pass


def _realify(z):
    out = np.empty((len(z), 2 * z.shape[1]))
    out[:, 0::2] = z.real
    out[:, 1::2] = z.imag
    return out


class GeodesicField:
    """Shortest-path oracle for the Bergman distance on a grid."""

    def __init__(self, engine: KernelEngine, grid: QuadratureGrid,
                 neighbors_per_dim=8):
        self.engine = engine
        self.grid = grid
        self.domain = grid.domain
        d = self.domain.dim
        self.k = neighbors_per_dim * 2 * d
        nodes = grid.nodes
        self._tree = cKDTree(_realify(nodes))
        k = min(self.k + 1, len(nodes))
        _, idx = self._tree.query(_realify(nodes), k=k)
        rows = np.repeat(np.arange(len(nodes), dtype=np.int32), k - 1)
        cols = idx[:, 1:].ravel().astype(np.int32)
        del idx
        step = max(1_000_000 // (d * d), 1)
        lengths = np.empty(len(rows))
        for lo in range(0, len(rows), step):
            hi = min(lo + step, len(rows))
            lengths[lo:hi] = self.segment_length(nodes[rows[lo:hi]],
                                                 nodes[cols[lo:hi]])
        n = len(nodes)
        mat = csr_matrix((lengths, (rows, cols)), shape=(n, n))
        self.graph = mat.maximum(mat.T)  # symmetrize
        self._node_cache: dict = {}
        self._point_cache: dict = {}
        self._density = None

    # -- local metric helpers -----------------------------------------

    def segment_length(self, a, b):
        """Bergman length of straight segments, midpoint rule (batched)."""
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        b = np.atleast_2d(np.asarray(b, dtype=complex))
        d = a.shape[1]
        step = max(1_000_000 // (d * d), 1)
        out = np.empty(len(a))
        for lo in range(0, len(a), step):
            hi = min(lo + step, len(a))
            mid = 0.5 * (a[lo:hi] + b[lo:hi])
            g = self.engine.metric_batch(mid)
            v = b[lo:hi] - a[lo:hi]
            q = np.einsum("nj,njk,nk->n", v.conj(), g, v).real
            out[lo:hi] = np.sqrt(np.maximum(q, 0.0))
        return out

    def volume_density_nodes(self):
        """Bergman volume density at every grid node (cached)."""
        if self._density is None:
            self._density = self.engine.volume_density_batch(self.grid.nodes)
        return self._density

    # -- distances ----------------------------------------------------

    def nearest_node(self, p):
        p = np.asarray(p, dtype=complex).reshape(1, -1)
        return int(self._tree.query(_realify(p), k=1)[1][0])

    def distances_from_node(self, i: int):
        if i not in self._node_cache:
            dist = dijkstra(self.graph, directed=False, indices=i)
            self._node_cache[i] = dist
        return self._node_cache[i]

    def _attach(self, p):
        """Neighbor indices and exact edge lengths for an off-grid point."""
        p = np.asarray(p, dtype=complex).reshape(-1)
        k = min(self.k, len(self.grid))
        _, idx = self._tree.query(_realify(p[None, :]), k=k)
        idx = np.atleast_1d(idx.ravel())
        lengths = self.segment_length(np.repeat(p[None, :], len(idx), axis=0),
                                      self.grid.nodes[idx])
        return idx, lengths

    def distances_from_point(self, p):
        """Graph distance from an arbitrary interior point to all nodes."""
        p = np.asarray(p, dtype=complex).reshape(-1)
        if not contains(self.domain, p):
            raise GeometryError("point outside the domain")
        key = p.tobytes()
        if key in self._point_cache:
            return self._point_cache[key]
        idx, lengths = self._attach(p)
        if np.allclose(lengths[0], 0.0, atol=1e-13):
            dist = self.distances_from_node(int(idx[0]))
        else:
            n = len(self.grid)
            aug = self.graph.tolil(copy=True)
            aug.resize((n + 1, n + 1))
            for i, l in zip(idx, lengths):
                aug[n, i] = l
                aug[i, n] = l
            dist = dijkstra(csr_matrix(aug), directed=False,
                            indices=n)[:n]
        self._point_cache[key] = dist
        return dist

    def distance(self, a, b):
        """Graph shortest-path Bergman distance between two points."""
        a = np.asarray(a, dtype=complex).reshape(-1)
        b = np.asarray(b, dtype=complex).reshape(-1)
        if not contains(self.domain, b):
            raise GeometryError("point outside the domain")
        if np.array_equal(a, b):
            return 0.0
        dist = self.distances_from_point(a)
        idx, lengths = self._attach(b)
        if np.allclose(lengths[0], 0.0, atol=1e-13):
            val = dist[int(idx[0])]
        else:
            val = float(np.min(dist[idx] + lengths))
        if not np.isfinite(val):
            raise GeometryError(
                "grid graph is disconnected between the query points")
        return float(val)


@dataclass(frozen=True)
class MetricBall:
    center: np.ndarray
    radius: float
    members: np.ndarray  # node indices
    lebesgue_mass: float
    bergman_mass: float

    def __len__(self):
        return len(self.members)


def metric_ball(field: GeodesicField, zeta, r: float) -> MetricBall:
    if r <= 0:
        raise GeometryError("ball radius must be positive")
    dist = field.distances_from_point(zeta)
    members = np.nonzero(dist < r)[0]
    if len(members) == 0:
        raise GeometryError(
            f"metric ball of radius {r} contains no grid nodes")
    w = field.grid.weights[members]
    dens = field.volume_density_nodes()[members]
    return MetricBall(center=np.asarray(zeta, dtype=complex).reshape(-1),
                      radius=float(r), members=members,
                      lebesgue_mass=float(np.sum(w)),
                      bergman_mass=float(np.sum(w * dens)))


@dataclass
class Net:
    """Maximal r-separated set of grid nodes covering the grid."""

    separation: float
    centers: np.ndarray  # node indices, insertion order
    field: GeodesicField = field(repr=False, default=None)

    def __len__(self):
        return len(self.centers)

    def center_points(self):
        return self.field.grid.nodes[self.centers]

    def center_distances(self):
        """(n_centers, n_nodes) graph distances, cached per node."""
        return np.stack([self.field.distances_from_node(int(c))
                         for c in self.centers])

    def to_csv(self, path):
        pts = self.center_points()
        d = pts.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["node_index"]
            for j in range(d):
                head += [f"re_z{j + 1}", f"im_z{j + 1}"]
            w.writerow(head)
            for c, p in zip(self.centers, pts):
                row = [int(c)]
                for j in range(d):
                    row += [repr(p[j].real), repr(p[j].imag)]
                w.writerow(row)


def build_net(field: GeodesicField, r: float) -> Net:
    """Greedy farthest-first maximal packing; ties break to the lowest
    node index, so the result is deterministic."""
    n = len(field.grid)
    anchor = field.domain.anchor_point
    first = field.nearest_node(anchor)
    centers = [first]
    dmin = field.distances_from_node(first).copy()
    while True:
        far = float(np.max(dmin))
        if far < r:
            break
        nxt = int(np.argmax(dmin))  # argmax returns the lowest tied index
        centers.append(nxt)
        dmin = np.minimum(dmin, field.distances_from_node(nxt))
    return Net(separation=float(r), centers=np.array(centers, dtype=int),
               field=field)


def multiplicity(net: Net, R: float) -> int:
    """max over grid nodes x of #{centers within graph distance R of x}."""
    dists = net.center_distances()
    return int(np.max(np.sum(dists < R, axis=0)))


def multiplicity_table(net: Net, radii) -> dict:
    return {float(R): multiplicity(net, R) for R in radii}


def separation_audit(net: Net) -> float:
    """Smallest pairwise center distance (>= separation if valid)."""
    dists = net.center_distances()
    m = len(net)
    if m == 1:
        return math.inf
    pair = dists[:, net.centers]
    np.fill_diagonal(pair, np.inf)
    return float(np.min(pair))


def covering_audit(net: Net) -> float:
    """Fraction of grid nodes within the separation radius of a center."""
    dists = net.center_distances()
    return float(np.mean(np.min(dists, axis=0) < net.separation))


# -- partitions of unity ---------------------------------------------


def _ramp(t, r_inner, r_outer):
    """C^1 cutoff: 1 below r_inner, 0 above r_outer, cubic blend between."""
    s = np.clip((t - r_inner) / (r_outer - r_inner), 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


@dataclass
class Partition:
    """Cutoffs chi_hat_m = chi_m / sum_n chi_n supported in metric balls."""

    net: Net
    r_inner: float
    r_outer: float
    values: np.ndarray  # (n_centers, n_nodes), rows sum to 1 columnwise

    def evaluate(self, points, strict=True):
        """chi_hat_m at arbitrary interior points, (n_centers, n_pts).

        With strict=False, points outside every cutoff support get all
        zeros instead of raising.
        """
        field = self.net.field
        pts = np.atleast_2d(np.asarray(points, dtype=complex))
        k = min(field.k, len(field.grid))
        _, idx = field._tree.query(_realify(pts), k=k)
        idx = idx.reshape(len(pts), -1)
        flat = idx.ravel()
        lengths = field.segment_length(
            np.repeat(pts, idx.shape[1], axis=0),
            field.grid.nodes[flat]).reshape(idx.shape)
        dists = self.net.center_distances()
        chi = np.empty((len(self.net), len(pts)))
        for m in range(len(self.net)):
            dm = np.min(dists[m][idx] + lengths, axis=1)
            chi[m] = _ramp(dm, self.r_inner, self.r_outer)
        total = np.sum(chi, axis=0)
        if np.any(total <= 0.0):
            if strict:
                raise GeometryError("partition covering violated at a point")
            total = np.where(total > 0.0, total, 1.0)
        return chi / total


def partition_of_unity(net: Net, r_inner=None, r_outer=None) -> Partition:
    """Build the normalized cutoffs on the grid nodes.

    r_inner defaults to the net separation (covering makes the raw sum
    >= 1 everywhere); r_outer defaults to twice that.
    """
    if r_inner is None:
        r_inner = net.separation
    if r_outer is None:
        r_outer = 2.0 * r_inner
    if not r_inner < r_outer:
        raise GeometryError("need r_inner < r_outer")
    dists = net.center_distances()
    chi = _ramp(dists, r_inner, r_outer)
    total = np.sum(chi, axis=0)
    if np.any(total <= 0.0):
        raise GeometryError(
            "a grid node is not covered by any cutoff support")
    return Partition(net=net, r_inner=float(r_inner), r_outer=float(r_outer),
                     values=chi / total)


# -- charts on homogeneous models ------------------------------------


@dataclass(frozen=True)
class ChartMap:
    """Holomorphic embedding of the unit ball with Phi(0) = center."""

    domain: DomainSpec
    center: np.ndarray
    rho: float = 0.5

    def __post_init__(self):
        if not self.domain.homogeneous:
            raise GeometryError(
                "charts are only constructed on disc/ball/polydisc")

    def forward(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        a = self.center
        if self.domain.kind == "ball":
            u = self.rho * w
            na2 = float(np.sum(np.abs(a) ** 2))
            if na2 < 1e-30:
                return u
            s = math.sqrt(1.0 - na2)
            inner = u @ a.conj()
            proj = (inner / na2)[:, None] * a[None, :]
            return (a[None, :] - proj - s * (u - proj)) \
                / (1.0 - inner)[:, None]
        u = self.rho * w
        return (u + a[None, :]) / (1.0 + a.conj()[None, :] * u)

    def inverse(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        a = self.center
        if self.domain.kind == "ball":
            na2 = float(np.sum(np.abs(a) ** 2))
            if na2 < 1e-30:
                return z / self.rho
            s = math.sqrt(1.0 - na2)
            inner = z @ a.conj()
            proj = (inner / na2)[:, None] * a[None, :]
            phi = (a[None, :] - proj - s * (z - proj)) \
                / (1.0 - inner)[:, None]
            return phi / self.rho
        return (z - a[None, :]) / (1.0 - a.conj()[None, :] * z) / self.rho

    def det_jacobian(self, w):
        """det Phi'(w) over a batch, analytic for disc/polydisc, exact
        formula up to a unimodular constant for the ball."""
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        a = self.center
        d = self.domain.dim
        if self.domain.kind == "ball":
            na2 = float(np.sum(np.abs(a) ** 2))
            inner = (self.rho * w) @ a.conj()
            return (-1.0) ** d * self.rho ** d \
                * (1.0 - na2) ** ((d + 1) / 2.0) / (1.0 - inner) ** (d + 1)
        u = self.rho * w
        fac = self.rho * (1.0 - np.abs(a) ** 2)[None, :] \
            / (1.0 + a.conj()[None, :] * u) ** 2
        return np.prod(fac, axis=1)

    def dlog_absdet(self, w, h=1e-6):
        """euclidean norm of (d/dw_j) log |det Phi'(w)|, batched.

        For holomorphic f, the holomorphic gradient of log |f| is half
        the gradient of log f, computed by complex central differences.
        """
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        d = self.domain.dim
        grad = np.empty_like(w)
        det0 = self.det_jacobian(w)
        for j in range(d):
            step = np.zeros(d, dtype=complex)
            step[j] = h
            dp = self.det_jacobian(w + step)
            dm = self.det_jacobian(w - step)
            grad[:, j] = 0.5 * (np.log(dp / det0)
                                - np.log(dm / det0)) / (2.0 * h)
        return np.sqrt(np.sum(np.abs(grad) ** 2, axis=1))

    def cauchy_riemann_residual(self, n_samples=64, h=1e-5, seed=0):
        """Max |d Phi / d wbar| over random sample points in 0.5 B."""
        rng = np.random.default_rng(seed)
        d = self.domain.dim
        w = rng.normal(size=(n_samples, d)) + 1j * rng.normal(size=(n_samples, d))
        w *= (0.5 * rng.uniform(0, 1, n_samples)
              / np.maximum(np.linalg.norm(w, axis=1), 1e-12))[:, None]
        worst = 0.0
        for j in range(d):
            step = np.zeros(d, dtype=complex)
            step[j] = h
            dx = (self.forward(w + step) - self.forward(w - step)) / (2 * h)
            dy = (self.forward(w + 1j * step)
                  - self.forward(w - 1j * step)) / (2 * h)
            dbar = 0.5 * (dx + 1j * dy)
            worst = max(worst, float(np.max(np.abs(dbar))))
        return worst


def chart(dom: DomainSpec, zeta, rho=0.5) -> ChartMap:
    zeta = np.asarray(zeta, dtype=complex).reshape(-1)
    if not contains(dom, zeta):
        raise GeometryError("chart center must be interior")
    return ChartMap(domain=dom, center=zeta, rho=float(rho))


def beta(chartmap: ChartMap, engine: KernelEngine, u, w):
    """B(Phi(u), Phi(w)) det Phi'(u) conj(det Phi'(w))."""
    u = np.asarray(u, dtype=complex).reshape(-1)
    w = np.asarray(w, dtype=complex).reshape(-1)
    zu = chartmap.forward(u[None, :])[0]
    zw = chartmap.forward(w[None, :])[0]
    val = engine.kernel(zu, zw)
    return complex(val * chartmap.det_jacobian(u[None, :])[0]
                   * np.conj(chartmap.det_jacobian(w[None, :])[0]))


def beta_diagonal_range(chartmap: ChartMap, engine: KernelEngine,
                        n_samples=128, radius=0.9, seed=0):
    """min/max of beta(w, w) over a deterministic sample of radius*B."""
    rng = np.random.default_rng(seed)
    d = chartmap.domain.dim
    w = rng.normal(size=(n_samples, d)) + 1j * rng.normal(size=(n_samples, d))
    scale = radius * rng.uniform(0, 1, n_samples) ** (1.0 / (2 * d))
    w *= (scale / np.maximum(np.linalg.norm(w, axis=1), 1e-12))[:, None]
    z = chartmap.forward(w)
    vals = engine.kernel_diag(z) * np.abs(chartmap.det_jacobian(w)) ** 2
    return float(np.min(vals)), float(np.max(vals))


def multiplicity_json(net: Net, radii, path):
    with open(path, "w") as fh:
        json.dump({"separation": net.separation,
                   "n_centers": len(net),
                   "multiplicity": {str(R): m for R, m in
                                    multiplicity_table(net, radii).items()}},
                  fh, indent=2, sort_keys=True)
