"""Truncated Bergman projections, Hankel and multiplication operators.

All inner products are grid inner products against the same quadrature
grid used to orthonormalize the basis, which makes the truncated
projection idempotent by construction.  Column assembly is chunked over
nodes so large grids never materialize full Vandermonde matrices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .domains import QuadratureGrid
from .kernels import KernelEngine, OrthonormalBasis


class OperatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class SymbolFn:
    """A symbol phi: Omega -> C with optional analytic dbar data.

    smoothness: 'L2', 'C0' (continuous up to the closure), or 'C1'.
    dbar, when present, maps (n, d) points to the (n, d) components of
    (d phi / d zbar_j).
    """

    fn: object
    smoothness: str = "L2"
    dbar: object = None
    label: str = ""

    def __call__(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        out = np.asarray(self.fn(z), dtype=complex)
        if not np.all(np.isfinite(out)):
            raise OperatorError(f"symbol {self.label!r} not finite on grid")
        return out

    def dbar_values(self, z, h=1e-5):
        """Analytic dbar when available, else central differences."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.dbar is not None:
            return np.asarray(self.dbar(z), dtype=complex)
        if self.smoothness != "C1":
            raise OperatorError(
                "dbar requested for a symbol not tagged C1")
        d = z.shape[1]
        out = np.empty_like(z)
        for j in range(d):
            step = np.zeros(d, dtype=complex)
            step[j] = h
            dx = (self(z + step) - self(z - step)) / (2 * h)
            dy = (self(z + 1j * step) - self(z - 1j * step)) / (2 * h)
            out[:, j] = 0.5 * (dx + 1j * dy)
        return out

    def dbar_consistency(self, z, h=1e-4):
        """Max abs gap between analytic dbar and central differences."""
        if self.dbar is None:
            return 0.0
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        ana = np.asarray(self.dbar(z), dtype=complex)
        d = z.shape[1]
        worst = 0.0
        for j in range(d):
            step = np.zeros(d, dtype=complex)
            step[j] = h
            dx = (self(z + step) - self(z - step)) / (2 * h)
            dy = (self(z + 1j * step) - self(z - 1j * step)) / (2 * h)
            fd = 0.5 * (dx + 1j * dy)
            worst = max(worst, float(np.max(np.abs(fd - ana[:, j]))))
        return worst


def symbol_from_callable(fn, smoothness="L2", dbar=None, label=""):
    return SymbolFn(fn=fn, smoothness=smoothness, dbar=dbar, label=label)


@dataclass(frozen=True)
class OperatorTruncation:
    kind: str  # Hankel | Multiplication
    symbol: SymbolFn
    basis: OrthonormalBasis
    source_size: int
    compression: np.ndarray  # <T e_j, phi_i> against the basis frame
    column_gram: np.ndarray  # <T e_j, T e_i> in the grid inner product
    singular_values: np.ndarray  # descending, nonnegative

    def sigma_csv(self, path, degree=None):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["degree", "k", "sigma"])
            for k, s in enumerate(self.singular_values):
                w.writerow([degree if degree is not None
                            else self.basis.degree, k, repr(float(s))])


def _node_chunks(n_nodes, n_cols, budget=4_000_000):
    step = max(1, budget // max(n_cols, 1))
    for lo in range(0, n_nodes, step):
        yield lo, min(n_nodes, lo + step)


def _column_grams(symbol, basis, source, grid, apply_projection):
    """Accumulate A = <phi e_j, phi_i> and the column Gram.

    For Hankel columns the Gram is assembled from the explicit residual
    M - E A in a second pass; the algebraic shortcut G - A^H A loses
    half the working digits to cancellation when H is nearly zero.
    """
    nk, nj = len(basis), len(source)
    A = np.zeros((nk, nj), dtype=complex)
    for lo, hi in _node_chunks(len(grid), nk + nj):
        nodes = grid.nodes[lo:hi]
        w = grid.weights[lo:hi]
        E = basis.evaluate(nodes)
        M = symbol(nodes)[:, None] * source.evaluate(nodes)
        A += (E.conj() * w[:, None]).T @ M
    G = np.zeros((nj, nj), dtype=complex)
    for lo, hi in _node_chunks(len(grid), nk + nj):
        nodes = grid.nodes[lo:hi]
        w = grid.weights[lo:hi]
        M = symbol(nodes)[:, None] * source.evaluate(nodes)
        if apply_projection:
            M = M - basis.evaluate(nodes) @ A
        G += (M.conj() * w[:, None]).T @ M
    G = 0.5 * (G + G.conj().T)
    return A, G


def _singular_values(G):
    lam = np.linalg.eigvalsh(G)
    if lam[0] < -1e-8 * max(1.0, abs(lam[-1])):
        raise OperatorError(
            f"column Gram has a significantly negative eigenvalue "
            f"({lam[0]:.3e}); quadrature inconsistent")
    return np.sqrt(np.clip(lam, 0.0, None))[::-1]


def hankel_matrix(symbol: SymbolFn, basis: OrthonormalBasis,
                  grid: QuadratureGrid, guard=5,
                  per_variable=False) -> OperatorTruncation:
    """Truncation of H_phi f = phi f - P(phi f).

    The projection uses the full basis (degree N); source columns come
    from the degree N - guard sub-basis so truncation-boundary artifacts
    are quantified rather than hidden.  Pass guard=0 for symbols whose
    multiplication lowers holomorphic degree (e.g. conj-monomials),
    where no truncation bias exists.
    """
    source = basis.subbasis(basis.degree - guard, per_variable) \
        if guard > 0 else basis
    A, G = _column_grams(symbol, basis, source, grid, apply_projection=True)
    sig = _singular_values(G)
    comp = np.zeros_like(A)  # Hankel columns are grid-orthogonal to the frame
    return OperatorTruncation(kind="Hankel", symbol=symbol, basis=basis,
                              source_size=len(source), compression=comp,
                              column_gram=G, singular_values=sig)


def mult_matrix(symbol: SymbolFn, basis: OrthonormalBasis,
                grid: QuadratureGrid, guard=0,
                per_variable=False) -> OperatorTruncation:
    """Truncation of M_phi f = phi f, in the grid norm."""
    source = basis.subbasis(basis.degree - guard, per_variable) \
        if guard > 0 else basis
    A, G = _column_grams(symbol, basis, source, grid, apply_projection=False)
    sig = _singular_values(G)
    return OperatorTruncation(kind="Multiplication", symbol=symbol,
                              basis=basis, source_size=len(source),
                              compression=A, column_gram=G,
                              singular_values=sig)


def project(basis: OrthonormalBasis, grid: QuadratureGrid, values):
    """Truncated Bergman projection of a grid function."""
    values = np.asarray(values, dtype=complex)
    if not np.all(np.isfinite(values)):
        raise OperatorError("cannot project a non-finite grid function")
    E = basis.evaluate(grid.nodes)
    coeffs = (E.conj() * grid.weights[:, None]).T @ values
    return E @ coeffs


def grid_norm(grid: QuadratureGrid, values):
    return float(np.sqrt(np.sum(grid.weights * np.abs(values) ** 2)))


def weak_null_probe(symbol: SymbolFn, engine: KernelEngine,
                    basis: OrthonormalBasis, grid: QuadratureGrid,
                    centers) -> np.ndarray:
    """||H_phi s_zeta|| in the grid norm for each center zeta.

    Values trending to zero along zeta -> boundary are the compactness
    signature (kernel sections tend weakly to zero there).
    """
    out = np.empty(len(centers))
    phi_vals = symbol(grid.nodes)
    E = basis.evaluate(grid.nodes)
    for i, zeta in enumerate(centers):
        s = engine.s_section(np.asarray(zeta, dtype=complex), grid.nodes)
        v = phi_vals * s
        coeffs = (E.conj() * grid.weights[:, None]).T @ v
        out[i] = grid_norm(grid, v - E @ coeffs)
    return out


@dataclass(frozen=True)
class CompactnessIndicator:
    degrees: tuple
    counts: tuple
    threshold_ratio: float
    sigma0: float
    compact: bool
    probe_values: tuple = field(default=())

    @property
    def growing(self):
        return not self.compact


def compactness_indicator(build_truncation, degrees, threshold_ratio=0.5,
                          probe_values=None,
                          zero_tol=1e-8) -> CompactnessIndicator:
    """Tail dichotomy on truncations: the count of singular values above
    threshold_ratio * sigma_0 stays bounded for compact operators and
    grows with the truncation degree otherwise.

    build_truncation maps a degree to an OperatorTruncation.
    """
    counts = []
    sigma0 = 0.0
    for N in degrees:
        trunc = build_truncation(N)
        sig = trunc.singular_values
        s0 = float(sig[0]) if len(sig) else 0.0
        sigma0 = max(sigma0, s0)
        if s0 < zero_tol:
            counts.append(0)
        else:
            counts.append(int(np.sum(sig > threshold_ratio * s0)))
    bounded = (max(counts) - min(counts)) <= 1
    probe_ok = True
    if probe_values is not None and sigma0 >= zero_tol:
        vals = np.asarray(probe_values, dtype=float)
        probe_ok = vals[-1] < 0.5 * max(vals[0], zero_tol)
    compact = bounded and (probe_ok or sigma0 < zero_tol)
    return CompactnessIndicator(
        degrees=tuple(degrees), counts=tuple(counts),
        threshold_ratio=threshold_ratio, sigma0=sigma0, compact=compact,
        probe_values=tuple(probe_values) if probe_values is not None else ())
