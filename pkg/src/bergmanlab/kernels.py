"""Bergman kernels, metrics, and normalized kernel sections.

Closed forms are used on the disc, ball, and polydisc; on other domains
the kernel is approximated by orthonormalizing monomials against a
quadrature grid.  The metric is the complex Hessian (Levi form) of
log B(z, z) and the volume density is its determinant, so that the
metric volume form is ``volume_density * dmu``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .domains import (DomainSpec, DomainError, QuadratureGrid, boundary_gap,
                      contains, monomial_norm2)


class KernelError(RuntimeError):
    pass


def multi_indices(dim, degree, per_variable=False):
    """All monomial exponents with total degree <= degree (or each
    exponent <= degree when per_variable), in lexicographic order."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    idx = [()]
    for _ in range(dim):
        idx = [t + (k,) for t in idx for k in range(degree + 1)]
    if not per_variable:
        idx = [t for t in idx if sum(t) <= degree]
    # degree-graded order, so triangular orthonormalization is graded too
    return np.array(sorted(idx, key=lambda t: (sum(t), t)), dtype=int)


def monomial_matrix(z, alphas):
    """Vandermonde-style matrix M[i, k] = z_i ^ alphas[k]."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    n, d = z.shape
    powmax = int(alphas.max()) if len(alphas) else 0
    pows = np.empty((d, powmax + 1, n), dtype=complex)
    for j in range(d):
        pows[j, 0] = 1.0
        for p in range(1, powmax + 1):
            pows[j, p] = pows[j, p - 1] * z[:, j]
    M = np.ones((n, len(alphas)), dtype=complex)
    for j in range(d):
        M *= pows[j, alphas[:, j]].T
    return M


@dataclass(frozen=True)
class OrthonormalBasis:
    """Orthonormalized monomial span of A^2(Omega), truncated at a degree."""

    domain: DomainSpec
    alphas: np.ndarray  # (n_mono, d)
    coeffs: np.ndarray  # (n_mono, n_kept)
    grid: QuadratureGrid | None
    degree: int
    smallest_retained: float
    dropped: int

    def __len__(self):
        return self.coeffs.shape[1]

    def evaluate(self, z):
        """phi_k(z) for all retained functions; (n_points, n_kept)."""
        return monomial_matrix(z, self.alphas) @ self.coeffs

    def evaluate_derivative(self, z, j):
        """(d phi_k / d z_j)(z), exact monomial differentiation."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        shifted = self.alphas.copy()
        shifted[:, j] = np.maximum(shifted[:, j] - 1, 0)
        D = monomial_matrix(z, shifted) * self.alphas[None, :, j]
        return D @ self.coeffs

    def degrees(self):
        """Total degree of each monomial (not each basis function)."""
        return self.alphas.sum(axis=1)

    def subbasis(self, degree, per_variable=False):
        """Restriction to monomials of lower degree, re-orthonormalized
        trivially when the coefficient matrix is degree-graded."""
        if per_variable:
            keep = np.all(self.alphas <= degree, axis=1)
        else:
            keep = self.degrees() <= degree
        cols = [k for k in range(self.coeffs.shape[1])
                if np.allclose(self.coeffs[~keep, k], 0.0)]
        return OrthonormalBasis(domain=self.domain,
                                alphas=self.alphas[keep],
                                coeffs=self.coeffs[np.ix_(
                                    np.nonzero(keep)[0], cols)],
                                grid=self.grid, degree=degree,
                                smallest_retained=self.smallest_retained,
                                dropped=self.dropped)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            d = self.alphas.shape[1]
            head = [f"alpha{j + 1}" for j in range(d)]
            head += [f"re_c{k}" for k in range(len(self))]
            head += [f"im_c{k}" for k in range(len(self))]
            w.writerow(head)
            for i in range(len(self.alphas)):
                row = list(map(int, self.alphas[i]))
                row += [repr(v) for v in self.coeffs[i].real]
                row += [repr(v) for v in self.coeffs[i].imag]
                w.writerow(row)


def orthonormalize(dom: DomainSpec, grid: QuadratureGrid, degree: int,
                   cutoff=1e-10, per_variable=False) -> OrthonormalBasis:
    """Gram-orthonormalize monomials against grid quadrature.

    Directions whose Gram eigenvalue falls below cutoff * max are dropped
    and reported in the conditioning fields.
    """
    alphas = multi_indices(dom.dim, degree, per_variable)
    n_mono = len(alphas)
    G = np.zeros((n_mono, n_mono), dtype=complex)
    step = max(1, 4_000_000 // n_mono)
    for lo in range(0, len(grid), step):
        V = monomial_matrix(grid.nodes[lo:lo + step], alphas)
        G += (V.conj().T * grid.weights[lo:lo + step]) @ V
    G = 0.5 * (G + G.conj().T)
    try:
        # graded (triangular) orthonormalization in degree order
        L = np.linalg.cholesky(G)
        C = np.linalg.inv(L).conj().T
        small = float(np.min(np.abs(np.diag(L))) ** 2)
        if small < cutoff * float(np.max(np.abs(np.diag(L))) ** 2):
            raise np.linalg.LinAlgError
        return OrthonormalBasis(domain=dom, alphas=alphas, coeffs=C,
                                grid=grid, degree=degree,
                                smallest_retained=small, dropped=0)
    except np.linalg.LinAlgError:
        pass
    lam, U = np.linalg.eigh(G)
    keep = lam > cutoff * lam[-1]
    if not np.any(keep):
        raise KernelError("Gram matrix numerically zero")
    C = U[:, keep] / np.sqrt(lam[keep])
    return OrthonormalBasis(domain=dom, alphas=alphas, coeffs=C, grid=grid,
                            degree=degree,
                            smallest_retained=float(lam[keep][0]),
                            dropped=int(np.sum(~keep)))


def reinhardt_basis(dom: DomainSpec, degree: int,
                    per_variable=False) -> OrthonormalBasis:
    """Exact orthonormal monomial basis on Reinhardt model domains,
    using closed-form monomial norms (monomials are orthogonal there)."""
    alphas = multi_indices(dom.dim, degree, per_variable)
    norms = np.array([monomial_norm2(dom, a) for a in alphas])
    C = np.diag(1.0 / np.sqrt(norms)).astype(complex)
    return OrthonormalBasis(domain=dom, alphas=alphas, coeffs=C, grid=None,
                            degree=degree,
                            smallest_retained=float(norms.min()), dropped=0)


@dataclass(frozen=True)
class MetricTensor:
    point: np.ndarray
    matrix: np.ndarray  # (d, d) Hermitian positive definite

    @property
    def determinant(self):
        return float(np.linalg.det(self.matrix).real)

    @property
    def inverse(self):
        return np.linalg.inv(self.matrix)


class KernelEngine:
    """Evaluator for B_Omega, the Bergman metric, and kernel sections.

    mode 'closed-form' on disc/ball/polydisc, 'numerical' (orthonormal
    basis) elsewhere.
    """

    def __init__(self, dom: DomainSpec, basis: OrthonormalBasis = None):
        self.domain = dom
        self.basis = basis
        if basis is not None:
            self.mode = "numerical"
        elif dom.kind in ("disc", "ball", "polydisc"):
            self.mode = "closed-form"
        else:
            raise KernelError(
                f"{dom.kind} domains need an orthonormal basis")

    # -- kernel -------------------------------------------------------

    def kernel(self, z, w):
        """B(z, w); broadcasts when z or w is a batch (n, d)."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        squeeze = z.ndim == 1 and w.ndim == 1
        z = np.atleast_2d(z)
        w = np.atleast_2d(w)
        if self.mode == "numerical":
            val = np.einsum("ik,jk->ij", self.basis.evaluate(z),
                            self.basis.evaluate(w).conj())
        else:
            val = self._closed_form(z[:, None, :], w[None, :, :])
        if squeeze:
            return complex(val[0, 0])
        if val.shape[0] == 1:
            return val[0]
        if val.shape[1] == 1:
            return val[:, 0]
        return val

    def _closed_form(self, z, w):
        kind, d = self.domain.kind, self.domain.dim
        if kind == "disc":
            den = 1.0 - z[..., 0] * w[..., 0].conj()
            self._check_denominator(den)
            return 1.0 / (math.pi * den ** 2)
        if kind == "ball":
            den = 1.0 - np.sum(z * w.conj(), axis=-1)
            self._check_denominator(den)
            return math.factorial(d) / (math.pi ** d * den ** (d + 1))
        den = 1.0 - z * w.conj()
        self._check_denominator(den)
        return np.prod(1.0 / (math.pi * den ** 2), axis=-1)

    @staticmethod
    def _check_denominator(den):
        if np.any(np.abs(den) < 1e-14):
            raise KernelError("kernel evaluated at a singular pair")

    def kernel_diag(self, z):
        """B(z, z) as a real array over a batch of points."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.mode == "numerical":
            out = np.empty(len(z))
            step = max(1, 2_000_000 // max(len(self.basis.alphas), 1))
            for lo in range(0, len(z), step):
                phi = self.basis.evaluate(z[lo:lo + step])
                out[lo:lo + step] = np.sum(np.abs(phi) ** 2, axis=1)
            return out
        return self._closed_form(z, z).real

    def log_kernel_diag(self, z):
        return np.log(self.kernel_diag(z))

    # -- metric -------------------------------------------------------

    def metric(self, zeta, h=None) -> MetricTensor:
        zeta = np.asarray(zeta, dtype=complex).reshape(-1)
        if self.mode == "closed-form":
            g = self._closed_form_metric(zeta[None, :])[0]
        else:
            res = self.basis.grid.resolution if self.basis.grid else 1e-3
            guard = max(1e-4, res / 10.0) if h is None else h
            gap = boundary_gap(self.domain, zeta)
            if gap < 10.0 * guard:
                raise KernelError(
                    f"point too close to the boundary (gap {gap:.3g}, "
                    f"scale {guard:.3g}); the truncated basis is not "
                    f"trustworthy there")
            g = (self._fd_metric(zeta[None, :], h)
                 if h is not None else
                 self._basis_metric(zeta[None, :]))[0]
        lam = np.linalg.eigvalsh(g)
        if lam[0] <= 0:
            raise KernelError(
                f"metric not positive definite (smallest eigenvalue "
                f"{lam[0]:.3e})")
        return MetricTensor(point=zeta, matrix=g)

    def metric_batch(self, z, h=None):
        """(n, d, d) Hermitian matrices; vectorized."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.mode == "closed-form":
            return self._closed_form_metric(z)
        if h is not None:
            # explicit finite-difference path, kept for cross-checks
            step = max(1, 200_000 // (8 * z.shape[1] ** 2))
            out = np.empty((len(z), z.shape[1], z.shape[1]), dtype=complex)
            for lo in range(0, len(z), step):
                out[lo:lo + step] = self._fd_metric(z[lo:lo + step], h)
            return out
        return self._basis_metric(z)

    def _basis_metric(self, z):
        """Levi form of log B from exact basis derivatives:
        g = T/B - v v^H / B^2 with B = sum |phi|^2, v_j = sum phi_j' conj
        (phi), T_jk = sum (d_j phi)(d_k phi)^bar."""
        d = z.shape[1]
        n = len(z)
        g = np.empty((n, d, d), dtype=complex)
        step = max(1, 1_000_000 // ((d + 1) * max(len(self.basis.alphas),
                                                  1)))
        for lo in range(0, n, step):
            zc = z[lo:lo + step]
            E = self.basis.evaluate(zc)
            B = np.sum(np.abs(E) ** 2, axis=1)
            F = np.stack([self.basis.evaluate_derivative(zc, j)
                          for j in range(d)], axis=1)  # (m, d, nb)
            v = np.einsum("mjb,mb->mj", F, E.conj())
            T = np.einsum("mjb,mkb->mjk", F, F.conj())
            g[lo:lo + step] = T / B[:, None, None] \
                - v[:, :, None] * v.conj()[:, None, :] \
                / (B ** 2)[:, None, None]
        return 0.5 * (g + np.conj(np.swapaxes(g, 1, 2)))

    def _closed_form_metric(self, z):
        kind, d = self.domain.kind, self.domain.dim
        n = len(z)
        if kind == "disc":
            s = (1.0 - np.abs(z[:, 0]) ** 2) ** 2
            return (2.0 / s).reshape(n, 1, 1).astype(complex)
        if kind == "ball":
            nrm2 = np.sum(np.abs(z) ** 2, axis=1)
            s = 1.0 - nrm2
            eye = np.eye(d)
            g = (d + 1) * (s[:, None, None] * eye[None]
                           + z.conj()[:, :, None] * z[:, None, :])
            return g / (s ** 2)[:, None, None]
        g = np.zeros((n, d, d), dtype=complex)
        for j in range(d):
            g[:, j, j] = 2.0 / (1.0 - np.abs(z[:, j]) ** 2) ** 2
        return g

    def _fd_hessian_real(self, z, h):
        """Real Hessian of log B(x, x) over R^{2d}, batched."""
        n, d = z.shape
        m = 2 * d
        e = np.zeros((m, d), dtype=complex)
        for j in range(d):
            e[2 * j, j] = 1.0
            e[2 * j + 1, j] = 1j
        F0 = self.log_kernel_diag(z)
        H = np.empty((n, m, m))
        for a in range(m):
            Fp = self.log_kernel_diag(z + h * e[a])
            Fm = self.log_kernel_diag(z - h * e[a])
            H[:, a, a] = (Fp - 2.0 * F0 + Fm) / h ** 2
        for a in range(m):
            for b in range(a + 1, m):
                Fpp = self.log_kernel_diag(z + h * (e[a] + e[b]))
                Fpm = self.log_kernel_diag(z + h * (e[a] - e[b]))
                Fmp = self.log_kernel_diag(z - h * (e[a] - e[b]))
                Fmm = self.log_kernel_diag(z - h * (e[a] + e[b]))
                H[:, a, b] = (Fpp - Fpm - Fmp + Fmm) / (4.0 * h ** 2)
                H[:, b, a] = H[:, a, b]
        return H

    def _fd_metric(self, z, h):
        H1 = self._fd_hessian_real(z, h)
        H2 = self._fd_hessian_real(z, h / 2.0)
        H = (4.0 * H2 - H1) / 3.0  # one Richardson step
        d = z.shape[1]
        xj = 2 * np.arange(d)
        yj = xj + 1
        g = 0.25 * (H[:, xj][:, :, xj] + H[:, yj][:, :, yj]
                    + 1j * (H[:, xj][:, :, yj] - H[:, yj][:, :, xj]))
        return 0.5 * (g + np.conj(np.swapaxes(g, 1, 2)))

    def volume_density(self, zeta) -> float:
        return self.metric(zeta).determinant

    def volume_density_batch(self, z, h=None):
        g = self.metric_batch(z, h=h)
        return np.linalg.det(g).real

    # -- gradient of the potential ------------------------------------

    def dlog_kernel(self, z, h=1e-5):
        """Holomorphic gradient (d log B(z,z) / d z_j), batched (n, d)."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        kind, d = self.domain.kind, self.domain.dim
        if self.mode == "closed-form":
            if kind == "disc":
                s = 1.0 - np.abs(z[:, 0]) ** 2
                return (2.0 * z.conj()[:, 0] / s)[:, None]
            if kind == "ball":
                s = 1.0 - np.sum(np.abs(z) ** 2, axis=1)
                return (d + 1) * z.conj() / s[:, None]
            s = 1.0 - np.abs(z) ** 2
            return 2.0 * z.conj() / s
        # exact basis derivatives: d_j log B = (sum phi_j' conj(phi)) / B
        E = self.basis.evaluate(z)
        B = np.sum(np.abs(E) ** 2, axis=1)
        out = np.empty_like(z)
        for j in range(d):
            F = self.basis.evaluate_derivative(z, j)
            out[:, j] = np.einsum("mb,mb->m", F, E.conj()) / B
        return out

    # -- normalized kernel sections -----------------------------------

    def s_section(self, zeta, z):
        """s_zeta(z) = B(z, zeta) / sqrt(B(zeta, zeta)); unit L^2 norm."""
        zeta = np.asarray(zeta, dtype=complex).reshape(-1)
        root = math.sqrt(self.kernel_diag(zeta[None, :])[0])
        return self.kernel(z, zeta) / root


def engine_for(dom: DomainSpec, grid: QuadratureGrid = None, degree=None,
               cutoff=1e-10, exact=False, per_variable=False) -> KernelEngine:
    """Convenience constructor: closed form when available, otherwise a
    numerical engine (exact Reinhardt basis or grid orthonormalization)."""
    if degree is None and dom.kind in ("disc", "ball", "polydisc"):
        return KernelEngine(dom)
    if exact or grid is None:
        basis = reinhardt_basis(dom, degree, per_variable=per_variable)
    else:
        basis = orthonormalize(dom, grid, degree, cutoff=cutoff,
                               per_variable=per_variable)
    return KernelEngine(dom, basis=basis)


def kernel_scan_csv(engine: KernelEngine, pairs, path):
    """Export kernel values over (z, w) pairs as CSV."""
    d = engine.domain.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = []
        for j in range(d):
            head += [f"re_z{j + 1}", f"im_z{j + 1}"]
        for j in range(d):
            head += [f"re_w{j + 1}", f"im_w{j + 1}"]
        w.writerow(head + ["re_B", "im_B"])
        for zp, wp in pairs:
            val = engine.kernel(np.asarray(zp), np.asarray(wp))
            row = []
            for j in range(d):
                row += [repr(complex(zp[j]).real), repr(complex(zp[j]).imag)]
            for j in range(d):
                row += [repr(complex(wp[j]).real), repr(complex(wp[j]).imag)]
            w.writerow(row + [repr(val.real), repr(val.imag)])
