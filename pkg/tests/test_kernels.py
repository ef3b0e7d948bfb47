import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergmanlab import domains as dom
from bergmanlab.kernels import (KernelEngine, KernelError, engine_for,
                                multi_indices, orthonormalize,
                                reinhardt_basis)


class TestClosedForms:
    def test_disc_kernel_value(self, disc_engine):
        z, w = 0.3 + 0.1j, 0.2 - 0.4j
        expected = 1.0 / (math.pi * (1.0 - z * np.conj(w)) ** 2)
        got = disc_engine.kernel(np.array([z])[None, :],
                                 np.array([w])[None, :])[0]
        assert got == pytest.approx(expected)

    def test_ball_kernel_value(self, ball2_engine):
        z = np.array([0.3, 0.2j])
        w = np.array([0.1, -0.4])
        ip = np.sum(z * np.conj(w))
        expected = 2.0 / (math.pi ** 2 * (1.0 - ip) ** 3)
        assert ball2_engine.kernel(z[None, :], w[None, :])[0] \
            == pytest.approx(expected)

    def test_polydisc_kernel_is_product(self, bidisc_engine, disc_engine):
        z = np.array([0.3 + 0.1j, -0.2j])
        w = np.array([0.5, 0.1 + 0.1j])
        prod = 1.0
        for j in range(2):
            prod *= disc_engine.kernel(z[j:j + 1][None, :],
                                       w[j:j + 1][None, :])[0]
        assert bidisc_engine.kernel(z[None, :], w[None, :])[0] \
            == pytest.approx(prod)

    def test_hermitian_symmetry(self, ball2_engine):
        z = np.array([[0.3, 0.2j]])
        w = np.array([[0.1 - 0.2j, 0.4]])
        assert ball2_engine.kernel(z, w)[0] == pytest.approx(
            np.conj(ball2_engine.kernel(w, z)[0]))

    def test_singular_pair_rejected(self, disc_engine):
        with pytest.raises(KernelError):
            disc_engine.kernel(np.array([[1.0 + 0j]]),
                               np.array([[1.0 + 0j]]))


class TestNumericalKernel:
    def test_disc_numerical_matches_closed_form(self, disc_domain,
                                                disc_engine):
        grid = dom.build_grid(disc_domain, 0.0, scheme="product-polar",
                              degree=40)
        num = engine_for(disc_domain, grid, degree=40)
        rng = np.random.default_rng(1)
        pts = 0.8 * (rng.uniform(-1, 1, (30, 1))
                     + 1j * rng.uniform(-1, 1, (30, 1)))
        pts = pts[np.abs(pts[:, 0]) <= 0.8]
        worst = 0.0
        for i in range(len(pts) - 1):
            a = num.kernel(pts[i:i + 1], pts[i + 1:i + 2])[0]
            b = disc_engine.kernel(pts[i:i + 1], pts[i + 1:i + 2])[0]
            worst = max(worst, abs(a - b) / abs(b))
        assert worst <= 1e-6

    def test_reinhardt_basis_reproduces_kernel(self, bidisc_domain,
                                               bidisc_engine):
        num = KernelEngine(bidisc_domain,
                           basis=reinhardt_basis(bidisc_domain, 30))
        z = np.array([[0.4, 0.3j]])
        a = num.kernel_diag(z)[0]
        b = bidisc_engine.kernel_diag(z)[0]
        assert a == pytest.approx(b, rel=1e-6)

    def test_orthonormalize_gram_identity(self, disc_domain):
        grid = dom.build_grid(disc_domain, 0.0, scheme="product-polar",
                              degree=12)
        basis = orthonormalize(disc_domain, grid, 12)
        E = basis.evaluate(grid.nodes)
        G = (E.conj() * grid.weights[:, None]).T @ E
        assert np.max(np.abs(G - np.eye(len(basis)))) < 1e-10

    def test_subbasis_spans_low_degrees(self, disc_domain):
        grid = dom.build_grid(disc_domain, 0.0, scheme="product-polar",
                              degree=10)
        basis = orthonormalize(disc_domain, grid, 10)
        sub = basis.subbasis(4)
        assert len(sub) == len(multi_indices(1, 4))
        assert np.max(sub.degrees()) <= 4


class TestMetric:
    def test_disc_metric_closed_form(self, disc_engine):
        z = 0.4 + 0.2j
        g = disc_engine.metric(np.array([z])).matrix[0, 0].real
        assert g == pytest.approx(2.0 / (1.0 - abs(z) ** 2) ** 2)

    def test_ball_metric_determinant(self, ball2_engine):
        z = np.array([0.3, 0.1j])
        det = ball2_engine.volume_density(z)
        s = 1.0 - np.sum(np.abs(z) ** 2)
        assert det == pytest.approx(9.0 / s ** 3)

    def test_fd_metric_matches_closed_form(self, disc_domain, disc_engine):
        grid = dom.build_grid(disc_domain, 0.025)
        num = engine_for(disc_domain, grid, degree=30)
        z = np.array([0.3 + 0.2j])
        a = num.metric(z).matrix[0, 0].real
        b = disc_engine.metric(z).matrix[0, 0].real
        assert a == pytest.approx(b, rel=2e-3)

    def test_near_boundary_fd_refused(self, disc_domain):
        grid = dom.build_grid(disc_domain, 0.025)
        num = engine_for(disc_domain, grid, degree=20)
        with pytest.raises(KernelError):
            num.metric(np.array([0.999 + 0j]))

    @given(x=st.floats(-0.7, 0.7), y=st.floats(-0.7, 0.7))
    @settings(max_examples=25, deadline=None)
    def test_metric_positive_definite_ball(self, x, y):
        eng = engine_for(dom.ball(2))
        z = np.array([[x * 0.7 + 0.1j * y, y * 0.7]])
        lam = np.linalg.eigvalsh(eng.metric_batch(z))[0]
        assert lam[0] > 0

    def test_dlog_kernel_disc(self, disc_engine):
        z = np.array([[0.5 + 0.0j]])
        grad = disc_engine.dlog_kernel(z)[0, 0]
        assert grad == pytest.approx(2 * 0.5 / (1 - 0.25))

    def test_s_section_normalized(self, disc_engine, disc_grid):
        zeta = np.array([0.3 + 0.2j])
        s = disc_engine.s_section(zeta, disc_grid.nodes)
        mass = np.sum(disc_grid.weights * np.abs(s) ** 2)
        assert mass == pytest.approx(1.0, rel=0.01)
