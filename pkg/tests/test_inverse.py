import math

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from tfslab.errors import (
    FlatMisfitError,
    GridMismatchError,
    MLDomainError,
    RankDeficientError,
    SourceHypothesisError,
)
from tfslab.forward import SourceSpec, TimeGrid, project, solve_forward
from tfslab.inverse import (
    OrderSearchConfig,
    TikhonovConfig,
    build_initial_design,
    contour_for_mode,
    convolution_sigma_min,
    extract_modal_projection,
    invert_initial,
    invert_order,
    invert_source,
    laplace_identity_gap,
    modal_resolvent,
    order_misfit,
)
from tfslab.mlf import FractionalOrder
from tfslab.observe import make_mask, observe
from tfslab.spectral import EigenGroup, EigenSystem, Grid1D, analytic_eigensystem


@pytest.fixture(scope="module")
def small_eig():
    return analytic_eigensystem(1.0, 3, Grid1D(1.0, 19))


@pytest.fixture(scope="module")
def setup():
    grid = Grid1D(1.0, 99)
    eig = analytic_eigensystem(1.0, 8, grid)
    tg = TimeGrid(1.0, 50)
    mask = make_mask([(0.2, 0.4)], grid)
    return grid, eig, tg, mask


class TestDesignMatrix:
    def test_near_zero_eigenvalue_column_is_constant(self):
        # lambda -> 0 turns the state kernel into 1, so the column repeats
        # the eigenfunction samples across time
        grid = Grid1D(1.0, 3)
        phis = np.eye(3) / math.sqrt(grid.h)
        eig = EigenSystem(grid, np.array([1e-14, 1.0, 2.0]), phis,
                          (EigenGroup(1e-14, 0, 1), EigenGroup(1.0, 1, 2),
                           EigenGroup(2.0, 2, 3)))
        tg = TimeGrid(1.0, 5)
        mask = make_mask([(0.0, 1.0)], grid)
        G = build_initial_design(eig, FractionalOrder(0.5), tg, mask, 3)
        col = G[:, 0].reshape(5, 3)
        assert np.max(np.abs(col - col[0])) <= 1e-6 * np.max(np.abs(col))

    def test_weighting(self, setup):
        grid, eig, tg, mask = setup
        G = build_initial_design(eig, FractionalOrder(0.5), tg, mask, 4)
        # first column at the first time: E * phi * sqrt(h dt)
        from tfslab.mlf import ml_kernel

        k = ml_kernel(FractionalOrder(0.5), float(eig.lambdas[0]),
                      float(tg.times[0]), "state")
        expect = k * eig.phis[0, mask.indices] * math.sqrt(grid.h * tg.dt)
        np.testing.assert_allclose(G[: mask.n_nodes, 0], expect, rtol=1e-12)

    def test_sigma_min_positive_and_monotone_under_mask_shrink(self, setup):
        grid, eig, tg, _ = setup
        sigmas = []
        for iv in ((0.2, 0.8), (0.2, 0.5), (0.2, 0.4)):
            mask = make_mask([iv], grid)
            G = build_initial_design(eig, FractionalOrder(0.9), tg, mask, 8)
            sigmas.append(scipy.linalg.svdvals(G)[-1])
        assert sigmas[0] > 0.0
        assert sigmas[0] >= sigmas[1] >= sigmas[2] > 0.0


class TestInvertInitial:
    def test_zero_data_gives_zero(self, setup):
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.9)
        G = build_initial_design(eig, order, tg, mask, 8)
        zero = observe(
            solve_forward(np.zeros(grid.m), SourceSpec.none(), order, eig, tg),
            mask, 0.0, 0)
        res = invert_initial(zero, G, TikhonovConfig(1e-8, 8), eig)
        assert np.max(np.abs(res.modal)) == 0.0

    def test_noiseless_single_mode(self, setup):
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.9)
        G = build_initial_design(eig, order, tg, mask, 8)
        y = solve_forward(eig.phis[0].astype(complex), SourceSpec.none(), order,
                          eig, tg)
        res = invert_initial(observe(y, mask, 0.0, 0), G,
                             TikhonovConfig(1e-10, 8), eig)
        e1 = np.zeros(8, dtype=complex)
        e1[0] = 1.0
        assert np.linalg.norm(res.modal - e1) <= 1e-6

    def test_noisy_mixed_recovery(self, setup):
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.9)
        G = build_initial_design(eig, order, tg, mask, 8)
        y0 = (eig.phis[0] + eig.phis[1]) / math.sqrt(2.0)
        y = solve_forward(y0.astype(complex), SourceSpec.none(), order, eig, tg)
        # discrepancy-flavored choice: gamma at the noise-power scale
        res = invert_initial(observe(y, mask, 1e-3, 5), G,
                             TikhonovConfig(1e-6, 8), eig)
        truth = project(y0.astype(complex), eig)
        rel = np.linalg.norm(res.modal - truth) / np.linalg.norm(truth)
        assert rel <= 1e-1

    def test_rank_deficient_rejected_at_zero_gamma(self, setup):
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.5)
        G = build_initial_design(eig, order, tg, mask, 8)
        G = np.column_stack([G, G[:, -1]])  # duplicated column
        y = solve_forward(eig.phis[0].astype(complex), SourceSpec.none(), order,
                          eig, tg)
        data = observe(y, mask, 0.0, 0)
        with pytest.raises(RankDeficientError):
            invert_initial(data, G, TikhonovConfig(0.0, 9), eig)

    def test_tikhonov_noise_ladder(self, setup):
        # gamma = noise^2: reconstruction error decreases with the noise
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.9)
        G = build_initial_design(eig, order, tg, mask, 8)
        y0 = (eig.phis[0] + eig.phis[1]) / math.sqrt(2.0)
        truth = project(y0.astype(complex), eig)
        y = solve_forward(y0.astype(complex), SourceSpec.none(), order, eig, tg)
        errs = []
        for level in (1e-2, 1e-3, 1e-4):
            data = observe(y, mask, level, 11)
            res = invert_initial(data, G, TikhonovConfig(level**2, 8), eig)
            errs.append(np.linalg.norm(res.modal - truth))
        assert errs[0] > errs[1] > errs[2]


class TestInvertSource:
    def test_noiseless_mode_recovery(self, setup):
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.95)
        rho = np.ones(tg.n_t, dtype=complex)
        y = solve_forward(np.zeros(grid.m),
                          SourceSpec.separable(rho, eig.phis[1]), order, eig, tg)
        res = invert_source(observe(y, mask, 0.0, 0), rho, order, eig, tg, mask,
                            TikhonovConfig(1e-12, 8))
        e2 = np.zeros(8, dtype=complex)
        e2[1] = 1.0
        assert np.linalg.norm(res.modal - e2) <= 1e-5

    def test_zero_data_gives_zero(self, setup):
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.5)
        rho = np.ones(tg.n_t, dtype=complex)
        zero = observe(
            solve_forward(np.zeros(grid.m), SourceSpec.none(), order, eig, tg),
            mask, 0.0, 0)
        res = invert_source(zero, rho, order, eig, tg, mask,
                            TikhonovConfig(1e-10, 8))
        assert np.max(np.abs(res.modal)) <= 1e-14

    def test_parabolic_rho_mixture_recovery(self, setup):
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.95)
        t = tg.times
        rho = (t * (1.0 - t)).astype(complex)
        g = (0.8 * eig.phis[0] - 0.6 * eig.phis[2]).astype(complex)
        y = solve_forward(np.zeros(grid.m), SourceSpec.separable(rho, g),
                          order, eig, tg)
        # the weighted source columns are O(1e-4), so gamma sits at the
        # squared-noise scale of the weighted data, not of the raw field
        res = invert_source(observe(y, mask, 1e-3, 3), rho, order, eig, tg, mask,
                            TikhonovConfig(1e-12, 8))
        truth = project(g, eig)
        rel = np.linalg.norm(res.modal - truth) / np.linalg.norm(truth)
        assert rel <= 1e-1

    def test_vanishing_rho_rejected(self, setup):
        grid, eig, tg, mask = setup
        order = FractionalOrder(0.5)
        zero = observe(
            solve_forward(np.zeros(grid.m), SourceSpec.none(), order, eig, tg),
            mask, 0.0, 0)
        with pytest.raises(SourceHypothesisError):
            invert_source(zero, np.zeros(tg.n_t), order, eig, tg, mask,
                          TikhonovConfig(1e-10, 8))


class TestInvertOrder:
    def test_noiseless_truth_recovery(self, setup):
        grid, eig, tg, mask = setup
        y0 = eig.phis[0].astype(complex)
        y = solve_forward(y0, SourceSpec.none(), FractionalOrder(0.5), eig, tg)
        data = observe(y, mask, 0.0, 0)
        res = invert_order(data, y0, eig, tg, mask,
                           OrderSearchConfig(0.25, 0.85, 25, 1e-4))
        assert abs(res.order - 0.5) <= 1e-3
        assert res.residual <= 1e-10

    def test_misfit_vanishes_at_truth(self, setup):
        grid, eig, tg, mask = setup
        y0 = eig.phis[0].astype(complex)
        y = solve_forward(y0, SourceSpec.none(), FractionalOrder(0.4), eig, tg)
        data = observe(y, mask, 0.0, 0)
        assert order_misfit(data, y0, 0.4, "standard_i", eig, tg, mask) <= 1e-22

    def test_discriminability(self, setup):
        grid, eig, tg, mask = setup
        y0 = eig.phis[0].astype(complex)
        y = solve_forward(y0, SourceSpec.none(), FractionalOrder(0.4), eig, tg)
        data = observe(y, mask, 0.0, 0)
        m = order_misfit(data, y0, 0.6, "standard_i", eig, tg, mask)
        d2 = float(grid.h * tg.dt * np.sum(np.abs(data.values) ** 2))
        assert m > 1e-3 * d2

    def test_zero_datum_rejected(self, setup):
        grid, eig, tg, mask = setup
        y0 = eig.phis[0].astype(complex)
        y = solve_forward(y0, SourceSpec.none(), FractionalOrder(0.5), eig, tg)
        data = observe(y, mask, 0.0, 0)
        with pytest.raises(SourceHypothesisError):
            invert_order(data, np.zeros(grid.m), eig, tg, mask,
                         OrderSearchConfig(0.3, 0.7))

    def test_workers_do_not_change_result(self, setup):
        grid, eig, tg, mask = setup
        y0 = eig.phis[0].astype(complex)
        y = solve_forward(y0, SourceSpec.none(), FractionalOrder(0.5), eig, tg)
        data = observe(y, mask, 0.0, 0)
        cfg = OrderSearchConfig(0.3, 0.7, 9, 1e-3)
        r1 = invert_order(data, y0, eig, tg, mask, cfg, workers=1)
        r2 = invert_order(data, y0, eig, tg, mask, cfg, workers=4)
        assert r1.order == r2.order

    def test_flat_landscape_flagged(self, setup, monkeypatch):
        grid, eig, tg, mask = setup
        y0 = eig.phis[0].astype(complex)
        y = solve_forward(y0, SourceSpec.none(), FractionalOrder(0.5), eig, tg)
        data = observe(y, mask, 0.0, 0)
        import tfslab.inverse as inv

        monkeypatch.setattr(inv, "order_misfit",
                            lambda *args, **kw: 1.0)
        with pytest.raises(FlatMisfitError):
            inv.invert_order(data, y0, eig, tg, mask,
                             OrderSearchConfig(0.3, 0.7, 5, 1e-3))


class TestLaplaceIdentity:
    def test_zero_mu_reduces_to_exponential_transform(self):
        gap = laplace_identity_gap(FractionalOrder(0.5), 0.0, 2.0 + 0j, 20.0)
        assert gap <= 1e-8

    def test_spec_cases(self):
        g1 = laplace_identity_gap(FractionalOrder(0.5), math.pi**2, 1.0 + 0j, 200.0)
        assert g1 <= 1e-4
        g2 = laplace_identity_gap(FractionalOrder(0.7), 5.0, 2.0 + 3.0j, 14.0)
        assert g2 <= 1e-4

    def test_gap_shrinks_with_horizon(self):
        g_short = laplace_identity_gap(FractionalOrder(0.5), 4.0, 0.5 + 0j, 30.0,
                                       tail_tol=1e-2)
        g_long = laplace_identity_gap(FractionalOrder(0.5), 4.0, 0.5 + 0j, 60.0,
                                      tail_tol=1e-2)
        bound = 10.0 * math.exp(-0.5 * 30.0) / 0.5
        assert g_short <= bound
        assert g_long <= g_short + 1e-12

    def test_left_half_plane_rejected(self):
        with pytest.raises(MLDomainError):
            laplace_identity_gap(FractionalOrder(0.5), 1.0, -1.0 + 0j, 10.0)

    def test_insufficient_horizon_rejected(self):
        with pytest.raises(MLDomainError):
            laplace_identity_gap(FractionalOrder(0.5), 1.0, 0.1 + 0j, 5.0)


class TestResidueExtraction:
    def test_single_pole_exact(self, small_eig):
        coeffs = np.array([2.0 - 1.0j, 0.0, 0.0])
        S = modal_resolvent(coeffs, small_eig)
        got = extract_modal_projection(S, contour_for_mode(small_eig, 0, 64))
        expect = coeffs[0] * small_eig.phis[0]
        assert np.max(np.abs(got - expect)) <= 1e-10 * np.max(np.abs(expect))

    def test_neighbor_suppression(self, small_eig):
        coeffs = np.array([1.0, 0.5, 0.0])
        S = modal_resolvent(coeffs, small_eig)
        got = extract_modal_projection(S, contour_for_mode(small_eig, 1, 64))
        expect = coeffs[1] * small_eig.phis[1]
        assert np.max(np.abs(got - expect)) <= 1e-8

    def test_no_energy_gives_zero(self, small_eig):
        S = modal_resolvent(np.array([0.0, 1.0, 0.0]), small_eig)
        got = extract_modal_projection(S, contour_for_mode(small_eig, 0, 64))
        assert np.max(np.abs(got)) <= 1e-8

    def test_geometric_convergence(self, small_eig):
        coeffs = np.array([1.0, 0.7, 0.0])
        S = modal_resolvent(coeffs, small_eig)
        expect = coeffs[1] * small_eig.phis[1]
        errs = []
        for n in (8, 16, 32):
            got = extract_modal_projection(S, contour_for_mode(small_eig, 1, n))
            errs.append(np.max(np.abs(got - expect)))
        for e0, e1 in zip(errs, errs[1:]):
            if e0 <= 1e-12:
                break
            assert e1 <= 0.5 * e0

    def test_radius_validation(self, small_eig):
        gap = small_eig.distinct[1].mu - small_eig.distinct[0].mu
        with pytest.raises(GridMismatchError):
            contour_for_mode(small_eig, 0, 64, radius=0.6 * gap)
        with pytest.raises(GridMismatchError):
            contour_for_mode(small_eig, 0, 4)

    def test_masked_extraction(self, small_eig):
        from tfslab.observe import make_mask

        mask = make_mask([(0.3, 0.7)], small_eig.grid)
        coeffs = np.array([1.5, 0.0, 0.0])
        S = modal_resolvent(coeffs, small_eig, mask.indices)
        got = extract_modal_projection(S, contour_for_mode(small_eig, 0, 64))
        expect = 1.5 * small_eig.phis[0][mask.indices]
        assert np.max(np.abs(got - expect)) <= 1e-10


class TestConvolutionSigmaMin:
    def test_zero_rho(self):
        tg = TimeGrid(1.0, 20)
        assert convolution_sigma_min(np.zeros(20), tg) == 0.0

    def test_constant_rho_matches_direct_svd(self):
        tg = TimeGrid(1.0, 15)
        got = convolution_sigma_min(np.ones(15), tg)
        C = np.tril(np.ones((15, 15))) * tg.dt
        expect = scipy.linalg.svdvals(C)[-1]
        assert got == pytest.approx(expect, rel=1e-12)
        assert got > 0.0

    def test_delayed_rho_is_numerically_noninjective(self):
        tg = TimeGrid(1.0, 24)
        rho = np.where(tg.times < 0.5, 0.0, 1.0).astype(complex)
        smin = convolution_sigma_min(rho, tg)
        norm = tg.dt * 12  # crude scale of ||C||
        assert smin <= 1e-12 * norm
