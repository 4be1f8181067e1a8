"""Spectral densities, cutoff selection, correlation functions."""

import numpy as np
import pytest

from onfsim import bath, pipeline, waveguide
from onfsim.constants import C, FS, N1_SILICA, NM, OMEGA_0, OMEGA_350


@pytest.fixture(scope="module")
def sg_const(ctx_const_200):
    return pipeline.spectral_grids(ctx_const_200, 0.0)


@pytest.fixture(scope="module")
def sg_dl(ctx_dl_200):
    d = ctx_dl_200.separation(2.0)
    return pipeline.spectral_grids(ctx_dl_200, d)


class TestSpectralDensity:
    def test_nonnegative_everywhere(self, sg_const, sg_dl):
        assert np.all(sg_const.s_one >= 0)
        assert np.all(sg_dl.s_one >= 0)

    def test_two_point_bounded_by_one_point(self, sg_dl):
        assert np.all(np.abs(sg_dl.s_two) <= sg_dl.s_one * (1 + 1e-12))

    def test_coupling_scale_linearity(self, ctx_const_200):
        g1 = pipeline.spectral_grids(ctx_const_200, 0.0)
        geo = waveguide.FiberGeometry(a=ctx_const_200.a, R=100 * NM, d=0.0)
        g2 = bath.one_point_spectral_density(
            ctx_const_200.table, ctx_const_200.profile, geo,
            gamma_target=2 * ctx_const_200.config.gamma_target,
            omega0=ctx_const_200.omega0)
        assert np.allclose(g2.s_one, 2 * g1.s_one, rtol=1e-12)

    def test_d_zero_reduces_to_one_point(self, sg_const):
        g = bath.two_point_integrand(sg_const, 0.0)
        assert np.array_equal(g.s_two, g.s_one)

    def test_two_point_sign_changes_at_cosine_zeros(self, ctx_const_200):
        d = ctx_const_200.separation(2.0)
        g = pipeline.spectral_grids(ctx_const_200, d)
        zeros = bath.cosine_zeros(ctx_const_200.table, d)
        flips = np.nonzero(np.sign(g.s_two[:-1]) * np.sign(g.s_two[1:]) < 0)[0]
        flip_omegas = 0.5 * (g.omega[flips] + g.omega[flips + 1])
        dw = g.delta_omega
        # each sign flip of S_two sits within one grid cell of a cosine zero
        for fo in flip_omegas:
            assert np.min(np.abs(zeros - fo)) < dw

    def test_provenance_mismatch_rejected(self, ctx_const_200, ctx_dl_200):
        geo = waveguide.FiberGeometry(a=ctx_const_200.a, R=100 * NM)
        with pytest.raises(bath.BathError):
            bath.one_point_spectral_density(
                ctx_const_200.table, ctx_dl_200.profile, geo)

    def test_dl_grid_terminates_below_resonance(self, sg_dl, ctx_dl_200):
        assert sg_dl.cutoff_omega is not None
        assert sg_dl.cutoff_omega < ctx_dl_200.model.omega_R
        n = sg_dl.cutoff_index
        assert sg_dl.omega[n - 1] <= sg_dl.cutoff_omega < OMEGA_350


class TestCutoff:
    def test_zeros_satisfy_half_integer_condition(self, ctx_dl_200):
        d = ctx_dl_200.separation(2.0)
        zeros = bath.cosine_zeros(ctx_dl_200.table, d)
        assert len(zeros) > 3
        beta_at = ctx_dl_200.table.interp_beta(zeros)
        phase = beta_at * d / np.pi - 0.5
        assert np.max(np.abs(phase - np.round(phase))) < 1e-8

    def test_cutoff_is_cosine_zero_below_resonance(self, ctx_dl_200, sg_dl):
        d = ctx_dl_200.separation(2.0)
        cut = bath.choose_cutoff(ctx_dl_200.table, d, 2)
        assert cut == sg_dl.cutoff_omega
        bd = float(ctx_dl_200.table.interp_beta(cut)) * d
        assert abs(np.cos(bd)) < 1e-6

    def test_constant_model_bypasses_cutoff(self, ctx_const_200):
        cut = bath.choose_cutoff(ctx_const_200.table, 780 * NM, 2)
        assert cut == ctx_const_200.table.omega[-1]

    def test_tiny_separation_fails(self, ctx_dl_200):
        with pytest.raises(bath.CutoffError):
            bath.choose_cutoff(ctx_dl_200.table, 1e-9, 2)

    def test_downstream_convergence_over_higher_zeros(self, ctx_dl_200):
        d = ctx_dl_200.separation(2.0)
        rec = pipeline.cutoff_convergence_metric(ctx_dl_200, d)
        assert rec["applicable"]
        assert rec["max_rel_change"] < 1e-3


class TestCorrelationFunction:
    def test_d_zero_kernels_identical(self, ctx_const_200):
        g = pipeline.spectral_grids(ctx_const_200, 0.0)
        F1 = bath.correlation_function(g, "one_point", n_fft=2**16)
        F2 = bath.correlation_function(g, "two_point", n_fft=2**16)
        assert np.array_equal(F1.samples, F2.samples)

    def test_hermiticity_of_full_window(self, sg_const):
        F = bath.correlation_function(sg_const, "one_point", n_fft=2**16,
                                      keep_full_window=True)
        w = F.full_window
        # F(-t) = conj(F(t)): mirror indices, the omega0 anchor keeps the
        # phase alignment exact
        j = np.arange(1, len(w) // 2)
        scale = np.abs(w[j]).max()
        assert np.max(np.abs(w[len(w) - j] - np.conj(w[j]))) < 1e-10 * scale

    def test_plancherel_identity(self, sg_const):
        F = bath.correlation_function(sg_const, "one_point", n_fft=2**16,
                                      keep_full_window=True)
        assert bath.plancherel_mismatch(F, sg_const) < 1e-6

    def test_first_sample_is_total_weight(self, sg_const):
        F = bath.correlation_function(sg_const, "one_point", n_fft=2**16)
        assert F.samples[0].real > 0
        assert F.samples[0].imag == pytest.approx(0.0, abs=1e-9 * F.samples[0].real)
        assert F.samples[0].real == pytest.approx(
            float(np.sum(sg_const.s_one) * sg_const.delta_omega), rel=1e-12)

    def test_grid_refinement_stability(self, cache_dir):
        # halving delta_omega (doubling n_points) moves F by < 1e-4 in L2
        cfgs = [pipeline.RunConfig(model="constant",
                                   grid={"n_points": n},
                                   solver={"T_fs": 400.0})
                for n in (32768, 65536)]
        Fs = []
        for cfg in cfgs:
            ctx = pipeline.build_context(cfg, 200.0, cache_dir)
            g = pipeline.spectral_grids(ctx, 0.0)
            Fs.append(bath.correlation_function(g, "one_point",
                                                dt_target=0.02 * FS))
        n = min(len(Fs[0].samples), len(Fs[1].samples))
        n = min(n, int(300e-15 / Fs[0].dt))
        stride = int(round(Fs[0].dt / Fs[1].dt))
        a = Fs[0].samples[:n]
        b = Fs[1].samples[: n * stride: stride][:n]
        rel = np.linalg.norm(a - b) / np.linalg.norm(a)
        assert rel < 1e-4

    def test_nyquist_guard(self, ctx_dl_200):
        # huge separation without refining the grid violates the bound
        d = 1000 * 780 * NM
        g = pipeline.spectral_grids(ctx_dl_200, d, cut=False)
        with pytest.raises(bath.NyquistError):
            bath.correlation_function(g, "two_point", n_fft=2**17)

    def test_markovian_rate_matches_target(self, sg_const, sg_dl):
        for g in (sg_const, sg_dl):
            assert bath.markovian_rate(g) == pytest.approx(
                g.coupling_scale, rel=1e-9)

    def test_markovian_rate_outside_grid(self, sg_const):
        with pytest.raises(bath.BathError):
            bath.markovian_rate(sg_const, 100 * OMEGA_0)


class TestPeakDiagnostics:
    def test_two_point_peaks_are_mirror_symmetric(self, ctx_const_200):
        d = ctx_const_200.separation(2.0)
        g = pipeline.spectral_grids(ctx_const_200, d)
        F = bath.correlation_function(g, "two_point", dt_target=0.02 * FS,
                                      keep_full_window=True)
        t_neg, t_pos = bath.two_point_peaks(F)
        assert t_neg < 0 < t_pos
        assert abs(t_neg + t_pos) <= 2 * F.dt

    def test_peak_delay_tracks_group_delay(self, ctx_const_200):
        # the retardation peak sits at the group delay of the spectral
        # weight, within ~10% of beta'(omega0)*d
        d = ctx_const_200.separation(4.0)
        g = pipeline.spectral_grids(ctx_const_200, d)
        F = bath.correlation_function(g, "two_point", dt_target=0.02 * FS,
                                      keep_full_window=True)
        _, t_pos = bath.two_point_peaks(F)
        t_group = d / ctx_const_200.v_g0
        assert abs(t_pos - t_group) < 0.15 * t_group

    def test_fwhm_positive_and_resolved(self, sg_const):
        F = bath.correlation_function(sg_const, "one_point",
                                      dt_target=0.02 * FS)
        w = bath.fwhm(F)
        assert w > 4 * F.dt
