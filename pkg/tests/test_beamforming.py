"""Beamformer optimality, induced laws, and channel-estimation behavior."""

import numpy as np
import pytest
from scipy import linalg, stats

from sicnet import (
    DegenerateChannelError,
    Interferer,
    NetworkRealization,
    ParameterError,
    RngStream,
    SystemParams,
    collect_trials,
    estimate_csi_explicit,
    post_cancellation_gain,
    residual_noise_shortcut,
    sample_network,
    sir_imperfect,
    split_interferers,
    zf_mrc,
)
from sicnet.beamforming import zf_mrc_batch


def cvec(rng, n, size=None):
    shape = (n, 2) if size is None else (size, n, 2)
    return (rng.generator.standard_normal(shape) * np.sqrt(0.5)).view(np.complex128)[..., 0]


def test_zf_mrc_no_constraints_is_mrc():
    rng = RngStream(1)
    h0 = cvec(rng, 4)
    bf = zf_mrc(h0, [])
    assert np.allclose(bf.v0, h0 / np.linalg.norm(h0), atol=1e-12)


def test_zf_mrc_orthogonal_nulls_leave_mrc():
    h0 = np.array([1.0, 0.0, 0.0], complex)
    nulled = [np.array([0.0, 1.0, 0.0], complex), np.array([0.0, 0.0, 1.0], complex)]
    bf = zf_mrc(h0, nulled)
    assert np.allclose(bf.v0, h0, atol=1e-12)


def test_zf_mrc_constraints_and_norm():
    rng = RngStream(2)
    for _ in range(50):
        h0 = cvec(rng, 5)
        nulled = [cvec(rng, 5) for _ in range(3)]
        bf = zf_mrc(h0, nulled)
        assert abs(np.linalg.norm(bf.v0) - 1.0) < 1e-12
        for h in nulled:
            assert abs(np.vdot(bf.v0, h)) <= 1e-10 * np.linalg.norm(h)


def test_zf_mrc_rejects_too_many_nulls_and_degeneracy():
    rng = RngStream(3)
    h0 = cvec(rng, 3)
    with pytest.raises(ParameterError):
        zf_mrc(h0, [cvec(rng, 3) for _ in range(3)])
    v = cvec(rng, 3)
    with pytest.raises(DegenerateChannelError):
        zf_mrc(h0, [v, 2.0 * v])


def test_zf_mrc_maximizes_over_null_space():
    # oracle: SVD null-space basis (independent of the Gram-Schmidt path)
    # plus 200 random unit vectors satisfying the constraints
    rng = RngStream(4)
    gen = rng.generator
    for _ in range(100):
        h0 = cvec(rng, 4)
        nulled = np.array([cvec(rng, 4) for _ in range(2)])
        bf = zf_mrc(h0, nulled)
        w_opt = float(np.abs(np.vdot(bf.v0, h0)) ** 2)
        basis = linalg.null_space(nulled.conj())     # rows h^H v = 0
        coeff = (gen.standard_normal((200, basis.shape[1], 2)) * np.sqrt(0.5)).view(
            np.complex128
        )[..., 0]
        coeff /= np.linalg.norm(coeff, axis=1, keepdims=True)
        cands = coeff @ basis.T
        w_cand = np.abs(cands.conj() @ h0) ** 2
        assert np.abs(cands @ nulled[0].conj()).max() < 1e-10
        assert w_opt >= w_cand.max() - 1e-9


def test_signal_power_law_after_nulling():
    # with one nulled direction and N = 3, the own-link power is chi-square
    # with 2 complex degrees of freedom
    rng = RngStream(5)
    n = 1_000_000
    h0 = cvec(rng, 3, size=n)
    nulled = cvec(rng, 3, size=n)[:, None, :]
    ok = np.ones((n, 1), bool)
    v0 = zf_mrc_batch(h0, nulled, ok)
    w = np.abs(np.einsum("nj,nj->n", v0.conj(), h0)) ** 2
    assert abs(w.mean() - 2.0) < 0.01
    assert stats.kstest(w[:100_000], stats.gamma(2).cdf).pvalue > 0.01


def test_post_cancellation_gain_edges():
    rng = RngStream(6)
    h0 = cvec(rng, 3)
    bf = zf_mrc(h0, [])
    i_par, d_par = post_cancellation_gain(bf, 3.0 * bf.v0)
    assert d_par == pytest.approx(1.0, abs=1e-12)
    perp = np.array([-np.conj(bf.v0[1]), np.conj(bf.v0[0]), 0.0])
    i_perp, d_perp = post_cancellation_gain(bf, perp)
    assert d_perp == pytest.approx(0.0, abs=1e-12)


def test_leak_fraction_moments():
    # delta ~ beta(1, N-1) for N = 3: mean 1/3, second moment 1/6
    rng = RngStream(7)
    n = 1_000_000
    h0 = cvec(rng, 3, size=n)
    nulled = cvec(rng, 3, size=n)[:, None, :]
    v0 = zf_mrc_batch(h0, nulled, np.ones((n, 1), bool))
    ht = cvec(rng, 3, size=n)
    delta = np.abs(np.einsum("nj,nj->n", v0.conj(), ht)) ** 2 / np.sum(np.abs(ht) ** 2, 1)
    assert abs(delta.mean() - 1.0 / 3.0) < 0.005
    assert abs(np.mean(delta**2) - 1.0 / 6.0) < 0.005
    # object-level op agrees with the vectorized formula
    bf = zf_mrc(h0[0], [nulled[0, 0]])
    _, d0 = post_cancellation_gain(bf, ht[0])
    assert d0 == pytest.approx(delta[0], rel=1e-12)


def test_leak_fractions_pairwise_independent():
    p = SystemParams(3, 1, 4.0, 3.0, 0.1)
    out = collect_trials(p, 100_000, ["delta_primary", "delta_second"], master_seed=8)
    ok = np.isfinite(out["delta_primary"]) & np.isfinite(out["delta_second"])
    corr = np.corrcoef(out["delta_primary"][ok], out["delta_second"][ok])[0, 1]
    assert abs(corr) < 0.01
    ks = stats.kstest(out["delta_second"][ok][:100_000], stats.beta(1, 2).cdf)
    assert ks.pvalue > 0.01


def _manual_realization(params, marks_and_dists, rng):
    interferers = []
    for mark_scale, dist in marks_and_dists:
        g = cvec(rng, params.n_antennas)
        h = dist ** (-params.pathloss_alpha / 2.0) * g * mark_scale
        interferers.append(Interferer(dist, h, float(np.linalg.norm(h) ** 2)))
    return NetworkRealization(params, cvec(rng, params.n_antennas), interferers,
                              params.disk_radius)


def test_estimate_exact_without_secondary_interferers():
    p = SystemParams(4, 2, 4.0, 3.0, 0.1, train_len=8)
    rng = RngStream(9)
    real = _manual_realization(p, [(1.0, 1.2), (1.0, 1.5)], rng)
    split = split_interferers(real)
    assert split.primary_index is None
    est = estimate_csi_explicit(real, split, 8, rng)
    assert est.residual_var == 0.0
    for row, idx in zip(est.estimates, split.canceled):
        assert np.allclose(row, real.interferers[idx].eff_channel, atol=1e-15)


def test_estimate_zero_forces_estimates_and_variance_identity():
    p = SystemParams(5, 3, 4.0, 3.0, 0.1, train_len=11)
    rng = RngStream(10)
    real = sample_network(p, rng)
    split = split_interferers(real)
    est = estimate_csi_explicit(real, split, 11, rng)
    bf = zf_mrc(real.own_channel, est.estimates)
    for row in est.estimates:
        assert abs(np.vdot(bf.v0, row)) <= 1e-10 * np.linalg.norm(row)
    # residual variance equals the canceled set's leak through the
    # estimate-based beamformer
    leak = sum(
        float(np.abs(np.vdot(bf.v0, real.interferers[i].eff_channel)) ** 2)
        for i in split.canceled
    )
    assert est.residual_var == pytest.approx(leak, rel=1e-10)


def test_estimate_noise_scales_inversely_with_train_len():
    p = SystemParams(5, 3, 4.0, 3.0, 0.1, train_len=3, mean_node_count=40.0)
    rng = RngStream(11)
    real = sample_network(p, rng)
    split = split_interferers(real)
    reps = 256
    means = {}
    for m in (2500, 10_000):
        vals = [estimate_csi_explicit(real, split, m, rng).residual_var
                for _ in range(reps)]
        means[m] = np.mean(vals)
    ratio = means[2500] / means[10_000]
    assert abs(ratio / 4.0 - 1.0) < 0.15


def test_estimate_rejects_short_training():
    p = SystemParams(5, 3, 4.0, 3.0, 0.1, train_len=3)
    rng = RngStream(12)
    real = sample_network(p, rng)
    split = split_interferers(real)
    with pytest.raises(ParameterError):
        estimate_csi_explicit(real, split, 2, rng)


def test_shortcut_limits_and_mean():
    rng = RngStream(13)
    assert residual_noise_shortcut(1.0, 3, 10**12, rng) < 1e-9
    vals = [residual_noise_shortcut(1.0, 3, 11, rng) for _ in range(30_000)]
    assert abs(np.mean(vals) / (3.0 / 11.0) - 1.0) < 0.01


def test_imperfect_paths_agree_in_sir_distribution():
    # the explicit-training and chi-square-inflation models are equivalent
    # up to a small finite-M coupling; at 1e4 trials the SIR samples pass a
    # 1%-level two-sample KS test
    p = SystemParams(5, 3, 4.0, 3.0, 0.1, train_len=11)
    rng = RngStream(31)
    n = 10_000
    sir_exp = np.empty(n)
    sir_sc = np.empty(n)
    for i in range(n):
        real = sample_network(p, rng)
        split = split_interferers(real)
        sir_exp[i] = sir_imperfect(real, split, 11, "explicit", rng)
        sir_sc[i] = sir_imperfect(real, split, 11, "shortcut", rng)
    stat = stats.ks_2samp(sir_exp, sir_sc).statistic
    crit = 1.6276 * np.sqrt(2.0 / n)
    assert stat < crit
