"""Smoke tests for the holoreg python bindings."""

import numpy as np
import pytest

import holoreg


def disc(n, radius, value):
    i = np.arange(n)[:, None] - (n - 1) / 2.0
    j = np.arange(n)[None, :] - (n - 1) / 2.0
    return value * (i * i + j * j <= radius * radius)


def test_fresnel_propagate_round_trip():
    rng = np.random.default_rng(1)
    psi = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
    fwd = holoreg.fresnel_propagate(psi, 0.01)
    back = holoreg.fresnel_propagate(fwd, 0.01, forward=False)
    assert np.linalg.norm(fwd) == pytest.approx(np.linalg.norm(psi), rel=1e-12)
    assert np.max(np.abs(back - psi)) < 1e-12


def test_pc_forward_of_vacuum_is_flat():
    holo = holoreg.pc_forward(np.zeros((16, 16), dtype=complex), 0.05)
    assert holo.shape == (16, 16)
    assert np.max(np.abs(holo - 1.0)) < 1e-13


def test_pc_derivative_at_zero_matches_ctf():
    rng = np.random.default_rng(2)
    phi = rng.normal(size=(32, 32))
    mu = rng.normal(size=(32, 32))
    h = phi - 0.5j * mu
    zero = np.zeros((32, 32), dtype=complex)
    lin = holoreg.pc_derivative(zero, h, 0.02)
    ctf = holoreg.ctf_apply(phi, mu, 0.02)
    assert np.max(np.abs(lin - ctf)) < 1e-10 * np.max(np.abs(ctf))


def test_reconstruct2d_recovers_a_disc():
    f = disc(32, 9.0, 0.15).astype(complex)
    holo = holoreg.pc_forward(f, 0.02, padding=True)
    rec, info = holoreg.reconstruct2d(
        holo, 0.02, max_newton=15, stop_rule="max_iter",
        real_valued=True, sign_re="nonnegative",
        support=disc(32, 12.0, 1.0) > 0)
    assert rec.shape == (32, 32)
    assert info["newton_count"] == 15
    assert info["stop_reason"] == "max_iter"
    assert len(info["alpha_history"]) == 15
    assert len(info["residual_history"]) == 16
    assert info["residual_history"][-1] < 0.2 * info["residual_history"][0]
    err = np.linalg.norm(rec.real - f.real) / np.linalg.norm(f.real)
    assert err < 0.3
    assert 0.1 < np.median(rec.real[f.real > 0]) < 0.2


def test_ctf_invert_homogeneous_round_trip():
    phi = disc(32, 8.0, 0.05)
    holo = holoreg.pc_forward(phi.astype(complex), 0.02)
    rec = holoreg.ctf_invert_homogeneous(holo, 0.0, 0.02, alpha=1e-3)
    inside = np.median(rec[phi > 0])
    outside = np.median(np.abs(rec[phi == 0]))
    assert 0.03 < inside < 0.07
    assert outside < 0.5 * inside


def test_tomo_forward_and_reconstruct():
    n = 12
    centers = holoreg.random_packing(2, (n, n, n), 1.5, delta_value=0.05, seed=9)
    vol = holoreg.render_packing(centers, 1.5, 0.05, (n, n, n))
    angles = [np.pi * a / 4 for a in range(4)]
    frames = holoreg.tomo_forward(vol, angles, 0.05, padding=True)
    assert len(frames) == 4
    assert frames[0].shape == (n, n)
    rec, info = holoreg.reconstruct_tomo(
        frames, angles, 0.05, True, (n, n, n),
        wedge_size=2, passes=2, fidelity="l2")
    assert rec.shape == (n, n, n)
    assert np.all(np.isfinite(rec.real))
    # nonnegativity enters as a penalty, so small negatives survive
    assert rec.real.min() >= -0.2 * rec.real.max()
    assert np.max(np.abs(rec.imag)) == 0.0  # real_valued is the default
    assert info["newton_count"] == len(info["alpha_history"])
    # the reconstruction should pick up a good part of the total mass
    assert np.sum(rec.real) > 0.4 * np.sum(vol.real)


def test_radon_projects_mass():
    n = 12
    centers = holoreg.random_packing(1, (n, n, n), 2.0, delta_value=1.0, seed=3)
    vol = holoreg.render_packing(centers, 2.0, 1.0, (n, n, n))
    projs = holoreg.radon(vol, [0.0, 0.7])
    for p in projs:
        assert p.shape == (n, n)
        assert np.sum(p.real) == pytest.approx(np.sum(vol.real), rel=1e-6)


def test_noise_is_deterministic_in_the_seed():
    frame = np.full((16, 16), 1.0)
    a, na = holoreg.add_gaussian_noise(frame, 0.05, seed=4)
    b, nb = holoreg.add_gaussian_noise(frame, 0.05, seed=4)
    c, _ = holoreg.add_gaussian_noise(frame, 0.05, seed=5)
    assert np.array_equal(a, b)
    assert na == nb
    assert not np.array_equal(a, c)
    assert na == pytest.approx(np.linalg.norm(a - frame), rel=1e-12)

    p, _ = holoreg.add_poisson_noise(frame, 500.0, seed=6)
    counts = p * 500.0
    assert np.max(np.abs(counts - np.round(counts))) < 1e-9


def test_fsc_dict_and_self_correlation():
    rng = np.random.default_rng(7)
    v = rng.normal(size=(16, 16, 16))
    curve = holoreg.fsc(v, v, n_shells=8)
    assert set(curve) == {"shell_centers", "correlation", "threshold", "shell_counts"}
    assert len(curve["correlation"]) == 8
    assert np.allclose(curve["correlation"], 1.0)
    assert holoreg.half_bit_threshold(1.0) == pytest.approx(1.0)
    assert holoreg.sphere_form_factor(0.0) == pytest.approx(1.0)


def test_deconvolve_and_locate_peaks():
    n = 24
    centers = holoreg.random_packing(2, (n, n, n), 3.0, delta_value=0.05,
                                     seed=11, margin=3.0)
    vol = holoreg.render_packing(centers, 3.0, 0.05, (n, n, n)).real
    dec = holoreg.formfactor_deconvolve(vol, 6.0, smooth_fwhm=1.0, reg=0.05)
    pos, amp = holoreg.locate_peaks(dec, 6.0, threshold_frac=0.2)
    assert pos.shape == (2, 3)
    assert amp[0] >= amp[1]
    for c in centers:
        assert np.min(np.linalg.norm(pos - c, axis=1)) < 0.5


def test_errors_are_typed():
    v = np.zeros((8, 8, 8))
    with pytest.raises(holoreg.ConfigError):
        holoreg.locate_peaks(v, 0.5)
    with pytest.raises(holoreg.DataError):
        holoreg.fsc(v, np.zeros((4, 4, 4)))
    with pytest.raises(holoreg.ConfigError):
        holoreg.reconstruct2d(np.ones((8, 8)), 0.01, stop_rule="bogus")
    assert issubclass(holoreg.ConfigError, ValueError)
    assert issubclass(holoreg.NumericalError, RuntimeError)


def test_builtin_glyph_is_a_binary_bitmap():
    g = holoreg.builtin_glyph()
    assert g.ndim == 2
    assert g.min() == 0
    assert g.max() == 1
    assert 0 < np.count_nonzero(g) < g.size
