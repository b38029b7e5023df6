import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortexpair import fiber
from vortexpair.fiber import (ClampError, dexp_kernel, dd_kernel, frob,
                              herm_exp, herm_log, herm_part, herm_sqrt,
                              inv_psi_kernel, psi_kernel, skew_defect,
                              sup_norm)

from conftest import rand_herm


def _herm_from_spectrum(rng, w):
    r = len(w)
    q = np.linalg.qr(rng.standard_normal((r, r))
                     + 1j * rng.standard_normal((r, r)))[0]
    return herm_part((q * w) @ q.conj().T)


# ---------------------------------------------------------------------------
# exp/log roundtrip

def test_roundtrip_500_spectra(rng):
    worst = 0.0
    for _ in range(500):
        r = int(rng.integers(1, 5))
        w = rng.uniform(-5.0, 5.0, size=r)
        s = _herm_from_spectrum(rng, w)
        back = herm_log(herm_exp(s))
        worst = max(worst, sup_norm(back - s) / max(1.0, sup_norm(s)))
    assert worst <= 1e-10


def test_roundtrip_repeated_eigenvalues(rng):
    for w in ([2.0, 2.0, -1.0], [0.0, 0.0, 0.0], [3.0, 3.0, 3.0, -3.0]):
        s = _herm_from_spectrum(rng, np.array(w))
        assert sup_norm(herm_log(herm_exp(s)) - s) < 1e-12


def test_roundtrip_gridded_field(rng):
    s = rand_herm(rng, (6, 5), 3, amp=1.5)
    assert sup_norm(herm_log(herm_exp(s)) - s) < 1e-11


def test_sqrt_squares_back(rng):
    s = rand_herm(rng, (4,), 3)
    f = herm_exp(s)
    q = herm_sqrt(f)
    assert sup_norm(q @ q - f) < 1e-12 * max(1.0, sup_norm(f))


# ---------------------------------------------------------------------------
# kernels

def test_psi_kernel_pins():
    assert abs(psi_kernel(0.0, 1.0) - (math.e - 1.0)) < 1e-12
    assert abs(psi_kernel(1.0, 1.0 + 1e-9) - (1.0 + 5e-10)) < 1e-12
    assert abs(psi_kernel(2.0, 2.0) - 1.0) == 0.0


def test_psi_kernel_positive_and_reciprocal(rng):
    x = rng.uniform(-6, 6, size=200)
    y = rng.uniform(-6, 6, size=200)
    p = psi_kernel(x, y)
    assert np.all(p > 0)
    assert np.max(np.abs(p * inv_psi_kernel(x, y) - 1.0)) < 1e-14


def test_psi_kernel_series_branch_continuity():
    # values just inside and outside the series cutoff must agree
    for t in (9e-7, 1.1e-6):
        lo = psi_kernel(0.0, t)
        hi = np.expm1(t) / t
        assert abs(lo - hi) < 1e-13


def test_dexp_kernel_symmetric(rng):
    x = rng.uniform(-4, 4, size=100)
    y = rng.uniform(-4, 4, size=100)
    assert np.max(np.abs(dexp_kernel(x, y) - dexp_kernel(y, x))) == 0.0
    # closed form away from the diagonal
    d = (np.exp(x) - np.exp(y)) / (x - y)
    assert np.max(np.abs(dexp_kernel(x, y) - d)) < 1e-12 * np.max(np.abs(d))


def test_funcalc_two_matches_finite_difference(rng):
    ker = dd_kernel(np.exp, np.exp)
    for _ in range(30):
        s = rand_herm(rng, (), 3)
        a = rand_herm(rng, (), 3)
        t = 1e-6
        fd = (fiber.funcalc_one(np.exp, s + t * a)
              - fiber.funcalc_one(np.exp, s - t * a)) / (2 * t)
        dd = fiber.funcalc_two(ker, s=s, a=a)
        assert sup_norm(fd - dd) <= 1e-5 * max(1.0, sup_norm(dd))


def test_funcalc_two_against_hand_loop(rng):
    # pins the orientation: entry (i, j) in the eigenbasis of s gets
    # fn(lambda_j, lambda_i)
    def fn(x, y):
        return 1.0 / (1.0 + (x - 2.0 * y) ** 2)
    s = rand_herm(rng, (), 3)
    a = rand_herm(rng, (), 3)
    w, v = fiber.herm_eig(s)
    ah = v.conj().T @ a @ v
    out_hand = np.zeros((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            out_hand[i, j] = fn(w[j], w[i]) * ah[i, j]
    out_hand = v @ out_hand @ v.conj().T
    assert sup_norm(fiber.funcalc_two(fn, s=s, a=a) - out_hand) < 1e-13


def test_dd_kernel_near_degenerate(rng):
    ker = dd_kernel(np.exp, np.exp)
    # two nearly equal eigenvalues: kernel must interpolate, not blow up
    close = ker(np.array(1.0), np.array(1.0 + 1e-9))
    assert abs(close - math.e) < 1e-6


# ---------------------------------------------------------------------------
# monotone pairing path

def test_xi_monotone_1000_fibers(rng):
    worst = np.inf
    for _ in range(1000):
        r = int(rng.integers(1, 5))
        phi = rng.standard_normal(r) + 1j * rng.standard_normal(r)
        s = rand_herm(rng, (), r, amp=2.0)
        d = fiber.xi_path(phi, s, 1.0) - fiber.xi_path(phi, s, 0.0)
        worst = min(worst, float(d))
    assert worst >= -1e-12


def test_xi_derivative_closed_form(rng):
    phi = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    s = rand_herm(rng, (), 3)
    t = 0.37
    eps = 1e-6
    fd = (fiber.xi_path(phi, s, t + eps) - fiber.xi_path(phi, s, t - eps)) / (2 * eps)
    assert abs(fd - fiber.xi_derivative(phi, s, t)) < 1e-5 * max(1.0, abs(fd))
    assert fiber.xi_derivative(phi, s, t) >= 0.0


def test_xi_general_reference_frame(rng):
    # independent route: with a general reference the pairing is
    # Re(phi^H h0 e^(t s) s phi), computable with a dense non-Hermitian
    # matrix exponential
    from scipy.linalg import expm
    phi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    h0 = herm_exp(rand_herm(rng, (), 2, amp=0.5))
    s_h = rand_herm(rng, (), 2)
    # make s h0-Hermitian the way the caller would hand it over
    s = np.linalg.inv(h0) @ herm_part(h0 @ s_h)
    t = 0.8
    a = float(fiber.xi_path(phi, s, t, h0=h0))
    direct = (phi.conj() @ h0 @ expm(t * s) @ s @ phi).real
    assert abs(a - direct) < 1e-11 * max(1.0, abs(direct))


def test_phi_outer_semipositive(rng):
    for _ in range(50):
        r = int(rng.integers(1, 5))
        phi = rng.standard_normal(r) + 1j * rng.standard_normal(r)
        w = np.linalg.eigvalsh(fiber.phi_outer(phi))
        assert np.min(w) >= -1e-14 * max(1.0, np.max(w))


# ---------------------------------------------------------------------------
# clamp policy

def test_herm_log_raises_on_negative():
    bad = np.diag([1.0, -1e-6]).astype(complex)
    with pytest.raises(ClampError):
        herm_log(bad)


def test_herm_log_clamps_tiny_negative():
    fiber.reset_clamp_counter()
    nearly = np.diag([1.0, 1e-16]).astype(complex)
    out = herm_log(nearly)
    assert fiber.clamp_events >= 1
    assert out[1, 1].real == pytest.approx(math.log(fiber.EIG_FLOOR))


def test_herm_sqrt_raises_on_indefinite():
    with pytest.raises(ClampError):
        herm_sqrt(np.diag([1.0, -0.5]).astype(complex))


def test_assert_hermitian_catches_skew(rng):
    a = rand_herm(rng, (), 2)
    a[0, 1] += 1.0
    with pytest.raises(ValueError):
        fiber.assert_hermitian(a)


# ---------------------------------------------------------------------------
# norms and parts

def test_norms_and_parts(rng):
    a = rng.standard_normal((4, 2, 2)) + 1j * rng.standard_normal((4, 2, 2))
    h = herm_part(a)
    assert skew_defect(h) == 0.0
    assert sup_norm(h) == pytest.approx(float(np.max(frob(h))))
    # scalar fields fall back to max abs
    assert sup_norm(np.array([1.0, -3.0])) == 3.0


# ---------------------------------------------------------------------------
# hypothesis edges

@settings(max_examples=60, deadline=None)
@given(st.floats(-30.0, 30.0), st.floats(-30.0, 30.0))
def test_psi_kernel_bounds(x, y):
    p = float(psi_kernel(x, y))
    assert p > 0.0
    assert np.isfinite(p)
    # psi(x, y) * psi(y, x) = e^(y-x) * psi(y,x)^2 sanity: product equals
    # the symmetric function e^((y-x)/2) * (sinh(u)/u) with u=(y-x)/2
    u = 0.5 * (y - x)
    sym = math.exp(u) * (math.sinh(u) / u if abs(u) > 1e-8 else 1.0)
    assert abs(p - sym) <= 1e-9 * max(1.0, abs(sym))


@settings(max_examples=40, deadline=None)
@given(st.floats(-4.0, 4.0), st.floats(-4.0, 4.0), st.floats(1e-12, 1.0))
def test_roundtrip_tiny_gaps(a, b, gap):
    rng = np.random.default_rng(7)
    s = _herm_from_spectrum(rng, np.array([a, b, b + gap]))
    assert sup_norm(herm_log(herm_exp(s)) - s) < 1e-9 * max(1.0, sup_norm(s))
