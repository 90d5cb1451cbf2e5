"""Data-model tests: parameters, spectral density, poles, envelopes, presets."""

import math

import numpy as np
import pytest

from qfd.errors import ConfigError, DomainError
from qfd.model import (
    KinematicsParams,
    MaterialParams,
    ParticleParams,
    kernel_P,
    kernel_Q,
    kernel_R,
    material_preset,
    orientation_from_angles,
    orientation_weights,
    pole_from_quartic,
    pole_omega_r,
    preset,
    r0_tilde_from_dipole,
    spectral_density,
    spectral_density_d2,
    unit_orientation,
    validate_dimensional,
)


# ---------------------------------------------------------------------------
# parameter validation
# ---------------------------------------------------------------------------


def test_material_validation():
    MaterialParams(omega_s=1e15, gamma_tilde=0.5)
    with pytest.raises(ConfigError):
        MaterialParams(omega_s=-1.0, gamma_tilde=0.5)
    with pytest.raises(ConfigError):
        MaterialParams(omega_s=1e15, gamma_tilde=0.0)


def test_particle_validation():
    ParticleParams(delta_tilde=0.2, r0_tilde=1e-2)
    with pytest.raises(ConfigError):
        ParticleParams(delta_tilde=0.0, r0_tilde=1e-2)
    with pytest.raises(ConfigError):
        ParticleParams(delta_tilde=0.2, r0_tilde=1e-2, orientation=(1.0, 1.0, 0.0))
    p = ParticleParams(delta_tilde=0.2, r0_tilde=1e-2).with_orientation([2.0, 0.0, 0.0])
    assert p.orientation == (1.0, 0.0, 0.0)


def test_kinematics_validation():
    KinematicsParams(u=0.0)
    KinematicsParams(u=-0.3)  # sign carries no physics; accepted
    with pytest.raises(ConfigError):
        KinematicsParams(u=0.1, a_nm=-5.0)


def test_orientation_helpers():
    n = orientation_from_angles(math.pi / 2, 0.0)
    assert n == pytest.approx((1.0, 0.0, 0.0), abs=1e-15)
    with pytest.raises(ConfigError):
        unit_orientation((0.0, 0.0, 0.0))
    w = orientation_weights((0.0, 0.0, 1.0))
    assert (w.d_i, w.d_a) == (2.0, 4.0)


def test_dimensional_checks():
    mat = material_preset("nsi")
    part = ParticleParams(delta_tilde=0.2, r0_tilde=1e-2)
    # v = u omega_s a: huge u at 5 nm trips the non-relativistic guard
    warnings = validate_dimensional(mat, part, KinematicsParams(u=1e4, a_nm=5.0))
    assert any("non-relativistic" in w for w in warnings)
    # near-field violation needs a Delta / c > 0.1
    big = ParticleParams(delta_tilde=5.0, r0_tilde=1e-2)
    warnings = validate_dimensional(
        MaterialParams(omega_s=9.7e15, gamma_tilde=0.003), big, KinematicsParams(u=0.0, a_nm=2000.0)
    )
    assert any("near-field" in w for w in warnings)
    assert validate_dimensional(mat, part, KinematicsParams(u=0.003, a_nm=5.0)) == []


def test_r0_tilde_from_dipole():
    # r0 = 2 d^2/(hbar a^3); dimensionless after dividing by omega_s
    val = r0_tilde_from_dipole(1e-29, 2.47e14, 5.0)
    expected = 2.0 * 1e-58 / (1.054571817e-34 * (5e-9) ** 3 * 2.47e14)
    assert val == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# spectral density
# ---------------------------------------------------------------------------


def test_spectral_density_values():
    assert spectral_density(0.0, 1.0) == 0.0
    assert spectral_density(1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    # direct substitution: 0.006 / (9 + 3.6e-5)
    assert spectral_density(2.0, 0.003) == pytest.approx(0.006 / 9.000036, rel=1e-12)
    assert spectral_density(2.0, 0.003) == pytest.approx(6.6666e-4, abs=1e-8)


def test_spectral_density_errors_and_vector():
    with pytest.raises(DomainError):
        spectral_density(-1.0, 1.0)
    with pytest.raises(DomainError):
        spectral_density(1.0, 0.0)
    vals = spectral_density(np.array([0.0, 1.0, 2.0]), 1.0)
    assert vals.shape == (3,)
    assert np.all(vals >= 0.0)


def test_spectral_density_second_derivative():
    # analytic curvature against central differences
    for x, gt in [(0.2, 1.0), (8.0, 1.0), (0.2, 0.003), (0.5, 0.5)]:
        h = 1e-4
        fd = (
            spectral_density(x + h, gt)
            - 2 * spectral_density(x, gt)
            + spectral_density(x - h, gt)
        ) / (h * h)
        assert spectral_density_d2(x, gt) == pytest.approx(fd, rel=1e-6, abs=1e-10)


# ---------------------------------------------------------------------------
# pole structure
# ---------------------------------------------------------------------------


def test_pole_unit_damping():
    p = pole_omega_r(1.0)
    assert p.omega_r == pytest.approx(math.sqrt(3) / 2 + 0.5j, abs=1e-12)
    assert p.sqrt_factor == pytest.approx(math.sqrt(3), abs=1e-12)


def test_pole_overdamped_imaginary():
    p = pole_omega_r(3.0)
    assert p.omega_r.real == 0.0
    assert p.omega_r.imag > 0.0
    assert p.sqrt_factor.real == 0.0


def test_pole_weak_damping_limit():
    p = pole_omega_r(1e-8)
    assert p.omega_r == pytest.approx(1.0 + 0.0j, abs=1e-7)


@pytest.mark.parametrize("gt", [0.003, 0.5, 1.0, 1.9, 3.0])
def test_pole_quartic_consistency(gt):
    w = pole_omega_r(gt).omega_r
    # residual of the defining quartic
    assert abs((w * w - 1.0) ** 2 + gt * gt * w * w) <= 1e-10
    # agreement with the companion-matrix route
    assert abs(w - pole_from_quartic(gt)) <= 1e-10


# ---------------------------------------------------------------------------
# envelope functions
# ---------------------------------------------------------------------------


def test_envelope_values():
    assert kernel_P(0.0, (1, 0, 0)) == pytest.approx(0.125, abs=1e-15)
    assert kernel_P(0.0, (0, 0, 1)) == pytest.approx(0.25, abs=1e-15)
    assert kernel_P(2.0, (0, 1, 0)) == pytest.approx(1.0 / 8.0**1.5, rel=1e-12)
    assert kernel_Q(0.0, (1, 0, 0)) == pytest.approx(0.09375, abs=1e-15)
    assert kernel_R(0.0, (0, 0, 1)) == pytest.approx(0.03125, abs=1e-15)


def test_envelope_decay():
    for fn in (kernel_P, kernel_Q, kernel_R):
        assert abs(fn(1e4, (0.5, 0.5, math.sqrt(0.5)))) < 1e-10


def test_envelope_static_identity_on_sphere():
    # P(0) = d_i/8 for 100 directions
    rng = np.random.default_rng(1)
    for _ in range(100):
        v = rng.normal(size=3)
        n = unit_orientation(v)
        w = orientation_weights(n)
        assert kernel_P(0.0, n) == pytest.approx(w.d_i / 8.0, abs=1e-14)


def test_envelope_taylor_remainder_order():
    # |P(x) - (d_i/8 - 3/64 d_a x^2)| should shrink like x^4
    n = unit_orientation((0.3, -0.5, 0.81))
    w = orientation_weights(n)
    xs = np.array([0.1, 0.05, 0.025, 0.0125])
    rem = np.array(
        [abs(kernel_P(x, n) - (w.d_i / 8.0 - 3.0 / 64.0 * w.d_a * x * x)) for x in xs]
    )
    order = np.polyfit(np.log(xs), np.log(rem), 1)[0]
    assert order >= 3.9


def test_envelope_derivative_identities():
    # dP/dx = -3 x Q and d2P/dx2 = -12 R tie the three envelopes together
    n = unit_orientation((0.48, 0.6, 0.64))
    h = 1e-5
    for x in (0.3, 1.0, 2.5):
        dp = (kernel_P(x + h, n) - kernel_P(x - h, n)) / (2 * h)
        d2p = (kernel_P(x + h, n) - 2 * kernel_P(x, n) + kernel_P(x - h, n)) / (h * h)
        assert dp == pytest.approx(-3.0 * x * kernel_Q(x, n), rel=1e-8, abs=1e-10)
        assert d2p == pytest.approx(-12.0 * kernel_R(x, n), rel=1e-5, abs=1e-8)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def test_material_presets():
    nsi = material_preset("nSi")
    assert nsi.omega_s == 2.47e14 and nsi.gamma_tilde == 1.0
    au = material_preset("Au")
    assert au.omega_s == 9.7e15 and au.gamma_tilde == 0.003


def test_pair_presets():
    mat, part = preset("NV-on-nSi")
    assert part.delta_tilde == 0.2
    assert part.r0_tilde == 1e-2
    assert mat.name == "n-Si"
    _, part = preset("nv-au")
    assert part.delta_tilde == 0.9
    _, part = preset("rb-nsi")
    assert part.delta_tilde == 8.0
    _, part = preset("rb-au")
    # the same Rb transition frequency rescaled by the gold plasmon scale
    assert part.delta_tilde == pytest.approx(8.0 * 2.47e14 / 9.7e15, rel=1e-12)


def test_preset_errors_list_valid_names():
    with pytest.raises(ConfigError) as info:
        preset("cs-on-si")
    assert "nv-nsi" in str(info.value)
    with pytest.raises(ConfigError) as info:
        material_preset("gold")
    assert "au" in str(info.value)
