import cmath
import math

import numpy as np
import pytest

from beamgap.arrays import (
    ArrayConfig,
    direction_to_unit,
    rotation_about_z,
    steering_vector,
    unit_to_direction,
    wavelength,
)


def test_broadside_is_phase_free():
    arr = ArrayConfig(rows=4, cols=4)
    vec = steering_vector(arr, (0.0, np.pi / 2))
    assert np.allclose(vec, np.ones(16) / 4.0, atol=1e-15)


def test_two_element_forced_phases():
    # Half-wavelength spacing: phase = pi * (m*u_x + n*u_y) per element.
    a21 = ArrayConfig(rows=2, cols=1)
    # u = (0,1,0) is perpendicular to the single column -> flat phases
    v = steering_vector(a21, (np.pi / 2, 0.0))
    assert np.allclose(v, np.array([1.0, 1.0]) / np.sqrt(2), atol=1e-12)
    # u = (1,0,0) runs along the column -> phases (0, pi)
    v = steering_vector(a21, (0.0, 0.0))
    assert np.allclose(v, np.array([1.0, -1.0]) / np.sqrt(2), atol=1e-12)
    a12 = ArrayConfig(rows=1, cols=2)
    v = steering_vector(a12, (np.pi / 2, 0.0))
    assert np.allclose(v, np.array([1.0, -1.0]) / np.sqrt(2), atol=1e-12)


def _steering_reference(arr, az, el):
    """Element-wise reimplementation with scalar math only."""
    lam = wavelength(arr.carrier_hz)
    u = (math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el))
    out = []
    for m in range(arr.rows):
        for n in range(arr.cols):
            phase = (2 * math.pi / lam) * arr.element_spacing * (m * u[0] + n * u[1])
            out.append(cmath.exp(1j * phase))
    return np.array(out) / math.sqrt(arr.rows * arr.cols)


def test_steering_matches_independent_reimplementation():
    arr = ArrayConfig(rows=4, cols=4)
    rng = np.random.default_rng(17)
    for _ in range(100):
        az1, az2 = rng.uniform(-np.pi, np.pi, 2)
        el1, el2 = rng.uniform(-np.pi / 2, np.pi / 2, 2)
        a1 = steering_vector(arr, (az1, el1))
        a2 = steering_vector(arr, (az2, el2))
        r1 = _steering_reference(arr, az1, el1)
        r2 = _steering_reference(arr, az2, el2)
        assert abs(abs(np.vdot(a1, a2)) - abs(np.vdot(r1, r2))) < 1e-10
        assert abs(abs(np.vdot(a1, a1)) - 1.0) < 1e-12


def test_steering_norm_is_one():
    rng = np.random.default_rng(3)
    for _ in range(50):
        arr = ArrayConfig(rows=int(rng.integers(1, 9)), cols=int(rng.integers(1, 9)))
        direction = (rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi / 2, np.pi / 2))
        assert abs(np.linalg.norm(steering_vector(arr, direction)) - 1.0) <= 1e-12


def test_direction_unit_roundtrip():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        az = rng.uniform(-np.pi, np.pi)
        el = rng.uniform(-np.pi / 2 + 1e-6, np.pi / 2 - 1e-6)
        az2, el2 = unit_to_direction(direction_to_unit(az, el))
        assert abs(el - el2) < 1e-9
        assert abs((az - az2 + np.pi) % (2 * np.pi) - np.pi) < 1e-9


def test_invalid_geometry_rejected():
    with pytest.raises(ValueError):
        ArrayConfig(rows=0, cols=4)
    with pytest.raises(ValueError):
        ArrayConfig(rows=2, cols=2, element_spacing=-0.1)
    with pytest.raises(ValueError):
        ArrayConfig(rows=2, cols=2, orientation=np.eye(3) * 2.0)
    flipped = np.diag([1.0, 1.0, -1.0])  # determinant -1
    with pytest.raises(ValueError):
        ArrayConfig(rows=2, cols=2, orientation=flipped)


def test_default_spacing_is_half_wavelength():
    arr = ArrayConfig(rows=2, cols=2)
    assert arr.element_spacing == pytest.approx(wavelength(arr.carrier_hz) / 2.0, rel=1e-12)


def test_rotation_about_z_is_proper():
    rot = rotation_about_z(0.7)
    assert np.allclose(rot.T @ rot, np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(rot), 1.0)
    arr = ArrayConfig(rows=2, cols=3, orientation=rot, position=[1.0, 2.0, 3.0])
    local = arr.to_local([0.0, 0.0, 1.0])
    assert np.allclose(arr.to_world(local), [0.0, 0.0, 1.0], atol=1e-12)
