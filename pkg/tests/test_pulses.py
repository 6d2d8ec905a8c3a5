import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from pulsed_entanglement.errors import DomainError
from pulsed_entanglement.model import PulseSchedule, default_schedule
from pulsed_entanglement.pulses import (
    SQRT_HALF,
    Window,
    coupling_g,
    envelope_u,
    kappa,
    norm_restricted,
    readout_window,
    sech,
)


def test_kappa_values(schedule):
    assert kappa(schedule.tau1, schedule) == 0.5
    assert kappa(0.0, schedule) == pytest.approx(0.5 * (1 + math.tanh(-8.17)), rel=1e-12)
    assert kappa(0.0, schedule) == pytest.approx(8.1e-8, rel=0.02)
    assert kappa(1e3, schedule) == 1.0


def test_envelope_values():
    assert envelope_u(3.0, 3.0, SQRT_HALF) == pytest.approx(0.70710678, abs=1e-8)
    assert envelope_u(4.0, 3.0, SQRT_HALF) == pytest.approx(SQRT_HALF / math.cosh(1.0), rel=1e-12)
    assert envelope_u(4.0, 3.0, SQRT_HALF) == pytest.approx(0.45824357, abs=1e-8)
    assert envelope_u(1e4, 0.0) == 0.0
    assert envelope_u(-1e4, 0.0) == 0.0
    with pytest.raises(DomainError):
        envelope_u(0.0, 0.0, 0.0)


def test_sech_overflow_guard():
    with np.errstate(over="raise"):
        assert sech(800.0) == 0.0
        np.testing.assert_array_equal(sech(np.array([-1e3, 1e3])), [0.0, 0.0])


def test_norm_infinite_window():
    assert norm_restricted(Window(-math.inf, math.inf, 0.0)) == pytest.approx(math.sqrt(0.5), rel=1e-15)


def test_norm_readout_window():
    s = default_schedule(16.3)
    w = readout_window(s)
    assert (w.start, w.center, w.end) == (s.tau1 + s.tau_s / 2, s.tau2, s.tau_max)
    expected = 1 / math.sqrt(math.tanh(8.17) + math.tanh(8.15))
    assert norm_restricted(w) == pytest.approx(expected, rel=1e-12)
    assert abs(norm_restricted(w) - math.sqrt(0.5)) < 1e-4


def test_norm_symmetric_unit_window():
    n = norm_restricted(Window(-1.0, 1.0, 0.0))
    mass, _ = quad(lambda t: 1 / math.cosh(t) ** 2, -1, 1)
    assert n == pytest.approx(1 / math.sqrt(mass), rel=1e-10)
    assert n == pytest.approx(0.81025776, abs=1e-8)


def test_window_validation():
    with pytest.raises(DomainError):
        Window(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        Window(0.0, 1.0, 2.0)


def test_coupling_peaks_and_switchover(schedule):
    s = schedule
    assert coupling_g(s.tau1, s) == pytest.approx(-1.0, abs=1e-15)
    assert coupling_g(s.tau2, s) == pytest.approx(-1.0, abs=1e-15)
    ts = s.switch_time
    left = -1 / math.cosh(ts - s.tau1)
    right = -1 / math.cosh(ts - s.tau2)
    assert left == pytest.approx(-5.8e-4, rel=0.01)
    assert coupling_g(ts - 1e-12, s) == pytest.approx(left, rel=1e-9)
    assert coupling_g(ts, s) == pytest.approx(right, rel=1e-9)
    assert abs(left - right) < 1e-12


def test_coupling_domain(schedule):
    with pytest.raises(DomainError):
        coupling_g(-0.5, schedule)
    with pytest.raises(DomainError):
        coupling_g(schedule.tau_max + 0.5, schedule)


@given(tau_s=st.floats(0.5, 200.0))
def test_coupling_continuity_bound(tau_s):
    s = PulseSchedule(8.17, tau_s, 1000)
    ts = s.switch_time
    jump = abs(coupling_g(ts, s) - coupling_g(np.nextafter(ts, 0), s))
    assert jump <= 2 / math.cosh(tau_s / 2) + 1e-15


@given(
    a=st.floats(-20, 20),
    length=st.floats(0.2, 20),
    frac=st.floats(0, 1),
)
def test_envelope_unit_norm_on_window(a, length, frac):
    w = Window(a, a + length, a + frac * length)
    n = norm_restricted(w)
    val, _ = quad(lambda t: float(envelope_u(t, w.center, n)) ** 2, w.start, w.end, epsabs=1e-13, epsrel=1e-12)
    assert val == pytest.approx(1.0, abs=1e-9)


@given(x=st.floats(0, 30), c=st.floats(-10, 10))
def test_envelope_even(x, c):
    assert envelope_u(c + x, c) == pytest.approx(float(envelope_u(c - x, c)), rel=1e-12)


@given(ta=st.floats(-5, 40), dt=st.floats(1e-3, 5))
def test_kappa_bounded_monotone(ta, dt):
    s = default_schedule(16.3)
    ka, kb = float(kappa(ta, s)), float(kappa(ta + dt, s))
    assert 0 < ka <= kb <= 1
    if ta + dt < s.tau1 + 10:
        assert ka < kb
