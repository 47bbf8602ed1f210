"""Independent reference computations used by the test-suite."""
from __future__ import annotations

import math

import numpy as np
from scipy import special


def bessel_series(nu: int, z: complex, terms: int = 80):
    """J_nu and Y_nu (integer order 0 or 1) from ascending series."""
    z = complex(z)
    half = z / 2
    j = sum((-1) ** m * half ** (2 * m + nu) / (math.factorial(m) * math.factorial(m + nu))
            for m in range(terms))
    gamma = 0.57721566490153286061
    if nu == 0:
        y = (2 / np.pi) * (np.log(half) + gamma) * j
        hs = 0.0
        acc = 0.0
        for m in range(1, terms):
            hs += 1.0 / m
            acc += (-1) ** (m + 1) * hs * half ** (2 * m) / math.factorial(m) ** 2
        y += (2 / np.pi) * acc
        return j, y
    if nu == 1:
        y = -(2 / (np.pi * z)) + (2 / np.pi) * np.log(half) * j
        acc = 0.0
        for m in range(terms):
            psi_m = -gamma + sum(1.0 / i for i in range(1, m + 1))
            psi_m1 = -gamma + sum(1.0 / i for i in range(1, m + 2))
            acc += (-1) ** m * (psi_m + psi_m1) * half ** (2 * m + 1) / (
                math.factorial(m) * math.factorial(m + 1))
        y -= acc / np.pi
        return j, y
    raise ValueError("only orders 0 and 1")


def disk_coefficients(k0, k1, eps0, eps1, mmax):
    """Scattered and interior mode amplitudes for a unit disk under a unit plane wave."""
    ms = np.arange(-mmax, mmax + 1)
    out_a, out_b = [], []
    for m in ms:
        jm0, djm0 = special.jv(m, k0), special.jvp(m, k0)
        hm0, dhm0 = special.hankel1(m, k0), special.h1vp(m, k0)
        jm1, djm1 = special.jv(m, k1), special.jvp(m, k1)
        inc = 1j ** m
        mat = np.array([[hm0, -jm1], [k0 / eps0 * dhm0, -k1 / eps1 * djm1]])
        rhs = -inc * np.array([jm0, k0 / eps0 * djm0])
        a, b = np.linalg.solve(mat, rhs)
        out_a.append(a)
        out_b.append(b)
    return ms, np.array(out_a), np.array(out_b)


def disk_far_field(omega, eps0, eps1, angles, direction_angle=0.0, mmax=60):
    """Far-field pattern with the normalisation u_s ~ exp(i k r)/sqrt(r) u_inf."""
    k0, k1 = omega * np.sqrt(eps0), omega * np.sqrt(eps1)
    ms, a, _ = disk_coefficients(k0, k1, eps0, eps1, mmax)
    angles = np.asarray(angles)
    phase = np.exp(1j * np.outer(angles - direction_angle, ms))
    coef = a * np.sqrt(2 / (np.pi * k0)) * np.exp(-1j * (ms * np.pi / 2 + np.pi / 4))
    return phase @ coef


def disk_total_field(omega, eps0, eps1, points, direction_angle=0.0, mmax=60):
    k0, k1 = omega * np.sqrt(eps0), omega * np.sqrt(eps1)
    ms, a, b = disk_coefficients(k0, k1, eps0, eps1, mmax)
    pts = np.atleast_2d(points)
    r = np.hypot(pts[:, 0], pts[:, 1])
    th = np.arctan2(pts[:, 1], pts[:, 0]) - direction_angle
    out = np.zeros(len(pts), dtype=complex)
    for m, am, bm in zip(ms, a, b):
        e = np.exp(1j * m * th)
        inside = r < 1
        out[inside] += bm * special.jv(m, k1 * r[inside]) * e[inside]
        outside = ~inside
        out[outside] += (1j ** m * special.jv(m, k0 * r[outside])
                         + am * special.hankel1(m, k0 * r[outside])) * e[outside]
    return out


def disk_cauchy_data(omega, eps0, eps1, theta, direction_angle=0.0, mmax=60):
    """Interior total field and scattered field traces on the unit circle:
    returns (u1, du1/dr, us, dus/dr) at the given angles."""
    k0, k1 = omega * np.sqrt(eps0), omega * np.sqrt(eps1)
    ms, a, b = disk_coefficients(k0, k1, eps0, eps1, mmax)
    e = np.exp(1j * np.outer(np.asarray(theta) - direction_angle, ms))
    u1 = e @ (b * special.jv(ms, k1))
    du1 = e @ (b * k1 * special.jvp(ms, k1))
    us = e @ (a * special.hankel1(ms, k0))
    dus = e @ (a * k0 * special.h1vp(ms, k0))
    return u1, du1, us, dus


def robin_disk_trace(k, eps, eta, mode: int):
    """Trace on the unit circle of the interior Robin solution with data e^{i m theta}:
    u = c J_m(k r) e^{i m theta}, eps^{-1} du/dr + i eta u = e^{i m theta}."""
    jm, djm = special.jv(mode, k), special.jvp(mode, k)
    c = 1.0 / (k / eps * djm + 1j * eta * jm)
    return c * jm, c * k * djm


def interval_amplitude_map(k, h, p_left, p_right, q_left, q_right):
    """Robin-to-Robin map of one interval from a cos/sin basis and a linear solve."""
    c, s = np.cos(k * h), np.sin(k * h)
    # rows: u(0), u'(0), u(h), u'(h) in terms of (c1, c2)
    vals = np.array([[1.0, 0.0], [0.0, k], [c, s], [-k * s, k * c]], dtype=complex)
    incoming = np.array([-vals[1] + p_left * vals[0], vals[3] + p_right * vals[2]])
    outgoing = np.array([vals[1] + q_left * vals[0], -vals[3] + q_right * vals[2]])
    return outgoing @ np.linalg.solve(incoming, np.eye(2))


def end_amplitude_map(k, h, p, q):
    """Interval with u(0) = A and incoming (u' + p u)(h) = f; returns the
    coefficients of f and A in the outgoing (-u' + q u)(h)."""
    c, s = np.cos(k * h), np.sin(k * h)
    vals = np.array([[1.0, 0.0], [0.0, k], [c, s], [-k * s, k * c]], dtype=complex)
    system = np.array([vals[0], vals[3] + p * vals[2]])
    out = -vals[3] + q * vals[2]
    coef_a, coef_f = out @ np.linalg.solve(system, np.eye(2))
    return coef_f, coef_a
