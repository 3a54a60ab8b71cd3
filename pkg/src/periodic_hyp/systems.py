"""Built-in example systems and their boundary builders.

Three vetted configurations parameterize the library's experiment surface:

* ``linear_damped_scalar``: one right-moving component with constant speed
  and linear damping, forced at x = 0. Its periodic solution has the
  closed form h(t - x/lam) * exp(-(c/lam) x).
* ``linear_reflect_2x2``: speeds -s and +s, no source, reflection gain k
  at both ends. With period 2L/s the reflections align and the steady
  amplitude is the geometric series of k^2.
* ``quasilinear_euler_damping``: the two Riemann-type invariants of 1D
  isentropic gas flow with a linear momentum drag, written as deviations
  from a still state with base sound speed c0. The coefficient matrix is
  diag(v - c, v + c) with v = (u1 + u2)/2 and c = c0 + (g - 1)(u2 - u1)/4.
"""
from __future__ import annotations

import numpy as np

from .boundary import BoundarySpec
from .system_model import SystemSpec


def linear_damped_scalar(lam: float = 1.0, c: float = 0.5, L: float = 1.0,
                         domain_radius: float = 0.1) -> SystemSpec:
    """u_t + lam u_x = -c u with lam > 0 (single right-moving family)."""
    if lam <= 0:
        raise ValueError("lam must be positive")

    def A(u):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape[:-1] + (1, 1), lam)

    def F(u):
        return -c * np.asarray(u, dtype=float)

    return SystemSpec(n=1, m=0, A=A, F=F, gradF=lambda u: np.array([[-c]]),
                      domain_radius=domain_radius, L=L)


def linear_reflect_2x2(speed: float = 1.0, L: float = 1.0,
                       domain_radius: float = 0.1) -> SystemSpec:
    """Source-free pair with speeds -speed and +speed."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    D = np.diag([-speed, speed])

    def A(u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(D, u.shape[:-1] + (2, 2)).copy()

    def F(u):
        return np.zeros(np.shape(u))

    return SystemSpec(n=2, m=1, A=A, F=F, gradF=lambda u: np.zeros((2, 2)),
                      domain_radius=domain_radius, L=L)


def quasilinear_euler_damping(gamma: float = 2.0, a: float = 0.5,
                              base_c: float = 1.25, L: float = 1.0,
                              domain_radius: float = 0.05) -> SystemSpec:
    """Riemann-invariant deviations of damped isentropic flow near rest.

    u1 rides v - c (left-moving near rest), u2 rides v + c; both source
    terms are the drag -a v. base_c above 1 + O(domain_radius) keeps all
    speeds above 1 in modulus so no time rescaling is needed.
    """
    if gamma <= 1 or base_c <= 0 or a < 0:
        raise ValueError("need gamma > 1, base_c > 0, a >= 0")

    def vel_sound(u):
        u = np.asarray(u, dtype=float)
        v = 0.5 * (u[..., 0] + u[..., 1])
        c = base_c + 0.25 * (gamma - 1.0) * (u[..., 1] - u[..., 0])
        return v, c

    def A(u):
        v, c = vel_sound(u)
        out = np.zeros(v.shape + (2, 2))
        out[..., 0, 0] = v - c
        out[..., 1, 1] = v + c
        return out

    def F(u):
        v, _ = vel_sound(u)
        return -a * np.stack([v, v], axis=-1)

    return SystemSpec(n=2, m=1, A=A, F=F,
                      gradF=lambda u: np.full((2, 2), -a / 2.0),
                      domain_radius=domain_radius, L=L)


def harmonic_signal(harmonics, T_star: float, scale: float = 1.0):
    """Sum of sinusoids: sum_k amp * sin(2 pi harm t / T_star + phase).

    harmonics is a sequence of dicts with keys amplitude, harmonic, phase
    (the latter two optional). Returns a vectorized callable of time.
    """
    terms = [(float(h["amplitude"]),
              float(h.get("harmonic", 1)),
              float(h.get("phase", 0.0))) for h in harmonics]

    def signal(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for amp, harm, phase in terms:
            out = out + scale * amp * np.sin(2 * np.pi * harm * t / T_star + phase)
        return out

    return signal


def zero_signal(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def scalar_inflow_boundary(h, T_star: float) -> BoundarySpec:
    """Pass-through inflow for the scalar system: u(t, 0) = h(t)."""
    return BoundarySpec(
        left_maps=[lambda hv, u: hv],
        right_maps=[],
        h=[h],
        T_star=T_star,
    )


def reflection_boundary(k: float, h1, h2, T_star: float) -> BoundarySpec:
    """Gain-k reflection at both ends of a two-family system.

    x = 0: u2 = h2(t) + k u1;  x = L: u1 = h1(t) + k u2.
    """
    return BoundarySpec(
        left_maps=[lambda hv, u: hv + k * u[..., 0]],
        right_maps=[lambda hv, u: hv + k * u[..., 0]],
        h=[h1, h2],
        T_star=T_star,
    )


def two_gain_boundary(k_left: float, k_right: float, h1, h2,
                      T_star: float) -> BoundarySpec:
    """Independent reflection gains: k_left acts at x = 0, k_right at x = L."""
    return BoundarySpec(
        left_maps=[lambda hv, u: hv + k_left * u[..., 0]],
        right_maps=[lambda hv, u: hv + k_right * u[..., 0]],
        h=[h1, h2],
        T_star=T_star,
    )
