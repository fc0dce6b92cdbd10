"""Nonlinear elastic plate energy in the dimension-reduced flat form.

The stored energy of the plate profile eta is

    K(eta) = w_m * int (d_x eta)^4 dx + w_b * int (d_xx eta)^2 dx

with unit weights by default (physical thickness and Lame constants are
absorbed; ``membrane``/``bending`` are kept as experiment hooks).  The
derivative pairing is

    <K'(eta), xi> = 4 w_m int (d_x eta)^3 d_x xi + 2 w_b int (d_xx eta)(d_xx xi)

and satisfies <K'(eta), eta> - 2 K(eta) = 2 w_m int (d_x eta)^4 >= 0, which is
the coercivity surplus reported by :func:`coercivity_gap`.

Quartic/cubic products are formed pointwise on an equispaced grid padded to
at least 4*k_max + 1 points (factor-2 zero padding relative to the Nyquist
grid), so every trigonometric integral below is exact.
"""

import numpy as np

from .fields import PlateProfile, mode_tables, TWO_PI


class BumpWeight:
    """Unit-mass weight profile used to carry the conserved mean."""

    def __init__(self, psi=None):
        if psi is None:
            psi = PlateProfile.constant(1.0)
        if abs(psi.mean - 1.0) > 1e-13:
            raise ValueError(f"bump weight must have unit integral, got {psi.mean!r}")
        self.psi = psi


def _dealiased_nodes(k_max, grid=None):
    """Equispaced grid that integrates quartics of k_max-band fields exactly."""
    n = 4 * k_max + 4
    if grid is not None:
        n = max(n, grid.nx)
    if n % 2:
        n += 1
    return np.arange(n) / n


def koiter_energy(eta, grid=None, membrane=1.0, bending=1.0):
    """Elastic energy of a plate profile (quadrature-exact for its band)."""
    x = _dealiased_nodes(eta.k_max, grid)
    d1 = eta.derivative(1).values(x)
    d2 = eta.derivative(2).values(x)
    return float(np.mean(membrane * d1**4 + bending * d2**2))


def bending_stiffness(k_max, bending=1.0):
    """Diagonal of the linear bending operator on the plate mode family.

    Entry p (cos/sin pairs per wavenumber) is 2 * w_b * (2 pi k)^4.
    """
    k = TWO_PI * np.arange(1, k_max + 1)
    return np.repeat(2.0 * bending * k**4, 2)


def membrane_force(eta, grid=None, membrane=1.0):
    """Cubic membrane part of the force coefficients, fully dealiased.

    Entry p is 4 w_m int (d_x eta)^3 d_x Y_p dx with Y_p the orthonormal
    plate mode; the cubic product is formed pointwise on the padded grid.
    """
    k_max = eta.k_max
    x = _dealiased_nodes(k_max, grid)
    n = len(x)
    d1 = eta.derivative(1).values(x)
    ct, st = mode_tables(k_max, x)
    k = TWO_PI * np.arange(1, k_max + 1)
    w = 4.0 * membrane * d1**3
    out = np.zeros(2 * k_max)
    # d_x of a cos mode is -2 pi k * (sin mode), of a sin mode +2 pi k * (cos mode)
    out[0::2] = -(k / n) * (st @ w)
    out[1::2] = (k / n) * (ct @ w)
    return out


def koiter_force(eta, grid=None, membrane=1.0, bending=1.0):
    """Coefficients of <K'(eta), Y_p> against the plate mode family.

    The layout matches ``eta.coeffs.reshape(-1)``: (cos_1, sin_1, cos_2, ...).
    """
    out = membrane_force(eta, grid, membrane=membrane)
    out += bending_stiffness(eta.k_max, bending=bending) * eta.coeffs.reshape(-1)
    return out


def force_pairing(eta, xi, grid=None, membrane=1.0, bending=1.0):
    """Directional value <K'(eta), xi> for profiles eta, xi."""
    kk = max(eta.k_max, xi.k_max)
    eta = eta.padded(kk)
    xi = xi.padded(kk)
    force = koiter_force(eta, grid, membrane=membrane, bending=bending)
    return float(force @ xi.coeffs.reshape(-1))


def coercivity_gap(eta, grid=None, membrane=1.0, bending=1.0):
    """<K'(eta), eta> - 2 K(eta), equal to 2 * membrane * int (d_x eta)^4."""
    pairing = force_pairing(eta, eta, grid, membrane=membrane, bending=bending)
    return pairing - 2.0 * koiter_energy(eta, grid, membrane=membrane, bending=bending)


def mean_free_project(xi, bump):
    """Remove the weighted mean: xi - psi * int(xi).

    The output integrates to zero exactly; a mean-zero input with a plain
    constant bump passes through unchanged.
    """
    integral = xi.mean
    psi = bump.psi
    kk = max(xi.k_max, psi.k_max)
    return xi.padded(kk) - (integral * psi.padded(kk))
