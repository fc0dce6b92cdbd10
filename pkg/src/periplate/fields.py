"""Scalar fields on the periodic interval, stored spectrally.

A plate displacement (or load, or test direction) on the 1-torus is kept
as a mean value plus the Fourier coefficients of its mean-zero part in
the orthonormal trigonometric family

    sqrt(2) cos(2 pi k x), sqrt(2) sin(2 pi k x),   k = 1 .. k_max,

so L2 norms are Euclidean in coefficient space and differentiation is an
exact linear map on the coefficients.
"""

import numpy as np

TWO_PI = 2.0 * np.pi
SQRT2 = np.sqrt(2.0)


def mode_tables(k_max, x):
    """Values of the orthonormal modes at the points ``x``.

    Returns arrays ``(cos_tab, sin_tab)`` of shape (k_max, len(x)) with
    rows sqrt(2) cos(2 pi k x) / sqrt(2) sin(2 pi k x), k = 1..k_max.
    """
    x = np.asarray(x, dtype=float)
    if k_max == 0:
        return np.zeros((0,) + x.shape), np.zeros((0,) + x.shape)
    k = np.arange(1, k_max + 1, dtype=float)
    phase = TWO_PI * k[(...,) + (None,) * x.ndim] * x[None]
    return SQRT2 * np.cos(phase), SQRT2 * np.sin(phase)


class PlateProfile:
    """Mean value plus spectral coefficients of a field on the 1-torus.

    Parameters
    ----------
    mean
        Integral of the field over the unit torus.
    coeffs
        Array of shape (k_max, 2); column 0 holds coefficients of
        sqrt(2) cos(2 pi k x) and column 1 of sqrt(2) sin(2 pi k x).
    """

    def __init__(self, mean=0.0, coeffs=None):
        self.mean = float(mean)
        if coeffs is None:
            coeffs = np.zeros((0, 2))
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if coeffs.size == 0:
            coeffs = np.zeros((0, 2))
        if coeffs.shape[1] != 2:
            raise ValueError("coeffs must have shape (k_max, 2)")
        self.coeffs = coeffs

    @property
    def k_max(self):
        return self.coeffs.shape[0]

    @property
    def coefficients(self):
        """Flat (cos_k, sin_k) pairs per wavenumber, length 2*k_max."""
        return self.coeffs.reshape(-1).copy()

    @classmethod
    def zero(cls, k_max=0):
        return cls(0.0, np.zeros((k_max, 2)))

    @classmethod
    def constant(cls, value, k_max=0):
        return cls(value, np.zeros((k_max, 2)))

    @classmethod
    def single_mode(cls, k, amplitude_cos=0.0, amplitude_sin=0.0, mean=0.0, k_max=None):
        """Profile m + a*cos(2 pi k x) + b*sin(2 pi k x) (plain, not sqrt(2)-scaled)."""
        if k_max is None:
            k_max = k
        c = np.zeros((k_max, 2))
        c[k - 1, 0] = amplitude_cos / SQRT2
        c[k - 1, 1] = amplitude_sin / SQRT2
        return cls(mean, c)

    @classmethod
    def from_values(cls, values, x, k_max):
        """Project samples on an equispaced grid onto the first k_max modes.

        Exact for band-limited input when len(x) > 2*k_max.
        """
        values = np.asarray(values, dtype=float)
        x = np.asarray(x, dtype=float)
        n = len(x)
        mean = values.sum() / n
        ct, st = mode_tables(k_max, x)
        c = np.column_stack([ct @ values / n, st @ values / n])
        return cls(mean, c)

    def values(self, x):
        x = np.asarray(x, dtype=float)
        ct, st = mode_tables(self.k_max, x)
        out = np.full(x.shape, self.mean)
        if self.k_max:
            out = out + np.tensordot(self.coeffs[:, 0], ct, axes=(0, 0))
            out = out + np.tensordot(self.coeffs[:, 1], st, axes=(0, 0))
        return out

    def derivative(self, order=1):
        """Spectral derivative; the mean is annihilated for order >= 1."""
        c = self.coeffs.copy()
        for _ in range(order):
            k = TWO_PI * np.arange(1, self.k_max + 1)
            c = np.column_stack([k * c[:, 1], -k * c[:, 0]])
        return PlateProfile(0.0 if order >= 1 else self.mean, c)

    def l2_norm(self):
        """L2(omega) norm; modes are orthonormal so this is Euclidean."""
        return float(np.sqrt(self.mean**2 + np.sum(self.coeffs**2)))

    def sup_norm(self, oversample=4):
        """Max |field| on an equispaced grid fine enough for the content."""
        n = max(8, oversample * 2 * (self.k_max + 1))
        x = np.arange(n) / n
        return float(np.max(np.abs(self.values(x))))

    def with_mean(self, mean):
        return PlateProfile(mean, self.coeffs.copy())

    def padded(self, k_max):
        """Same field with the coefficient table zero-padded to k_max."""
        if k_max < self.k_max:
            raise ValueError("cannot truncate with padded()")
        c = np.zeros((k_max, 2))
        c[: self.k_max] = self.coeffs
        return PlateProfile(self.mean, c)

    def __add__(self, other):
        kk = max(self.k_max, other.k_max)
        a, b = self.padded(kk), other.padded(kk)
        return PlateProfile(a.mean + b.mean, a.coeffs + b.coeffs)

    def __sub__(self, other):
        kk = max(self.k_max, other.k_max)
        a, b = self.padded(kk), other.padded(kk)
        return PlateProfile(a.mean - b.mean, a.coeffs - b.coeffs)

    def __mul__(self, scalar):
        return PlateProfile(self.mean * scalar, self.coeffs * scalar)

    __rmul__ = __mul__

    def antiderivative(self):
        """Zero-mean periodic antiderivative; requires mean == 0."""
        if abs(self.mean) > 1e-13:
            raise ValueError(
                "periodic antiderivative requires a mean-zero profile, "
                f"got mean {self.mean:.3e}"
            )
        k = TWO_PI * np.arange(1, self.k_max + 1)
        c = np.column_stack([-self.coeffs[:, 1] / k, self.coeffs[:, 0] / k]) \
            if self.k_max else np.zeros((0, 2))
        return PlateProfile(0.0, c)

    def __repr__(self):
        return f"PlateProfile(mean={self.mean:.6g}, k_max={self.k_max})"


def plate_mode(index, k_max=None):
    """The ``index``-th (0-based) orthonormal mean-zero plate mode.

    Even indices are sqrt(2) cos(2 pi k x), odd are sqrt(2) sin(2 pi k x),
    with k = index // 2 + 1.
    """
    k = index // 2 + 1
    if k_max is None:
        k_max = k
    c = np.zeros((k_max, 2))
    c[k - 1, index % 2] = 1.0
    return PlateProfile(0.0, c)


def profile_from_plate_coeffs(coeffs, mean=0.0, k_max=None):
    """Assemble mean + sum_p coeffs[p] * plate_mode(p) as a profile."""
    coeffs = np.asarray(coeffs, dtype=float)
    n_modes = len(coeffs)
    kk = (n_modes + 1) // 2
    if k_max is None:
        k_max = kk
    c = np.zeros((max(k_max, kk), 2))
    for p in range(n_modes):
        c[p // 2, p % 2] += coeffs[p]
    return PlateProfile(mean, c[:k_max] if k_max >= kk else c)


def plate_coeffs_from_profile(profile, n_modes):
    """Coefficients of the first n_modes plate modes in ``profile``."""
    out = np.zeros(n_modes)
    for p in range(n_modes):
        k = p // 2 + 1
        if k <= profile.k_max:
            out[p] = profile.coeffs[k - 1, p % 2]
    return out
