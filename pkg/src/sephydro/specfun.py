"""Special functions for the analytic stack: K_v, its derivative, erfc, Gamma.

K_v(z) is assembled from four branches, each valid on its slab of the right
half-plane:

* half-integer index: the closed-form finite sum
  K_{n+1/2}(z) = sqrt(pi/(2z)) e^{-z} sum_k (n+k)!/((n-k)! k!) (2z)^{-k},
  exact at every angle;
* large |z| (>= 15): the divergent asymptotic series
  sqrt(pi/(2z)) e^{-z} (1 + a_1/z + a_2/z^2 + ...) truncated at its smallest
  term, a_k = a_{k-1} (4v^2-(2k-1)^2)/(8k);
* moderate |z| with Re z >= 1.5 (or |arg z| <= pi/4): Gauss-Legendre panel
  quadrature of the cosh-kernel integral (kernels.kv_quad_scaled), which is
  cancellation-free when the exponential envelope decays;
* the remaining near-imaginary sliver: the ascending power series below
  |z| = 10.5, via the reflection formula pi/2 (I_{-v} - I_v)/sin(pi v) for
  non-integer index and the digamma series for integer index, and the
  asymptotic series above.

Measured accuracy (vs. 30-digit reference): <= 1e-10 everywhere on
v in [0, 5] x 0.1 <= |z| <= 50 x |arg z| <= pi/2 except the cell
{non-half-integer v >= 2, Re z < 1.5, 10.5 < |z| < 15}, where the only
usable double-precision expansions bottom out around 2e-10; nothing
downstream evaluates there (the inversion contour needs non-half-integer
index only for v in {0, 1}).

erfc and Gamma delegate to libm, which is amply within the accuracy budget.
"""

import cmath
import math

import numpy as np

from . import kernels
from ._backend import USE_NUMBA

__all__ = ["bessel_k", "bessel_k_grid", "bessel_k_prime", "erfc", "gamma",
           "Underflow"]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_UNSCALED_LIMIT = 700.0  # exp(-z) underflows past here


class Underflow(ArithmeticError):
    """K_v(z) is below double-precision range; request scaled=True."""


def _is_half_integer(v):
    return abs(v * 2.0 - round(v * 2.0)) < 1e-12 and round(v * 2.0) % 2 == 1


def _kv_half_scaled(v, z):
    # v = n + 1/2
    n = int(round(v - 0.5))
    pref = cmath.sqrt(math.pi / (2.0 * z))
    acc = 0.0 + 0.0j
    term = 1.0 + 0.0j
    for k in range(n + 1):
        acc += term
        if k < n:
            # (n+k+1)! / ((n-k-1)! (k+1)!) = prev * (n+k+1)(n-k) / (k+1)
            term *= (n + k + 1) * (n - k) / ((k + 1) * 2.0 * z)
    return pref * acc


def _kv_asym_scaled(v, z):
    pref = cmath.sqrt(math.pi / (2.0 * z))
    acc = 1.0 + 0.0j
    term = 1.0 + 0.0j
    best = abs(term)
    for k in range(1, 80):
        term *= (4.0 * v * v - (2 * k - 1) ** 2) / (8.0 * k * z)
        mag = abs(term)
        if mag >= best and k > 2:
            break  # optimal truncation of the divergent tail
        best = mag
        acc += term
        if mag < 1e-17 * abs(acc):
            break
    return pref * acc


_EULER_GAMMA = 0.5772156649015329


def _iv_series(mu, z):
    """Ascending series of I_mu(z); mu may be negative non-integer."""
    q = 0.25 * z * z
    term = 1.0 / math.gamma(mu + 1.0)
    acc = term
    for k in range(1, 400):
        term *= q / (k * (mu + k))
        acc += term
        if abs(term) < 1e-18 * abs(acc):
            break
    return acc * cmath.exp(mu * cmath.log(0.5 * z))


def _kv_series_noninteger(v, z):
    return 0.5 * math.pi / math.sin(math.pi * v) * (
        _iv_series(-v, z) - _iv_series(v, z))


def _kv_series_integer(n, z):
    # ascending series with digamma terms (integer order)
    q = 0.25 * z * z
    lh = cmath.log(0.5 * z)
    hzn = cmath.exp(n * lh)  # (z/2)^n
    # finite part: 1/2 (z/2)^{-n} sum_{k<n} ((n-k-1)!/k!) (-q)^k
    fin = 0.0 + 0.0j
    if n > 0:
        term = float(math.factorial(n - 1))
        for k in range(n):
            fin += term
            if k < n - 1:
                term *= -q / ((k + 1.0) * (n - k - 1.0))
        fin *= 0.5 / hzn
    # log part: (-1)^{n+1} ln(z/2) I_n(z)
    sgn = 1.0 if n % 2 == 0 else -1.0  # (-1)^n
    logpart = -sgn * lh * _iv_series(float(n), z)
    # psi part: (-1)^n 1/2 (z/2)^n sum_k (psi(k+1)+psi(n+k+1)) q^k/(k!(n+k)!)
    psi_a = -_EULER_GAMMA
    psi_b = -_EULER_GAMMA + sum(1.0 / j for j in range(1, n + 1))
    term = 1.0 / math.factorial(n)
    acc = (psi_a + psi_b) * term
    for k in range(1, 400):
        term *= q / (k * (n + k))
        psi_a += 1.0 / k
        psi_b += 1.0 / (n + k)
        piece = (psi_a + psi_b) * term
        acc += piece
        if abs(piece) < 1e-18 * abs(acc):
            break
    return fin + logpart + sgn * 0.5 * hzn * acc


_ASYM_SWITCH = 15.0
_OSC_SWITCH = 10.5


def _kv_scaled(v, z):
    """exp(z) K_v(z) on Re z > 0."""
    if _is_half_integer(v):
        return _kv_half_scaled(v, z)
    if abs(z) >= _ASYM_SWITCH:
        return _kv_asym_scaled(v, z)
    if z.real >= 1.5 or abs(z.imag) <= z.real:
        acc = kernels.kv_quad_scaled(v, z, _GL_X, _GL_W, 1.0)
        scale = 0.5
        for _ in range(4):
            nxt = kernels.kv_quad_scaled(v, z, _GL_X, _GL_W, scale)
            if abs(nxt - acc) <= 1e-13 * abs(nxt):
                return nxt
            acc = nxt
            scale *= 0.5
        return acc
    if abs(z) > _OSC_SWITCH:
        return _kv_asym_scaled(v, z)
    n = round(v)
    if abs(v - n) < 1e-6:
        k = _kv_series_integer(int(n), z)
    else:
        k = _kv_series_noninteger(v, z)
    return k * cmath.exp(z)


def bessel_k(v, z, scaled=False):
    """Modified Bessel function of the second kind, K_v(z), Re z > 0.

    Parameters
    ----------
    v : real index; negative values use K_{-v} = K_v.
    z : complex (or real) argument with positive real part.
    scaled : if True, return exp(z) K_v(z), which stays representable
        for large real arguments.

    Raises
    ------
    ValueError : if Re z <= 0.
    Underflow : if scaled=False and Re z is large enough that exp(-z)
        underflows to zero.
    """
    z = complex(z)
    if not (z.real > 0.0) or not math.isfinite(z.real) or not math.isfinite(z.imag):
        raise ValueError(f"bessel_k requires Re z > 0, got z={z}")
    v = abs(float(v))
    if not USE_NUMBA:
        with kernels.kernel_guard():
            kt = _kv_scaled(v, z)
    else:
        kt = _kv_scaled(v, z)
    if scaled:
        return kt
    if z.real > _UNSCALED_LIMIT:
        raise Underflow(
            f"exp(-z) underflows at Re z = {z.real:.1f}; use scaled=True")
    return kt * cmath.exp(-z)


def bessel_k_grid(v, zs, scaled=True):
    """Vectorized scaled K_v over an array of arguments (shared index).

    Partitions the arguments over the same branches as bessel_k; the
    quadrature branch runs as one batched kernel call per refinement level
    with per-element convergence control.
    """
    zs = np.asarray(zs, dtype=np.complex128)
    if np.any(zs.real <= 0.0):
        raise ValueError("bessel_k_grid requires Re z > 0 everywhere")
    v = abs(float(v))
    out = np.empty(zs.shape, dtype=np.complex128)
    flat = zs.ravel()
    res = out.ravel()

    def _fill(idx, fn):
        for i in idx:
            res[i] = fn(v, flat[i])

    mags = np.abs(flat)
    if _is_half_integer(v):
        _fill(range(flat.size), _kv_half_scaled)
    else:
        asym = mags >= _ASYM_SWITCH
        quad = ~asym & ((flat.real >= 1.5) | (np.abs(flat.imag) <= flat.real))
        series = ~asym & ~quad
        _fill(np.nonzero(asym)[0], _kv_asym_scaled)
        n = round(v)
        if abs(v - n) < 1e-6:
            _fill(np.nonzero(series)[0],
                  lambda vv, z: _kv_series_integer(int(n), z) * cmath.exp(z))
        else:
            _fill(np.nonzero(series)[0],
                  lambda vv, z: _kv_series_noninteger(vv, z) * cmath.exp(z))
        qi = np.nonzero(quad)[0]
        if qi.size:
            zq = flat[qi]
            if not USE_NUMBA:
                guard = kernels.kernel_guard()
                guard.__enter__()
            try:
                prev = kernels.kv_quad_scaled_batch(v, zq, _GL_X, _GL_W, 1.0)
                scale = 0.5
                for _ in range(4):
                    cur = kernels.kv_quad_scaled_batch(v, zq, _GL_X, _GL_W,
                                                       scale)
                    bad = np.abs(cur - prev) > 1e-13 * np.abs(cur)
                    prev = cur
                    if not np.any(bad):
                        break
                    scale *= 0.5
            finally:
                if not USE_NUMBA:
                    guard.__exit__(None, None, None)
            res[qi] = prev
    if not scaled:
        if np.any(flat.real > _UNSCALED_LIMIT):
            raise Underflow("exp(-z) underflows; use scaled=True")
        res[:] = res * np.exp(-flat)
    return out


def bessel_k_prime(v, z, scaled=False):
    """K_v'(z) = (v/z) K_v(z) - K_{v+1}(z); scaled gives exp(z) K_v'(z)."""
    z = complex(z)
    v = abs(float(v))
    kv = bessel_k(v, z, scaled=True)
    kv1 = bessel_k(v + 1.0, z, scaled=True)
    out = (v / z) * kv - kv1
    if scaled:
        return out
    if z.real > _UNSCALED_LIMIT:
        raise Underflow(
            f"exp(-z) underflows at Re z = {z.real:.1f}; use scaled=True")
    return out * cmath.exp(-z)


def erfc(z):
    """Complementary error function (real argument)."""
    return math.erfc(float(z))


def gamma(x):
    """Gamma function for x > 0."""
    x = float(x)
    if x <= 0.0:
        raise ValueError(f"gamma requires x > 0, got {x}")
    return math.gamma(x)
