"""Compiled building blocks shared by every public module.

Coefficient formulas live here exactly once. The Python-facing evaluators in
``models`` and ``symmetry`` and the path engine all call the same jitted
functions, so a property checked on the evaluators holds for the simulated
paths as well.
"""

import math

import numpy as np
from numba import njit

# model codes
POWER = 0  # dX = r X dt + s X^beta dW   (Black-Scholes when beta == 1, CEV otherwise)
ABM = 1  # dX = s dW
HESTON = 2
SABR = 3  # lambda-SABR

# transform codes for the X coefficients
T_NONE = 0
T_SINGLE_1D = 1
T_SINGLE_SV = 2
T_DOUBLE = 3

# barrier monitoring codes
MON_NONE = 0
MON_DOWN = 1
MON_CORRIDOR = 2

# params layout: [r, a, b, c, d, beta]
#   1-D models: a = sigma
#   SV models:  a = mean reversion, b = long-run level, c = vol of vol, d = rho
P_R, P_SIGMA, P_KAPPA, P_THETA, P_NU, P_RHO, P_BETA = 0, 1, 1, 2, 3, 4, 5

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S26 = np.uint64(26)
_S6 = np.uint64(6)
_S5 = np.uint64(5)
_TWO_M53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi


@njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 block function on uint64-held 32-bit words."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0) & _MASK, lo1, (hi0 ^ c3 ^ k1) & _MASK, lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def normal_pair(k0, k1, step, path):
    """Two independent N(0,1) draws addressed by (key, step, path)."""
    c0, c1, c2, c3 = philox4x32(
        np.uint64(step) & _MASK,
        np.uint64(path) & _MASK,
        np.uint64(path) >> _S32,
        np.uint64(0),
        k0,
        k1,
    )
    a = ((c0 >> _S5) << _S26) | (c1 >> _S6)
    b = ((c2 >> _S5) << _S26) | (c3 >> _S6)
    u1 = (float(a) + 1.0) * _TWO_M53  # (0, 1]
    u2 = float(b) * _TWO_M53  # [0, 1)
    rad = math.sqrt(-2.0 * math.log(u1))
    ang = _TWO_PI * u2
    return rad * math.cos(ang), rad * math.sin(ang)


@njit(cache=True, nogil=True)
def sigma1(code, p, x, v):
    if code == POWER:
        return p[P_SIGMA] * max(x, 0.0) ** p[P_BETA]
    if code == ABM:
        return p[P_SIGMA]
    if code == HESTON:
        return math.sqrt(max(v, 0.0)) * x
    return v * max(x, 0.0) ** p[P_BETA]


@njit(cache=True, nogil=True)
def mu1(code, p, x, v):
    if code == ABM:
        return 0.0
    return p[P_R] * x


@njit(cache=True, nogil=True)
def sigma21(code, p, v):
    if code == HESTON:
        return p[P_NU] * p[P_RHO] * math.sqrt(max(v, 0.0))
    if code == SABR:
        return p[P_NU] * p[P_RHO] * v
    return 0.0


@njit(cache=True, nogil=True)
def sigma22(code, p, v):
    rho = p[P_RHO]
    if code == HESTON:
        return p[P_NU] * math.sqrt(1.0 - rho * rho) * math.sqrt(max(v, 0.0))
    if code == SABR:
        return p[P_NU] * math.sqrt(1.0 - rho * rho) * v
    return 0.0


@njit(cache=True, nogil=True)
def mu2(code, p, v):
    if code == HESTON:
        return p[P_KAPPA] * (p[P_THETA] - max(v, 0.0))
    if code == SABR:
        return p[P_KAPPA] * (p[P_THETA] - v)
    return 0.0


@njit(cache=True, nogil=True)
def band_index(x, K, Kp):
    return math.floor((x - K) / Kp)


@njit(cache=True, nogil=True)
def fold_argument(x, K, Kp):
    """Map x into [K, K+Kp); returns (mapped argument, sign)."""
    m = band_index(x, K, Kp)
    if m % 2 == 0:
        return x - m * Kp, 1.0
    return 2.0 * K - (x - (m + 1.0) * Kp), -1.0


@njit(cache=True, nogil=True)
def x_coeffs(code, p, tcode, K, Kp, x, v):
    """(diffusion, drift) of the X component after the requested transform."""
    if tcode == T_NONE:
        return sigma1(code, p, x, v), mu1(code, p, x, v)
    if tcode == T_SINGLE_1D:
        if x > K:
            return sigma1(code, p, x, v), mu1(code, p, x, v)
        y = 2.0 * K - x
        return sigma1(code, p, y, v), -mu1(code, p, y, v)
    if tcode == T_SINGLE_SV:
        if x >= K:
            return sigma1(code, p, x, v), mu1(code, p, x, v)
        y = 2.0 * K - x
        return -sigma1(code, p, y, v), -mu1(code, p, y, v)
    y, sgn = fold_argument(x, K, Kp)
    return sgn * sigma1(code, p, y, v), sgn * mu1(code, p, y, v)


@njit(cache=True, nogil=True)
def _inside(monitor, K, Kp, x):
    if monitor == MON_DOWN:
        return x > K
    if monitor == MON_CORRIDOR:
        return K < x < K + Kp
    return True


@njit(cache=True, nogil=True)
def simulate_block(
    code, p, dim, tcode, K, Kp, monitor, x0, v0, T, n,
    k0, k1, first_path, normals, out_x, out_v, out_alive,
):
    """Euler-Maruyama over a contiguous block of paths.

    Path ``first_path + i`` writes slot ``i`` of the output arrays. Monitored
    paths stop at the first grid point outside the alive region. When
    ``normals`` is non-empty it supplies the increments instead of the
    counter-based generator. Returns the number of non-finite paths.
    """
    dt = T / n
    sq = math.sqrt(dt)
    external = normals.shape[0] > 0
    bad = 0
    for i in range(out_x.shape[0]):
        path = first_path + i
        x = x0
        v = v0
        alive = _inside(monitor, K, Kp, x)
        if alive:
            for k in range(n):
                if external:
                    z0 = normals[i, k, 0]
                    z1 = normals[i, k, 1]
                else:
                    z0, z1 = normal_pair(k0, k1, k, path)
                s, m = x_coeffs(code, p, tcode, K, Kp, x, v)
                xn = x + m * dt + s * sq * z0
                if dim == 2:
                    v = v + sigma21(code, p, v) * sq * z0 + sigma22(code, p, v) * sq * z1 + mu2(code, p, v) * dt
                x = xn
                if not (math.isfinite(x) and math.isfinite(v)):
                    bad += 1
                    break
                if not _inside(monitor, K, Kp, x):
                    alive = False
                    break
        out_x[i] = x
        out_v[i] = v
        out_alive[i] = alive
    return bad


@njit(cache=True, nogil=True)
def simulate_trajectory(code, p, dim, tcode, K, Kp, x0, v0, T, n, k0, k1, path, normals, out):
    """Full grid trajectory of one path into ``out`` with shape (n+1, 2)."""
    dt = T / n
    sq = math.sqrt(dt)
    external = normals.shape[0] > 0
    x = x0
    v = v0
    out[0, 0] = x
    out[0, 1] = v
    for k in range(n):
        if external:
            z0 = normals[0, k, 0]
            z1 = normals[0, k, 1]
        else:
            z0, z1 = normal_pair(k0, k1, k, path)
        s, m = x_coeffs(code, p, tcode, K, Kp, x, v)
        xn = x + m * dt + s * sq * z0
        if dim == 2:
            v = v + sigma21(code, p, v) * sq * z0 + sigma22(code, p, v) * sq * z1 + mu2(code, p, v) * dt
        x = xn
        out[k + 1, 0] = x
        out[k + 1, 1] = v


@njit(cache=True, nogil=True)
def normals_block(k0, k1, n, first_path, out):
    for i in range(out.shape[0]):
        for k in range(n):
            z0, z1 = normal_pair(k0, k1, k, first_path + i)
            out[i, k, 0] = z0
            out[i, k, 1] = z1


@njit(cache=True, nogil=True)
def eval_x_coeffs(code, p, tcode, K, Kp, xs, vs, out_s, out_m):
    for i in range(xs.shape[0]):
        s, m = x_coeffs(code, p, tcode, K, Kp, xs[i], vs[i])
        out_s[i] = s
        out_m[i] = m


@njit(cache=True, nogil=True)
def eval_v_coeffs(code, p, vs, out_21, out_22, out_mu):
    for i in range(vs.shape[0]):
        out_21[i] = sigma21(code, p, vs[i])
        out_22[i] = sigma22(code, p, vs[i])
        out_mu[i] = mu2(code, p, vs[i])
