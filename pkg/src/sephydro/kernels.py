"""JIT-compiled inner loops shared by the process, duality and specfun modules.

Every function here is plain nopython-compatible Python decorated through
:func:`sephydro._backend.maybe_njit`; with ``SEPHYDRO_NUMBA=0`` the same
source runs undecorated on numpy scalars, producing bit-identical streams.

Random numbers come from a splitmix64 stream per replica/walk, seeded from
(master seed, stream index), so results are reproducible regardless of how
replicas are scheduled across threads.
"""

import cmath
import math
from contextlib import contextmanager

import numpy as np

from ._backend import maybe_njit

# splitmix64 constants
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_INV54 = 1.0 / 18014398509481984.0  # 2**-54


@contextmanager
def kernel_guard():
    """Silence numpy's uint64 wraparound warnings on the pure-Python path."""
    with np.errstate(over="ignore"):
        yield


@maybe_njit(cache=True, nogil=True)
def mix64(x):
    x = (x ^ (x >> _S30)) * _MIX1
    x = (x ^ (x >> _S27)) * _MIX2
    return x ^ (x >> _S31)


@maybe_njit(cache=True, nogil=True)
def seed_state(master, stream):
    # decorrelate streams before handing them to splitmix
    return mix64(np.uint64(master) + _GAMMA * (np.uint64(stream) + np.uint64(1)))


@maybe_njit(cache=True, nogil=True)
def next_u64(state):
    state[0] = state[0] + _GAMMA
    return mix64(state[0])


@maybe_njit(cache=True, nogil=True)
def u01(state):
    # strictly inside (0, 1) so log() is always safe
    return (next_u64(state) >> _S11) * _INV53 + _INV54


@maybe_njit(cache=True, nogil=True)
def randint(state, n):
    # modulo bias is ~n/2^64, irrelevant at Monte Carlo accuracy
    return np.int64(next_u64(state) % np.uint64(n))


@maybe_njit(cache=True, nogil=True)
def sep_run(cls, strides, d, m, alpha, outer_absorb, boundary_flat,
            boundary_lookup, occ, absorbed, tokens, n_tokens, t0, t_end,
            state):
    """Exact event-driven run of the exclusion dynamics up to t_end.

    Composition-rejection scheme: every particle proposes moves at rate
    1/m to a uniform direction (acceptance (m-k_y)/m into the interior,
    (1-alpha) into the boundary, 0 across the outer wall unless absorbing),
    and every boundary site proposes emissions at rate alpha (acceptance
    (m-k_y)/m when the target is interior).  Rejections are self-loops, so
    the simulated law is exactly the target chain.

    Returns (tokens, n_tokens, t, frozen, n_events, n_escaped).
    """
    inv_m = 1.0 / m
    n_b = boundary_flat.shape[0]
    emit_rate = alpha * n_b
    two_d = 2 * d
    t = t0
    frozen = 0
    n_events = 0
    n_escaped = 0
    while True:
        tok_rate = n_tokens * inv_m
        total = tok_rate + emit_rate
        if total <= 0.0:
            frozen = 1
            t = t_end
            break
        dt = -math.log(u01(state)) / total
        if t + dt > t_end:
            t = t_end
            break
        t += dt
        if u01(state) * total < tok_rate:
            i = randint(state, n_tokens)
            x = tokens[i]
            a = randint(state, two_d)
            step = strides[a >> 1]
            if (a & 1) == 1:
                step = -step
            y = x + step
            c = cls[y]
            if c == 1:
                if u01(state) * m < (m - occ[y]):
                    occ[x] -= 1
                    occ[y] += 1
                    tokens[i] = y
                    n_events += 1
            elif c == 2:
                if u01(state) < 1.0 - alpha:
                    occ[x] -= 1
                    absorbed[boundary_lookup[y]] += 1
                    n_tokens -= 1
                    tokens[i] = tokens[n_tokens]
                    n_events += 1
            elif outer_absorb != 0:
                occ[x] -= 1
                n_escaped += 1
                n_tokens -= 1
                tokens[i] = tokens[n_tokens]
                n_events += 1
        else:
            j = randint(state, n_b)
            a = randint(state, two_d)
            step = strides[a >> 1]
            if (a & 1) == 1:
                step = -step
            y = boundary_flat[j] + step
            if cls[y] == 1:
                if u01(state) * m < (m - occ[y]):
                    occ[y] += 1
                    if n_tokens >= tokens.shape[0]:
                        grown = np.empty(tokens.shape[0] * 2, np.int64)
                        grown[: tokens.shape[0]] = tokens
                        tokens = grown
                    tokens[n_tokens] = y
                    n_tokens += 1
                    n_events += 1
    return tokens, n_tokens, t, frozen, n_events, n_escaped


@maybe_njit(cache=True, nogil=True)
def dual_walk_batch(cls, strides, d, m, start_flat, t_end, n_walks, master,
                    stream_base, outer_absorb):
    """Single dual particles: rate-1/(2dm) nearest-neighbour walks that stop
    on the inner boundary.  Returns (n_hits, final_flat, hit_flags)."""
    two_d = 2 * d
    finals = np.empty(n_walks, np.int64)
    flags = np.zeros(n_walks, np.uint8)
    state = np.empty(1, np.uint64)
    hits = 0
    for w in range(n_walks):
        state[0] = seed_state(master, stream_base + w)
        t = 0.0
        pos = start_flat
        while True:
            t += -math.log(u01(state)) * m  # total exit rate 2d/(2dm) = 1/m
            if t > t_end:
                break
            a = randint(state, two_d)
            step = strides[a >> 1]
            if (a & 1) == 1:
                step = -step
            y = pos + step
            c = cls[y]
            if c == 1:
                pos = y
            elif c == 2:
                pos = y
                flags[w] = 1
                hits += 1
                break
            elif outer_absorb != 0:
                break
            # else: reflecting outer wall, proposal suppressed
        finals[w] = pos
    return hits, finals, flags


@maybe_njit(cache=True, nogil=True)
def brownian_hit_batch(d, r0, tau, h, n_paths, master, stream_base):
    """Euler-Maruyama first passage of |B_t| to 1, with the Brownian-bridge
    per-step crossing correction (kills the O(sqrt(h)) detection bias).

    The bridge probability exp(-2 d0 d1 / h) is only evaluated when it can
    exceed exp(-40); sqrt(n)-1 >= (min(n,9)-1)/4 makes the squared-norm test
    below a rigorous sufficient condition for skipping it.
    """
    n_steps = np.int64(round(tau / h))
    sqh = math.sqrt(h)
    far = 320.0 * h
    x = np.empty(d, np.float64)
    state = np.empty(1, np.uint64)
    hits = 0
    for p in range(n_paths):
        state[0] = seed_state(master, stream_base + p)
        x[0] = r0
        for k in range(1, d):
            x[k] = 0.0
        prev_nrm = r0 * r0
        hit = 0
        for _ in range(n_steps):
            k = 0
            while k < d:
                # Marsaglia polar method: a normal pair without cos/sin
                while True:
                    u = 2.0 * u01(state) - 1.0
                    v = 2.0 * u01(state) - 1.0
                    s = u * u + v * v
                    if 0.0 < s < 1.0:
                        break
                f = math.sqrt(-2.0 * math.log(s) / s)
                x[k] += sqh * u * f
                k += 1
                if k < d:
                    x[k] += sqh * v * f
                    k += 1
            nrm = 0.0
            for k in range(d):
                nrm += x[k] * x[k]
            if nrm <= 1.0:
                hit = 1
                break
            a = prev_nrm if prev_nrm < 9.0 else 9.0
            b = nrm if nrm < 9.0 else 9.0
            if (a - 1.0) * (b - 1.0) < far:
                e = 2.0 * (math.sqrt(prev_nrm) - 1.0) * (math.sqrt(nrm) - 1.0) / h
                if e < 40.0 and u01(state) < math.exp(-e):
                    hit = 1
                    break
            prev_nrm = nrm
        hits += hit
    return hits


@maybe_njit(cache=True, nogil=True)
def kv_quad_scaled_batch(v, zs, xs, ws, width_scale):
    out = np.empty(zs.shape[0], np.complex128)
    for i in range(zs.shape[0]):
        out[i] = kv_quad_scaled(v, zs[i], xs, ws, width_scale)
    return out


@maybe_njit(cache=True, nogil=True)
def kv_quad_scaled(v, z, xs, ws, width_scale):
    """exp(z) * K_v(z) by Gauss-Legendre panels on the cosh-kernel integral.

    After u = sinh(s) the integral is
        int_0^inf exp(-z*(c(u)-1)) * cosh(v*asinh(u)) / c(u) du,
    c(u) = sqrt(1+u^2); in u the oscillation exp(-i*Im(z)*u) is asymptotically
    uniform, so a per-panel phase cap keeps Gauss-Legendre accurate.
    Requires Re(z) > 0.
    """
    zr = z.real
    zi = abs(z.imag)
    w_osc = math.pi / (2.0 * (zi + 1e-30))
    w_dec = 8.0 / max(zr, 0.125)
    acc = 0.0 + 0.0j
    u0 = 0.0
    while True:
        w = 0.5 * (1.0 + 0.25 * u0)
        if w > w_osc:
            w = w_osc
        if w > w_dec:
            w = w_dec
        w *= width_scale
        half = 0.5 * w
        for q in range(xs.shape[0]):
            u = u0 + half * (xs[q] + 1.0)
            c = math.sqrt(1.0 + u * u)
            es = u + c  # exp(asinh(u))
            g = 0.5 * (es ** v + es ** (-v)) / c
            acc += (half * ws[q] * g) * cmath.exp(-z * (c - 1.0))
        u0 += w
        c0 = math.sqrt(1.0 + u0 * u0)
        if u0 > 1.0 and zr * (c0 - 1.0) - v * math.log(u0 + c0) > 46.0:
            break
    return acc
