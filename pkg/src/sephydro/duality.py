"""Duality function, exact finite-state verification via uniformization, and
the single-dual-particle absorbed walk.

The reservoir process (parameter alpha) and the finite-particle sink process
are dual through

    D(s, s') = prod_{y in boundary} alpha^{s'(y)}
               * prod_{x interior} C(s(x), s'(x)) / C(m, s'(x)) * 1{s(x) >= s'(x)},

and the identity E_s[D(s_t, s')] = E_{s'}[D(s, s'_t)] is checked here by
building both generators explicitly on small graphs and computing each side
with a uniformized (Poisson-randomized) matrix exponential whose truncation
tail is below 1e-12.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .domain import OuterMode, SiteClass

__all__ = [
    "StateSpaceTooLarge", "LatticeGraph", "GeneratorKind", "GeneratorMatrix",
    "duality_fn", "build_generator", "expectation", "check_duality",
    "dual_absorption_prob", "dual_absorption_exact",
]

MAX_STATES = 20_000


class StateSpaceTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class LatticeGraph:
    """Small graph view: site list, adjacency, boundary mask, edge weight p."""

    n_sites: int
    is_boundary: np.ndarray      # bool per site
    neighbors: tuple             # tuple of int tuples
    p: float                     # per directed edge, 1/(2d) on the lattice
    labels: tuple = None         # original site coordinates, if any

    @property
    def interior_indices(self):
        return [i for i in range(self.n_sites) if not self.is_boundary[i]]

    @property
    def boundary_indices(self):
        return [i for i in range(self.n_sites) if self.is_boundary[i]]

    @classmethod
    def from_domain(cls, spec):
        flats = np.concatenate([spec.interior_flat, spec.boundary_flat])
        index = {int(f): i for i, f in enumerate(flats)}
        is_b = np.zeros(flats.shape[0], dtype=bool)
        is_b[spec.interior_flat.shape[0]:] = True
        nbrs = []
        for f in flats:
            row = []
            for i in range(spec.d):
                for s in (1, -1):
                    g = int(f) + s * int(spec.strides[i])
                    j = index.get(g)
                    if j is not None:
                        row.append(j)
            nbrs.append(tuple(row))
        labels = tuple(tuple(int(c) for c in row)
                       for row in spec.unflatten(flats))
        return cls(n_sites=flats.shape[0], is_boundary=is_b,
                   neighbors=tuple(nbrs), p=1.0 / (2.0 * spec.d),
                   labels=labels)

    @classmethod
    def segment(cls, n_interior):
        """1-d chain: interior sites 1..n flanked by two boundary sites."""
        n = n_interior + 2
        is_b = np.zeros(n, dtype=bool)
        is_b[0] = is_b[-1] = True
        nbrs = tuple(tuple(j for j in (i - 1, i + 1) if 0 <= j < n)
                     for i in range(n))
        return cls(n_sites=n, is_boundary=is_b, neighbors=nbrs, p=0.5,
                   labels=tuple((i,) for i in range(n)))


def duality_fn(s_occ, sp_occ, sp_boundary, alpha, m):
    """D(s, s') for occupancies aligned site-by-site.

    s_occ, sp_occ: interior occupancies of the two processes; sp_boundary:
    dual particle counts frozen on boundary sites.  Rejects sp_occ > m,
    where the binomial normalization is undefined.
    """
    s_occ = np.asarray(s_occ, dtype=np.int64)
    sp_occ = np.asarray(sp_occ, dtype=np.int64)
    sp_boundary = np.asarray(sp_boundary, dtype=np.int64)
    if np.any(sp_occ > m):
        raise ValueError("dual occupancy above m is undefined")
    if np.any(sp_occ < 0) or np.any(sp_boundary < 0) or np.any(s_occ < 0):
        raise ValueError("occupancies must be nonnegative")
    out = 1.0
    for k in sp_boundary:
        out *= alpha ** int(k)  # 0^0 = 1 covers the sink case
    for s, q in zip(s_occ, sp_occ):
        if q == 0:
            continue
        if s < q:
            return 0.0
        out *= math.comb(int(s), int(q)) / math.comb(m, int(q))
    return out


class GeneratorKind:
    PRIMAL = "primal"
    DUAL_SINK = "dual_sink"


@dataclass(frozen=True)
class GeneratorMatrix:
    """Explicit rate matrix over an enumerated configuration space."""

    kind: str
    graph: LatticeGraph
    m: int
    alpha: float
    states: tuple               # tuples of occupancies over all graph sites
    index: dict = field(repr=False)
    q: sp.csr_matrix = field(repr=False)

    @property
    def n_states(self):
        return len(self.states)

    def exit_rates(self):
        return -self.q.diagonal()


def _enumerate_primal(graph, m):
    interior = graph.interior_indices
    n = graph.n_sites
    if (m + 1) ** len(interior) > MAX_STATES:
        raise StateSpaceTooLarge(
            f"(m+1)^{len(interior)} > {MAX_STATES} primal states")
    states = []

    def rec(i, cur):
        if i == len(interior):
            occ = [0] * n
            for j, site in enumerate(interior):
                occ[site] = cur[j]
            states.append(tuple(occ))
            return
        for k in range(m + 1):
            rec(i + 1, cur + [k])

    rec(0, [])
    return states


def _enumerate_dual(graph, m, n_particles):
    states = []
    n = graph.n_sites

    def rec(site, remaining, cur):
        if len(states) > MAX_STATES:
            raise StateSpaceTooLarge(f"more than {MAX_STATES} dual states")
        if site == n:
            if remaining == 0:
                states.append(tuple(cur))
            return
        cap = remaining if graph.is_boundary[site] else min(m, remaining)
        for k in range(cap + 1):
            rec(site + 1, remaining - k, cur + [k])

    rec(0, n_particles, [])
    return states


def build_generator(graph, m, alpha, kind, n_particles=None):
    """Rate matrix of the reservoir chain (interior occupancies) or of the
    sink dual with a fixed particle number (boundary counts included)."""
    if isinstance(graph, LatticeGraph):
        g = graph
    else:
        g = LatticeGraph.from_domain(graph)
    if kind == GeneratorKind.PRIMAL:
        states = _enumerate_primal(g, m)
    elif kind == GeneratorKind.DUAL_SINK:
        if n_particles is None:
            raise ValueError("dual generator needs the particle number")
        states = _enumerate_dual(g, m, n_particles)
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    index = {s: i for i, s in enumerate(states)}

    rows, cols, vals = [], [], []
    p = g.p
    for si, state in enumerate(states):
        total = 0.0
        for x in range(g.n_sites):
            kx = state[x]
            x_b = g.is_boundary[x]
            for y in g.neighbors[x]:
                y_b = g.is_boundary[y]
                if kind == GeneratorKind.PRIMAL:
                    if x_b and not y_b:
                        rate = p * alpha * (m - state[y]) / m
                        tgt = _bump(state, y, +1)
                    elif not x_b and y_b:
                        rate = p * (1.0 - alpha) * kx / m
                        tgt = _bump(state, x, -1)
                    elif not x_b and not y_b:
                        rate = p * (kx / m) * ((m - state[y]) / m)
                        tgt = _bump(_bump(state, x, -1), y, +1)
                    else:
                        continue
                else:  # DUAL_SINK: alpha = 0 dynamics, frozen boundary
                    if x_b:
                        continue
                    if y_b:
                        rate = p * kx / m
                    else:
                        rate = p * (kx / m) * ((m - state[y]) / m)
                    tgt = _bump(_bump(state, x, -1), y, +1)
                if rate <= 0.0:
                    continue
                ti = index[tgt]
                rows.append(si)
                cols.append(ti)
                vals.append(rate)
                total += rate
        rows.append(si)
        cols.append(si)
        vals.append(-total)

    q = sp.csr_matrix((vals, (rows, cols)),
                      shape=(len(states), len(states)))
    return GeneratorMatrix(kind=kind, graph=g, m=m, alpha=alpha,
                           states=tuple(states), index=index, q=q)


def _bump(state, site, delta):
    lst = list(state)
    lst[site] += delta
    return tuple(lst)


def _uniformized_apply(q, t, vec, tail=1e-12):
    """exp(Qt) vec by the Poisson-randomized power series; the truncation
    point is where the Poisson tail drops below `tail`."""
    lam = float(np.max(-q.diagonal())) if q.shape[0] else 0.0
    if lam <= 0.0 or t <= 0.0:
        return np.array(vec, dtype=np.float64, copy=True)
    if lam * t > 400.0:  # keep Poisson weights in double range
        k = int(math.ceil(lam * t / 400.0))
        out = np.array(vec, dtype=np.float64, copy=True)
        for _ in range(k):
            out = _uniformized_apply(q, t / k, out, tail / k)
        return out
    lam *= 1.0 + 1e-12
    p_mat = sp.identity(q.shape[0], format="csr") + q.multiply(1.0 / lam)
    w = math.exp(-lam * t)
    cum = w
    y = np.array(vec, dtype=np.float64, copy=True)
    out = w * y
    n = 1
    while cum < 1.0 - tail and n < 100_000:
        y = p_mat @ y
        w *= lam * t / n
        out += w * y
        cum += w
        n += 1
    return out


def expectation(gen, t, initial, f):
    """E[f(X_t) | X_0 = initial] for the enumerated chain.

    initial: a state tuple or index; f: vector over states or callable.
    """
    if t < 0.0:
        raise ValueError("t must be >= 0")
    idx = initial if isinstance(initial, (int, np.integer)) else gen.index[tuple(initial)]
    if callable(f):
        fv = np.array([f(s) for s in gen.states], dtype=np.float64)
    else:
        fv = np.asarray(f, dtype=np.float64)
    return float(_uniformized_apply(gen.q, t, fv)[idx])


def _state_duality_vectors(gen_p, gen_d, graph, alpha, m):
    interior = graph.interior_indices
    boundary = graph.boundary_indices

    def d_of(sp_state):
        def f(s_state):
            return duality_fn([s_state[i] for i in interior],
                              [sp_state[i] for i in interior],
                              [sp_state[i] for i in boundary], alpha, m)
        return f
    return d_of


def check_duality(graph, m, alpha, s, s_prime, t):
    """Both sides of the duality identity at time t; returns (lhs, rhs, gap).

    s: reservoir-process occupancies over all graph sites (boundary entries
    must be 0); s_prime: dual occupancies over all graph sites.
    """
    if isinstance(graph, LatticeGraph):
        g = graph
    else:
        g = LatticeGraph.from_domain(graph)
    s = tuple(s)
    s_prime = tuple(s_prime)
    n_dual = sum(s_prime)
    gen_p = build_generator(g, m, alpha, GeneratorKind.PRIMAL)
    gen_d = build_generator(g, m, alpha, GeneratorKind.DUAL_SINK,
                            n_particles=n_dual)
    interior = g.interior_indices
    boundary = g.boundary_indices

    def d_pair(s_state, sp_state):
        return duality_fn([s_state[i] for i in interior],
                          [sp_state[i] for i in interior],
                          [sp_state[i] for i in boundary], alpha, m)

    lhs = expectation(gen_p, t, s, lambda st: d_pair(st, s_prime))
    rhs = expectation(gen_d, t, s_prime, lambda st: d_pair(s, st))
    return lhs, rhs, abs(lhs - rhs)


def dual_absorption_prob(domain, m, x, t, replicas, seed):
    """Monte Carlo probability that the dual walk from interior site x is
    absorbed on the inner boundary by time t.  Returns (estimate, stderr)."""
    flat = domain.flatten(x)
    if domain.cls[flat] != SiteClass.INTERIOR:
        raise ValueError(f"{x} is not an interior site")
    outer_absorb = 1 if domain.outer_mode == OuterMode.ABSORBING else 0
    with kernels.kernel_guard():
        hits, _, _ = kernels.dual_walk_batch(
            domain.cls, domain.strides, domain.d, m, int(flat), float(t),
            int(replicas), np.uint64(seed), np.uint64(0), outer_absorb)
    p = hits / replicas
    return p, math.sqrt(max(p * (1.0 - p), 1e-30) / replicas)


def dual_absorption_exact(domain, m, x, t):
    """Absorption probability from the single-particle chain, by
    uniformization (oracle for the Monte Carlo estimate)."""
    g = LatticeGraph.from_domain(domain)
    gen = build_generator(g, m, 0.0, GeneratorKind.DUAL_SINK, n_particles=1)
    target = tuple(int(c) for c in np.asarray(x, dtype=np.int64))
    start = None
    for i, lab in enumerate(g.labels):
        if lab == target:
            start = i
            break
    if start is None:
        raise ValueError(f"{x} not in the domain graph")
    init = tuple(1 if i == start else 0 for i in range(g.n_sites))
    absorbed = np.array(
        [1.0 if any(s[i] for i in g.boundary_indices) else 0.0
         for s in gen.states])
    return expectation(gen, t, init, absorbed)
