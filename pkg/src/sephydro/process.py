"""Continuous-time simulation of the open exclusion process with occupancy
cap m, reservoir/sink boundary parameter alpha, and density / height-function
estimators.

Directed jump rates, with p = 1/(2d) per lattice edge:

    boundary -> interior   p * alpha * (m - k_y)/m      (emission)
    interior -> boundary   p * (1 - alpha) * k_x/m      (absorption)
    interior -> interior   p * (k_x/m) * ((m - k_y)/m)
    boundary -> boundary   0

run_replica drives the event kernel in sephydro.kernels (exact
composition-rejection sampling of this chain); step() is a direct-method
reference implementation used for small systems and law checks.
"""

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .domain import (SiteClass, OuterMode, radial_bin_counts,
                     radial_bin_edges, radial_site_counts)

__all__ = [
    "BoundaryKind", "ProcessParams", "Configuration", "DensityEstimate",
    "Frozen", "JumpKind", "JumpEvent", "jump_rate", "step", "run_replica",
    "replica_seed", "replica_stats", "density_profile", "height_function",
    "map_time", "nominal_time_scale",
]


class Frozen(RuntimeError):
    """No admissible jump remains (total rate zero)."""


class BoundaryKind(enum.Enum):
    RESERVOIR = "reservoir"
    SINK = "sink"


@dataclass(frozen=True)
class ProcessParams:
    m: int
    alpha: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"occupancy cap must be >= 1, got {self.m}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def boundary_kind(self):
        return BoundaryKind.SINK if self.alpha == 0.0 else BoundaryKind.RESERVOIR


@dataclass
class Configuration:
    """Occupancies over the interior (flat box layout) plus sink counters."""

    domain: object
    params: ProcessParams
    occ: np.ndarray        # int8 over the full box, nonzero only on interior
    absorbed: np.ndarray   # int64 per boundary site
    time: float = 0.0
    frozen: bool = False
    _tokens: np.ndarray = field(default=None, repr=False)

    def occupancy_at(self, z):
        return int(self.occ[self.domain.flatten(z)])

    def occupancy_dict(self):
        occ = self.occ[self.domain.interior_flat]
        nz = np.nonzero(occ)[0]
        coords = self.domain.unflatten(self.domain.interior_flat[nz])
        return {tuple(int(c) for c in coords[i]): int(occ[nz[i]])
                for i in range(nz.size)}

    def absorbed_dict(self):
        nz = np.nonzero(self.absorbed)[0]
        return {tuple(int(c) for c in self.domain.boundary[i]): int(self.absorbed[i])
                for i in nz}

    def particle_positions(self):
        """Flat indices of all particles (with multiplicity)."""
        if self._tokens is not None:
            return self._tokens
        occ = self.occ[self.domain.interior_flat]
        return np.repeat(self.domain.interior_flat, occ)

    def particle_radii(self):
        pos = self.particle_positions()
        coords = self.domain.unflatten(pos).astype(np.float64)
        return np.sqrt(np.sum(coords * coords, axis=1))

    @property
    def n_particles(self):
        return int(self.particle_positions().shape[0])


def empty_configuration(domain, params):
    return Configuration(
        domain=domain, params=params,
        occ=np.zeros(domain.cls.shape[0], dtype=np.int8),
        absorbed=np.zeros(domain.n_boundary, dtype=np.int64))


def configuration_from_occupancy(domain, params, occupancy):
    """Build a configuration from a {site: count} mapping (tests/small runs)."""
    cfg = empty_configuration(domain, params)
    for site, k in occupancy.items():
        if not 0 <= k <= params.m:
            raise ValueError(f"occupancy {k} out of range at {site}")
        flat = domain.flatten(site)
        if domain.cls[flat] != SiteClass.INTERIOR:
            raise ValueError(f"{site} is not an interior site")
        cfg.occ[flat] = k
    return cfg


def jump_rate(params, d, k_x, k_y, class_x, class_y):
    """Directed rate of one particle jump along the edge x -> y."""
    m = params.m
    for k, cl in ((k_x, class_x), (k_y, class_y)):
        if cl == SiteClass.INTERIOR and not 0 <= k <= m:
            raise ValueError(f"occupancy {k} outside 0..{m}")
    p = 1.0 / (2.0 * d)
    if class_x == SiteClass.BOUNDARY and class_y == SiteClass.INTERIOR:
        return p * params.alpha * (m - k_y) / m
    if class_x == SiteClass.INTERIOR and class_y == SiteClass.BOUNDARY:
        return p * (1.0 - params.alpha) * k_x / m
    if class_x == SiteClass.INTERIOR and class_y == SiteClass.INTERIOR:
        return p * (k_x / m) * ((m - k_y) / m)
    return 0.0


class JumpKind(enum.Enum):
    MOVE = "move"
    ABSORB = "absorb"
    EMIT = "emit"
    ESCAPE = "escape"


@dataclass(frozen=True)
class JumpEvent:
    kind: JumpKind
    src: tuple
    dst: tuple


def _enumerate_rates(config, domain, params):
    """All admissible directed jumps with their rates (reference path)."""
    p = 1.0 / (2.0 * domain.d)
    m = params.m
    alpha = params.alpha
    occ = config.occ
    events = []
    occupied = np.nonzero(occ[domain.interior_flat])[0]
    for idx in occupied:
        flat = int(domain.interior_flat[idx])
        kx = int(occ[flat])
        for i in range(domain.d):
            for s in (1, -1):
                nflat = flat + s * int(domain.strides[i])
                c = domain.cls[nflat]
                if c == SiteClass.INTERIOR:
                    rate = p * (kx / m) * ((m - occ[nflat]) / m)
                    kind = JumpKind.MOVE
                elif c == SiteClass.BOUNDARY:
                    rate = p * (1.0 - alpha) * kx / m
                    kind = JumpKind.ABSORB
                elif domain.outer_mode == OuterMode.ABSORBING:
                    rate = p * kx / m
                    kind = JumpKind.ESCAPE
                else:
                    continue
                if rate > 0.0:
                    events.append((rate, kind, flat, nflat))
    if alpha > 0.0:
        for b, flat in enumerate(domain.boundary_flat):
            flat = int(flat)
            for i in range(domain.d):
                for s in (1, -1):
                    nflat = flat + s * int(domain.strides[i])
                    if domain.cls[nflat] == SiteClass.INTERIOR:
                        rate = p * alpha * (m - occ[nflat]) / m
                        if rate > 0.0:
                            events.append((rate, JumpKind.EMIT, flat, nflat))
    return events


def step(config, domain, params, rng):
    """One exact Gillespie event (direct method, from-scratch rate table).

    Mutates config; returns (JumpEvent, dt).  Raises Frozen when the total
    rate is zero.  Meant for small systems and correctness tests; long runs
    go through run_replica's kernel.
    """
    events = _enumerate_rates(config, domain, params)
    total = sum(e[0] for e in events)
    if total <= 0.0:
        raise Frozen(f"no admissible jump at t={config.time}")
    dt = rng.exponential(1.0 / total)
    pick = rng.random() * total
    acc = 0.0
    chosen = events[-1]
    for e in events:
        acc += e[0]
        if pick < acc:
            chosen = e
            break
    _, kind, src, dst = chosen
    if kind == JumpKind.MOVE:
        config.occ[src] -= 1
        config.occ[dst] += 1
    elif kind == JumpKind.ABSORB:
        config.occ[src] -= 1
        config.absorbed[domain.boundary_lookup[dst]] += 1
    elif kind == JumpKind.ESCAPE:
        config.occ[src] -= 1
    else:  # EMIT
        config.occ[dst] += 1
    config.time += dt
    config._tokens = None
    src_c = tuple(int(c) for c in domain.unflatten(src))
    dst_c = tuple(int(c) for c in domain.unflatten(dst))
    return JumpEvent(kind=kind, src=src_c, dst=dst_c), dt


def replica_seed(master_seed, index):
    """Stream seed for one replica, decorrelated from its siblings."""
    with kernels.kernel_guard():
        return int(kernels.seed_state(np.uint64(master_seed), np.uint64(index)))


def run_replica(domain, params, t_end, seed, initial=None):
    """Simulate one replica from the all-empty state up to process time t_end.

    Bit-reproducible given (seed, domain, params, t_end) on a fixed kernel
    backend.  A Frozen state (sink mode with nothing left to move) just
    fast-forwards the clock to t_end.
    """
    if t_end < 0.0:
        raise ValueError(f"t_end must be >= 0, got {t_end}")
    cfg = initial if initial is not None else empty_configuration(domain, params)
    tokens = cfg.particle_positions().astype(np.int64)
    cap = max(64, 2 * tokens.shape[0])
    buf = np.empty(cap, np.int64)
    buf[: tokens.shape[0]] = tokens
    state = np.array([seed], dtype=np.uint64)
    outer_absorb = 1 if domain.outer_mode == OuterMode.ABSORBING else 0
    with kernels.kernel_guard():
        buf, n_tok, t, frozen, _, _ = kernels.sep_run(
            domain.cls, domain.strides, domain.d, params.m, params.alpha,
            outer_absorb, domain.boundary_flat, domain.boundary_lookup,
            cfg.occ, cfg.absorbed, buf, tokens.shape[0], cfg.time,
            float(t_end), state)
    cfg.time = t
    cfg.frozen = bool(frozen)
    cfg._tokens = np.sort(buf[:n_tok])
    return cfg


def _worker_count(workers=None):
    if workers:
        return workers
    env = os.environ.get("SEPHYDRO_WORKERS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def replica_stats(domain, params, t_end, master_seed, n_replicas,
                  bin_width=1.0, probe_flat=None, height_radii=None,
                  workers=None):
    """Run replicas concurrently, reducing each to compact statistics.

    Returns a dict with per-replica radial bin counts, probe-site
    occupancies, height-function counts, and frozen flags; aggregation is
    by replica index, so results do not depend on scheduling.
    """
    edges, site_counts = radial_site_counts(domain, bin_width)
    n_bins = site_counts.shape[0]
    probe_flat = (np.asarray(probe_flat, dtype=np.int64)
                  if probe_flat is not None else np.empty(0, np.int64))
    height_radii = (np.asarray(height_radii, dtype=np.float64)
                    if height_radii is not None else np.empty(0))

    bin_counts = np.zeros((n_replicas, n_bins), dtype=np.int64)
    probe_occ = np.zeros((n_replicas, probe_flat.shape[0]), dtype=np.int64)
    heights = np.zeros((n_replicas, height_radii.shape[0]), dtype=np.int64)
    frozen = np.zeros(n_replicas, dtype=bool)

    def one(i):
        cfg = run_replica(domain, params, t_end, replica_seed(master_seed, i))
        radii = cfg.particle_radii()
        bin_counts[i] = radial_bin_counts(edges, radii)
        if probe_flat.size:
            probe_occ[i] = cfg.occ[probe_flat]
        for j, r in enumerate(height_radii):
            heights[i, j] = int(np.count_nonzero(radii >= r))
        frozen[i] = cfg.frozen

    n_workers = _worker_count(workers)
    if n_workers == 1:
        for i in range(n_replicas):
            one(i)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(one, range(n_replicas)))

    return {
        "edges": edges, "site_counts": site_counts,
        "bin_counts": bin_counts, "probe_occ": probe_occ,
        "heights": heights, "frozen": frozen,
    }


@dataclass(frozen=True)
class DensityEstimate:
    """Radially binned Monte Carlo density with per-bin standard errors."""

    bins: list  # (radial midpoint, mean, stderr)
    replicas: int
    process_time: float

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("need at least one replica")
        for mid, mean, stderr in self.bins:
            if not (0.0 <= mean <= 1.0 and stderr >= 0.0):
                raise ValueError(f"bad bin ({mid}, {mean}, {stderr})")

    def midpoints(self):
        return np.array([b[0] for b in self.bins])

    def means(self):
        return np.array([b[1] for b in self.bins])

    def stderrs(self):
        return np.array([b[2] for b in self.bins])


def density_from_stats(stats, m, process_time, min_sites=1):
    """DensityEstimate from replica_stats output (bins with sites only)."""
    site_counts = stats["site_counts"]
    keep = site_counts >= min_sites
    edges = stats["edges"]
    mids = 0.5 * (edges[:-1] + edges[1:])[keep]
    per_rep = stats["bin_counts"][:, keep] / (m * site_counts[keep])
    n = per_rep.shape[0]
    mean = per_rep.mean(axis=0)
    stderr = (per_rep.std(axis=0, ddof=1) / math.sqrt(n)
              if n > 1 else np.zeros_like(mean))
    bins = [(float(mids[i]), float(mean[i]), float(stderr[i]))
            for i in range(mids.size)]
    return DensityEstimate(bins=bins, replicas=n, process_time=process_time)


def density_profile(replicas, bin_width=1.0):
    """Radial density estimate from a list of same-shape configurations."""
    if not replicas:
        raise ValueError("need at least one replica")
    first = replicas[0]
    for c in replicas[1:]:
        if c.domain is not first.domain or c.params != first.params:
            raise ValueError("replicas must share domain and parameters")
        if abs(c.time - first.time) > 1e-9 * max(1.0, first.time):
            raise ValueError("replicas must share the process time")
    edges, site_counts = radial_site_counts(first.domain, bin_width)
    keep = site_counts >= 1
    mids = 0.5 * (edges[:-1] + edges[1:])[keep]
    rows = np.empty((len(replicas), int(np.count_nonzero(keep))))
    for i, c in enumerate(replicas):
        counts = radial_bin_counts(edges, c.particle_radii())
        rows[i] = counts[keep] / (first.params.m * site_counts[keep])
    mean = rows.mean(axis=0)
    stderr = (rows.std(axis=0, ddof=1) / math.sqrt(len(replicas))
              if len(replicas) > 1 else np.zeros_like(mean))
    bins = [(float(mids[i]), float(mean[i]), float(stderr[i]))
            for i in range(mids.size)]
    return DensityEstimate(bins=bins, replicas=len(replicas),
                           process_time=first.time)


def height_function(config, r):
    """Total particle count on interior sites with |y| >= r."""
    if r < 0.0:
        raise ValueError(f"radius must be >= 0, got {r}")
    dom = config.domain
    occ = config.occ[dom.interior_flat]
    return int(np.sum(occ[dom.interior_radii >= r]))


def nominal_time_scale(d, m):
    """Default macroscopic-to-microscopic time factor, 2dm."""
    return 2.0 * d * m


def map_time(tau, L, d, m, time_scale=None):
    """Microscopic process time for macroscopic (tau, L): time_scale*tau*L."""
    if time_scale is None:
        time_scale = nominal_time_scale(d, m)
    if time_scale <= 0.0:
        raise ValueError("time_scale must be positive")
    return time_scale * tau * L
