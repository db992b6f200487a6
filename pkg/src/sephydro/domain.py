"""Lattice geometry: the integer-lattice exterior of a ball with a truncated
outer wall.

Sites are classified by Euclidean norm: interior sites satisfy
sqrt_l < |z| <= r_out, boundary sites satisfy |z| <= sqrt_l and are adjacent
(unit step) to at least one interior site, everything else is outside.  All
sites live in a dense box of half-width floor(r_out)+1 so kernels can address
occupancies and classifications by flat index with no hashing.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# tolerate sqrt(L)**2 rounding slightly below an integer L
_EPS = 1e-12


class OuterMode(enum.Enum):
    REFLECTING = "reflecting"
    ABSORBING = "absorbing"


class SiteClass(enum.IntEnum):
    OUTSIDE = 0
    INTERIOR = 1
    BOUNDARY = 2


@dataclass(frozen=True)
class DomainSpec:
    """Immutable description of one lattice domain; shareable across replicas."""

    d: int
    sqrt_l: float
    r_out: float
    outer_mode: OuterMode
    half_width: int
    strides: np.ndarray        # int64 (d,), C-order strides of the box
    cls: np.ndarray            # uint8 flat over the box (SiteClass values)
    interior_flat: np.ndarray  # int64 (n_interior,)
    interior_radii: np.ndarray  # float64 (n_interior,)
    boundary_flat: np.ndarray  # int64 (n_boundary,)
    boundary: np.ndarray       # int32 (n_boundary, d)
    boundary_lookup: np.ndarray  # int32 flat over the box, -1 off-boundary
    _interior_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_interior(self):
        return int(self.interior_flat.shape[0])

    @property
    def n_boundary(self):
        return int(self.boundary_flat.shape[0])

    @property
    def interior(self):
        """Interior coordinates, materialized lazily (can be large)."""
        if "coords" not in self._interior_cache:
            self._interior_cache["coords"] = self.unflatten(self.interior_flat)
        return self._interior_cache["coords"]

    def interior_set(self):
        return {tuple(int(c) for c in row) for row in self.interior}

    def boundary_set(self):
        return {tuple(int(c) for c in row) for row in self.boundary}

    def flatten(self, coords):
        coords = np.asarray(coords, dtype=np.int64)
        single = coords.ndim == 1
        flat = (np.atleast_2d(coords) + self.half_width) @ self.strides
        return int(flat[0]) if single else flat

    def unflatten(self, flat):
        flat = np.asarray(flat, dtype=np.int64)
        out = np.empty(flat.shape + (self.d,), dtype=np.int32)
        rem = flat.copy()
        for i in range(self.d):
            q = rem // self.strides[i]
            out[..., i] = q - self.half_width
            rem -= q * self.strides[i]
        return out

    def neighbors(self, z):
        z = np.asarray(z, dtype=np.int64)
        out = []
        for i in range(self.d):
            for s in (1, -1):
                n = z.copy()
                n[i] += s
                out.append(tuple(int(c) for c in n))
        return out


def build_domain(d, sqrt_l, r_out, outer_mode=OuterMode.REFLECTING):
    """Construct the domain by exhaustive norm classification over the box.

    Rejects d < 1, sqrt_l < 1 and r_out <= sqrt_l.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if sqrt_l < 1:
        raise ValueError(f"inner radius must be >= 1, got {sqrt_l}")
    if r_out <= sqrt_l:
        raise ValueError(f"need r_out > sqrt_l, got {r_out} <= {sqrt_l}")
    if isinstance(outer_mode, str):
        outer_mode = OuterMode(outer_mode.lower())

    thr_in = sqrt_l * sqrt_l * (1.0 + _EPS)
    thr_out = r_out * r_out * (1.0 + _EPS)
    half = int(math.floor(r_out)) + 1
    side = 2 * half + 1
    strides = np.array([side ** (d - 1 - i) for i in range(d)], dtype=np.int64)
    box_size = side ** d

    cls = np.zeros(box_size, dtype=np.uint8)
    interior_flat = []
    interior_radii = []
    boundary_flat = []
    boundary_coords = []

    # scan slice-by-slice along axis 0 to bound temporary memory
    tail_shape = (side,) * (d - 1)
    if d > 1:
        tail = np.indices(tail_shape).reshape(d - 1, -1).T.astype(np.int64) - half
        tail_normsq = np.sum(tail * tail, axis=1)
        tail_flat = (tail + half) @ strides[1:]
    else:
        tail = np.zeros((1, 0), dtype=np.int64)
        tail_normsq = np.zeros(1, dtype=np.int64)
        tail_flat = np.zeros(1, dtype=np.int64)

    for x0 in range(-half, half + 1):
        normsq = tail_normsq + x0 * x0
        flat = tail_flat + (x0 + half) * strides[0]
        inter = (normsq > thr_in) & (normsq <= thr_out)
        if np.any(inter):
            cls[flat[inter]] = SiteClass.INTERIOR
            interior_flat.append(flat[inter])
            interior_radii.append(np.sqrt(normsq[inter].astype(np.float64)))
        ball = normsq <= thr_in
        if np.any(ball):
            # a ball site is boundary iff some unit step lands in the interior
            adj = np.zeros(int(np.count_nonzero(ball)), dtype=bool)
            nb = normsq[ball]
            coords0 = np.full(adj.shape, x0, dtype=np.int64)
            for i in range(d):
                zi = coords0 if i == 0 else tail[ball, i - 1]
                for s in (1, -1):
                    nsq = nb + 2 * s * zi + 1
                    adj |= (nsq > thr_in) & (nsq <= thr_out)
            if np.any(adj):
                bflat = flat[ball][adj]
                cls[bflat] = SiteClass.BOUNDARY
                boundary_flat.append(bflat)
                if d > 1:
                    bc = np.column_stack(
                        [coords0[adj], tail[ball][adj]]).astype(np.int32)
                else:
                    bc = coords0[adj, None].astype(np.int32)
                boundary_coords.append(bc)

    interior_flat = (np.concatenate(interior_flat)
                     if interior_flat else np.empty(0, np.int64))
    interior_radii = (np.concatenate(interior_radii)
                      if interior_radii else np.empty(0, np.float64))
    boundary_flat = (np.concatenate(boundary_flat)
                     if boundary_flat else np.empty(0, np.int64))
    boundary = (np.concatenate(boundary_coords)
                if boundary_coords else np.empty((0, d), np.int32))

    order = np.argsort(interior_flat, kind="stable")
    interior_flat = interior_flat[order]
    interior_radii = interior_radii[order]
    order_b = np.argsort(boundary_flat, kind="stable")
    boundary_flat = boundary_flat[order_b]
    boundary = boundary[order_b]

    lookup = np.full(box_size, -1, dtype=np.int32)
    lookup[boundary_flat] = np.arange(boundary_flat.shape[0], dtype=np.int32)

    return DomainSpec(
        d=d, sqrt_l=float(sqrt_l), r_out=float(r_out), outer_mode=outer_mode,
        half_width=half, strides=strides, cls=cls,
        interior_flat=interior_flat, interior_radii=interior_radii,
        boundary_flat=boundary_flat, boundary=boundary,
        boundary_lookup=lookup,
    )


def classify(spec, z):
    """Norm-based site class of any lattice point (also outside the box)."""
    z = np.asarray(z, dtype=np.int64)
    if z.shape != (spec.d,):
        raise ValueError(f"expected a {spec.d}-dimensional lattice point")
    normsq = float(np.dot(z, z))
    thr_in = spec.sqrt_l ** 2 * (1.0 + _EPS)
    thr_out = spec.r_out ** 2 * (1.0 + _EPS)
    if thr_in < normsq <= thr_out:
        return SiteClass.INTERIOR
    if normsq <= thr_in:
        for i in range(spec.d):
            for s in (1, -1):
                nsq = normsq + 2 * s * z[i] + 1
                if thr_in < nsq <= thr_out:
                    return SiteClass.BOUNDARY
    return SiteClass.OUTSIDE


def radial_bin_edges(spec, bin_width):
    """Bin edges covering (sqrt_l, r_out] in steps of bin_width."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    n = int(math.ceil((spec.r_out - spec.sqrt_l) / bin_width))
    return spec.sqrt_l + bin_width * np.arange(n + 1, dtype=np.float64)


def radial_bin_counts(edges, radii):
    """Counts per radial bin with right-closed bins (a, b], matching the
    norm-based site classification."""
    idx = np.searchsorted(edges, radii, side="left") - 1
    idx = idx[(idx >= 0) & (idx < edges.shape[0] - 1)]
    return np.bincount(idx, minlength=edges.shape[0] - 1)


def radial_site_counts(spec, bin_width):
    """Number of interior sites per radial bin (used to normalize densities)."""
    edges = radial_bin_edges(spec, bin_width)
    return edges, radial_bin_counts(edges, spec.interior_radii)
