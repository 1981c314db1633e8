"""Closed convex sets with exact Euclidean projection.

The solvers only ever touch constraint sets through two operations:
projection and membership. The descriptors here cover whole spaces,
boxes, Euclidean balls, and Cartesian products of these, all with
closed-form projections. Products project blockwise, which is exactly
what the stacked primal-dual iterates need.
"""

import numpy as np

__all__ = ["ConvexSet", "WholeSpace", "Box", "Ball", "Product",
           "normal_cone_residual"]


def _as_vector(p, dim, name="p"):
    p = np.asarray(p, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.shape != (dim,):
        raise ValueError("{} has shape {}, expected ({},)".format(name, p.shape, dim))
    return p


class ConvexSet(object):
    """Base class for closed convex set descriptors.

    Subclasses provide `project` (the exact Euclidean projection) and
    `bounding_box`. Instances are immutable after construction and safe
    to share between threads.
    """

    dim = None

    def project(self, p):
        """Return the Euclidean-nearest point of the set to `p`."""
        raise NotImplementedError

    def contains(self, p, tol=1e-12):
        """Return True iff `p` violates no set constraint by more than `tol`.

        Measured as the sup-norm distance between `p` and its projection,
        so the default tolerance absorbs floating-point drift from
        clamping without admitting genuinely infeasible points.
        """
        p = _as_vector(p, self.dim)
        return bool(np.max(np.abs(p - self.project(p)), initial=0.0) <= tol)

    def bounding_box(self):
        """Return `(lo, hi)` arrays enclosing the set.

        Unbounded directions fall back to half-width 10 around the
        origin; sampling-based checks draw their probes from this box.
        """
        raise NotImplementedError


class WholeSpace(ConvexSet):
    """The unconstrained set, projection is the identity."""

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)

    def project(self, p):
        return _as_vector(p, self.dim)

    def bounding_box(self):
        return -10.0 * np.ones(self.dim), 10.0 * np.ones(self.dim)

    def __repr__(self):
        return "WholeSpace({})".format(self.dim)


class Box(ConvexSet):
    """Axis-aligned box { p : lower <= p <= upper } with componentwise clamping.

    Parameters
    ----------
    lower, upper : array-like or scalar
        Bounds; scalars are broadcast when `dim` is given.
    dim : int, optional
        Required when both bounds are scalars.
    """

    def __init__(self, lower, upper, dim=None):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if dim is not None:
            lower = np.broadcast_to(lower, (dim,)).copy()
            upper = np.broadcast_to(upper, (dim,)).copy()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("bounds must be vectors of equal length")
        if np.any(lower > upper):
            raise ValueError("box has lower > upper in some coordinate")
        self.lower = lower
        self.upper = upper
        self.dim = lower.size

    def project(self, p):
        p = _as_vector(p, self.dim)
        return np.clip(p, self.lower, self.upper)

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def __repr__(self):
        return "Box(dim={})".format(self.dim)


class Ball(ConvexSet):
    """Euclidean ball { p : ||p - center|| <= radius }."""

    def __init__(self, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.center = center
        self.radius = float(radius)
        self.dim = center.size

    def project(self, p):
        p = _as_vector(p, self.dim)
        offset = p - self.center
        dist = np.linalg.norm(offset)
        if dist <= self.radius:
            return p
        return self.center + offset * (self.radius / dist)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def __repr__(self):
        return "Ball(dim={}, radius={})".format(self.dim, self.radius)


class Product(ConvexSet):
    """Cartesian product of convex sets; projects each factor independently."""

    def __init__(self, *factors):
        if len(factors) == 1 and isinstance(factors[0], (list, tuple)):
            factors = tuple(factors[0])
        if not factors:
            raise ValueError("product needs at least one factor")
        self.factors = factors
        self.dim = sum(f.dim for f in factors)
        offsets = np.cumsum([0] + [f.dim for f in factors])
        self._slices = [slice(offsets[i], offsets[i + 1])
                        for i in range(len(factors))]

    def project(self, p):
        p = _as_vector(p, self.dim)
        out = np.empty_like(p)
        for f, s in zip(self.factors, self._slices):
            out[s] = f.project(p[s])
        return out

    def contains(self, p, tol=1e-12):
        p = _as_vector(p, self.dim)
        return all(f.contains(p[s], tol) for f, s in zip(self.factors, self._slices))

    def bounding_box(self):
        los, his = zip(*(f.bounding_box() for f in self.factors))
        return np.concatenate(los), np.concatenate(his)

    def __repr__(self):
        return "Product({})".format(", ".join(repr(f) for f in self.factors))


def sample_points(cset, count, rng):
    """Draw `count` feasible points, uniform over the bounding box then projected.

    Returns an array of shape `(count, dim)`. Used by the sampled
    monotonicity, Lipschitz and normal-cone checks.
    """
    lo, hi = cset.bounding_box()
    pts = rng.uniform(lo, hi, size=(count, cset.dim))
    for i in range(count):
        pts[i] = cset.project(pts[i])
    return pts


def normal_cone_residual(cset, p, g, probe_count=100, seed=0):
    """Estimate ``min over q in the set of g.(q - p)``.

    A value above ``-tol`` certifies the variational inequality
    ``g.(q - p) >= 0`` for all feasible `q` up to sampling resolution,
    which with ``g = F(z*)`` is the first-order optimality condition at
    `z*`. The minimum is taken over `p` itself, the projections of far
    coordinate rays from `p` (these land on faces of boxes and balls, so
    the reported value is exact for those sets), and `probe_count`
    random probes projected into the set.

    Parameters
    ----------
    cset : ConvexSet
    p : array-like
        Feasible base point; raises ValueError when `p` is not in the set.
    g : array-like
        Direction tested against feasible displacements from `p`.
    probe_count : int
        Number of random probes.
    seed : int
        Seed for the probe draw.

    Returns
    -------
    float
        Minimum sampled inner product; nonnegative iff the VI holds on
        the probed points.
    """
    p = _as_vector(p, cset.dim)
    g = _as_vector(g, cset.dim, name="g")
    if not cset.contains(p, tol=1e-9):
        raise ValueError("base point is not in the set")
    rng = np.random.default_rng(seed)
    candidates = [cset.project(p)]
    reach = 1e6 * (1.0 + np.linalg.norm(p))
    for i in range(cset.dim):
        ray = np.zeros(cset.dim)
        ray[i] = reach
        candidates.append(cset.project(p + ray))
        candidates.append(cset.project(p - ray))
    candidates.append(sample_points(cset, probe_count, rng))
    q = np.vstack([np.atleast_2d(c) for c in candidates])
    return float(np.min((q - p) @ g))
