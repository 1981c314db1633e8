"""Projected primal-dual iterations: GDA baseline, OGDA, and extra-gradient.

All three methods share the template ``z <- P(z - alpha * direction)``
over the product set X x Y. OGDA adds the gradient-correction term
``alpha (F(z_k) - F(z_{k-1}))`` and EG probes a mid-point first. The
runner keeps the running ergodic averages the O(1/T) rate statements
are about (plain iterates for OGDA, mid-points for EG), streams rows to
the trace at a configurable granularity, and counts operator
evaluations: one per iteration for GDA and OGDA (the previous value is
cached), two for EG, plus the single initial evaluation at z_0.
"""

import numpy as np

from .core import (IterateZ, ValidationError, operator_F)

__all__ = ["METHODS", "SolverConfig", "RunTrace", "DivergenceError",
           "step_bound", "step_gda", "step_ogda", "step_eg", "run",
           "delta_diagnostic", "eg_contraction_check"]

METHODS = ("GDA", "OGDA", "EG")

TRACE_COLUMNS = ("iter", "f_value", "vi_residual", "step_norm",
                 "dist_to_ref", "ergodic_gap", "delta_k")

# iterates larger than this trip the divergence guard
DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    """The iterate left the trust region or turned non-finite."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


def step_bound(method, kappa_m):
    """Largest admissible step size for `method` at operator constant `kappa_m`.

    ``1/(2 kappa)`` for OGDA, ``1/kappa`` for EG, unbounded for the GDA
    baseline (no convergence guarantee exists for it either way).
    """
    if kappa_m < 0:
        raise ValidationError("kappa_m must be nonnegative")
    if method == "OGDA":
        return np.inf if kappa_m == 0 else 1.0 / (2.0 * kappa_m)
    if method == "EG":
        return np.inf if kappa_m == 0 else 1.0 / kappa_m
    if method == "GDA":
        return np.inf
    raise ValidationError("unknown method {!r}".format(method))


class SolverConfig(object):
    """Run parameters for one solver invocation.

    Parameters
    ----------
    method : str
        One of ``GDA``, ``OGDA``, ``EG`` (case-insensitive).
    step_size : float, optional
        Constant step alpha. When omitted, ``0.9 * bound`` is used
        (GDA, having no bound of its own, reuses the OGDA default).
    max_iters : int
    stop_tol : float
        Stop once the natural-map residual falls to this level; zero
        disables early stopping (runs all `max_iters` iterations).
    record_every : int
        Trace granularity; the final iterate is always recorded.
    force_step : bool
        Skip the step-size bound check. The theorems no longer apply;
        meant for negative controls.
    """

    def __init__(self, method, step_size=None, max_iters=1000, stop_tol=1e-10,
                 record_every=1, force_step=False):
        method = str(method).upper()
        if method not in METHODS:
            raise ValidationError("method must be one of {}, got {!r}"
                                  .format("/".join(METHODS), method))
        if step_size is not None and not step_size > 0:
            raise ValidationError("step size must be positive")
        if max_iters < 0:
            raise ValidationError("max_iters must be nonnegative")
        if stop_tol < 0:
            raise ValidationError("stop_tol must be nonnegative")
        if record_every < 1:
            raise ValidationError("record_every must be at least 1")
        self.method = method
        self.step_size = None if step_size is None else float(step_size)
        self.max_iters = int(max_iters)
        self.stop_tol = float(stop_tol)
        self.record_every = int(record_every)
        self.force_step = bool(force_step)

    def resolved_step(self, kappa_m):
        """Return the validated step size for a problem with constant `kappa_m`."""
        bound = step_bound(self.method, kappa_m)
        if self.step_size is None:
            if not np.isfinite(bound):
                ogda_bound = step_bound("OGDA", kappa_m)
                return 1.0 if not np.isfinite(ogda_bound) else 0.9 * ogda_bound
            return 0.9 * bound
        if self.step_size >= bound and not self.force_step:
            raise ValidationError(
                "step size {:g} violates the {} bound {:g} (kappa_m={:g}); "
                "set force_step to override".format(
                    self.step_size, self.method, bound, kappa_m))
        return self.step_size


def step_gda(problem, z, alpha, f_z=None):
    """One projected gradient descent-ascent step ``P(z - alpha F(z))``."""
    if f_z is None:
        f_z = operator_F(problem, z)
    return problem.domain.project(z - alpha * f_z)


def step_ogda(problem, z, z_prev, alpha, f_z=None, f_z_prev=None):
    """One optimistic step ``P(z - 2 alpha F(z) + alpha F(z_prev))``.

    The first step passes ``z_prev = z`` (the prescribed start
    ``z_{-1} = z_0``), which collapses the correction and reduces to a
    GDA step.
    """
    if f_z is None:
        f_z = operator_F(problem, z)
    if f_z_prev is None:
        f_z_prev = operator_F(problem, z_prev)
    return problem.domain.project(z - 2.0 * alpha * f_z + alpha * f_z_prev)


def step_eg(problem, z, alpha, f_z=None):
    """One extra-gradient step; returns ``(z_half, z_next)``.

    The mid-point is a GDA probe from `z`; the actual step leaves from
    `z` using the operator value at the mid-point.
    """
    if f_z is None:
        f_z = operator_F(problem, z)
    z_half = problem.domain.project(z - alpha * f_z)
    f_half = operator_F(problem, z_half)
    z_next = problem.domain.project(z - alpha * f_half)
    return z_half, z_next


class RunTrace(object):
    """Recorded trajectory of one solver run.

    Rows are recorded every `record_every` iterations plus always the
    initial point and the final iterate. Row arrays:

    - ``iters``: iteration numbers of the rows.
    - ``z``: iterates, shape ``(rows, dim)``.
    - ``z_half``: for EG, row k holds the mid-point of the step that
      produced iterate k (NaN on the first row); None otherwise.
    - ``f_value``, ``vi_residual``, ``step_norm``: objective, natural-map
      residual, and displacement of the producing step (NaN on row 0).
    - ``ergodic_x``, ``ergodic_y``: running averages over iterates 1..T
      (OGDA/GDA) or mid-points 0..T-1 (EG); NaN on row 0.
    - ``dist_to_ref``, ``ergodic_gap``: distance to the reference point
      and ``|f(ergodic) - f(reference)|`` when a reference was given.
    - ``delta_k``: filled in by `delta_diagnostic`.
    """

    def __init__(self, method, alpha, record_every, stop_tol, kappa_m,
                 z0, z_star, f_star, dim_x):
        self.method = method
        self.alpha = alpha
        self.record_every = record_every
        self.stop_tol = stop_tol
        self.kappa_m = kappa_m
        self.z0 = z0.copy()
        self.z_star = None if z_star is None else np.asarray(z_star, dtype=float)
        self.f_star = f_star
        self.dim_x = dim_x
        self.gradient_calls = 0
        self.stopped_at = None
        self.delta_k = None
        self._rows = []

    def _append(self, it, z, z_half, f_value, resid, step_norm, erg, gap):
        dist = np.nan if self.z_star is None else float(np.linalg.norm(z - self.z_star))
        self._rows.append((it, z.copy(),
                           None if z_half is None else z_half.copy(),
                           f_value, resid, step_norm,
                           None if erg is None else erg.copy(), gap, dist))

    def _finalize(self):
        rows = self._rows
        dim = rows[0][1].size
        n = len(rows)
        self.iters = np.array([r[0] for r in rows], dtype=int)
        self.z = np.array([r[1] for r in rows])
        if self.method == "EG":
            self.z_half = np.full((n, dim), np.nan)
            for i, r in enumerate(rows):
                if r[2] is not None:
                    self.z_half[i] = r[2]
        else:
            self.z_half = None
        self.f_value = np.array([r[3] for r in rows])
        self.vi_residual = np.array([r[4] for r in rows])
        self.step_norm = np.array([r[5] for r in rows])
        self.ergodic = np.full((n, dim), np.nan)
        for i, r in enumerate(rows):
            if r[6] is not None:
                self.ergodic[i] = r[6]
        self.ergodic_x = self.ergodic[:, :self.dim_x]
        self.ergodic_y = self.ergodic[:, self.dim_x:]
        self.ergodic_gap = np.array([r[7] for r in rows])
        self.dist_to_ref = np.array([r[8] for r in rows])
        del self._rows

    def iterate(self, row):
        """Return the recorded iterate of a row as an `IterateZ`."""
        z = self.z[row]
        return IterateZ(z[:self.dim_x], z[self.dim_x:])

    def rate_certificate(self):
        """Theorem rate bound ``||z0 - z*||^2 / (2 alpha T)`` per recorded row.

        Rows with T = 0 carry infinity. Requires a reference point.
        """
        if self.z_star is None:
            raise ValueError("rate certificate needs a reference point")
        num = float(np.linalg.norm(self.z0 - self.z_star)) ** 2
        T = self.iters.astype(float)
        out = np.full(T.shape, np.inf)
        pos = T > 0
        out[pos] = num / (2.0 * self.alpha * T[pos])
        return out

    def to_csv(self, path):
        """Write the trace in the documented column order.

        Missing optional values (no reference, no diagnostic) serialize
        as empty fields.
        """
        def fmt(v):
            if v is None or (isinstance(v, float) and not np.isfinite(v)):
                return ""
            return "%.17g" % v

        delta = self.delta_k
        with open(path, "w") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for i in range(self.iters.size):
                row = [str(int(self.iters[i])),
                       fmt(float(self.f_value[i])),
                       fmt(float(self.vi_residual[i])),
                       fmt(float(self.step_norm[i])),
                       fmt(float(self.dist_to_ref[i])),
                       fmt(float(self.ergodic_gap[i])),
                       fmt(None if delta is None else float(delta[i]))]
                fh.write(",".join(row) + "\n")


def run(problem, config, z0, z_star=None):
    """Run a configured method from `z0` and return the `RunTrace`.

    The start may be infeasible; the first projected step lands inside
    the set. When `z_star` is given the trace carries distances to it
    and the ergodic objective gap against ``f(z_star)``, which is what
    the rate certificate bounds.

    Raises
    ------
    ValidationError
        On an inadmissible step size for the method.
    DivergenceError
        When an iterate turns non-finite or leaves the guard region.
    """
    if isinstance(z0, IterateZ):
        z0 = z0.vector
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (problem.dim,):
        raise ValidationError("z0 has shape {}, expected ({},)"
                              .format(z0.shape, problem.dim))
    alpha = config.resolved_step(problem.kappa_m)
    method = config.method
    proj = problem.domain.project

    f_star = None
    if z_star is not None:
        z_star = np.asarray(z_star, dtype=float)
        xs, ys = problem.split(z_star)
        f_star = float(problem.value(xs, ys))

    trace = RunTrace(method, alpha, config.record_every, config.stop_tol,
                     problem.kappa_m, z0, z_star, f_star, problem.dim_x)

    def objective(z):
        x, y = problem.split(z)
        return float(problem.value(x, y))

    def gap(erg):
        if erg is None or f_star is None:
            return np.nan
        return abs(objective(erg) - f_star)

    z = z0.copy()
    f_z = operator_F(problem, z)
    trace.gradient_calls = 1
    resid = float(np.linalg.norm(z - proj(z - f_z)))
    trace._append(0, z, None, objective(z), resid, np.nan, None, np.nan)

    erg_sum = np.zeros(problem.dim)
    erg_count = 0
    f_z_prev = f_z  # OGDA cache, z_{-1} = z_0

    def reached(r):
        return config.stop_tol > 0 and r <= config.stop_tol

    if reached(resid):
        trace.stopped_at = 0
        trace._finalize()
        return trace

    for k in range(config.max_iters):
        it = k + 1
        z_half = None
        if method == "GDA":
            z_new = proj(z - alpha * f_z)
        elif method == "OGDA":
            z_new = proj(z - 2.0 * alpha * f_z + alpha * f_z_prev)
        else:
            z_half = proj(z - alpha * f_z)
            f_half = operator_F(problem, z_half)
            trace.gradient_calls += 1
            z_new = proj(z - alpha * f_half)

        if not np.all(np.isfinite(z_new)) or np.linalg.norm(z_new) > DIVERGENCE_NORM:
            raise DivergenceError(
                "{} iterate diverged at iteration {}".format(method, it),
                iteration=it)

        erg_sum += z_half if method == "EG" else z_new
        erg_count += 1

        f_z_prev = f_z
        f_z = operator_F(problem, z_new)
        trace.gradient_calls += 1
        resid = float(np.linalg.norm(z_new - proj(z_new - f_z)))

        done = reached(resid) or it == config.max_iters
        if it % config.record_every == 0 or done:
            erg = erg_sum / erg_count
            trace._append(it, z_new, z_half, objective(z_new), resid,
                          float(np.linalg.norm(z_new - z)), erg, gap(erg))
        z = z_new
        if reached(resid):
            trace.stopped_at = it
            break

    trace._finalize()
    return trace


def delta_diagnostic(problem, trace, z_star=None, alpha=None, kappa_m=None):
    """Evaluate the OGDA descent quantity Delta_k along a trace.

    With a saddle point z* and step alpha below ``1/(2 kappa_m)``,

    ``Delta_k = ||z_k - z*||^2 / (2 alpha) + (kappa_m / 2) ||z_k - z_{k-1}||^2
    - (z_k - z*) . (F(z_k) - F(z_{k-1}))``

    is nonnegative and satisfies the per-step descent
    ``Delta_{k+1} <= Delta_k - eta ||z_{k+1} - z_k||^2`` with
    ``eta = 1/(2 alpha) - kappa_m``. The sequence is also stored on the
    trace (``delta_k``) so it lands in the CSV.

    Raises
    ------
    ValueError
        On a non-OGDA trace, a trace with gaps between recorded
        iterates, or a missing reference point.
    """
    if trace.method != "OGDA":
        raise ValueError("delta diagnostic is defined along OGDA traces")
    if trace.record_every != 1:
        raise ValueError("delta diagnostic needs consecutively recorded iterates")
    if z_star is None:
        z_star = trace.z_star
    if z_star is None:
        raise ValueError("delta diagnostic needs a reference saddle point")
    alpha = trace.alpha if alpha is None else alpha
    kappa_m = trace.kappa_m if kappa_m is None else kappa_m

    Z = trace.z
    Zprev = np.vstack([Z[:1], Z[:-1]])  # z_{-1} = z_0
    F = np.array([operator_F(problem, Z[i]) for i in range(Z.shape[0])])
    Fprev = np.vstack([F[:1], F[:-1]])
    diff_ref = Z - z_star
    delta = (np.sum(diff_ref ** 2, axis=1) / (2.0 * alpha)
             + 0.5 * kappa_m * np.sum((Z - Zprev) ** 2, axis=1)
             - np.sum(diff_ref * (F - Fprev), axis=1))
    trace.delta_k = delta
    return delta


def eg_contraction_check(trace, z_star=None, alpha=None, kappa_m=None, tol=1e-10):
    """Check the per-step EG contraction toward a saddle point.

    Verifies, for every consecutive recorded pair,

    ``||z_{k+1} - z*||^2 <= ||z_k - z*||^2
    - 2 alpha rho ||z_{k+1} - z_{k+1/2}||^2``

    with ``rho = (1 - alpha^2 kappa_m^2) / (2 alpha)``, up to `tol`
    absolute slack.

    Returns
    -------
    dict
        ``holds``, ``max_violation`` (most positive left-minus-right,
        at most `tol` when passing), ``first_violation`` (iteration
        number or None) and ``rho``.
    """
    if trace.method != "EG":
        raise ValueError("contraction check is defined along EG traces")
    if trace.record_every != 1:
        raise ValueError("contraction check needs consecutively recorded iterates")
    if z_star is None:
        z_star = trace.z_star
    if z_star is None:
        raise ValueError("contraction check needs a reference saddle point")
    alpha = trace.alpha if alpha is None else alpha
    kappa_m = trace.kappa_m if kappa_m is None else kappa_m
    rho = (1.0 - alpha ** 2 * kappa_m ** 2) / (2.0 * alpha)

    d2 = np.sum((trace.z - z_star) ** 2, axis=1)
    extra = np.sum((trace.z[1:] - trace.z_half[1:]) ** 2, axis=1)
    violation = d2[1:] - (d2[:-1] - 2.0 * alpha * rho * extra)
    if violation.size == 0:
        return {"holds": True, "max_violation": 0.0,
                "first_violation": None, "rho": rho}
    bad = np.nonzero(violation > tol)[0]
    return {"holds": bad.size == 0,
            "max_violation": float(np.max(violation)),
            "first_violation": None if bad.size == 0 else int(trace.iters[1 + bad[0]]),
            "rho": rho}
