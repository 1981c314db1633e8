"""Independent reference solvers and brute-force verifiers.

Everything here exists to certify answers before the main solvers are
trusted: gradients against finite differences, consensus optima by 1-D
search or projected gradient on the agreement variable, allocation
optima by dual bisection on the coupling multiplier, and full saddle
references by assembling the operators from dense Laplacian matrices
(never the neighbor-sum code under test).

This module deliberately avoids importing the solver module; the only
shared code is the convex-set projections.
"""

import numpy as np

from . import sets

__all__ = ["CertificationError", "golden_section_min", "finite_diff_check",
           "ConsensusReference", "solve_consensus_reference",
           "KKTReference", "solve_allocation_kkt", "allocation_grid_objective"]


class CertificationError(RuntimeError):
    """A reference solution failed its independent certificate."""


def golden_section_min(fun, lo, hi, tol=1e-12):
    """Minimize a unimodal scalar function on [lo, hi] by golden section.

    Value-based only, so the location accuracy is limited to roughly
    sqrt(machine epsilon) times the interval; callers needing more
    polish the result with a gradient method.
    """
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol * (1.0 + abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def finite_diff_check(value, gradient, points, tol=1e-5):
    """Compare a gradient oracle against central differences.

    Parameters
    ----------
    value : callable
        Scalar function of a 1-D point.
    gradient : callable
        Claimed gradient of `value`.
    points : array_like
        Points to test, one per row.
    tol : float
        Bound on the relative error ``|fd - g| / (1 + |g|)``.

    Returns
    -------
    dict with ``max_rel_error``, ``passed`` and ``worst_point``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    worst = 0.0
    worst_point = None
    for p in points:
        h = 1e-6 * (1.0 + np.linalg.norm(p))
        g = np.asarray(gradient(p), dtype=float)
        fd = np.empty_like(g)
        for i in range(p.size):
            e = np.zeros(p.size)
            e[i] = h
            fd[i] = (value(p + e) - value(p - e)) / (2.0 * h)
        err = np.max(np.abs(fd - g)) / (1.0 + np.max(np.abs(g)))
        if err > worst:
            worst = err
            worst_point = p.copy()
    return {"max_rel_error": float(worst), "passed": bool(worst <= tol),
            "worst_point": worst_point}


def _intersection_box(problem):
    # the consensus constraint collapses the feasible set to the
    # intersection of the agent boxes
    lo = np.max(np.stack([a.cset.lower for a in problem.agents]), axis=0)
    hi = np.min(np.stack([a.cset.upper for a in problem.agents]), axis=0)
    if np.any(lo > hi):
        raise CertificationError("agent boxes have empty intersection")
    return lo, hi


def _grad_sum(problem, s):
    return problem.gradient_rows(np.tile(s, (problem.n, 1))).sum(axis=0)


def _value_sum(problem, s):
    return float(np.sum(problem.objective_rows(np.tile(s, (problem.n, 1)))))


class ConsensusReference(object):
    """Certified consensus optimum and the matching saddle point.

    Fields: ``x_bar`` (the common decision), stacked ``x`` and dual
    ``v`` rows, ``objective``, the normal-cone residual of the
    agreement problem and the dense-operator saddle residual.
    """

    def __init__(self, x_bar, x, v, objective, cone_residual, saddle_residual):
        self.x_bar = x_bar
        self.x = x
        self.v = v
        self.objective = objective
        self.cone_residual = cone_residual
        self.saddle_residual = saddle_residual


def _consensus_saddle_residual(problem, x, v):
    # dense-matrix assembly of the operator, independent of the
    # neighbor-sum route the solvers use
    lap = problem.graph.laplacian()
    gx = problem.gradient_rows(x) + lap @ (x + v)
    gv = -(lap @ x)
    rx = x - problem.project_rows(x - gx)
    return float(np.sqrt(np.sum(rx ** 2) + np.sum(gv ** 2)))


def solve_consensus_reference(problem, tol=1e-8):
    """Solve the agreement problem and certify the resulting saddle.

    The common decision minimizes the summed objectives over the
    intersection of the agent boxes: golden section for scalar
    decisions (polished by projected gradient), projected gradient with
    a small step otherwise. The dual is recovered through the
    Laplacian pseudoinverse and the pair certified by the dense-matrix
    natural-map residual.
    """
    if any(not isinstance(a.cset, sets.Box) for a in problem.agents):
        raise CertificationError("consensus reference needs box sets")
    lo, hi = _intersection_box(problem)
    box = sets.Box(lo, hi)
    lip = sum(a.lipschitz for a in problem.agents)
    s = box.project(np.zeros(problem.m))
    if problem.m == 1:
        cand = golden_section_min(lambda t: _value_sum(problem, np.array([t])),
                                  lo[0], hi[0])
        cand = np.array([cand])
        if _value_sum(problem, cand) < _value_sum(problem, s):
            s = cand
    if lip > 0:
        step = 1.0 / lip
        for _ in range(10 ** 7):
            s_new = box.project(s - step * _grad_sum(problem, s))
            move = np.max(np.abs(s_new - s))
            s = s_new
            if move <= 1e-16 * (1.0 + np.max(np.abs(s))):
                break
    cone = sets.normal_cone_residual(box, s, _grad_sum(problem, s))
    if cone > tol:
        raise CertificationError(
            "consensus optimum failed certification: normal-cone residual"
            " %.3e > %.1e" % (cone, tol))
    x = np.tile(s, (problem.n, 1))
    v = -np.linalg.pinv(problem.graph.laplacian()) @ problem.gradient_rows(x)
    resid = _consensus_saddle_residual(problem, x, v)
    if resid > tol:
        raise CertificationError(
            "consensus saddle failed certification: residual %.3e > %.1e"
            % (resid, tol))
    return ConsensusReference(s, x, v, _value_sum(problem, s), cone, resid)


class KKTReference(object):
    """Certified allocation optimum with multiplier and saddle point.

    Fields: stacked decisions ``y``, the scalar multiplier ``mu``, the
    consensus dual rows ``lam`` and auxiliary rows ``a`` completing the
    saddle point, ``objective``, and the certificate residuals
    ``feasibility`` (aggregate constraint), ``stationarity_gap`` (grid
    refinement) and ``saddle_residual`` (dense operators).
    """

    def __init__(self, y, mu, a, lam, objective, feasibility,
                 stationarity_gap, saddle_residual):
        self.y = y
        self.mu = mu
        self.a = a
        self.lam = lam
        self.objective = objective
        self.feasibility = feasibility
        self.stationarity_gap = stationarity_gap
        self.saddle_residual = saddle_residual


def _argmin_box_bisect(dfun, lo, hi):
    # 1-D minimizer of a convex function over [lo, hi] by bisection on
    # its nondecreasing derivative, run to ULP convergence
    if dfun(lo) >= 0.0:
        return lo
    if dfun(hi) <= 0.0:
        return hi
    a, b = lo, hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if dfun(mid) > 0.0:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


def _grid_refine_min(fun, lo, hi, levels=5, points=100):
    # nested uniform grids; final resolution (hi-lo) / points**levels
    a, b = float(lo), float(hi)
    for _ in range(levels):
        grid = np.linspace(a, b, points + 1)
        vals = np.array([fun(t) for t in grid])
        k = int(np.argmin(vals))
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, points)]
    return 0.5 * (a + b)


def _allocation_saddle_residual(problem, y, a, lam):
    lap = problem.graph.laplacian()
    grad = problem.gradient_vec(y)
    gy = grad + np.concatenate([sp.weight.T @ lam[i]
                                for i, sp in enumerate(problem.agents)])
    ga = -(lap @ lam)
    e = np.stack([sp.weight @ y[problem._yslices[i]] - sp.demand
                  for i, sp in enumerate(problem.agents)])
    glam = -(e - lap @ (a + lam))
    ry = y - problem.project_y(y - gy)
    return float(np.sqrt(np.sum(ry ** 2) + np.sum(ga ** 2) + np.sum(glam ** 2)))


def solve_allocation_kkt(problem, tol=1e-8):
    """Reference allocation optimum by bisection on the coupling dual.

    Requires scalar coupling (m = 1) and box sets. For each multiplier
    value, every agent's inner problem ``h_i(y) + mu W_i y`` over its
    box is solved by derivative bisection (convex, so the derivative is
    nondecreasing); the outer bisection exploits that the aggregate
    supply is nonincreasing in the multiplier. Both loops run to ULP
    convergence, so on instances with exact-float optima the reference
    is exact. Raises `CertificationError` when no bracket contains the
    balance point (infeasible instance) or a certificate fails.
    """
    if problem.m != 1:
        raise CertificationError("dual bisection requires scalar coupling")
    if any(a.cset.dim != 1 or not isinstance(a.cset, sets.Box)
           for a in problem.agents):
        raise CertificationError("dual bisection requires scalar box sets")
    n = problem.n
    w = np.array([a.weight[0, 0] for a in problem.agents])
    d_total = float(problem.demand.sum())
    los = np.array([a.cset.lower[0] for a in problem.agents])
    his = np.array([a.cset.upper[0] for a in problem.agents])

    def y_of_mu(mu):
        ys = np.empty(n)
        for i, sp in enumerate(problem.agents):
            ys[i] = _argmin_box_bisect(
                lambda t: float(sp.gradient(np.array([t]))[0]) + mu * w[i],
                los[i], his[i])
        return ys

    def gap(mu):
        return float(np.sum(w * y_of_mu(mu)) - d_total)

    sup_grad = max(
        max(abs(float(sp.gradient(np.array([los[i]]))[0])),
            abs(float(sp.gradient(np.array([his[i]]))[0])))
        for i, sp in enumerate(problem.agents))
    nonzero = np.abs(w[w != 0.0])
    m_bracket = 10.0 * (1.0 + sup_grad / nonzero.min()) if nonzero.size else 10.0
    for _ in range(6):
        if gap(-m_bracket) >= 0.0 >= gap(m_bracket):
            break
        m_bracket *= 10.0
    else:
        raise CertificationError(
            "no multiplier bracket balances the coupling constraint;"
            " instance is likely infeasible")
    a, b = -m_bracket, m_bracket
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if gap(mid) > 0.0:
            a = mid
        else:
            b = mid
    mu = 0.5 * (a + b)
    y = y_of_mu(mu)
    feas = abs(float(np.sum(w * y) - d_total))
    if feas > 1e-10:
        raise CertificationError(
            "bisection left aggregate imbalance %.3e > 1e-10" % feas)

    # grid-refinement stationarity certificate: each agent's decision
    # must be at least as good as a brute-force search of its inner
    # problem
    gap_stat = 0.0
    for i, sp in enumerate(problem.agents):
        inner = lambda t, sp=sp, i=i: (float(sp.objective(np.array([t])))
                                       + mu * w[i] * t)
        t_grid = _grid_refine_min(inner, los[i], his[i])
        gap_stat = max(gap_stat, inner(float(y[i])) - inner(t_grid))
    if gap_stat > 1e-12:
        raise CertificationError(
            "stationarity certificate failed: gap %.3e > 1e-12" % gap_stat)

    objective = float(np.sum(problem.objective_rows(y)))
    lam = np.full((n, 1), mu)
    e = np.stack([sp.weight @ y[problem._yslices[i]] - sp.demand
                  for i, sp in enumerate(problem.agents)])
    a_rows = np.linalg.pinv(problem.graph.laplacian()) @ e
    resid = _allocation_saddle_residual(problem, y, a_rows, lam)
    if resid > tol:
        raise CertificationError(
            "allocation saddle failed certification: residual %.3e > %.1e"
            % (resid, tol))
    return KKTReference(y, mu, a_rows, lam, objective, feas, gap_stat, resid)


def allocation_grid_objective(problem, grid_step=1e-4):
    """Brute-force allocation optimum for two-agent scalar instances.

    Sweeps the first agent's box on a uniform grid, solves the coupling
    constraint for the second agent in closed form, and returns the
    best feasible objective with its decisions. A method-independent
    cross-check of `solve_allocation_kkt`.
    """
    if problem.n != 2 or problem.m != 1 or problem.dim_y != 2:
        raise ValueError("grid search covers two scalar agents only")
    w0 = problem.agents[0].weight[0, 0]
    w1 = problem.agents[1].weight[0, 0]
    if w1 == 0.0:
        raise ValueError("second agent needs nonzero coupling weight")
    d_total = float(problem.demand.sum())
    lo0 = problem.agents[0].cset.lower[0]
    hi0 = problem.agents[0].cset.upper[0]
    grid = np.arange(lo0, hi0 + grid_step, grid_step)
    y1 = (d_total - w0 * grid) / w1
    ok = ((y1 >= problem.agents[1].cset.lower[0])
          & (y1 <= problem.agents[1].cset.upper[0]))
    if not np.any(ok):
        raise ValueError("no feasible grid point")
    grid, y1 = grid[ok], y1[ok]
    vals = np.array([float(problem.agents[0].objective(np.array([g]))
                           + problem.agents[1].objective(np.array([t])))
                     for g, t in zip(grid, y1)])
    k = int(np.argmin(vals))
    return float(vals[k]), np.array([grid[k], y1[k]])
