"""Distributed resource allocation via a saddle-point reformulation.

Agents hold local decisions ``y_i`` (dimension ``q_i``), coupled only
through the global constraint ``sum_i (W_i y_i - d_i) = 0``. With
auxiliary variables ``a_i`` and multipliers ``lam_i`` (both dimension
``m``) on each vertex, the modified Lagrangian

``L2(y, a, lam) = sum_i h_i(y_i) + lam.(W y - d - (L (x) I_m) a)
                  - lam.(L (x) I_m) lam / 2``

has saddle points whose ``y`` solves the allocation problem whenever
the multipliers agree across agents, which the Laplacian penalty
enforces. The saddle operator

``Psi = [grad h + W' lam; -L lam; -(W y - d - L (a + lam))]``

again decomposes into neighbor sums. As in `consensus`, the stacked
step functions here and the per-agent message-passing route in
`network` use the same expression shapes and neighbor ordering so both
produce the same trajectories.
"""

import numpy as np

from . import sets
from .core import SaddleProblem, ValidationError
from .graphs import lambda_max
from .solvers import step_bound

__all__ = ["AllocationAgentSpec", "AllocationProblem", "AllocationState",
           "lagrangian_L2", "operator_psi", "step_allocation_ogda",
           "step_allocation_eg", "feasibility_gap", "simulate_allocation",
           "AllocationTrace"]


class AllocationAgentSpec(object):
    """Local data of one agent in the allocation problem.

    Parameters
    ----------
    objective : callable
        ``h_i(y_i) -> float`` on q_i-vectors.
    gradient : callable
        ``grad h_i(y_i) -> q_i-vector``.
    cset : ConvexSet
        Local set Omega_i of dimension q_i.
    weight : array_like
        Coupling matrix ``W_i`` of shape ``(m, q_i)``.
    demand : array_like
        Local demand ``d_i`` of shape ``(m,)``.
    lipschitz : float
        Lipschitz constant of the gradient.
    """

    def __init__(self, objective, gradient, cset, weight, demand, lipschitz):
        self.objective = objective
        self.gradient = gradient
        self.cset = cset
        self.weight = np.atleast_2d(np.asarray(weight, dtype=float))
        self.demand = np.atleast_1d(np.asarray(demand, dtype=float))
        self.lipschitz = float(lipschitz)
        if self.weight.shape != (self.demand.size, cset.dim):
            raise ValidationError("weight must be (m, q_i) with d of size m")
        if self.lipschitz < 0:
            raise ValidationError("agent lipschitz constant must be nonnegative")


class AllocationProblem(object):
    """Resource allocation instance over an undirected connected graph.

    Parameters
    ----------
    graph : NetworkGraph
    agents : list of AllocationAgentSpec
        One per vertex; all demands must share the dimension ``m``.
    vector_objective, vector_gradient : callable, optional
        Vectorized oracles on the stacked decision vector (length
        ``Q = sum q_i``) returning per-agent values ``(N,)`` resp. the
        stacked gradient ``(Q,)``; must match the per-agent oracles
        elementwise. Long runs need these to stay fast.

    Attributes
    ----------
    kappa_s : float
        Declared Lipschitz constant of Psi,
        ``max_i l_i + sigma_max(W) + 2 lambda_max(L) + 1``.
    """

    def __init__(self, graph, agents, vector_objective=None,
                 vector_gradient=None, name=None):
        if len(agents) != graph.n:
            raise ValidationError("need one agent spec per vertex")
        m = agents[0].demand.size
        if any(a.demand.size != m for a in agents):
            raise ValidationError("all agents must share the constraint dimension")
        self.graph = graph
        self.n = graph.n
        self.m = int(m)
        self.agents = list(agents)
        self.q = [a.cset.dim for a in agents]
        self.dim_y = int(sum(self.q))
        offsets = np.cumsum([0] + self.q)
        self._yslices = [slice(int(offsets[i]), int(offsets[i + 1]))
                         for i in range(self.n)]
        self.vector_objective = vector_objective
        self.vector_gradient = vector_gradient
        self.name = name or "allocation"
        self.meta = {}
        self.lambda_max = lambda_max(graph)
        self.l_h = max(a.lipschitz for a in agents)
        # block-diagonal W, so the largest singular value is the max over agents
        self.sigma_w = max(np.linalg.norm(a.weight, 2) for a in agents)
        self.kappa_s = self.l_h + self.sigma_w + 2.0 * self.lambda_max + 1.0
        self.demand = np.stack([a.demand for a in agents])
        # scalar fast path: every W_i is 1x1, so the coupling reduces to
        # elementwise products with the same one multiply per component
        if self.m == 1 and all(qi == 1 for qi in self.q):
            self._wdiag = np.array([a.weight[0, 0] for a in agents])
        else:
            self._wdiag = None
        if all(isinstance(a.cset, sets.Box) for a in agents):
            self._lo = np.concatenate([a.cset.lower for a in agents])
            self._hi = np.concatenate([a.cset.upper for a in agents])
        else:
            self._lo = self._hi = None

    def y_block(self, y, i):
        return y[self._yslices[i]]

    def rows(self, flat):
        """Reshape a stacked ``Nm`` vector into per-agent rows."""
        return np.asarray(flat, dtype=float).reshape(self.n, self.m)

    def objective_rows(self, y):
        if self.vector_objective is not None:
            return np.asarray(self.vector_objective(y), dtype=float)
        return np.array([a.objective(y[self._yslices[i]])
                         for i, a in enumerate(self.agents)])

    def total_objective(self, y):
        return float(np.sum(self.objective_rows(y)))

    def gradient_vec(self, y):
        """Stacked objective gradient of length ``Q``."""
        if self.vector_gradient is not None:
            return np.asarray(self.vector_gradient(y), dtype=float)
        return np.concatenate([np.atleast_1d(a.gradient(y[self._yslices[i]]))
                               for i, a in enumerate(self.agents)])

    def wt_lam(self, lam):
        """Stacked ``W_i' lam_i`` of length ``Q``."""
        if self._wdiag is not None:
            return self._wdiag * lam[:, 0]
        return np.concatenate([a.weight.T @ lam[i]
                               for i, a in enumerate(self.agents)])

    def wy_minus_d(self, y):
        """Per-agent constraint contributions ``W_i y_i - d_i`` as rows."""
        if self._wdiag is not None:
            return (self._wdiag * y - self.demand[:, 0]).reshape(self.n, 1)
        return np.stack([a.weight @ y[self._yslices[i]] - a.demand
                         for i, a in enumerate(self.agents)])

    def project_y(self, y):
        """Project the stacked decision vector onto the product set."""
        if self._lo is not None:
            return np.clip(y, self._lo, self._hi)
        return np.concatenate([a.cset.project(y[self._yslices[i]])
                               for i, a in enumerate(self.agents)])

    def __repr__(self):
        return "AllocationProblem({}, n={}, m={})".format(self.name, self.n, self.m)


def lagrangian_L2(problem, y, a, lam):
    """Modified Lagrangian value; `a` and `lam` as rows or flat vectors."""
    y = np.asarray(y, dtype=float).ravel()
    a = problem.rows(a)
    lam = problem.rows(lam)
    e = problem.wy_minus_d(y)
    return float(np.sum(problem.objective_rows(y))
                 + np.sum(lam * (e - problem.graph.lap_apply(a)))
                 - 0.5 * np.sum(lam * problem.graph.lap_apply(lam)))


def _psi_rows(problem, y, a, lam):
    """Blocks of Psi: ``(grad h + W'lam, -L lam, -(W y - d - L(a + lam)))``."""
    gy = problem.gradient_vec(y) + problem.wt_lam(lam)
    ga = -problem.graph.lap_apply(lam)
    glam = -(problem.wy_minus_d(y) - problem.graph.lap_apply(a + lam))
    return gy, ga, glam


def operator_psi(problem, y, a, lam):
    """Saddle operator Psi at ``(y, a, lam)`` as one stacked vector."""
    gy, ga, glam = _psi_rows(problem, np.asarray(y, dtype=float).ravel(),
                             problem.rows(a), problem.rows(lam))
    return np.concatenate([gy, ga.ravel(), glam.ravel()])


def feasibility_gap(problem, y):
    """Norm of the aggregate constraint violation ``sum_i (W_i y_i - d_i)``."""
    y = np.asarray(y, dtype=float).ravel()
    return float(np.linalg.norm(problem.wy_minus_d(y).sum(axis=0)))


def as_saddle_problem(problem):
    """Expose the allocation dynamics as a generic saddle problem.

    Primal block: stacked ``(y, a)`` over the product of the agent sets
    and a free block; dual block: stacked multipliers. The declared
    operator constant is ``kappa_s``.
    """
    nm = problem.n * problem.m
    dim_x = problem.dim_y + nm
    lam_norm = problem.lambda_max
    cross = float(np.sqrt(problem.sigma_w ** 2 + lam_norm ** 2))

    def split_x(x):
        return x[:problem.dim_y], problem.rows(x[problem.dim_y:])

    def value(x, lam):
        y, a = split_x(x)
        return lagrangian_L2(problem, y, a, lam)

    def grad_x(x, lam):
        y, a = split_x(x)
        lam = problem.rows(lam)
        gy = problem.gradient_vec(y) + problem.wt_lam(lam)
        ga = -problem.graph.lap_apply(lam)
        return np.concatenate([gy, ga.ravel()])

    def grad_y(x, lam):
        y, a = split_x(x)
        lam = problem.rows(lam)
        e = problem.wy_minus_d(y) - problem.graph.lap_apply(a + lam)
        return e.ravel()

    return SaddleProblem(
        dim_x, nm,
        sets.Product([a.cset for a in problem.agents]
                     + [sets.WholeSpace(nm)]),
        sets.WholeSpace(nm),
        value, grad_x, grad_y,
        lipschitz={"l_xx": problem.l_h, "l_xy": cross,
                   "l_yx": cross, "l_yy": lam_norm},
        kappa=problem.kappa_s,
        name=problem.name + "-stacked")


class AllocationState(object):
    """Per-agent iterates and cached operator values of the last step.

    ``y`` is the stacked decision vector of length ``Q``; ``a`` and
    ``lam`` are ``(N, m)`` arrays. Caching mirrors `ConsensusState`.
    """

    def __init__(self, y, a, lam, y_prev=None, a_prev=None, lam_prev=None,
                 psi_y_prev=None, psi_a_prev=None, psi_lam_prev=None,
                 y_half=None, a_half=None, lam_half=None):
        self.y = y
        self.a = a
        self.lam = lam
        self.y_prev = y_prev
        self.a_prev = a_prev
        self.lam_prev = lam_prev
        self.psi_y_prev = psi_y_prev
        self.psi_a_prev = psi_a_prev
        self.psi_lam_prev = psi_lam_prev
        self.y_half = y_half
        self.a_half = a_half
        self.lam_half = lam_half
        self.psi_y = None
        self.psi_a = None
        self.psi_lam = None

    def ensure_psi(self, problem):
        """Memoize Psi at the current point; returns its three blocks."""
        if self.psi_y is None:
            self.psi_y, self.psi_a, self.psi_lam = _psi_rows(
                problem, self.y, self.a, self.lam)
        return self.psi_y, self.psi_a, self.psi_lam


def initial_state(problem, y0=None, a0=None, lam0=None):
    """Starting state; decisions default to the projection of zero."""
    if y0 is None:
        y0 = problem.project_y(np.zeros(problem.dim_y))
    else:
        y0 = np.asarray(y0, dtype=float).ravel().copy()
    a0 = np.zeros((problem.n, problem.m)) if a0 is None else problem.rows(a0).copy()
    lam0 = np.zeros((problem.n, problem.m)) if lam0 is None else problem.rows(lam0).copy()
    return AllocationState(y0, a0, lam0)


def step_allocation_ogda(problem, state, alpha):
    """One optimistic step of every agent; returns the new state."""
    gy, ga, glam = state.ensure_psi(problem)
    gyp = gy if state.psi_y_prev is None else state.psi_y_prev
    gap = ga if state.psi_a_prev is None else state.psi_a_prev
    glp = glam if state.psi_lam_prev is None else state.psi_lam_prev
    y_new = problem.project_y(state.y - 2.0 * alpha * gy + alpha * gyp)
    a_new = state.a - 2.0 * alpha * ga + alpha * gap
    lam_new = state.lam - 2.0 * alpha * glam + alpha * glp
    return AllocationState(y_new, a_new, lam_new,
                           y_prev=state.y, a_prev=state.a, lam_prev=state.lam,
                           psi_y_prev=gy, psi_a_prev=ga, psi_lam_prev=glam)


def step_allocation_eg(problem, state, alpha):
    """One extra-gradient step of every agent; returns the new state.

    The final update steps from the current point using the mid-point
    operator values for every block, decisions included.
    """
    gy, ga, glam = state.ensure_psi(problem)
    y_half = problem.project_y(state.y - alpha * gy)
    a_half = state.a - alpha * ga
    lam_half = state.lam - alpha * glam
    gyh, gah, glh = _psi_rows(problem, y_half, a_half, lam_half)
    y_new = problem.project_y(state.y - alpha * gyh)
    a_new = state.a - alpha * gah
    lam_new = state.lam - alpha * glh
    return AllocationState(y_new, a_new, lam_new,
                           y_prev=state.y, a_prev=state.a, lam_prev=state.lam,
                           y_half=y_half, a_half=a_half, lam_half=lam_half)


def _vi_residual_rows(problem, state):
    # natural-map residual of the stacked saddle problem; the free
    # blocks contribute their operator values directly
    gy, ga, glam = state.ensure_psi(problem)
    ry = state.y - problem.project_y(state.y - gy)
    return float(np.sqrt(np.sum(ry ** 2) + np.sum(ga ** 2) + np.sum(glam ** 2)))


class AllocationTrace(object):
    """Recorded trajectory of a distributed allocation run.

    Arrays indexed by recorded row: ``y`` of shape ``(rows, Q)``,
    ``a``/``lam`` of shape ``(rows, N, m)``, running ergodic averages
    (NaN on row 0), ``feasibility_gap``, ``objective`` and the stacked
    natural-map residual ``vi_residual``.
    """

    def __init__(self, problem, method, alpha):
        self.problem = problem
        self.method = method
        self.alpha = alpha
        self.gradient_calls = 0
        self.stopped_at = None
        self._rows = []

    def _append(self, it, state, erg, resid):
        self._rows.append((it, state.y.copy(), state.a.copy(), state.lam.copy(),
                           None if erg is None else tuple(e.copy() for e in erg),
                           feasibility_gap(self.problem, state.y),
                           self.problem.total_objective(state.y),
                           resid))

    def _finalize(self):
        rows = self._rows
        n, m, q = self.problem.n, self.problem.m, self.problem.dim_y
        self.iters = np.array([r[0] for r in rows], dtype=int)
        self.y = np.array([r[1] for r in rows])
        self.a = np.array([r[2] for r in rows])
        self.lam = np.array([r[3] for r in rows])
        self.erg_y = np.full((len(rows), q), np.nan)
        self.erg_a = np.full((len(rows), n, m), np.nan)
        self.erg_lam = np.full((len(rows), n, m), np.nan)
        for i, r in enumerate(rows):
            if r[4] is not None:
                self.erg_y[i], self.erg_a[i], self.erg_lam[i] = r[4]
        self.feasibility_gap = np.array([r[5] for r in rows])
        self.objective = np.array([r[6] for r in rows])
        self.vi_residual = np.array([r[7] for r in rows])
        del self._rows

    def to_csv(self, path):
        """Write the per-agent trace: one row per (iteration, agent).

        Requires every agent to have the same decision dimension so the
        rows are homogeneous.
        """
        q = set(self.problem.q)
        if len(q) != 1:
            raise ValidationError("per-agent trace needs equal decision"
                                  " dimensions across agents")
        q = q.pop()
        m = self.problem.m
        header = (["iter", "agent_id"]
                  + ["y{}".format(c) for c in range(q)]
                  + ["a{}".format(c) for c in range(m)]
                  + ["lambda{}".format(c) for c in range(m)]
                  + ["feasibility_gap", "objective_sum"])
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in range(self.iters.size):
                yr = self.y[r].reshape(self.problem.n, q)
                for i in range(self.problem.n):
                    row = ([str(int(self.iters[r])), str(i)]
                           + ["%.17g" % val for val in yr[i]]
                           + ["%.17g" % val for val in self.a[r, i]]
                           + ["%.17g" % val for val in self.lam[r, i]]
                           + ["%.17g" % self.feasibility_gap[r],
                              "%.17g" % self.objective[r]])
                    fh.write(",".join(row) + "\n")


def simulate_allocation(problem, method, alpha=None, max_iters=1000,
                        y0=None, a0=None, lam0=None, record_every=1,
                        stop_tol=0.0):
    """Run the distributed allocation dynamics on stacked arrays.

    Parameters mirror `simulate_consensus`; the step-size bounds use
    ``kappa_s``. Returns an `AllocationTrace`.
    """
    method = str(method).upper()
    if method not in ("OGDA", "EG"):
        raise ValidationError("distributed methods are OGDA and EG")
    bound = step_bound(method, problem.kappa_s)
    if alpha is None:
        alpha = 0.9 * bound
    elif not alpha < bound:
        raise ValidationError(
            "step size {:g} violates the {} bound {:g} (kappa_s={:g})"
            .format(alpha, method, bound, problem.kappa_s))

    state = initial_state(problem, y0, a0, lam0)
    trace = AllocationTrace(problem, method, alpha)
    state.ensure_psi(problem)
    trace.gradient_calls = 1
    resid = _vi_residual_rows(problem, state)
    trace._append(0, state, None, resid)

    erg_y = np.zeros(problem.dim_y)
    erg_a = np.zeros((problem.n, problem.m))
    erg_lam = np.zeros((problem.n, problem.m))
    count = 0
    step = step_allocation_ogda if method == "OGDA" else step_allocation_eg

    def reached(r):
        return stop_tol > 0 and r <= stop_tol

    if reached(resid):
        trace.stopped_at = 0
        trace._finalize()
        return trace

    for k in range(max_iters):
        it = k + 1
        state = step(problem, state, alpha)
        if method == "EG":
            erg_y += state.y_half
            erg_a += state.a_half
            erg_lam += state.lam_half
        else:
            erg_y += state.y
            erg_a += state.a
            erg_lam += state.lam
        count += 1
        state.ensure_psi(problem)
        trace.gradient_calls += 2 if method == "EG" else 1
        resid = _vi_residual_rows(problem, state)
        done = reached(resid) or it == max_iters
        if it % record_every == 0 or done:
            trace._append(it, state,
                          (erg_y / count, erg_a / count, erg_lam / count),
                          resid)
        if reached(resid):
            trace.stopped_at = it
            break
    trace._finalize()
    return trace
