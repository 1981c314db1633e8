"""Bulk-synchronous message-passing simulation of the distributed runs.

This module re-implements the consensus and allocation dynamics the way
they would run on an actual network: each agent is an object holding
only its own variables, and all cross-agent information flows through
`Network.exchange`, which delivers payloads strictly along graph edges.
No agent ever reads another agent's fields or any stacked array.

The point of the duplication is evidence, not speed. Agents accumulate
neighbor sums in ascending neighbor order and use the same update
expressions as the stacked step functions in `consensus` and
`allocation`, so the two routes produce the same trajectories up to the
last bit (checked in the tests); the stacked route is the one that gets
the fast vectorized oracles.
"""

import numpy as np

__all__ = ["Network", "ConsensusNetworkSimulator", "AllocationNetworkSimulator"]


class Network(object):
    """Synchronous neighbor exchange on an undirected graph.

    ``exchange(payloads)`` takes one payload per vertex and returns,
    for each vertex, a dict mapping neighbor id to that neighbor's
    payload, in ascending neighbor order. Agents receive nothing else.
    """

    def __init__(self, graph):
        self.graph = graph

    def exchange(self, payloads):
        if len(payloads) != self.graph.n:
            raise ValueError("need one payload per vertex")
        return [{j: payloads[j] for j in self.graph.neighbors[i]}
                for i in range(self.graph.n)]


class _ConsensusAgent(object):
    """One consensus agent: local decision, local multiplier, local oracle."""

    def __init__(self, spec, x0, v0):
        self.spec = spec
        self.x = x0.copy()
        self.v = v0.copy()
        self.phi_x_prev = None
        self.phi_v_prev = None
        self.x_half = None
        self.v_half = None

    def publish(self):
        # steps rebind x and v instead of mutating them, so handing out
        # references cannot leak a mid-step value
        return (self.x, self.v)

    def publish_half(self):
        return (self.x_half, self.v_half)

    def _phi(self, x_loc, v_loc, inbox):
        # same accumulation order and expression shape as the stacked
        # route: neighbor sums grow in ascending neighbor order
        w = x_loc + v_loc
        sx = np.zeros_like(x_loc)
        sv = np.zeros_like(x_loc)
        for j, (xj, vj) in inbox.items():
            sx += w - (xj + vj)
            sv += x_loc - xj
        gx = self.spec.gradient(x_loc) + sx
        gv = -sv
        return gx, gv

    def step_ogda(self, inbox, alpha):
        gx, gv = self._phi(self.x, self.v, inbox)
        gxp = gx if self.phi_x_prev is None else self.phi_x_prev
        gvp = gv if self.phi_v_prev is None else self.phi_v_prev
        self.x = self.spec.cset.project(self.x - 2.0 * alpha * gx + alpha * gxp)
        self.v = self.v - 2.0 * alpha * gv + alpha * gvp
        self.phi_x_prev = gx
        self.phi_v_prev = gv

    def step_eg_probe(self, inbox, alpha):
        gx, gv = self._phi(self.x, self.v, inbox)
        self.x_half = self.spec.cset.project(self.x - alpha * gx)
        self.v_half = self.v - alpha * gv

    def step_eg_commit(self, inbox_half, alpha):
        gxh, gvh = self._phi(self.x_half, self.v_half, inbox_half)
        self.x = self.spec.cset.project(self.x - alpha * gxh)
        self.v = self.v - alpha * gvh


class ConsensusNetworkSimulator(object):
    """Run the consensus dynamics through per-agent message passing.

    Parameters
    ----------
    problem : ConsensusProblem
    method : str
        ``OGDA`` (one exchange per iteration) or ``EG`` (two: current
        points, then probe points).
    alpha : float, optional
        Defaults to the same step size as `simulate_consensus`.
    x0, v0 : array_like, optional
        Initial stacked values; same defaults as the stacked route.
    """

    def __init__(self, problem, method="OGDA", alpha=None, x0=None, v0=None):
        from .consensus import initial_state
        from .solvers import step_bound
        method = str(method).upper()
        if method not in ("OGDA", "EG"):
            raise ValueError("distributed methods are OGDA and EG")
        self.problem = problem
        self.method = method
        self.alpha = 0.9 * step_bound(method, problem.kappa_c) if alpha is None else alpha
        self.network = Network(problem.graph)
        start = initial_state(problem, x0, v0)
        self.agents = [_ConsensusAgent(spec, start.x[i], start.v[i])
                       for i, spec in enumerate(problem.agents)]

    def _snapshot(self):
        return (np.stack([ag.x for ag in self.agents]),
                np.stack([ag.v for ag in self.agents]))

    def run(self, iters):
        """Advance `iters` steps; returns stacked histories.

        Returns ``(x_hist, v_hist)`` of shape ``(iters + 1, N, m)``
        with row 0 holding the initial point.
        """
        x_hist = [self._snapshot()[0]]
        v_hist = [self._snapshot()[1]]
        for _ in range(iters):
            inbox = self.network.exchange([ag.publish() for ag in self.agents])
            if self.method == "OGDA":
                for i, ag in enumerate(self.agents):
                    ag.step_ogda(inbox[i], self.alpha)
            else:
                for i, ag in enumerate(self.agents):
                    ag.step_eg_probe(inbox[i], self.alpha)
                inbox_half = self.network.exchange(
                    [ag.publish_half() for ag in self.agents])
                for i, ag in enumerate(self.agents):
                    ag.step_eg_commit(inbox_half[i], self.alpha)
            snap = self._snapshot()
            x_hist.append(snap[0])
            v_hist.append(snap[1])
        return np.array(x_hist), np.array(v_hist)


class _AllocationAgent(object):
    """One allocation agent; only ``(a_i, lam_i)`` ever leave the agent."""

    def __init__(self, spec, y0, a0, lam0):
        self.spec = spec
        self.y = y0.copy()
        self.a = a0.copy()
        self.lam = lam0.copy()
        self.psi_y_prev = None
        self.psi_a_prev = None
        self.psi_lam_prev = None
        self.y_half = None
        self.a_half = None
        self.lam_half = None

    def publish(self):
        return (self.a, self.lam)

    def publish_half(self):
        return (self.a_half, self.lam_half)

    def _psi(self, y_loc, a_loc, lam_loc, inbox):
        u = a_loc + lam_loc
        sa = np.zeros_like(lam_loc)
        su = np.zeros_like(lam_loc)
        for j, (aj, lj) in inbox.items():
            sa += lam_loc - lj
            su += u - (aj + lj)
        gy = self.spec.gradient(y_loc) + self.spec.weight.T @ lam_loc
        ga = -sa
        glam = -((self.spec.weight @ y_loc - self.spec.demand) - su)
        return gy, ga, glam

    def step_ogda(self, inbox, alpha):
        gy, ga, glam = self._psi(self.y, self.a, self.lam, inbox)
        gyp = gy if self.psi_y_prev is None else self.psi_y_prev
        gap = ga if self.psi_a_prev is None else self.psi_a_prev
        glp = glam if self.psi_lam_prev is None else self.psi_lam_prev
        self.y = self.spec.cset.project(self.y - 2.0 * alpha * gy + alpha * gyp)
        self.a = self.a - 2.0 * alpha * ga + alpha * gap
        self.lam = self.lam - 2.0 * alpha * glam + alpha * glp
        self.psi_y_prev = gy
        self.psi_a_prev = ga
        self.psi_lam_prev = glam

    def step_eg_probe(self, inbox, alpha):
        gy, ga, glam = self._psi(self.y, self.a, self.lam, inbox)
        self.y_half = self.spec.cset.project(self.y - alpha * gy)
        self.a_half = self.a - alpha * ga
        self.lam_half = self.lam - alpha * glam

    def step_eg_commit(self, inbox_half, alpha):
        gyh, gah, glh = self._psi(self.y_half, self.a_half, self.lam_half,
                                  inbox_half)
        self.y = self.spec.cset.project(self.y - alpha * gyh)
        self.a = self.a - alpha * gah
        self.lam = self.lam - alpha * glh


class AllocationNetworkSimulator(object):
    """Run the allocation dynamics through per-agent message passing.

    Mirrors `ConsensusNetworkSimulator`; exchanged payloads carry only
    the auxiliary variable and the multiplier, never decisions or
    gradients.
    """

    def __init__(self, problem, method="OGDA", alpha=None, y0=None,
                 a0=None, lam0=None):
        from .allocation import initial_state
        from .solvers import step_bound
        method = str(method).upper()
        if method not in ("OGDA", "EG"):
            raise ValueError("distributed methods are OGDA and EG")
        self.problem = problem
        self.method = method
        self.alpha = 0.9 * step_bound(method, problem.kappa_s) if alpha is None else alpha
        self.network = Network(problem.graph)
        start = initial_state(problem, y0, a0, lam0)
        self.agents = [_AllocationAgent(spec, problem.y_block(start.y, i),
                                        start.a[i], start.lam[i])
                       for i, spec in enumerate(problem.agents)]

    def _snapshot(self):
        return (np.concatenate([ag.y for ag in self.agents]),
                np.stack([ag.a for ag in self.agents]),
                np.stack([ag.lam for ag in self.agents]))

    def run(self, iters):
        """Advance `iters` steps; returns stacked histories.

        Returns ``(y_hist, a_hist, lam_hist)`` with ``iters + 1`` rows,
        row 0 holding the initial point.
        """
        snap = self._snapshot()
        y_hist, a_hist, lam_hist = [snap[0]], [snap[1]], [snap[2]]
        for _ in range(iters):
            inbox = self.network.exchange([ag.publish() for ag in self.agents])
            if self.method == "OGDA":
                for i, ag in enumerate(self.agents):
                    ag.step_ogda(inbox[i], self.alpha)
            else:
                for i, ag in enumerate(self.agents):
                    ag.step_eg_probe(inbox[i], self.alpha)
                inbox_half = self.network.exchange(
                    [ag.publish_half() for ag in self.agents])
                for i, ag in enumerate(self.agents):
                    ag.step_eg_commit(inbox_half[i], self.alpha)
            snap = self._snapshot()
            y_hist.append(snap[0])
            a_hist.append(snap[1])
            lam_hist.append(snap[2])
        return np.array(y_hist), np.array(a_hist), np.array(lam_hist)
