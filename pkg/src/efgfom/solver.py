"""First-order saddle-point solvers for min_x max_y x^T A y.

Domains wrap either a treeplex proximal setup or a chain with entropy
weights; both expose the same interface (conjugate gradient, prox, linear
maximization, feasibility).  The solvers assume the domain DGFs are
1-strongly convex w.r.t. the l1 norm, which the default scaling (s = M for
the entropy DGFs) guarantees, with the paired matrix norm max|A_ij|.

Algorithms:
  EGT     -- excessive gap technique with the theoretical tau = 2/(t+2)
             schedule, alternating shrinks, mu_x = mu_y = ||A|| at start.
  MP      -- mirror prox (extragradient) with eta = 1/||A||; the output
             iterate is the average of the intermediate points.
  EGT/AS  -- EGT with mu balancing (step the player whose mu is larger),
             aggressive stepsizing (tau starts at 0.5, halved on violation
             of the excessive-gap invariant, rollback on failure), and
             initial mu fitting (start at 1e-6, grow by 20% until the
             excessive gap value exceeds 0.1).

gradient_computations counts every A.y / A^T.x product the algorithms
perform, including invariant checks and rolled-back attempts; the gap values
written to the log are telemetry and are evaluated outside that counter.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import dgf, scext
from .games import GameInstance
from .treeplex import is_strategy


class NumericalFailure(FloatingPointError):
    pass


class StallError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# domains

class TreeplexDomain:
    """Proximal interface over a treeplex with a DGF setup."""

    def __init__(self, setup: dgf.ProximalSetup):
        self.setup = setup
        self.dim = setup.treeplex.n_seqs

    def conjugate(self, g):
        return dgf.conjugate_gradient(self.setup, g)

    def conjugate_with_value(self, g):
        return dgf.conjugate_with_value(self.setup, g)

    def prox(self, center, g):
        return dgf.prox(self.setup, center, g)

    def dgf_value(self, x):
        return dgf.value(self.setup, x)

    def linear_maximize(self, g):
        from .treeplex import linear_maximize
        return linear_maximize(self.setup.treeplex, g)

    def is_feasible(self, x, tol=1e-7):
        return is_strategy(self.setup.treeplex, x, tol)

    def uniform(self):
        return self.conjugate(np.zeros(self.dim))

    @property
    def diameter(self):
        return dgf.diameter_bound(self.setup)


class ChainDomain:
    """Proximal interface over a scaled-extension chain with entropy DGFs.

    The strong-convexity scale multiplies the per-block weights, which is
    equivalent to scaling the DGF itself.
    """

    def __init__(self, chain: scext.ScExtChain, kind: str,
                 scale: float | None = None):
        self.chain = chain
        self.kind = kind
        self.m_x = scext.chain_max_l1(chain)
        self.scale = float(self.m_x if scale is None else scale)
        self.alpha = self.scale * scext.weights_for(chain, kind)
        self.dim = chain.dim

    def conjugate(self, g):
        return scext.chain_conjugate_gradient(self.chain, self.alpha, g)

    def conjugate_with_value(self, g):
        return scext.chain_conjugate_with_value(self.chain, self.alpha, g)

    def prox(self, center, g):
        return scext.chain_prox(self.chain, self.alpha, self.kind, center, g)

    def dgf_value(self, x):
        return scext.chain_value(self.chain, self.alpha, self.kind, x)

    def linear_maximize(self, g):
        return scext.chain_linear_maximize(self.chain, g)

    def is_feasible(self, x, tol=1e-7):
        return scext.is_chain_point(self.chain, x, tol)

    def uniform(self):
        return self.conjugate(np.zeros(self.dim))

    @property
    def diameter(self):
        return scext.chain_diameter_bound(self.chain, self.alpha)


# ---------------------------------------------------------------------------
# problem

class SaddlePointProblem:
    def __init__(self, domain_x, domain_y, a_matrix: sp.spmatrix):
        self.domain_x = domain_x
        self.domain_y = domain_y
        self.a = sp.csr_matrix(a_matrix)
        if self.a.shape != (domain_x.dim, domain_y.dim):
            raise ValueError("payoff matrix shape does not match the domains")
        self.at = sp.csr_matrix(self.a.T)
        self.opnorm = float(abs(self.a).max()) if self.a.nnz else 0.0
        self.gradient_computations = 0

    def ay(self, y, count=True):
        if count:
            self.gradient_computations += 1
        return self.a @ y

    def atx(self, x, count=True):
        if count:
            self.gradient_computations += 1
        return self.at @ x


def problem_from_game(game: GameInstance, kind: str,
                      scale_x: float | None = None,
                      scale_y: float | None = None) -> SaddlePointProblem:
    dx = TreeplexDomain(dgf.make_setup(game.treeplex_x, kind, scale_x))
    dy = TreeplexDomain(dgf.make_setup(game.treeplex_y, kind, scale_y))
    return SaddlePointProblem(dx, dy, game.matrix())


def problem_from_chains(chain_x, chain_y, payoff, kind: str) -> SaddlePointProblem:
    rows = np.array([e[0] for e in payoff], dtype=np.int64)
    cols = np.array([e[1] for e in payoff], dtype=np.int64)
    vals = np.array([e[2] for e in payoff], dtype=np.float64)
    a = sp.csr_matrix((vals, (rows, cols)), shape=(chain_x.dim, chain_y.dim))
    return SaddlePointProblem(
        ChainDomain(chain_x, kind), ChainDomain(chain_y, kind), a)


# ---------------------------------------------------------------------------
# gap and bounds

def saddle_gap(p: SaddlePointProblem, x, y) -> float:
    """max_y x^T A y - min_x x^T A y; zero exactly at a saddle point.
    Uses uncounted matrix-vector products (telemetry, not algorithm cost)."""
    _, best_y = p.domain_y.linear_maximize(p.atx(x, count=False))
    _, best_minus_x = p.domain_x.linear_maximize(-p.ay(y, count=False))
    return float(best_y + best_minus_x)


def theoretical_bound(alg: str, t: int, opnorm: float,
                      omega_x: float, omega_y: float) -> float:
    if t < 1:
        raise ValueError("bound defined for t >= 1")
    if alg == "egt":
        return 4.0 * opnorm * math.sqrt(omega_x * omega_y) / (t + 1)
    if alg == "mp":
        return opnorm * (omega_x + omega_y) / (2.0 * t)
    raise ValueError(f"no bound for algorithm {alg!r}")


def excessive_gap_values(p: SaddlePointProblem, x, y, mu_x, mu_y):
    """(f, g) with f = max_y' { x^T A y' - mu_y d_y(y') } and
    g = min_x' { x'^T A y + mu_x d_x(x') }; the EGT invariant is f <= g."""
    _, fv = p.domain_y.conjugate_with_value(p.atx(x) / mu_y)
    _, gv = p.domain_x.conjugate_with_value(-p.ay(y) / mu_x)
    return mu_y * fv, -mu_x * gv


# ---------------------------------------------------------------------------
# EGT

@dataclass
class EGTState:
    problem: SaddlePointProblem
    x: np.ndarray
    y: np.ndarray
    mu_x: float
    mu_y: float
    t: int


def egt_initialize(p: SaddlePointProblem, mu: float | None = None) -> EGTState:
    mu = p.opnorm if mu is None else float(mu)
    x_tilde = p.domain_x.uniform()
    y0 = p.domain_y.conjugate(p.atx(x_tilde) / mu)
    x0 = p.domain_x.prox(x_tilde, p.ay(y0) / mu)
    return EGTState(p, x0, y0, mu, mu, 0)


def _shrink_x(s: EGTState, tau: float) -> EGTState:
    p = s.problem
    x_bar = p.domain_x.conjugate(-p.ay(s.y) / s.mu_x)
    x_hat = (1.0 - tau) * s.x + tau * x_bar
    y_bar = p.domain_y.conjugate(p.atx(x_hat) / s.mu_y)
    x_tilde = p.domain_x.prox(
        x_bar, (tau / ((1.0 - tau) * s.mu_x)) * p.ay(y_bar))
    return replace(s, x=(1.0 - tau) * s.x + tau * x_tilde,
                   y=(1.0 - tau) * s.y + tau * y_bar,
                   mu_x=(1.0 - tau) * s.mu_x, t=s.t + 1)


def _shrink_y(s: EGTState, tau: float) -> EGTState:
    p = s.problem
    y_bar = p.domain_y.conjugate(p.atx(s.x) / s.mu_y)
    y_hat = (1.0 - tau) * s.y + tau * y_bar
    x_bar = p.domain_x.conjugate(-p.ay(y_hat) / s.mu_x)
    y_tilde = p.domain_y.prox(
        y_bar, -(tau / ((1.0 - tau) * s.mu_y)) * p.atx(x_bar))
    return replace(s, x=(1.0 - tau) * s.x + tau * x_bar,
                   y=(1.0 - tau) * s.y + tau * y_tilde,
                   mu_y=(1.0 - tau) * s.mu_y, t=s.t + 1)


def _check_feasible(p: SaddlePointProblem, x, y):
    if not (p.domain_x.is_feasible(x, 1e-6) and p.domain_y.is_feasible(y, 1e-6)):
        raise NumericalFailure("iterate violates domain feasibility")


def egt_iterate(s: EGTState) -> EGTState:
    """One shrink step with tau = 2/(t+2), alternating players (even t
    shrinks x), followed by an excessive-gap invariant check."""
    t = s.t + 1
    tau = 2.0 / (t + 2.0)
    nxt = _shrink_x(s, tau) if t % 2 == 0 else _shrink_y(s, tau)
    _check_feasible(s.problem, nxt.x, nxt.y)
    f, g = excessive_gap_values(s.problem, nxt.x, nxt.y, nxt.mu_x, nxt.mu_y)
    if f > g + 1e-6 * (1.0 + abs(f) + abs(g)):
        raise NumericalFailure(
            f"excessive gap invariant violated at t={t}: f={f} > g={g}")
    return nxt


# ---------------------------------------------------------------------------
# Mirror Prox

@dataclass
class MPState:
    problem: SaddlePointProblem
    z_x: np.ndarray
    z_y: np.ndarray
    sum_wx: np.ndarray
    sum_wy: np.ndarray
    eta: float
    t: int

    @property
    def x(self):
        return self.sum_wx / max(self.t, 1)

    @property
    def y(self):
        return self.sum_wy / max(self.t, 1)


def mp_initialize(p: SaddlePointProblem, eta: float | None = None) -> MPState:
    if eta is None:
        eta = 1.0 / p.opnorm
    zx = p.domain_x.uniform()
    zy = p.domain_y.uniform()
    return MPState(p, zx, zy, np.zeros(p.domain_x.dim),
                   np.zeros(p.domain_y.dim), float(eta), 0)


def mp_iterate(s: MPState) -> MPState:
    """One extragradient step; the running average of the intermediate
    points (w_x, w_y) is the output iterate (constant eta, so the eta-weighted
    average is the plain average)."""
    p = s.problem
    w_x = p.domain_x.prox(s.z_x, s.eta * p.ay(s.z_y))
    w_y = p.domain_y.prox(s.z_y, -s.eta * p.atx(s.z_x))
    z_x = p.domain_x.prox(s.z_x, s.eta * p.ay(w_y))
    z_y = p.domain_y.prox(s.z_y, -s.eta * p.atx(w_x))
    _check_feasible(p, z_x, z_y)
    return replace(s, z_x=z_x, z_y=z_y, sum_wx=s.sum_wx + w_x,
                   sum_wy=s.sum_wy + w_y, t=s.t + 1)


# ---------------------------------------------------------------------------
# iteration logging

@dataclass
class LogRow:
    iteration: int
    gradient_computations: int
    gap: float
    mu_x: float | None
    mu_y: float | None
    tau: float | None
    bound: float | None
    wall_time_ms: float


CSV_HEADER = "iteration,gradient_computations,gap,mu_x,mu_y,tau,bound,wall_time_ms"


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def log_to_csv(rows, include_timing: bool = True) -> str:
    """Serialize the iteration log.  With include_timing=False the
    wall_time_ms column is left empty so that equal runs produce
    byte-identical output."""
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join([
            str(r.iteration), str(r.gradient_computations), _fmt(r.gap),
            _fmt(r.mu_x), _fmt(r.mu_y), _fmt(r.tau), _fmt(r.bound),
            _fmt(r.wall_time_ms) if include_timing else "",
        ]))
    return "\n".join(lines) + "\n"


def should_log(t: int, total: int, every: int | None = None) -> bool:
    if every is not None:
        return t % every == 0 or t == total
    if t <= 512:
        return True
    return (t & (t - 1)) == 0 or t == total


# ---------------------------------------------------------------------------
# drivers

def run_egt(p: SaddlePointProblem, iterations: int, log_every: int | None = None):
    """Full EGT run; returns (rows, final_state)."""
    omega_x, omega_y = p.domain_x.diameter, p.domain_y.diameter
    start = time.monotonic()
    s = egt_initialize(p)
    rows = []
    for t in range(1, iterations + 1):
        s = egt_iterate(s)
        if should_log(t, iterations, log_every):
            rows.append(LogRow(
                iteration=t, gradient_computations=p.gradient_computations,
                gap=saddle_gap(p, s.x, s.y), mu_x=s.mu_x, mu_y=s.mu_y,
                tau=2.0 / (t + 2.0),
                bound=theoretical_bound("egt", t, p.opnorm, omega_x, omega_y),
                wall_time_ms=(time.monotonic() - start) * 1e3))
    return rows, s


def run_mp(p: SaddlePointProblem, iterations: int, log_every: int | None = None):
    omega_x, omega_y = p.domain_x.diameter, p.domain_y.diameter
    start = time.monotonic()
    s = mp_initialize(p)
    rows = []
    for t in range(1, iterations + 1):
        s = mp_iterate(s)
        if should_log(t, iterations, log_every):
            rows.append(LogRow(
                iteration=t, gradient_computations=p.gradient_computations,
                gap=saddle_gap(p, s.x, s.y), mu_x=None, mu_y=None, tau=None,
                bound=theoretical_bound("mp", t, p.opnorm, omega_x, omega_y),
                wall_time_ms=(time.monotonic() - start) * 1e3))
    return rows, s


def fit_initial_mu(p: SaddlePointProblem, start: float = 1e-6,
                   growth: float = 1.2, target: float = 0.1,
                   max_candidates: int = 10_000):
    """Initial mu fitting: grow the candidate by 20% until initialization
    yields an excessive gap value (g - f) above the target."""
    mu = start
    for _ in range(max_candidates):
        s = egt_initialize(p, mu)
        f, g = excessive_gap_values(p, s.x, s.y, s.mu_x, s.mu_y)
        if g - f > target:
            return s
        mu *= growth
    raise StallError("initial mu fitting did not reach the target margin")


def egt_as_run(p: SaddlePointProblem, budget: int,
               log_every: int | None = None, gap_target: float = 0.0):
    """EGT with the aggressive heuristics; stops when the gradient-
    computation budget is exhausted (or the gap target is reached at a
    logged iteration).  Returns (rows, final_state)."""
    omega_x, omega_y = p.domain_x.diameter, p.domain_y.diameter
    start_time = time.monotonic()
    start_count = p.gradient_computations
    s = fit_initial_mu(p)
    tau = 0.5
    rows = []
    accepted = 0
    # one attempt costs 3 shrink products + 2 for the invariant check
    while p.gradient_computations - start_count + 5 <= budget:
        trial = _shrink_x(s, tau) if s.mu_x >= s.mu_y else _shrink_y(s, tau)
        f, g = excessive_gap_values(
            p, trial.x, trial.y, trial.mu_x, trial.mu_y)
        if f > g + 1e-10 * (1.0 + abs(f) + abs(g)):
            tau *= 0.5
            if tau < 1e-12:
                raise StallError("tau underflow in aggressive stepsizing")
            continue
        _check_feasible(p, trial.x, trial.y)
        s = trial
        accepted += 1
        if should_log(accepted, -1, log_every):
            gap = saddle_gap(p, s.x, s.y)
            rows.append(LogRow(
                iteration=accepted,
                gradient_computations=p.gradient_computations - start_count,
                gap=gap, mu_x=s.mu_x, mu_y=s.mu_y, tau=tau,
                bound=None,
                wall_time_ms=(time.monotonic() - start_time) * 1e3))
            if gap_target > 0.0 and gap <= gap_target:
                break
    return rows, s
