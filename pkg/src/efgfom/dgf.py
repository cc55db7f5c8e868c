"""Distance-generating functions on treeplexes.

Three DGF kinds share one proximal interface:

  * dilated entropy with the recursive weights beta (value is a weighted sum
    of local negative entropies, each scaled by the parent sequence mass);
  * the dilatable global entropy (weights gamma per decision point, w per
    sequence): a weighted global negative entropy that coincides with the
    dilated entropy weighted by gamma on the whole polytope, so its conjugate
    can be evaluated by the same bottom-up softmax recursion;
  * dilated Euclidean (provided for completeness of the framework; local
    regularizer 0.5*sum((y_i - 1/k)^2), conjugate via simplex projection).

Entropy setups are 1/M_Q-strongly convex w.r.t. the l1 norm with their
unscaled weights; the default scaling s = M_Q makes them 1-strongly convex,
which is what the solver theorems assume when paired with the matrix norm
max|A_ij|.  The scaling multiplies values, gradients and diameter bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .treeplex import Treeplex, max_l1, depth, is_strategy

KIND_DGE = "dge"
KIND_DILATED_ENTROPY = "dilated-entropy"
KIND_DILATED_EUCLIDEAN = "dilated-euclidean"
KINDS = (KIND_DGE, KIND_DILATED_ENTROPY, KIND_DILATED_EUCLIDEAN)


class DomainError(ValueError):
    pass


class OverflowGuard(FloatingPointError):
    pass


@dataclass(frozen=True)
class DgfWeights:
    beta: np.ndarray    # per decision point
    beta_root: float
    gamma: np.ndarray   # per decision point
    gamma_root: float
    w: np.ndarray       # per sequence; w[0] is the root weight


def compute_beta(t: Treeplex):
    """beta_j = 2 + 2 max_a sum of beta over child decision points of ja;
    root value 2 + 2 sum over root decision points.  Returns (beta, beta_root).
    """
    acc = np.zeros(t.n_seqs)
    beta = np.zeros(t.n_decision_points)
    for j in t.bottom_up:
        beta[j] = 2.0 + 2.0 * float(np.max(acc[t.block(j)]))
        acc[t.parent_seq[j]] += beta[j]
    return beta, 2.0 + 2.0 * float(acc[0])


def compute_gamma_w(t: Treeplex) -> DgfWeights:
    """gamma_j = 1 + max_a sum of gamma over child decision points of ja;
    w_{ja} = gamma_j - (child gamma sum below ja); same pattern at the root.
    gamma_root equals max_l1(t)."""
    acc = np.zeros(t.n_seqs)
    gamma = np.zeros(t.n_decision_points)
    w = np.ones(t.n_seqs)
    for j in t.bottom_up:
        blk = t.block(j)
        gamma[j] = 1.0 + float(np.max(acc[blk]))
        w[blk] = gamma[j] - acc[blk]
        acc[t.parent_seq[j]] += gamma[j]
    gamma_root = 1.0 + float(acc[0])
    w[0] = gamma_root - float(acc[0])
    beta, beta_root = compute_beta(t)
    return DgfWeights(beta, beta_root, gamma, gamma_root, w)


@dataclass(frozen=True)
class ProximalSetup:
    """A DGF kind, its weights, and the strong-convexity scaling, with the
    per-sequence arrays the closed forms need precomputed."""
    kind: str
    treeplex: Treeplex
    weights: DgfWeights
    scale: float
    m_q: float
    tree_depth: int
    dp_weight: np.ndarray     # scale * (gamma or beta) per decision point
    seq_dp_weight: np.ndarray  # dp_weight broadcast to each owned sequence
    seq_w: np.ndarray         # scale * w per sequence (DGE closed forms)
    child_const: np.ndarray   # per sequence: sum over child dps of
                              # scale*gamma_j*log n_j (DGE gradient constant)
    log_n: np.ndarray         # log n_j per decision point


def make_setup(t: Treeplex, kind: str, scale: float | None = None) -> ProximalSetup:
    if kind not in KINDS:
        raise ValueError(f"unknown DGF kind {kind!r}")
    weights = compute_gamma_w(t)
    m_q = max_l1(t)
    if scale is None:
        scale = m_q
    if scale <= 0:
        raise ValueError("scale must be positive")
    base = weights.gamma if kind == KIND_DGE else weights.beta
    dp_weight = scale * base
    log_n = np.log(t.n_actions.astype(np.float64))
    seq_dp_weight = np.empty(t.n_seqs)
    seq_dp_weight[0] = scale * (weights.gamma_root if kind == KIND_DGE
                                else weights.beta_root)
    child_const = np.zeros(t.n_seqs)
    for j in t.top_down:
        seq_dp_weight[t.block(j)] = dp_weight[j]
        child_const[t.parent_seq[j]] += scale * weights.gamma[j] * log_n[j]
    return ProximalSetup(
        kind=kind, treeplex=t, weights=weights, scale=float(scale),
        m_q=float(m_q), tree_depth=depth(t), dp_weight=dp_weight,
        seq_dp_weight=seq_dp_weight, seq_w=scale * weights.w,
        child_const=child_const, log_n=log_n)


def _require_positive(x, where):
    if np.min(x) <= 0.0:
        raise DomainError(f"nonpositive coordinate in {where}")


def _xlogx(v):
    out = np.zeros_like(v)
    pos = v > 0.0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def value(setup: ProximalSetup, x: np.ndarray) -> float:
    """DGF value at x, with the 0*log(0) = 0 convention on the boundary."""
    t = setup.treeplex
    x = np.asarray(x, dtype=np.float64)
    if np.min(x) < 0.0:
        raise DomainError("negative coordinate")
    if setup.kind == KIND_DGE:
        ent = float(np.sum(setup.seq_w * _xlogx(x)))
        par = float(np.sum(
            setup.scale * setup.weights.gamma * setup.log_n * x[t.parent_seq]))
        return ent + par
    if setup.kind == KIND_DILATED_ENTROPY:
        total = float(setup.seq_dp_weight[0] * _xlogx(x[:1])[0])
    else:
        total = float(setup.seq_dp_weight[0] * 0.5 * (x[0] - 1.0) ** 2)
    for j in t.top_down:
        xp = x[t.parent_seq[j]]
        if xp <= 0.0:
            continue
        blk = x[t.block(j)]
        if setup.kind == KIND_DILATED_ENTROPY:
            local = setup.log_n[j] + float(np.sum(_xlogx(blk / xp)))
        else:
            local = 0.5 * float(np.sum((blk / xp - 1.0 / t.n_actions[j]) ** 2))
        total += setup.dp_weight[j] * xp * local
    return total


def gradient(setup: ProximalSetup, x: np.ndarray) -> np.ndarray:
    """Exact gradient of the DGF; x must be strictly positive."""
    t = setup.treeplex
    x = np.asarray(x, dtype=np.float64)
    _require_positive(x, "gradient")
    if setup.kind == KIND_DGE:
        return setup.seq_w * (1.0 + np.log(x)) + setup.child_const
    g = np.zeros(t.n_seqs)
    xp = x[t.seq_parent[1:]]
    if setup.kind == KIND_DILATED_ENTROPY:
        g[1:] = setup.seq_dp_weight[1:] * (1.0 + np.log(x[1:] / xp))
        # parent-side terms: weight * (log n_j - (block sum)/x_parent)
        for j in t.top_down:
            s = float(np.sum(x[t.block(j)]))
            p = t.parent_seq[j]
            g[p] += setup.dp_weight[j] * (setup.log_n[j] - s / x[p])
        g[0] += setup.seq_dp_weight[0] * (1.0 + np.log(x[0]))
        return g
    # dilated Euclidean
    for j in t.top_down:
        blk = t.block(j)
        p = t.parent_seq[j]
        r = x[blk] / x[p] - 1.0 / t.n_actions[j]
        g[blk] += setup.dp_weight[j] * r
        local = 0.5 * float(np.sum(r ** 2))
        g[p] += setup.dp_weight[j] * (local - float(np.dot(r, x[blk])) / x[p])
    g[0] += setup.seq_dp_weight[0] * (x[0] - 1.0)
    return g


def conjugate_gradient(setup: ProximalSetup, g: np.ndarray) -> np.ndarray:
    return conjugate_with_value(setup, g)[0]


def conjugate_with_value(setup: ProximalSetup, g: np.ndarray):
    """argmax over the polytope of g.x - d(x), and the attained maximum.

    Entropy kinds run the bottom-up softmax recursion (max-subtraction keeps
    exponents safe); the Euclidean kind substitutes a simplex projection for
    the softmax.
    """
    t = setup.treeplex
    g = np.ascontiguousarray(g, dtype=np.float64)
    if g.shape != (t.n_seqs,):
        raise DomainError("gradient length mismatch")
    if not np.all(np.isfinite(g)):
        raise OverflowGuard("non-finite entries in conjugate input")
    if setup.kind == KIND_DILATED_EUCLIDEAN:
        return _conjugate_euclidean(setup, g)
    x, val = kernels.tree_conjugate_entropy(
        g, setup.dp_weight, t.seq_start, t.n_actions, t.parent_seq)
    if not np.all(np.isfinite(x)):
        raise OverflowGuard("overflow in conjugate recursion")
    return x, float(val)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    cond = u - css / k > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _conjugate_euclidean(setup: ProximalSetup, g: np.ndarray):
    t = setup.treeplex
    g = g.copy()
    z = np.ones(t.n_seqs)
    for j in t.bottom_up:
        blk = t.block(j)
        w = setup.dp_weight[j]
        u = 1.0 / t.n_actions[j]
        v = _project_simplex(u + g[blk] / w)
        z[blk] = v
        local = float(np.dot(g[blk], v)) - w * 0.5 * float(np.sum((v - u) ** 2))
        g[t.parent_seq[j]] += local
    for j in t.top_down:
        z[t.block(j)] *= z[t.parent_seq[j]]
    return z, float(g[0])


def prox(setup: ProximalSetup, center: np.ndarray, g: np.ndarray) -> np.ndarray:
    """argmin over the polytope of g.x + D(x || center), computed as the
    conjugate gradient at grad(center) - g.  For the global-entropy kind the
    inner gradient uses its closed form while the conjugate still runs the
    dilated recursion (the two functions share their conjugate on the
    polytope)."""
    return conjugate_gradient(setup, gradient(setup, center) - g)


def bregman(setup: ProximalSetup, x: np.ndarray, center: np.ndarray) -> float:
    """D(x || center) = d(x) - d(center) - grad(center).(x - center)."""
    x = np.asarray(x, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    gc = gradient(setup, center)
    return value(setup, x) - value(setup, center) - float(np.dot(gc, x - center))


def diameter_bound(setup: ProximalSetup) -> float:
    """Closed-form upper bound on max-min of the DGF over the polytope,
    multiplied by the strong-convexity scaling."""
    t = setup.treeplex
    if t.n_decision_points == 0:
        return 0.0
    max_log = float(np.max(setup.log_n))
    if setup.kind == KIND_DGE:
        base = setup.m_q ** 2 * max_log
    elif setup.kind == KIND_DILATED_ENTROPY:
        base = 2.0 ** (setup.tree_depth + 2) * setup.m_q ** 2 * max_log
    else:
        # no published bound for this kind; sum of per-decision-point maxima
        # of the local regularizer (0.5*(1 - 1/n_j)), reachability <= 1
        base = float(np.sum(
            setup.weights.beta * 0.5 * (1.0 - 1.0 / t.n_actions)))
    return setup.scale * base


def check_strategy(setup: ProximalSetup, x: np.ndarray, tol: float = 1e-9) -> bool:
    return is_strategy(setup.treeplex, x, tol)
