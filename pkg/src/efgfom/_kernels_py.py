"""Pure-Python (numpy) implementations of the hot treeplex kernels.

These are the fallback used when the compiled extension is unavailable, and
the reference the compiled kernels are tested against.  Decision points are
assumed to be listed top-down with contiguous sequence blocks, so a reverse
sweep is a valid bottom-up order.
"""

import numpy as np

BACKEND = "python"


def tree_conjugate_entropy(g, dp_weight, seq_start, n_actions, parent_seq):
    """Smoothed argmax over a treeplex with weighted local entropy DGFs.

    Returns (x, value) where x = argmax_{x in Q} { g.x - d(x) } and value is
    the attained maximum.  Backward pass: per-decision-point softmax with
    max-subtraction, local conjugate value folded into the parent entry of g.
    Forward pass: scale each block by its parent sequence mass.
    """
    g = np.array(g, dtype=np.float64, copy=True)
    n_seqs = g.shape[0]
    z = np.ones(n_seqs)
    n_dp = seq_start.shape[0]
    for j in range(n_dp - 1, -1, -1):
        s = seq_start[j]
        blk = slice(s, s + n_actions[j])
        w = dp_weight[j]
        gh = g[blk] / w
        m = np.max(gh)
        lse = m + np.log(np.sum(np.exp(gh - m)))
        z[blk] = np.exp(gh - lse)
        g[parent_seq[j]] += w * (lse - np.log(n_actions[j]))
    for j in range(n_dp):
        blk = slice(seq_start[j], seq_start[j] + n_actions[j])
        z[blk] *= z[parent_seq[j]]
    return z, float(g[0])


def tree_linear_max(g, seq_start, n_actions, parent_seq):
    """Exact linear maximization over a treeplex; ties broken by lowest
    action index.  Returns (vertex, value)."""
    v = np.array(g, dtype=np.float64, copy=True)
    n_dp = seq_start.shape[0]
    choice = np.zeros(n_dp, dtype=np.int64)
    for j in range(n_dp - 1, -1, -1):
        blk = slice(seq_start[j], seq_start[j] + n_actions[j])
        best = int(np.argmax(v[blk]))
        choice[j] = best
        v[parent_seq[j]] += v[seq_start[j] + best]
    x = np.zeros(g.shape[0])
    x[0] = 1.0
    for j in range(n_dp):
        x[seq_start[j] + choice[j]] = x[parent_seq[j]]
    return x, float(v[0])
