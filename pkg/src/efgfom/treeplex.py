"""Sequence-form strategy polytopes (treeplexes).

A treeplex is the strategy set of one player with perfect recall: a tree of
decision points, each offering n_j >= 1 actions, glued together by "parent
sequences".  Sequence index 0 is the empty sequence; the non-empty sequences
are grouped by decision point, decision points listed top-down, so that every
parent sequence has a strictly smaller index than the sequences it enables.

A sequence-form strategy x satisfies x[0] = 1 and, for every decision point j,
sum_a x[ja] = x[parent(j)].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EMPTY = 0  # index of the empty sequence


class TreeplexError(ValueError):
    pass


class CyclicStructure(TreeplexError):
    pass


class DuplicateParentClaim(TreeplexError):
    pass


class EmptyActionSet(TreeplexError):
    pass


@dataclass(frozen=True)
class Treeplex:
    """Immutable sequence-form decision structure for one player.

    Fields hold one entry per decision point; derived index arrays are
    computed once at construction.  All operations on a Treeplex are pure.
    """

    n_actions: np.ndarray                       # (J,) actions per decision point
    parent_seq: np.ndarray                      # (J,) parent sequence index, 0 = empty
    dp_ids: tuple                               # (J,) decision point id strings
    action_labels: tuple                        # (J,) tuples of action label strings

    seq_start: np.ndarray = field(init=False)   # (J,) first sequence index per dp
    n_seqs: int = field(init=False)             # 1 + sum(n_actions)
    seq_dp: np.ndarray = field(init=False)      # (n_seqs,) owning dp, -1 for empty seq
    seq_parent: np.ndarray = field(init=False)  # (n_seqs,) parent seq of owner, -1 at 0
    children: tuple = field(init=False)         # per sequence: tuple of child dps

    def __post_init__(self):
        n_actions = np.asarray(self.n_actions, dtype=np.int64)
        parent_seq = np.asarray(self.parent_seq, dtype=np.int64)
        object.__setattr__(self, "n_actions", n_actions)
        object.__setattr__(self, "parent_seq", parent_seq)

        seq_start = np.empty(len(n_actions), dtype=np.int64)
        nxt = 1
        for j, n in enumerate(n_actions):
            seq_start[j] = nxt
            nxt += max(int(n), 0)
        n_seqs = nxt
        seq_dp = np.full(n_seqs, -1, dtype=np.int64)
        seq_parent = np.full(n_seqs, -1, dtype=np.int64)
        children = [[] for _ in range(n_seqs)]
        for j, n in enumerate(n_actions):
            s = seq_start[j]
            seq_dp[s:s + n] = j
            p = parent_seq[j]
            if 0 <= p < n_seqs:
                seq_parent[s:s + n] = p
                children[p].append(j)
        object.__setattr__(self, "seq_start", seq_start)
        object.__setattr__(self, "n_seqs", int(n_seqs))
        object.__setattr__(self, "seq_dp", seq_dp)
        object.__setattr__(self, "seq_parent", seq_parent)
        object.__setattr__(self, "children", tuple(tuple(c) for c in children))

    @property
    def n_decision_points(self) -> int:
        return len(self.n_actions)

    # top-down = construction order; bottom-up = its reverse.  Both are valid
    # traversal orders because validate() enforces that every parent sequence
    # belongs to an earlier decision point.
    @property
    def top_down(self) -> range:
        return range(self.n_decision_points)

    @property
    def bottom_up(self) -> range:
        return range(self.n_decision_points - 1, -1, -1)

    def block(self, j: int) -> slice:
        s = int(self.seq_start[j])
        return slice(s, s + int(self.n_actions[j]))

    def sequence_id(self, sigma: int) -> str:
        if sigma == EMPTY:
            return ""
        j = int(self.seq_dp[sigma])
        a = sigma - int(self.seq_start[j])
        return f"{self.dp_ids[j]}/{self.action_labels[j][a]}"


def build_treeplex(decision_points) -> Treeplex:
    """Build and validate a treeplex from (id, parent_sequence_index,
    action_labels) triples listed top-down."""
    dp_ids = tuple(str(d[0]) for d in decision_points)
    parents = np.array([d[1] for d in decision_points], dtype=np.int64)
    labels = tuple(tuple(str(a) for a in d[2]) for d in decision_points)
    counts = np.array([len(l) for l in labels], dtype=np.int64)
    t = Treeplex(counts, parents, dp_ids, labels)
    validate(t)
    return t


def validate(t: Treeplex) -> bool:
    """Check all structural invariants, raising a structured error naming the
    first violated one.  Returns True when the treeplex is well formed."""
    for j in range(t.n_decision_points):
        if t.n_actions[j] < 1:
            raise EmptyActionSet(f"decision point {j} ({t.dp_ids[j]}) has no actions")
    for j in range(t.n_decision_points):
        p = int(t.parent_seq[j])
        if p < 0 or p >= t.n_seqs:
            raise DuplicateParentClaim(
                f"decision point {j} claims nonexistent parent sequence {p}")
        if p != EMPTY and p >= t.seq_start[j]:
            # a parent at or after the own block would create a cycle or a
            # forward reference; the top-down indexing forbids both
            raise CyclicStructure(
                f"decision point {j} claims parent sequence {p} that is not "
                f"strictly earlier (own block starts at {int(t.seq_start[j])})")
    if t.n_seqs != 1 + int(np.sum(t.n_actions)):
        raise TreeplexError("sequence count mismatch")
    return True


def is_strategy(t: Treeplex, x: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff x is a sequence-form strategy within tolerance."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (t.n_seqs,):
        return False
    if np.min(x) < -tol or abs(x[EMPTY] - 1.0) > tol:
        return False
    for j in range(t.n_decision_points):
        if abs(float(np.sum(x[t.block(j)])) - x[t.parent_seq[j]]) > tol:
            return False
    return True


def max_l1(t: Treeplex) -> float:
    """Maximum l1 norm over the polytope, by the bottom-up dynamic program
    m(ja) = 1 + sum of m over child decision points, m(j) = max_a m(ja)."""
    m_seq = np.ones(t.n_seqs)
    m_dp = np.zeros(t.n_decision_points)
    for j in t.bottom_up:
        blk = t.block(j)
        m_dp[j] = float(np.max(m_seq[blk]))
        m_seq[t.parent_seq[j]] += m_dp[j]
    return float(m_seq[EMPTY])


def depth(t: Treeplex) -> int:
    """Maximum number of decision points on any root-to-leaf path."""
    d_seq = np.zeros(t.n_seqs, dtype=np.int64)
    best = 0
    for j in t.bottom_up:
        d = 1 + int(np.max(d_seq[t.block(j)]))
        d_seq[t.parent_seq[j]] = max(d_seq[t.parent_seq[j]], d)
        best = max(best, d)
    return best


def linear_maximize(t: Treeplex, g: np.ndarray):
    """argmax over the polytope of g.x, attained at a vertex.

    Bottom-up dynamic program; ties broken by lowest action index.  Returns
    (vertex, value).
    """
    from . import kernels
    g = np.ascontiguousarray(g, dtype=np.float64)
    if g.shape != (t.n_seqs,):
        raise TreeplexError("gradient length mismatch")
    return kernels.tree_linear_max(
        g, t.seq_start, t.n_actions, t.parent_seq)


def uniform_behavioral(t: Treeplex) -> np.ndarray:
    """Sequence form of the uniformly mixed behavioral strategy."""
    b = np.ones(t.n_seqs)
    for j in t.top_down:
        blk = t.block(j)
        b[blk] = b[t.parent_seq[j]] / t.n_actions[j]
    return b


def behavioral_to_sequence(t: Treeplex, behavior) -> np.ndarray:
    """Push local distributions (one per decision point) down the tree."""
    x = np.ones(t.n_seqs)
    for j in t.top_down:
        x[t.block(j)] = np.asarray(behavior[j]) * x[t.parent_seq[j]]
    return x


def random_strategy(t: Treeplex, rng: np.random.Generator) -> np.ndarray:
    """Interior strategy sampled by symmetric Dirichlet(1) behavior at every
    decision point, pushed down via sequence-form products."""
    x = np.ones(t.n_seqs)
    for j in t.top_down:
        b = rng.dirichlet(np.ones(int(t.n_actions[j])))
        x[t.block(j)] = b * x[t.parent_seq[j]]
    return x
