"""Scaled-extension chains of simplexes.

A chain is an ordered list of simplex blocks; block k is scaled by a
nonnegative affine function h_{k-1} of the coordinates of earlier blocks
(coefficients in [0, 1], h <= 1 on the feasible set, strictly positive on its
relative interior).  The first block is unscaled.  Treeplexes are the special
case where every h is either the constant 1 or a single parent-sequence
coordinate; correlation-plan polytopes arrive through the file format.

Two entropy DGFs are supported, differing only in their per-block weights:
the dilated chain entropy (alpha_dilated recursion, base 2) and the
dilatable global entropy (alpha_dge recursion, base 1).  Both coincide on
the feasible set for matching weights, so value, conjugate and prox share
their implementations; the gradients differ off the feasible set and each
kind keeps its own closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .games import ParseError, SchemaVersionMismatch
from .treeplex import Treeplex

KIND_DGE = "dge"
KIND_DILATED_ENTROPY = "dilated-entropy"

FORMAT_VERSION = 1


class InvalidCoefficient(ValueError):
    pass


class ChainDomainError(ValueError):
    pass


@dataclass(frozen=True)
class ScExtChain:
    sizes: np.ndarray        # (n,) block sizes
    h_idx: tuple             # per block: global coordinate indices (empty for block 0)
    h_val: tuple             # per block: coefficients in [0, 1]
    h_const: np.ndarray      # (n,) constant term of h; h_const[0] == 1

    offsets: np.ndarray = field(init=False)
    dim: int = field(init=False)

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        object.__setattr__(self, "sizes", sizes)
        offsets = np.concatenate(([0], np.cumsum(sizes)))[:-1]
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "dim", int(np.sum(sizes)))

    @property
    def n_blocks(self) -> int:
        return len(self.sizes)

    def block(self, k: int) -> slice:
        o = int(self.offsets[k])
        return slice(o, o + int(self.sizes[k]))


def build_chain(sizes, h_funcs) -> ScExtChain:
    """h_funcs: per block >= 1 an ([global coord indices], [values], const)
    triple; pass (None or ([], [], 1.0)) patterns via the list directly.
    Block 0 takes no h entry."""
    sizes = np.asarray(sizes, dtype=np.int64)
    n = len(sizes)
    if len(h_funcs) != max(n - 1, 0):
        raise InvalidCoefficient("need exactly one h per block after the first")
    h_idx = [np.zeros(0, dtype=np.int64)]
    h_val = [np.zeros(0)]
    h_const = [1.0]
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    for k, (idx, val, const) in enumerate(h_funcs, start=1):
        idx = np.asarray(idx, dtype=np.int64)
        val = np.asarray(val, dtype=np.float64)
        if len(idx) != len(val):
            raise InvalidCoefficient(f"block {k}: index/value length mismatch")
        if np.any(idx < 0) or np.any(idx >= offsets[k]):
            raise InvalidCoefficient(
                f"block {k}: h references a coordinate outside earlier blocks")
        if np.any(val < 0.0) or np.any(val > 1.0):
            raise InvalidCoefficient(f"block {k}: coefficient outside [0, 1]")
        if const < 0.0 or const > 1.0:
            raise InvalidCoefficient(f"block {k}: constant outside [0, 1]")
        h_idx.append(idx)
        h_val.append(val)
        h_const.append(float(const))
    return ScExtChain(sizes, tuple(h_idx), tuple(h_val),
                      np.asarray(h_const, dtype=np.float64))


def h_values(c: ScExtChain, x: np.ndarray) -> np.ndarray:
    """h_{k-1}(x) per block (1.0 for the first block)."""
    h = np.empty(c.n_blocks)
    for k in range(c.n_blocks):
        h[k] = c.h_const[k] + float(np.dot(c.h_val[k], x[c.h_idx[k]]))
    return h


def is_chain_point(c: ScExtChain, x: np.ndarray, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (c.dim,) or np.min(x) < -tol:
        return False
    h = h_values(c, x)
    for k in range(c.n_blocks):
        if abs(float(np.sum(x[c.block(k)])) - h[k]) > tol * (1.0 + abs(h[k])):
            return False
    return True


def random_chain_point(c: ScExtChain, rng: np.random.Generator) -> np.ndarray:
    """Interior point: Dirichlet(1) per block, scaled forward by h."""
    x = np.empty(c.dim)
    for k in range(c.n_blocks):
        h = c.h_const[k] + float(np.dot(c.h_val[k], x[c.h_idx[k]]))
        x[c.block(k)] = h * rng.dirichlet(np.ones(int(c.sizes[k])))
    return x


def validate_chain(c: ScExtChain, samples: int = 100, seed: int = 0) -> bool:
    """Structural checks plus sampled h-positivity (positivity on the
    relative interior is a hypothesis, not a symbolic certificate)."""
    for k in range(1, c.n_blocks):
        if np.any(c.h_val[k] < 0.0) or np.any(c.h_val[k] > 1.0):
            raise InvalidCoefficient(f"block {k}: coefficient outside [0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = np.empty(c.dim)
        for k in range(c.n_blocks):
            h = c.h_const[k] + float(np.dot(c.h_val[k], x[c.h_idx[k]]))
            if h <= 1e-12:
                raise InvalidCoefficient(
                    f"block {k}: h not positive on sampled interior point")
            if h > 1.0 + 1e-9:
                raise InvalidCoefficient(
                    f"block {k}: h exceeds 1 on sampled interior point")
            x[c.block(k)] = h * rng.dirichlet(np.ones(int(c.sizes[k])))
    return True


@dataclass(frozen=True)
class ChainWeights:
    alpha_dilated: np.ndarray
    alpha_dge: np.ndarray


def chain_weights(c: ScExtChain) -> ChainWeights:
    """Back-to-front recursions: alpha_k = base + fac * max over block-k
    coordinates of the accumulated alpha_{p+1} * ||a_p||_0 * a_p vectors."""
    out = []
    for base in (2.0, 1.0):
        acc = np.zeros(c.dim)
        alpha = np.zeros(c.n_blocks)
        for k in range(c.n_blocks - 1, -1, -1):
            blk = acc[c.block(k)]
            alpha[k] = base + base * (float(np.max(blk)) if len(blk) else 0.0)
            nnz = float(np.count_nonzero(c.h_val[k]))
            if nnz:
                acc[c.h_idx[k]] += alpha[k] * nnz * c.h_val[k]
        out.append(alpha)
    return ChainWeights(alpha_dilated=out[0], alpha_dge=out[1])


def weights_for(c: ScExtChain, kind: str) -> np.ndarray:
    w = chain_weights(c)
    if kind == KIND_DGE:
        return w.alpha_dge
    if kind == KIND_DILATED_ENTROPY:
        return w.alpha_dilated
    raise ValueError(f"unknown chain DGF kind {kind!r}")


def _xlogx(v):
    out = np.zeros_like(v)
    pos = v > 0.0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def chain_value(c: ScExtChain, alpha: np.ndarray, kind: str,
                x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if np.min(x) < 0.0:
        raise ChainDomainError("negative coordinate")
    h = h_values(c, x)
    log_s = np.log(c.sizes.astype(np.float64))
    if kind == KIND_DGE:
        total = 0.0
        for k in range(c.n_blocks):
            total += alpha[k] * float(np.sum(_xlogx(x[c.block(k)])))
        total -= float(np.sum(alpha * _xlogx(h)))
        total += float(np.sum(alpha * h * log_s))
        return total
    if kind != KIND_DILATED_ENTROPY:
        raise ValueError(f"unknown chain DGF kind {kind!r}")
    total = 0.0
    for k in range(c.n_blocks):
        if h[k] <= 0.0:
            continue
        blk = x[c.block(k)]
        # sum x log(x/h) = sum x log x - (sum x) log h, safe at x = 0
        total += alpha[k] * (h[k] * log_s[k]
                             + float(np.sum(_xlogx(blk)))
                             - float(np.sum(blk)) * np.log(h[k]))
    return total


def chain_gradient(c: ScExtChain, alpha: np.ndarray, kind: str,
                   x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.min(x) <= 0.0:
        raise ChainDomainError("gradient requires strictly positive x")
    h = h_values(c, x)
    if np.min(h) <= 0.0:
        raise ChainDomainError("gradient requires h > 0")
    log_s = np.log(c.sizes.astype(np.float64))
    g = np.empty(c.dim)
    if kind == KIND_DGE:
        for k in range(c.n_blocks):
            g[c.block(k)] = alpha[k] * (1.0 + np.log(x[c.block(k)]))
        for k in range(1, c.n_blocks):
            g[c.h_idx[k]] += (c.h_val[k] * alpha[k]
                              * (log_s[k] - 1.0 - np.log(h[k])))
        return g
    if kind != KIND_DILATED_ENTROPY:
        raise ValueError(f"unknown chain DGF kind {kind!r}")
    for k in range(c.n_blocks):
        g[c.block(k)] = alpha[k] * (1.0 + np.log(x[c.block(k)] / h[k]))
    for k in range(1, c.n_blocks):
        s = float(np.sum(x[c.block(k)]))
        g[c.h_idx[k]] += c.h_val[k] * alpha[k] * (log_s[k] - s / h[k])
    return g


def chain_conjugate_gradient(c: ScExtChain, alpha: np.ndarray,
                             g: np.ndarray) -> np.ndarray:
    return chain_conjugate_with_value(c, alpha, g)[0]


def chain_conjugate_with_value(c: ScExtChain, alpha: np.ndarray,
                               g: np.ndarray):
    """argmax over the chain of g.x - d(x) (entropy local DGFs) plus the
    attained value.  Backward pass: per-block softmax of g/alpha with
    max-subtraction, local conjugate value folded into the g-entries the
    block's h reads (the constant part contributes to the total directly).
    Forward pass scales each block by its realized h."""
    g = np.array(g, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(g)):
        raise ChainDomainError("non-finite entries in conjugate input")
    v = np.empty(c.dim)
    log_s = np.log(c.sizes.astype(np.float64))
    total = 0.0
    cval = np.zeros(c.n_blocks)
    for k in range(c.n_blocks - 1, -1, -1):
        blk = c.block(k)
        gh = g[blk] / alpha[k]
        m = float(np.max(gh))
        lse = m + np.log(np.sum(np.exp(gh - m)))
        v[blk] = np.exp(gh - lse)
        cval[k] = alpha[k] * (lse - log_s[k])
        if k > 0:
            g[c.h_idx[k]] += cval[k] * c.h_val[k]
            total += cval[k] * c.h_const[k]
    total += cval[0]
    x = np.empty(c.dim)
    for k in range(c.n_blocks):
        h = c.h_const[k] + float(np.dot(c.h_val[k], x[c.h_idx[k]]))
        x[c.block(k)] = h * v[c.block(k)]
    return x, float(total)


def chain_prox(c: ScExtChain, alpha: np.ndarray, kind: str,
               center: np.ndarray, g: np.ndarray) -> np.ndarray:
    return chain_conjugate_gradient(
        c, alpha, chain_gradient(c, alpha, kind, center) - g)


def chain_linear_maximize(c: ScExtChain, g: np.ndarray):
    """Exact linear maximization over the chain: the optimal block choice is
    independent of the realized h because h >= 0.  Returns (point, value)."""
    g = np.array(g, dtype=np.float64, copy=True)
    best = np.zeros(c.n_blocks, dtype=np.int64)
    total = 0.0
    for k in range(c.n_blocks - 1, -1, -1):
        blk = c.block(k)
        best[k] = int(np.argmax(g[blk]))
        m = g[blk][best[k]]
        if k > 0:
            g[c.h_idx[k]] += m * c.h_val[k]
            total += m * c.h_const[k]
        else:
            total += m
    x = np.zeros(c.dim)
    for k in range(c.n_blocks):
        h = c.h_const[k] + float(np.dot(c.h_val[k], x[c.h_idx[k]]))
        x[c.offsets[k] + best[k]] = h
    return x, float(total)


def chain_max_l1(c: ScExtChain) -> float:
    """Maximum total mass over the chain (all coordinates are nonnegative,
    so this is linear maximization of the all-ones vector)."""
    return chain_linear_maximize(c, np.ones(c.dim))[1]


def chain_diameter_bound(c: ScExtChain, alpha: np.ndarray) -> float:
    """sum_k alpha_k log s_k: sound since every block's entropy regularizer
    is bounded by log s_k and its reach h is at most 1, and both chain DGFs
    have minimum 0 on the feasible set."""
    return float(np.sum(alpha * np.log(c.sizes.astype(np.float64))))


def chain_from_treeplex(t: Treeplex):
    """One block per decision point, in the treeplex's top-down order.  h is
    the indicator of the parent sequence coordinate, or the constant 1 for
    root decision points.  Chain coordinate i corresponds to sequence i+1;
    the returned index map gives the sequence index of each coordinate."""
    h_funcs = []
    for j in range(1, t.n_decision_points):
        p = int(t.parent_seq[j])
        if p == 0:
            h_funcs.append(([], [], 1.0))
        else:
            h_funcs.append(([p - 1], [1.0], 0.0))
    chain = build_chain(t.n_actions.copy(), h_funcs)
    return chain, np.arange(1, t.n_seqs, dtype=np.int64)


# ---------------------------------------------------------------------------
# file format (version 1)

def _chain_doc(c: ScExtChain) -> dict:
    h = []
    for k in range(1, c.n_blocks):
        entry = {
            "block": k + 1,
            "coeffs": [
                {"ref_block": _owner_block(c, int(i)),
                 "ref_index": int(i - c.offsets[_owner_block(c, int(i)) - 1]),
                 "value": float(v)}
                for i, v in zip(c.h_idx[k], c.h_val[k])
            ],
        }
        if c.h_const[k] != 0.0:
            entry["const"] = float(c.h_const[k])
        h.append(entry)
    return {"blocks": [{"size": int(s)} for s in c.sizes], "h": h}


def _owner_block(c: ScExtChain, coord: int) -> int:
    # 1-based block owning a global coordinate
    return int(np.searchsorted(c.offsets, coord, side="right"))


def save_chain(c: ScExtChain, path, pair: ScExtChain | None = None,
               payoff=None) -> None:
    doc = {"version": FORMAT_VERSION}
    doc.update(_chain_doc(c))
    if pair is not None:
        doc["pair"] = _chain_doc(pair)
    if payoff is not None:
        doc["payoff"] = [
            {"row": int(r), "col": int(col), "value": float(v)}
            for r, col, v in payoff
        ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def _parse_chain(doc, path) -> ScExtChain:
    blocks = doc.get("blocks")
    if not isinstance(blocks, list) or not blocks:
        raise ParseError(f"{path}: missing blocks")
    try:
        sizes = [int(b["size"]) for b in blocks]
    except (TypeError, KeyError) as e:
        raise ParseError(f"{path}: block entry missing size") from e
    if any(s < 1 for s in sizes):
        raise ParseError(f"{path}: block sizes must be >= 1")
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    h_funcs = [([], [], 1.0) for _ in range(len(sizes) - 1)]
    for ei, entry in enumerate(doc.get("h", [])):
        try:
            block = int(entry["block"])
            coeffs = entry["coeffs"]
        except (TypeError, KeyError) as e:
            raise ParseError(f"{path}: h entry {ei}: missing field {e}") from e
        if block < 2 or block > len(sizes):
            raise ParseError(f"{path}: h entry {ei}: bad block {block}")
        idx, val = [], []
        for ci, coeff in enumerate(coeffs):
            try:
                rb = int(coeff["ref_block"])
                ri = int(coeff["ref_index"])
                v = float(coeff["value"])
            except (TypeError, KeyError) as e:
                raise ParseError(
                    f"{path}: h entry {ei} coeff {ci}: missing field {e}") from e
            if rb < 1 or rb >= block or ri < 0 or ri >= sizes[rb - 1]:
                raise ParseError(
                    f"{path}: h entry {ei} coeff {ci}: reference out of range")
            if v < 0.0 or v > 1.0:
                raise InvalidCoefficient(
                    f"{path}: h entry {ei} coeff {ci}: value {v} outside [0, 1]")
            idx.append(int(offsets[rb - 1] + ri))
            val.append(v)
        const = float(entry.get("const", 0.0))
        if const < 0.0 or const > 1.0:
            raise InvalidCoefficient(
                f"{path}: h entry {ei}: const {const} outside [0, 1]")
        h_funcs[block - 2] = (idx, val, const)
    try:
        return build_chain(sizes, h_funcs)
    except InvalidCoefficient:
        raise
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e


def load_chain(path):
    """Returns (chain, paired_chain_or_None, payoff_or_None); the payoff is
    a list of (row, col, value) coordinate triples for the chain-vs-chain
    bilinear problem min over the first chain, max over the second."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: unsupported version {doc.get('version')!r}")
    chain = _parse_chain(doc, path)
    pair = _parse_chain(doc["pair"], path) if "pair" in doc else None
    payoff = None
    if "payoff" in doc:
        if pair is None:
            raise ParseError(f"{path}: payoff requires a paired chain")
        payoff = []
        for ei, e in enumerate(doc["payoff"]):
            try:
                r, col, v = int(e["row"]), int(e["col"]), float(e["value"])
            except (TypeError, KeyError) as exc:
                raise ParseError(
                    f"{path}: payoff {ei}: missing field {exc}") from exc
            if r < 0 or r >= chain.dim or col < 0 or col >= pair.dim:
                raise ParseError(f"{path}: payoff {ei}: index out of range")
            payoff.append((r, col, v))
    return chain, pair, payoff
