"""Benchmark game generators and the portable game file format.

Games are emitted directly in sequence form: one treeplex per player and a
sparse bilinear payoff matrix A.  Each stored entry is the payoff to the
second player (the maximizer) at a terminal, times the product of chance
probabilities on the path; the problem solved downstream is
min_x max_y x^T A y.

Both built-in generators run on a small parametric poker engine:
  Kuhn poker    -- 3 ranks, 1 copy each, one betting round (bet size 1,
                   at most one bet), no public card.
  Leduc poker   -- R ranks, 2 copies each, two betting rounds (bet sizes
                   1 and 2, at most two bets per round), one public card
                   revealed between the rounds; a pair with the public
                   card beats a high card.
Antes are 1 for both games.  Chance probabilities are kept as exact
rationals internally and converted to doubles at emission.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .treeplex import Treeplex, build_treeplex


class InvalidParameter(ValueError):
    pass


class ParseError(ValueError):
    pass


class SchemaVersionMismatch(ParseError):
    pass


@dataclass(frozen=True)
class GameInstance:
    treeplex_x: Treeplex   # Player 1, the minimizer
    treeplex_y: Treeplex   # Player 2, the maximizer
    rows: np.ndarray       # sequence indices into treeplex_x
    cols: np.ndarray       # sequence indices into treeplex_y
    values: np.ndarray     # Player-2 payoff x chance probability

    @property
    def n_leaves(self) -> int:
        return len(self.values)

    def matrix(self) -> sp.csr_matrix:
        shape = (self.treeplex_x.n_seqs, self.treeplex_y.n_seqs)
        return sp.csr_matrix(
            (self.values, (self.rows, self.cols)), shape=shape)

    def max_abs_payoff(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0


@dataclass(frozen=True)
class PokerRules:
    ranks: int
    copies: int
    bet_sizes: tuple      # one entry per betting round
    max_bets: int         # cap on bets/raises within one round
    board_card: bool      # reveal a public card before the last round


def generate_kuhn() -> GameInstance:
    return _build_poker(PokerRules(3, 1, (1,), 1, False))


def generate_leduc(ranks: int) -> GameInstance:
    if ranks < 2:
        raise InvalidParameter(f"leduc requires ranks >= 2, got {ranks}")
    return _build_poker(PokerRules(ranks, 2, (1, 2), 2, True))


# ---------------------------------------------------------------------------
# poker engine

class _Builder:
    def __init__(self, rules: PokerRules):
        self.rules = rules
        # infoset key -> record; key = (player, own rank, public history)
        self.infosets = ({}, {})
        # (seq_key_1, seq_key_2) -> accumulated Fraction payoff to Player 2
        self.payoffs = {}

    def run(self) -> GameInstance:
        r = self.rules
        total = r.ranks * r.copies
        for r1 in range(r.ranks):
            for r2 in range(r.ranks):
                ways = r.copies * (r.copies - (1 if r1 == r2 else 0))
                if ways == 0:
                    continue
                prob = Fraction(ways, total * (total - 1))
                self._round(0, (), None, "", (r1, r2), [Fraction(1)] * 2,
                            prob, [None, None])
        return self._emit()

    def _round(self, rnd, done, board, cur, ranks, contrib, prob, last_seq):
        r = self.rules
        actor = len(cur) % 2
        pending = cur.endswith("b")
        bets = cur.count("b")
        if pending:
            actions = [("c", "call")]
            if bets < r.max_bets:
                actions.append(("b", "raise"))
            actions.append(("f", "fold"))
        else:
            actions = [("k", "check")]
            if bets < r.max_bets:
                actions.append(("b", "bet"))
        key = (actor, ranks[actor], done + ((board, cur),))
        rec = self.infosets[actor].get(key)
        if rec is None:
            rec = {
                "labels": tuple(lbl for _, lbl in actions),
                "parent": last_seq[actor],
                "depth": 0 if last_seq[actor] is None
                         else self.infosets[actor][last_seq[actor][0]]["depth"] + 1,
                "order": len(self.infosets[actor]),
            }
            self.infosets[actor][key] = rec

        for ai, (code, _) in enumerate(actions):
            nxt_contrib = list(contrib)
            to_call = contrib[1 - actor] - contrib[actor]
            if code == "b":
                nxt_contrib[actor] += to_call + r.bet_sizes[rnd]
            elif code == "c":
                nxt_contrib[actor] += to_call
            nxt_seq = list(last_seq)
            nxt_seq[actor] = (key, ai)
            nxt_cur = cur + code
            if code == "f":
                self._fold(actor, nxt_contrib, prob, nxt_seq)
            elif code == "c" or nxt_cur == "kk":
                self._round_over(rnd, done, board, nxt_cur, ranks,
                                 nxt_contrib, prob, nxt_seq)
            else:
                self._round(rnd, done, board, nxt_cur, ranks,
                            nxt_contrib, prob, nxt_seq)

    def _round_over(self, rnd, done, board, cur, ranks, contrib, prob, last_seq):
        r = self.rules
        if rnd + 1 == len(r.bet_sizes):
            self._showdown(board, ranks, contrib, prob, last_seq)
            return
        done = done + ((board, cur),)
        remaining = r.ranks * r.copies - 2
        for b in range(r.ranks):
            count = r.copies - (ranks[0] == b) - (ranks[1] == b)
            if count <= 0:
                continue
            self._round(rnd + 1, done, b, "", ranks, contrib,
                        prob * Fraction(count, remaining), last_seq)

    def _fold(self, folder, contrib, prob, last_seq):
        pay = contrib[0] if folder == 0 else -contrib[1]
        self._terminal(last_seq, prob * pay)

    def _showdown(self, board, ranks, contrib, prob, last_seq):
        if board is not None and ranks[0] == board:
            winner = 0
        elif board is not None and ranks[1] == board:
            winner = 1
        elif ranks[0] > ranks[1]:
            winner = 0
        elif ranks[1] > ranks[0]:
            winner = 1
        else:
            winner = None
        if winner is None:
            pay = Fraction(0)
        elif winner == 1:
            pay = contrib[0]
        else:
            pay = -contrib[1]
        self._terminal(last_seq, prob * pay)

    def _terminal(self, last_seq, weighted_pay):
        key = (last_seq[0], last_seq[1])
        self.payoffs[key] = self.payoffs.get(key, Fraction(0)) + weighted_pay

    def _emit(self) -> GameInstance:
        treeplexes = []
        seq_index = [{}, {}]  # player -> seq_key -> sequence index
        for p in range(2):
            keys = sorted(self.infosets[p],
                          key=lambda k: (self.infosets[p][k]["depth"],
                                         self.infosets[p][k]["order"]))
            start = {}
            nxt = 1
            for k in keys:
                start[k] = nxt
                nxt += len(self.infosets[p][k]["labels"])
            dps = []
            for k in keys:
                rec = self.infosets[p][k]
                parent = rec["parent"]
                pidx = 0 if parent is None else start[parent[0]] + parent[1]
                dps.append((_dp_id(k), pidx, rec["labels"]))
                for ai in range(len(rec["labels"])):
                    seq_index[p][(k, ai)] = start[k] + ai
            treeplexes.append(build_treeplex(dps))
        entries = sorted(
            (0 if s1 is None else seq_index[0][s1],
             0 if s2 is None else seq_index[1][s2],
             float(v))
            for (s1, s2), v in self.payoffs.items())
        rows = np.array([e[0] for e in entries], dtype=np.int64)
        cols = np.array([e[1] for e in entries], dtype=np.int64)
        vals = np.array([e[2] for e in entries], dtype=np.float64)
        return GameInstance(treeplexes[0], treeplexes[1], rows, cols, vals)


def _dp_id(key) -> str:
    _, rank, public = key
    parts = []
    for board, betting in public:
        if board is not None:
            parts.append(str(board))
        parts.append(betting if betting else "_")
    return f"{rank}|" + ".".join(parts)


def _build_poker(rules: PokerRules) -> GameInstance:
    return _Builder(rules).run()


# ---------------------------------------------------------------------------
# file format (version 1)

FORMAT_VERSION = 1


def save_game(g: GameInstance, path) -> None:
    players = []
    for t in (g.treeplex_x, g.treeplex_y):
        dps = []
        for j in range(t.n_decision_points):
            p = int(t.parent_seq[j])
            dps.append({
                "id": t.dp_ids[j],
                "parent_sequence": None if p == 0 else t.sequence_id(p),
                "actions": list(t.action_labels[j]),
            })
        players.append({"decision_points": dps})
    payoffs = [
        {"row": g.treeplex_x.sequence_id(int(r)),
         "col": g.treeplex_y.sequence_id(int(c)),
         "value": float(v)}
        for r, c, v in zip(g.rows, g.cols, g.values)
    ]
    doc = {"version": FORMAT_VERSION, "players": players, "payoffs": payoffs}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_game(path) -> GameInstance:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise SchemaVersionMismatch(f"{path}: unsupported version {version!r}")
    players = doc.get("players")
    if not isinstance(players, list) or len(players) != 2:
        raise ParseError(f"{path}: 'players' must be a list of two entries")
    treeplexes = []
    seq_of_id = []
    for pi, player in enumerate(players):
        dps_doc = player.get("decision_points")
        if not isinstance(dps_doc, list):
            raise ParseError(f"{path}: player {pi}: missing decision_points")
        ids = {}
        dps = []
        nxt = 1
        for di, d in enumerate(dps_doc):
            try:
                dp_id = d["id"]
                parent = d["parent_sequence"]
                actions = d["actions"]
            except (TypeError, KeyError) as e:
                raise ParseError(
                    f"{path}: player {pi} decision point {di}: missing field {e}"
                ) from e
            if not isinstance(actions, list) or not actions:
                raise ParseError(
                    f"{path}: player {pi} decision point {di}: empty actions")
            if parent is None or parent == "":
                pidx = 0
            else:
                if parent not in ids:
                    raise ParseError(
                        f"{path}: player {pi} decision point {di}: unknown "
                        f"parent sequence {parent!r}")
                pidx = ids[parent]
            dps.append((dp_id, pidx, actions))
            for a in actions:
                ids[f"{dp_id}/{a}"] = nxt
                nxt += 1
        treeplexes.append(build_treeplex(dps))
        seq_of_id.append(ids)
    payoffs_doc = doc.get("payoffs")
    if not isinstance(payoffs_doc, list):
        raise ParseError(f"{path}: missing payoffs")
    rows, cols, vals = [], [], []
    for ei, e in enumerate(payoffs_doc):
        try:
            row, col, val = e["row"], e["col"], e["value"]
        except (TypeError, KeyError) as exc:
            raise ParseError(f"{path}: payoff {ei}: missing field {exc}") from exc
        for ids, ref, out in ((seq_of_id[0], row, rows), (seq_of_id[1], col, cols)):
            if ref is None or ref == "":
                out.append(0)
            elif ref in ids:
                out.append(ids[ref])
            else:
                raise ParseError(f"{path}: payoff {ei}: unknown sequence {ref!r}")
        vals.append(float(val))
    seen = set()
    for r, c in zip(rows, cols):
        if (r, c) in seen:
            raise ParseError(f"{path}: duplicate payoff cell ({r}, {c})")
        seen.add((r, c))
    return GameInstance(
        treeplexes[0], treeplexes[1],
        np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
        np.array(vals, dtype=np.float64))
