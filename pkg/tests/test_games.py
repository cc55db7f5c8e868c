import json

import numpy as np
import pytest

from efgfom import games, treeplex as tpx

import oracles


def test_kuhn_shape(kuhn):
    for t in (kuhn.treeplex_x, kuhn.treeplex_y):
        assert t.n_decision_points == 6
        assert t.n_seqs == 13
    assert kuhn.n_leaves == 30
    assert kuhn.max_abs_payoff() == pytest.approx(2.0 / 6.0)


def test_leduc3_shape(leduc3):
    for t in (leduc3.treeplex_x, leduc3.treeplex_y):
        assert t.n_decision_points == 144
        assert t.n_seqs == 337
    assert leduc3.n_leaves == 1116


def test_leduc_ranks_validation():
    with pytest.raises(games.InvalidParameter):
        games.generate_leduc(1)
    g = games.generate_leduc(2)
    assert g.treeplex_x.n_decision_points > 0


def _kuhn_behavior_pair(game, rng):
    """Random behavioral strategies as both oracle dicts and sequence form."""
    seqs, dicts = [], []
    for player, t in enumerate((game.treeplex_x, game.treeplex_y)):
        behavior, oracle = [], {}
        for j in range(t.n_decision_points):
            probs = rng.dirichlet(np.ones(int(t.n_actions[j])))
            behavior.append(probs)
            oracle[oracles.kuhn_dp_key(t.dp_ids[j])] = probs
        seqs.append(tpx.behavioral_to_sequence(t, behavior))
        dicts.append(oracle)
    return seqs, dicts


def test_kuhn_payoffs_match_hand_coded_tree(kuhn):
    a = kuhn.matrix()
    rng = np.random.default_rng(3)
    for _ in range(25):
        (x, y), (b1, b2) = _kuhn_behavior_pair(kuhn, rng)
        lib = float(x @ (a @ y))
        ref = oracles.kuhn_expected_payoff(b1, b2)
        assert lib == pytest.approx(ref, abs=1e-12)


def test_kuhn_uniform_value(kuhn):
    x = tpx.uniform_behavioral(kuhn.treeplex_x)
    y = tpx.uniform_behavioral(kuhn.treeplex_y)
    v = float(x @ (kuhn.matrix() @ y))
    assert v == pytest.approx(-1.0 / 8.0, abs=1e-12)


def test_chance_probabilities_sum():
    # per deal, showdown + fold entries weighted by chance must cover all
    # 6 Kuhn deals: |values at showdown pot 1| sum to (1/6)*|leaf pay| * ...
    kuhn = games.generate_kuhn()
    # total absolute chance-weighted mass of the "both check" showdowns:
    # 6 deals, pot 1, each 1/6
    checks = [v for r, c, v in zip(kuhn.rows, kuhn.cols, kuhn.values)
              if abs(abs(v) - 1.0 / 6.0) < 1e-12]
    assert len(checks) >= 6


def test_save_load_round_trip(tmp_path, kuhn):
    path = tmp_path / "kuhn.json"
    games.save_game(kuhn, path)
    g2 = games.load_game(path)
    assert g2.treeplex_x.n_seqs == kuhn.treeplex_x.n_seqs
    assert g2.treeplex_y.n_decision_points == kuhn.treeplex_y.n_decision_points
    np.testing.assert_array_equal(g2.rows, kuhn.rows)
    np.testing.assert_array_equal(g2.cols, kuhn.cols)
    np.testing.assert_array_equal(g2.values, kuhn.values)
    assert g2.treeplex_x.dp_ids == kuhn.treeplex_x.dp_ids


def test_load_rejects_bad_version(tmp_path, kuhn):
    path = tmp_path / "g.json"
    games.save_game(kuhn, path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(games.SchemaVersionMismatch):
        games.load_game(path)


def test_load_rejects_malformed(tmp_path, kuhn):
    path = tmp_path / "g.json"
    path.write_text("{not json")
    with pytest.raises(games.ParseError):
        games.load_game(path)

    games.save_game(kuhn, path)
    doc = json.loads(path.read_text())
    doc["payoffs"].append(dict(doc["payoffs"][0]))
    path.write_text(json.dumps(doc))
    with pytest.raises(games.ParseError, match="duplicate"):
        games.load_game(path)

    doc = json.loads(path.read_text())
    doc["payoffs"] = [{"row": "nope/x", "col": "", "value": 1.0}]
    path.write_text(json.dumps(doc))
    with pytest.raises(games.ParseError, match="unknown sequence"):
        games.load_game(path)

    doc["payoffs"] = []
    doc["players"][0]["decision_points"][3]["parent_sequence"] = "missing/x"
    path.write_text(json.dumps(doc))
    with pytest.raises(games.ParseError, match="unknown"):
        games.load_game(path)
