import json

import numpy as np
import pytest

from efgfom import dgf, games, scext, treeplex as tpx

import oracles

KINDS = (scext.KIND_DGE, scext.KIND_DILATED_ENTROPY)


def fractional_chain():
    # three blocks; block 2 reads a fractional mix of earlier coordinates,
    # block 3 reads one coordinate of block 1 (h <= 1 by construction)
    return scext.build_chain(
        [2, 3, 2],
        [([0, 1], [0.5, 0.25], 0.25),
         ([1], [1.0], 0.0)])


def test_build_chain_validation():
    with pytest.raises(scext.InvalidCoefficient):
        scext.build_chain([2, 2], [])                     # missing h
    with pytest.raises(scext.InvalidCoefficient):
        scext.build_chain([2, 2], [([5], [1.0], 0.0)])    # forward reference
    with pytest.raises(scext.InvalidCoefficient):
        scext.build_chain([2, 2], [([0], [1.5], 0.0)])    # coefficient > 1
    with pytest.raises(scext.InvalidCoefficient):
        scext.build_chain([2, 2], [([0], [1.0], -0.1)])   # negative constant
    with pytest.raises(scext.InvalidCoefficient):
        scext.build_chain([2, 2], [([0, 1], [1.0], 0.0)]) # length mismatch


def test_chain_points():
    c = fractional_chain()
    assert c.dim == 7
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = scext.random_chain_point(c, rng)
        assert scext.is_chain_point(c, x)
        assert np.min(x) > 0.0
    assert not scext.is_chain_point(c, np.zeros(c.dim))
    assert scext.validate_chain(c)


def test_validate_chain_rejects_vanishing_h():
    # h of block 2 is exactly the first coordinate of block 1 with no
    # constant, so it can get arbitrarily small on interior samples but
    # never nonpositive; a zero-coefficient h is caught instead
    c = scext.ScExtChain(
        np.array([2, 2]), (np.zeros(0, dtype=np.int64), np.array([0])),
        (np.zeros(0), np.array([0.0])), np.array([1.0, 0.0]))
    with pytest.raises(scext.InvalidCoefficient):
        scext.validate_chain(c, samples=5)


def test_kuhn_chain_weights_match_treeplex(kuhn):
    t = kuhn.treeplex_x
    chain, _ = scext.chain_from_treeplex(t)
    w = scext.chain_weights(chain)
    gw = dgf.compute_gamma_w(t)
    np.testing.assert_array_equal(w.alpha_dge, gw.gamma)
    np.testing.assert_array_equal(w.alpha_dilated, gw.beta)


def test_weights_for_unknown_kind():
    with pytest.raises(ValueError):
        scext.weights_for(fractional_chain(), "nope")


def test_value_minimum_zero():
    c = fractional_chain()
    rng = np.random.default_rng(1)
    for kind in KINDS:
        alpha = scext.weights_for(c, kind)
        # the uniform point (argmax of the conjugate at 0) attains value 0
        u = scext.chain_conjugate_gradient(c, alpha, np.zeros(c.dim))
        assert scext.chain_value(c, alpha, kind, u) == pytest.approx(
            0.0, abs=1e-12)
        for _ in range(50):
            x = scext.random_chain_point(c, rng)
            assert scext.chain_value(c, alpha, kind, x) >= -1e-12


def test_gradient_matches_finite_differences():
    c = fractional_chain()
    rng = np.random.default_rng(2)
    for kind in KINDS:
        alpha = scext.weights_for(c, kind)
        x = rng.uniform(0.2, 1.0, size=c.dim)
        g = scext.chain_gradient(c, alpha, kind, x)
        g_fd = oracles.fd_gradient(
            lambda v: scext.chain_value(c, alpha, kind, v), x)
        np.testing.assert_allclose(g, g_fd, rtol=1e-5, atol=1e-6)


def test_conjugate_feasible_and_optimal():
    c = fractional_chain()
    rng = np.random.default_rng(3)
    for kind in KINDS:
        alpha = scext.weights_for(c, kind)
        for _ in range(10):
            g = rng.normal(size=c.dim) * 3.0
            x, val = scext.chain_conjugate_with_value(c, alpha, g)
            assert scext.is_chain_point(c, x, 1e-9)
            assert val == pytest.approx(
                float(np.dot(g, x)) - scext.chain_value(c, alpha, kind, x),
                abs=1e-8)
            for v in oracles.enumerate_chain_vertices(c):
                assert val >= (float(np.dot(g, v))
                               - scext.chain_value(c, alpha, kind, v) - 1e-9)
            for _ in range(50):
                v = scext.random_chain_point(c, rng)
                assert val >= (float(np.dot(g, v))
                               - scext.chain_value(c, alpha, kind, v) - 1e-9)


def test_conjugate_inverts_gradient():
    c = fractional_chain()
    rng = np.random.default_rng(4)
    for kind in KINDS:
        alpha = scext.weights_for(c, kind)
        for _ in range(20):
            x = scext.random_chain_point(c, rng)
            back = scext.chain_conjugate_gradient(
                c, alpha, scext.chain_gradient(c, alpha, kind, x))
            np.testing.assert_allclose(back, x, atol=1e-8)


def test_prox_identity():
    c = fractional_chain()
    rng = np.random.default_rng(5)
    for kind in KINDS:
        alpha = scext.weights_for(c, kind)
        center = scext.random_chain_point(c, rng)
        np.testing.assert_allclose(
            scext.chain_prox(c, alpha, kind, center, np.zeros(c.dim)),
            center, atol=1e-10)


def test_strong_convexity_finite_differences():
    c = fractional_chain()
    rng = np.random.default_rng(6)
    m_x = scext.chain_max_l1(c)
    for kind in KINDS:
        alpha = scext.weights_for(c, kind)
        for _ in range(30):
            x = scext.random_chain_point(c, rng)
            m = (scext.random_chain_point(c, rng)
                 - scext.random_chain_point(c, rng))
            eps = 1e-5 * float(np.min(x)) / (float(np.max(np.abs(m))) + 1e-30)
            q = oracles.fd_quadratic_form(
                lambda v: scext.chain_gradient(c, alpha, kind, v), x, m, eps)
            assert q >= (1.0 - 1e-3) * float(np.dot(m, m))
            assert q * m_x >= (1.0 - 1e-3) * float(np.sum(np.abs(m))) ** 2


def test_linear_maximize_brute_force():
    c = fractional_chain()
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = rng.normal(size=c.dim)
        x, val = scext.chain_linear_maximize(c, g)
        assert scext.is_chain_point(c, x)
        assert val == pytest.approx(float(np.dot(g, x)))
        ref = max(float(np.dot(g, v))
                  for v in oracles.enumerate_chain_vertices(c))
        assert val == pytest.approx(ref)


def test_max_l1_brute_force():
    c = fractional_chain()
    ref = max(float(np.sum(v)) for v in oracles.enumerate_chain_vertices(c))
    assert scext.chain_max_l1(c) == pytest.approx(ref)


def test_diameter_bound_dominates_samples():
    c = fractional_chain()
    rng = np.random.default_rng(8)
    for kind in KINDS:
        alpha = scext.weights_for(c, kind)
        bound = scext.chain_diameter_bound(c, alpha)
        for _ in range(200):
            x = scext.random_chain_point(c, rng)
            assert scext.chain_value(c, alpha, kind, x) <= bound


def test_chain_from_treeplex_equivalence(kuhn):
    t = kuhn.treeplex_x
    chain, idx = scext.chain_from_treeplex(t)
    s = dgf.make_setup(t, dgf.KIND_DGE, scale=1.0)
    alpha = scext.weights_for(chain, scext.KIND_DGE)
    rng = np.random.default_rng(9)
    for _ in range(20):
        g = rng.normal(size=t.n_seqs)
        xs, vs = dgf.conjugate_with_value(s, g)
        xc, vc = scext.chain_conjugate_with_value(chain, alpha, g[idx])
        np.testing.assert_allclose(xs[idx], xc, atol=1e-12)
        # the treeplex conjugate also collects g at the fixed empty sequence
        assert vs == pytest.approx(vc + g[0], abs=1e-10)


def test_save_load_round_trip(tmp_path):
    c = fractional_chain()
    pair = scext.build_chain([2, 2], [([0], [1.0], 0.0)])
    payoff = [(0, 1, 1.5), (3, 0, -2.0)]
    path = tmp_path / "chain.json"
    scext.save_chain(c, path, pair=pair, payoff=payoff)
    c2, p2, pay2 = scext.load_chain(path)
    np.testing.assert_array_equal(c2.sizes, c.sizes)
    np.testing.assert_array_equal(c2.h_const, c.h_const)
    for k in range(c.n_blocks):
        np.testing.assert_array_equal(c2.h_idx[k], c.h_idx[k])
        np.testing.assert_allclose(c2.h_val[k], c.h_val[k])
    np.testing.assert_array_equal(p2.sizes, pair.sizes)
    assert pay2 == payoff


def test_load_errors(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"version": 2, "blocks": [{"size": 2}]}')
    with pytest.raises(games.SchemaVersionMismatch):
        scext.load_chain(path)
    path.write_text('{"version": 1}')
    with pytest.raises(games.ParseError, match="blocks"):
        scext.load_chain(path)
    doc = {"version": 1, "blocks": [{"size": 2}, {"size": 2}],
           "h": [{"block": 2, "coeffs": [
               {"ref_block": 1, "ref_index": 0, "value": 2.0}]}]}
    path.write_text(json.dumps(doc))
    with pytest.raises(scext.InvalidCoefficient):
        scext.load_chain(path)
    doc["h"][0]["coeffs"][0]["value"] = 1.0
    doc["payoff"] = [{"row": 0, "col": 0, "value": 1.0}]
    path.write_text(json.dumps(doc))
    with pytest.raises(games.ParseError, match="paired"):
        scext.load_chain(path)
