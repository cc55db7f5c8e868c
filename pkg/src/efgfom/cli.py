"""Command-line entry point.

Commands:
  generate  -- write a built-in game to the JSON game format and print a
               stats line (decision points, sequences, leaves, weight stats).
  solve     -- run EGT / MP / EGT-AS on a game or chain-pair source, writing
               runs/<timestamp>-<confighash>/{config.json,log.csv,summary.json}.
  validate  -- run the invariant suites on a source and print a JSON report;
               exit code is nonzero if any invariant fails.

By default log.csv leaves the wall_time_ms column empty so that identical
configurations produce byte-identical CSV files; pass --timing to record
measured times.  The env var EFGFOM_THREADS caps BLAS parallelism.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dgf, games, scext, solver, treeplex as tpx


class UnknownGame(ValueError):
    pass


InvalidParameter = games.InvalidParameter


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UnknownGame, InvalidParameter, games.ParseError,
            scext.InvalidCoefficient, tpx.TreeplexError,
            dgf.DomainError, solver.NumericalFailure,
            solver.StallError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="efgfom",
        description="First-order saddle-point solvers for sequence-form games "
                    "and scaled-extension chains")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a built-in game to a file")
    gen.add_argument("name", help="kuhn or leduc")
    gen.add_argument("--ranks", type=int, default=None, help="leduc rank count")
    gen.add_argument("--out", required=True, help="output game JSON path")
    gen.set_defaults(func=cmd_generate)

    sol = sub.add_parser("solve", help="run a solver")
    src = sol.add_mutually_exclusive_group(required=True)
    src.add_argument("--game", help="built-in game name (kuhn, leduc)")
    src.add_argument("--game-file", help="game JSON file")
    src.add_argument("--chain-file", help="chain-pair JSON file with payoff")
    sol.add_argument("--ranks", type=int, default=None)
    sol.add_argument("--alg", choices=("egt", "mp", "egt-as"), default="egt")
    sol.add_argument("--dgf", choices=(dgf.KIND_DGE, dgf.KIND_DILATED_ENTROPY),
                     default=dgf.KIND_DGE)
    sol.add_argument("--iters", type=int, default=1000,
                     help="iteration count (egt, mp)")
    sol.add_argument("--budget", type=int, default=2000,
                     help="gradient-computation budget (egt-as)")
    sol.add_argument("--seed", type=int, default=0)
    sol.add_argument("--log-every", type=int, default=None,
                     help="override the gap-logging cadence")
    sol.add_argument("--timing", action="store_true",
                     help="record wall times in log.csv (not byte-reproducible)")
    sol.add_argument("--out", default=None, help="output directory")
    sol.set_defaults(func=cmd_solve)

    val = sub.add_parser("validate", help="run invariant suites")
    vsrc = val.add_mutually_exclusive_group(required=True)
    vsrc.add_argument("--game", help="built-in game name")
    vsrc.add_argument("--game-file")
    vsrc.add_argument("--chain-file")
    val.add_argument("--ranks", type=int, default=None)
    val.add_argument("--samples", type=int, default=200)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--weights-out", default=None,
                     help="write per-decision-point/per-sequence weights as CSV")
    val.set_defaults(func=cmd_validate)
    return parser


def _load_builtin(name: str, ranks):
    if name == "kuhn":
        return games.generate_kuhn()
    if name == "leduc":
        if ranks is None:
            raise InvalidParameter("leduc requires --ranks")
        return games.generate_leduc(ranks)
    raise UnknownGame(f"unknown game {name!r} (expected kuhn or leduc)")


def _weight_stats(game: games.GameInstance):
    # player-1 weights, root included in the averages
    w = dgf.compute_gamma_w(game.treeplex_x)
    return np.append(w.beta, w.beta_root), np.append(w.gamma, w.gamma_root)


def cmd_generate(args) -> int:
    game = _load_builtin(args.name, args.ranks)
    games.save_game(game, args.out)
    beta, gamma = _weight_stats(game)
    print(f"{game.treeplex_x.n_decision_points} "
          f"{game.treeplex_y.n_decision_points} "
          f"{game.treeplex_x.n_seqs} {game.treeplex_y.n_seqs} "
          f"{game.n_leaves} | "
          f"beta {np.mean(beta):.4f}/{np.max(beta):g} | "
          f"gamma {np.mean(gamma):.4f}/{np.max(gamma):g}")
    return 0


def _build_problem(args):
    if args.chain_file:
        chain, pair, payoff = scext.load_chain(args.chain_file)
        if pair is None or payoff is None:
            raise InvalidParameter(
                f"{args.chain_file}: solve needs a paired chain and a payoff")
        scext.validate_chain(chain)
        scext.validate_chain(pair)
        return solver.problem_from_chains(chain, pair, payoff, args.dgf)
    if args.game_file:
        game = games.load_game(args.game_file)
    else:
        game = _load_builtin(args.game, args.ranks)
    return solver.problem_from_game(game, args.dgf)


def cmd_solve(args) -> int:
    config = {
        "command": "solve",
        "source": args.game or args.game_file or args.chain_file,
        "ranks": args.ranks,
        "alg": args.alg,
        "dgf": args.dgf,
        "iters": args.iters,
        "budget": args.budget,
        "seed": args.seed,
        "log_every": args.log_every,
    }
    blob = json.dumps(config, sort_keys=True).encode()
    config_hash = hashlib.sha256(blob).hexdigest()[:8]
    if args.out:
        out_dir = Path(args.out)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        out_dir = Path("runs") / f"{stamp}-{config_hash}"
    out_dir.mkdir(parents=True, exist_ok=True)

    problem = _build_problem(args)
    start = time.monotonic()
    if args.alg == "egt":
        rows, state = solver.run_egt(problem, args.iters, args.log_every)
        x, y = state.x, state.y
    elif args.alg == "mp":
        rows, state = solver.run_mp(problem, args.iters, args.log_every)
        x, y = state.x, state.y
    else:
        rows, state = solver.egt_as_run(problem, args.budget, args.log_every)
        x, y = state.x, state.y
    elapsed_ms = (time.monotonic() - start) * 1e3

    (out_dir / "config.json").write_text(
        json.dumps(config, sort_keys=True, indent=1) + "\n")
    (out_dir / "log.csv").write_text(
        solver.log_to_csv(rows, include_timing=args.timing))
    final_gap = rows[-1].gap if rows else solver.saddle_gap(problem, x, y)
    bound_ok = all(r.bound is None or r.gap <= r.bound + 1e-9 for r in rows)
    summary = {
        "algorithm": args.alg,
        "dgf": args.dgf,
        "iterations": rows[-1].iteration if rows else 0,
        "gradient_computations": problem.gradient_computations,
        "final_gap": final_gap,
        "bound_ok": bound_ok,
        "opnorm": problem.opnorm,
        "omega_x": problem.domain_x.diameter,
        "omega_y": problem.domain_y.diameter,
        "value_estimate": float(x @ (problem.a @ y)),
        "wall_time_ms": elapsed_ms,
        "config_hash": config_hash,
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1) + "\n")
    print(f"{out_dir}: final gap {final_gap:.6g} after "
          f"{summary['gradient_computations']} gradient computations")
    return 0


# ---------------------------------------------------------------------------
# validate

def _validate_game(game: games.GameInstance, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    report = {}
    for t in (game.treeplex_x, game.treeplex_y):
        tpx.validate(t)
    report["structure"] = {"ok": True}

    # dilatability: global entropy vs dilated entropy with the same weights
    worst = 0.0
    for t in (game.treeplex_x, game.treeplex_y):
        s_dge = dgf.make_setup(t, dgf.KIND_DGE, scale=1.0)
        gw = s_dge.weights
        s_dil = dgf.make_setup(t, dgf.KIND_DILATED_ENTROPY, scale=1.0)
        dil_gamma = dgf.ProximalSetup(
            kind=dgf.KIND_DILATED_ENTROPY, treeplex=t, weights=gw,
            scale=1.0, m_q=s_dil.m_q, tree_depth=s_dil.tree_depth,
            dp_weight=gw.gamma, seq_dp_weight=s_dge.seq_dp_weight,
            seq_w=s_dge.seq_w, child_const=s_dge.child_const,
            log_n=s_dil.log_n)
        for _ in range(samples):
            x = tpx.random_strategy(t, rng)
            a = dgf.value(s_dge, x)
            b = dgf.value(dil_gamma, x)
            worst = max(worst, abs(a - b) / (1.0 + abs(b)))
    report["dilatability"] = {"ok": worst <= 1e-8, "worst_residual": worst}

    # conjugate feasibility and optimality against sampled strategies
    worst_feas = True
    worst_margin = 0.0
    for t in (game.treeplex_x, game.treeplex_y):
        for kind in (dgf.KIND_DGE, dgf.KIND_DILATED_ENTROPY):
            s = dgf.make_setup(t, kind)
            g = rng.normal(size=t.n_seqs)
            xs, val = dgf.conjugate_with_value(s, g)
            worst_feas = worst_feas and tpx.is_strategy(t, xs, 1e-9)
            for _ in range(samples):
                v = tpx.random_strategy(t, rng)
                worst_margin = min(
                    worst_margin, val - (float(np.dot(g, v)) - dgf.value(s, v)))
    report["conjugate"] = {"ok": worst_feas and worst_margin >= -1e-9,
                           "worst_margin": worst_margin}

    # strong convexity certificates via finite differences
    worst_l2, worst_l1 = np.inf, np.inf
    for t in (game.treeplex_x, game.treeplex_y):
        m_q = tpx.max_l1(t)
        for kind in (dgf.KIND_DGE, dgf.KIND_DILATED_ENTROPY):
            s = dgf.make_setup(t, kind, scale=1.0)
            for _ in range(max(samples // 10, 5)):
                x = tpx.random_strategy(t, rng)
                m = tpx.random_strategy(t, rng) - tpx.random_strategy(t, rng)
                eps = 1e-5 * float(np.min(x)) / (float(np.max(np.abs(m))) + 1e-30)
                q = float(np.dot(
                    dgf.gradient(s, x + eps * m) - dgf.gradient(s, x - eps * m),
                    m)) / (2 * eps)
                n2 = float(np.dot(m, m))
                n1 = float(np.sum(np.abs(m))) ** 2
                if n2 > 0:
                    worst_l2 = min(worst_l2, q / n2)
                    worst_l1 = min(worst_l1, q * m_q / n1)
    report["strong_convexity"] = {
        "ok": worst_l2 >= 1.0 - 1e-3 and worst_l1 >= 1.0 - 1e-3,
        "min_l2_ratio": worst_l2, "min_l1_ratio": worst_l1}

    # chain/treeplex equivalence
    worst_eq = 0.0
    for t in (game.treeplex_x, game.treeplex_y):
        chain, idx = scext.chain_from_treeplex(t)
        gw = dgf.compute_gamma_w(t)
        cw = scext.chain_weights(chain)
        worst_eq = max(worst_eq, float(np.max(np.abs(cw.alpha_dge - gw.gamma))))
        s = dgf.make_setup(t, dgf.KIND_DGE, scale=1.0)
        for _ in range(max(samples // 10, 5)):
            g = rng.normal(size=t.n_seqs)
            xs = dgf.conjugate_gradient(s, g)
            xc = scext.chain_conjugate_gradient(chain, cw.alpha_dge, g[idx])
            worst_eq = max(worst_eq, float(np.max(np.abs(xs[idx] - xc))))
    report["chain_equivalence"] = {"ok": worst_eq <= 1e-9, "worst": worst_eq}
    return report


def _validate_chain_file(path: str, samples: int, seed: int):
    chain, pair, _ = scext.load_chain(path)
    report = {}
    for label, c in (("chain", chain), ("pair", pair)):
        if c is None:
            continue
        scext.validate_chain(c, samples=samples, seed=seed)
        rng = np.random.default_rng(seed)
        alpha = scext.weights_for(c, scext.KIND_DGE)
        g = rng.normal(size=c.dim)
        x, val = scext.chain_conjugate_with_value(c, alpha, g)
        worst = 0.0
        for _ in range(samples):
            v = scext.random_chain_point(c, rng)
            worst = min(worst, val - (float(np.dot(g, v))
                                      - scext.chain_value(c, alpha, "dge", v)))
        report[label] = {"ok": scext.is_chain_point(c, x, 1e-9)
                               and worst >= -1e-9,
                         "worst_margin": worst}
    return report


def _write_weights_csv(game: games.GameInstance, path: str):
    lines = ["player,kind,id,value"]
    for pi, t in enumerate((game.treeplex_x, game.treeplex_y)):
        w = dgf.compute_gamma_w(t)
        lines.append(f"{pi},beta,,{w.beta_root!r}")
        lines.append(f"{pi},gamma,,{w.gamma_root!r}")
        for j in range(t.n_decision_points):
            lines.append(f"{pi},beta,{t.dp_ids[j]},{float(w.beta[j])!r}")
            lines.append(f"{pi},gamma,{t.dp_ids[j]},{float(w.gamma[j])!r}")
        for sigma in range(t.n_seqs):
            lines.append(f"{pi},w,{t.sequence_id(sigma)},{float(w.w[sigma])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_validate(args) -> int:
    if args.chain_file:
        report = _validate_chain_file(args.chain_file, args.samples, args.seed)
    else:
        if args.game_file:
            game = games.load_game(args.game_file)
        else:
            game = _load_builtin(args.game, args.ranks)
        report = _validate_game(game, args.samples, args.seed)
        if args.weights_out:
            _write_weights_csv(game, args.weights_out)
    report = {k: {kk: (bool(vv) if isinstance(vv, (bool, np.bool_)) else
                       float(vv) if isinstance(vv, (int, float)) else vv)
                  for kk, vv in v.items()}
              for k, v in report.items()}
    ok = all(v.get("ok", False) for v in report.values())
    print(json.dumps({"ok": ok, "checks": report}, indent=1, sort_keys=True))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
