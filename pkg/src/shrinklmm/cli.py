"""Command-line interface: one entry point, subcommand per task.

Every artifact file starts with a comment line recording the invocation
and seed, and identical invocations produce byte-identical files.  Output
paths default into the directory named by SHRINKLMM_OUT_DIR (falling back
to the working directory) unless --out gives an explicit path.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import designs, dists, football
from .football import (CorrectPredictionRates, OutcomeProbabilities,
                       PoolScoreModel)
from .lmm import ModelSpec, ObservationTable, VariancePrior, map_fit, reml_fit

OUT_DIR_ENV = "SHRINKLMM_OUT_DIR"


def _out_path(args, default_name):
    if args.out:
        return args.out
    base = os.environ.get(OUT_DIR_ENV, ".")
    os.makedirs(base, exist_ok=True)
    return os.path.join(base, default_name)


def _write(path, invocation, body):
    with open(path, "w") as fh:
        fh.write(f"# {invocation}\n")
        fh.write(body)
    print(path)


def _csv_body(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("NA" if v is None else
                              (repr(v) if isinstance(v, float) else str(v))
                              for v in row))
    return "\n".join(lines) + "\n"


def _json_body(payload):
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _floats(text):
    return [float(tok) for tok in text.split(",") if tok != ""]


def _parse_mu(text, t):
    if text == "zeros":
        return np.zeros(t)
    if text.startswith("spread:"):
        d = float(text.split(":", 1)[1])
        return np.linspace(-d / 2.0, d / 2.0, t)
    if text.startswith("spike:"):
        v = float(text.split(":", 1)[1])
        mu = np.zeros(t)
        mu[0] = v
        return mu
    vals = np.array(_floats(text))
    if vals.size != t:
        raise ValueError(f"--mu needs {t} values, got {vals.size}")
    return vals


def _load_priors_json(path):
    with open(path) as fh:
        text = "".join(ln for ln in fh if not ln.startswith("#"))
    raw = json.loads(text)
    comps = {k: (None if v is None else (float(v[0]), float(v[1])))
             for k, v in raw.items()}
    return VariancePrior(comps)


def _prior_payload(prior):
    return {k: (None if v is None else [v[0], v[1]])
            for k, v in prior.components.items()}


def _pick_season(seasons, label, path):
    if label is not None:
        for s in seasons:
            if s.season_id == str(label):
                return s
        raise ValueError(f"season {label!r} not in {path} "
                         f"(has {[s.season_id for s in seasons]})")
    if len(seasons) == 1:
        return seasons[0]
    raise ValueError(f"{path} holds {len(seasons)} seasons; pass --season "
                     f"(one of {[s.season_id for s in seasons]})")


def _load_epl(args):
    cmap = football.load_column_map(args.column_map) if args.column_map else None
    seasons = football.load_matches(args.input, season=args.season,
                                    column_map=cmap)
    if not seasons:
        raise ValueError(f"{args.input}: no match rows")
    return seasons


def _epl_fit_from_args(args, season):
    train, test = football.training_split(season, h=args.h)
    prior = None
    if args.method == "map":
        if not args.prior_season:
            raise ValueError("--method map requires --prior-season")
        seasons = _load_epl(args)
        prev = _pick_season(seasons, args.prior_season, args.input)
        prior = football.extract_priors(prev)
    fit = football.fit_home_away(train, method=args.method, prior=prior)
    return fit, train, test


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_simulate_msep(args, invocation):
    config = designs.MsepConfig(
        design=args.design, t=args.t,
        k=args.k if args.design == "bibd" else args.t,
        n_blocks=args.n, sigma2_e=args.sigma2e,
        rho_grid=tuple(_floats(args.rho)), delta_grid=tuple(_floats(args.delta)),
        reps=args.reps, seed=args.seed)
    cells = designs.msep_study(config)
    rows = [(c.design, c.rho, c.delta, c.reps, c.msep_eblup, c.msep_mle, c.ratio)
            for c in cells]
    path = _out_path(args, f"msep_{args.design}.csv")
    _write(path, invocation, _csv_body(
        ["design", "rho", "delta", "reps", "msep_eblup", "msep_mle", "ratio"],
        rows))


def _cmd_dominance(args, invocation):
    mu = _parse_mu(args.mu, args.t)
    res = designs.dominance_check(args.t, args.a, args.b, mu,
                                  reps=args.reps, seed=args.seed)
    payload = {
        "t": args.t, "a": args.a, "b": args.b, "mu": list(map(float, mu)),
        "reps": res.reps, "mse_shrink": res.mse_shrink, "mse_raw": res.mse_raw,
        "se_shrink": res.se_shrink, "se_raw": res.se_raw,
    }
    _write(_out_path(args, "dominance.json"), invocation, _json_body(payload))


def _cmd_fit(args, invocation):
    table = ObservationTable.from_csv(args.input)
    names, signs = [], {}
    for spec_str in args.random:
        if ":" in spec_str:
            name, sign = spec_str.split(":", 1)
            signs[name] = int(sign)
        else:
            name = spec_str
        names.append(name)
    spec = ModelSpec(tuple(names), signs)
    if args.method == "map":
        if not args.priors:
            raise ValueError("--method map requires --priors")
        fit = map_fit(table, spec, _load_priors_json(args.priors))
    else:
        fit = reml_fit(table, spec)
    _write(_out_path(args, "fit.json"), invocation, fit.to_json() + "\n")


def _cmd_epl_fit(args, invocation):
    seasons = _load_epl(args)
    season = _pick_season(seasons, args.season, args.input)
    fit, _, _ = _epl_fit_from_args(args, season)
    _write(_out_path(args, f"epl_fit_{season.season_id}.json"), invocation,
           fit.to_json() + "\n")


def _cmd_epl_predict(args, invocation):
    seasons = _load_epl(args)
    season = _pick_season(seasons, args.season, args.input)
    fit, train, test = _epl_fit_from_args(args, season)
    rows = []
    preds, actuals = [], []
    for m in test:
        yhat = football.predict_goal_diff(fit, m.home_team, m.away_team)
        outcome = football.classify_outcome(yhat, args.threshold)
        preds.append(outcome)
        actuals.append(football.classify_outcome(m.goal_diff, 0.0))
        rows.append((m.date.isoformat(), m.home_team, m.away_team,
                     m.goal_diff, yhat, outcome))
    path = _out_path(args, f"epl_predictions_{season.season_id}.csv")
    _write(path, invocation, _csv_body(
        ["date", "home_team", "away_team", "actual_goal_diff",
         "predicted_goal_diff", "predicted_outcome"], rows))
    if test:
        table = football.confusion(preds, actuals)
        crows = [(lab, *table.counts[i].tolist(), int(table.row_margins[i]))
                 for i, lab in enumerate(table.labels)]
        crows.append(("total", *table.col_margins.tolist(), table.total))
        cpath = args.confusion_out or _out_path(
            args, f"epl_confusion_{season.season_id}.csv")
        _write(cpath, invocation, _csv_body(
            ["actual", "predicted_D", "predicted_L", "predicted_W",
             "row_total"], crows))
        print(f"draw_precision={table.draw_precision!r}")


def _cmd_epl_season_summary(args, invocation):
    seasons = _load_epl(args)
    season = _pick_season(seasons, args.season, args.input)
    fit, train, _ = _epl_fit_from_args(args, season)
    rows = [(r.team, r.predicted_final_gd, r.actual_final_gd, r.train_gd,
             r.predicted_rank, r.actual_rank)
            for r in football.season_summary(fit, season, train)]
    path = _out_path(args, f"epl_summary_{season.season_id}.csv")
    _write(path, invocation, _csv_body(
        ["team", "predicted_final_gd", "actual_final_gd", "train_gd",
         "predicted_rank", "actual_rank"], rows))


def _cmd_epl_priors(args, invocation):
    seasons = _load_epl(args)
    season = _pick_season(seasons, args.season, args.input)
    prior = football.extract_priors(season)
    _write(_out_path(args, f"epl_priors_{season.season_id}.json"),
           invocation, _json_body(_prior_payload(prior)))


def _cmd_epl_rmsep(args, invocation):
    seasons = _load_epl(args)
    models = tuple(args.models.split(","))
    rows = [(r.season_id, r.model, r.rmsep, r.rank_mae, r.n_test)
            for r in football.rmsep_compare(seasons, models=models, h=args.h)]
    _write(_out_path(args, "epl_rmsep.csv"), invocation, _csv_body(
        ["season", "model", "rmsep", "rank_mae", "n_test"], rows))


def _cmd_pool_expected(args, invocation):
    if args.strategy == "random":
        if None in (args.pwin, args.ploss, args.pdraw):
            raise ValueError("--strategy random needs --pwin, --ploss, --pdraw")
        truth = OutcomeProbabilities(args.pwin, args.ploss, args.pdraw,
                                     args.noscore_share)
        per_game = football.expected_pool_score(truth)
    else:
        if None in (args.qwin, args.qloss, args.qdraw):
            raise ValueError(
                "--strategy frequencies needs --qwin, --qloss, --qdraw")
        rates = CorrectPredictionRates(args.qwin, args.qloss, args.qdraw,
                                       args.noscore_share)
        per_game = football.expected_pool_score(strategy="frequencies",
                                                rates=rates)
    payload = {"strategy": args.strategy, "per_game": per_game,
               "eight_game_line": 8.0 * per_game}
    _write(_out_path(args, "pool_expected.json"), invocation,
           _json_body(payload))


def _cmd_pool_simulate(args, invocation):
    model = PoolScoreModel.from_correct_rates(CorrectPredictionRates(
        args.qwin, args.qloss, args.qdraw, args.model_noscore_share))
    random_guess = PoolScoreModel.random_guess(OutcomeProbabilities(
        args.pwin, args.ploss, args.pdraw, args.noscore_share))
    sim = football.simulate_pool_lines(model, random_guess,
                                       n_lines=args.lines, seed=args.seed)
    payload = {
        "lines": args.lines,
        "mean_model": sim.mean_a, "mean_random": sim.mean_b,
        "model_stochastically_larger": sim.a_stochastically_larger,
        "scores": sim.scores.tolist(),
        "cdf_model": sim.cdf_a.tolist(), "cdf_random": sim.cdf_b.tolist(),
    }
    _write(_out_path(args, "pool_simulation.json"), invocation,
           _json_body(payload))


def _cmd_threshold_search(args, invocation):
    with open(args.predictions) as fh:
        preds = [float(ln) for ln in fh
                 if ln.strip() and not ln.startswith("#")]
    d_star = football.threshold_search(preds, args.actual_draws,
                                       _floats(args.grid))
    payload = {"d_star": d_star, "grid": _floats(args.grid),
               "actual_draws": args.actual_draws, "n_predictions": len(preds)}
    _write(_out_path(args, "threshold.json"), invocation, _json_body(payload))


def _cmd_dist_skellam(args, invocation):
    params = dists.SkellamParams(args.mu1, args.mu2)
    report = dists.normal_approx_compare(params)
    rows = [(k, exact, normal) for k, exact, normal in report.table]
    path = _out_path(args, f"skellam_{args.mu1:g}_{args.mu2:g}.csv")
    _write(path, invocation, _csv_body(["k", "exact", "normal"], rows))
    print(f"max_pmf_gap={report.max_pmf_gap!r} max_cdf_gap={report.max_cdf_gap!r}")


def _cmd_dist_poisson_fit(args, invocation):
    with open(args.input) as fh:
        counts = [int(float(ln)) for ln in fh
                  if ln.strip() and not ln.startswith("#")]
    fit = dists.poisson_fit(counts)
    payload = {
        "mean": fit.mean, "chi2_stat": fit.chi2_stat, "chi2_df": fit.chi2_df,
        "chi2_pvalue": fit.chi2_pvalue,
        "pmf_table": [[lab, obs, exp] for lab, obs, exp in fit.pmf_table],
    }
    _write(_out_path(args, "poisson_fit.json"), invocation, _json_body(payload))


def _cmd_gen_bibd(args, invocation):
    spec = designs.complete_bibd_spec(args.t, args.k, args.r)
    layout = designs.generate_layout(spec, seed=args.seed)
    body = "".join(",".join(str(i + 1) for i in blk) + "\n"
                   for blk in layout.blocks)
    path = _out_path(args, f"bibd_{args.t}_{args.k}_{args.r}.txt")
    _write(path, invocation, body)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_epl_common(p):
    p.add_argument("--input", required=True, help="match CSV file")
    p.add_argument("--season", default=None,
                   help="season label (selects in multi-season files; "
                        "names the season for headerless-season formats)")
    p.add_argument("--column-map", default=None,
                   help="key=value file mapping native fields to CSV columns")
    p.add_argument("--h", type=int, default=7,
                   help="home fixtures per team used for training (default 7)")
    p.add_argument("--method", choices=["reml", "map"], default="reml")
    p.add_argument("--prior-season", default=None,
                   help="season label supplying priors when --method map")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="shrinklmm",
        description="Shrinkage estimation and mixed-model prediction toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=fn)
        p.add_argument("--out", default=None, help="output file path")
        return p

    p = add("simulate-msep", _cmd_simulate_msep,
            "prediction-error ratio study over a (rho, delta) grid")
    p.add_argument("--design", choices=["rcbd", "bibd"], required=True)
    p.add_argument("--t", type=int, required=True, help="treatment count")
    p.add_argument("--k", type=int, default=None, help="block size (bibd)")
    p.add_argument("--n", type=int, required=True, help="block count")
    p.add_argument("--sigma2e", type=float, required=True)
    p.add_argument("--rho", required=True, help="comma list of variance ratios")
    p.add_argument("--delta", required=True, help="comma list of mean spreads")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = add("dominance", _cmd_dominance,
            "Monte-Carlo squared-error comparison of shrunk vs raw means")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--mu", default="zeros",
                   help="zeros | spread:<delta> | spike:<v> | comma list")
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)

    p = add("fit", _cmd_fit, "fit a mixed model to a generic observation table")
    p.add_argument("--input", required=True, help="CSV: response,<factors>")
    p.add_argument("--random", action="append", required=True,
                   help="random factor, name or name:+1 / name:-1 (repeatable)")
    p.add_argument("--method", choices=["reml", "map"], default="reml")
    p.add_argument("--priors", default=None,
                   help="JSON file {component: [alpha, beta] | null}")

    p = add("epl-fit", _cmd_epl_fit, "fit the home/away model to one season")
    _add_epl_common(p)

    p = add("epl-predict", _cmd_epl_predict,
            "predict and classify every post-training fixture")
    _add_epl_common(p)
    p.add_argument("--threshold", type=float, default=0.25,
                   help="draw threshold d (default 0.25)")
    p.add_argument("--confusion-out", default=None,
                   help="path for the confusion table CSV")

    p = add("epl-season-summary", _cmd_epl_season_summary,
            "per-team projected goal difference and ranks")
    _add_epl_common(p)

    p = add("epl-priors", _cmd_epl_priors,
            "extract variance-component priors from a complete season")
    p.add_argument("--input", required=True)
    p.add_argument("--season", default=None)
    p.add_argument("--column-map", default=None)

    p = add("epl-rmsep", _cmd_epl_rmsep,
            "per-season prediction error for each model variant")
    p.add_argument("--input", required=True)
    p.add_argument("--season", default=None)
    p.add_argument("--column-map", default=None)
    p.add_argument("--h", type=int, default=7)
    p.add_argument("--models",
                   default="ha_reml,ha_map,home_only_reml,home_only_map")

    p = add("pool-expected", _cmd_pool_expected,
            "expected pool points per game and per eight-game line")
    p.add_argument("--strategy", choices=["random", "frequencies"],
                   default="random")
    p.add_argument("--pwin", type=float, default=None)
    p.add_argument("--ploss", type=float, default=None)
    p.add_argument("--pdraw", type=float, default=None)
    p.add_argument("--qwin", type=float, default=None)
    p.add_argument("--qloss", type=float, default=None)
    p.add_argument("--qdraw", type=float, default=None)
    p.add_argument("--noscore-share", type=float, required=True)

    p = add("pool-simulate", _cmd_pool_simulate,
            "simulate eight-game lines for a predictor vs random guessing")
    p.add_argument("--qwin", type=float, required=True)
    p.add_argument("--qloss", type=float, required=True)
    p.add_argument("--qdraw", type=float, required=True)
    p.add_argument("--model-noscore-share", type=float, required=True)
    p.add_argument("--pwin", type=float, required=True)
    p.add_argument("--ploss", type=float, required=True)
    p.add_argument("--pdraw", type=float, required=True)
    p.add_argument("--noscore-share", type=float, required=True)
    p.add_argument("--lines", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)

    p = add("threshold-search", _cmd_threshold_search,
            "pick the draw threshold matching the actual draw count")
    p.add_argument("--predictions", required=True,
                   help="file with one predicted goal difference per line")
    p.add_argument("--actual-draws", type=int, required=True)
    p.add_argument("--grid", required=True, help="comma list of thresholds")

    p = add("dist-skellam", _cmd_dist_skellam,
            "exact goal-difference distribution vs normal approximation")
    p.add_argument("--mu1", type=float, required=True)
    p.add_argument("--mu2", type=float, required=True)

    p = add("dist-poisson-fit", _cmd_dist_poisson_fit,
            "fit a Poisson mean to goal counts with a chi-square check")
    p.add_argument("--input", required=True, help="file, one count per line")

    p = add("gen-bibd", _cmd_gen_bibd, "generate a block-design layout file")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)

    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    invocation = "shrinklmm " + " ".join(argv)
    if hasattr(args, "seed"):
        invocation += f" [seed={args.seed}]"
    try:
        args.handler(args, invocation)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"shrinklmm {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
