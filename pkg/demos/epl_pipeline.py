"""End-to-end league prediction on a synthetic season.

Simulates a 20-team double round robin, trains the home/away model on each
team's first seven home games, classifies the remaining fixtures, and
scores the result the way the classic eight-game pool would.  Pass a CSV
path to run on real data instead (native header or the public results
convention plus --season).
"""
import sys

import numpy as np

from shrinklmm import (CorrectPredictionRates, OutcomeProbabilities,
                       classify_outcome, confusion, expected_pool_score,
                       extract_priors, fit_home_away, load_matches,
                       predict_goal_diff, rmsep_compare, season_summary,
                       simulate_season, threshold_search, training_split)

TEAMS = ["Ashford", "Barrow", "Calder", "Dunwich", "Eastfold", "Farnham",
         "Gill Moor", "Harwick", "Ivybridge", "Jarrow", "Kelsey", "Lindum",
         "Marsden", "Norwich B", "Oakwell", "Penrith", "Quarry Lane",
         "Redcliffe", "Selby", "Thornton"]

if len(sys.argv) > 1:
    seasons = load_matches(sys.argv[1],
                           season=sys.argv[2] if len(sys.argv) > 2 else None)
    season = seasons[-1]
    prev = seasons[-2] if len(seasons) > 1 else None
    print(f"loaded {len(season.matches)} matches for season "
          f"{season.season_id}")
else:
    season, truth = simulate_season(TEAMS, sigma_h=0.6, sigma_a=0.5,
                                    sigma_e=1.3, mu=0.4, seed=12)
    prev, _ = simulate_season(TEAMS, sigma_h=0.6, sigma_a=0.5, sigma_e=1.3,
                              mu=0.4, seed=11, season_id="previous")
    print(f"simulated a season of {len(season.matches)} matches")

train, test = training_split(season, h=7)
print(f"training on {len(train)} matches, predicting {len(test)}")

fit = fit_home_away(train)
print(f"\nfitted intercept (home advantage): {fit.mu_hat:.3f}")
print(f"variance components: home {fit.components.sigma2['home']:.3f}, "
      f"away {fit.components.sigma2['away']:.3f}, "
      f"residual {fit.components.sigma2_e:.3f}")

strengths = sorted(
    ((fit.effects["home"][t] + fit.effects["away"][t], t) for t in season.teams),
    reverse=True)
print("\nstrongest three on combined home+away effects:")
for s, t in strengths[:3]:
    print(f"   {t:12s} {s:+.3f}")

preds = [predict_goal_diff(fit, m.home_team, m.away_team) for m in test]
actual_draws = sum(1 for m in test if m.goal_diff == 0)
d_star = threshold_search(preds, actual_draws, np.arange(0.05, 1.0, 0.05))
print(f"\ndraw threshold matching the {actual_draws} actual draws: "
      f"d = {d_star:.2f}")

outcomes = [classify_outcome(p, 0.25) for p in preds]
actuals = [classify_outcome(m.goal_diff, 0.0) for m in test]
table = confusion(outcomes, actuals)
print("\nconfusion (rows actual D/L/W, columns predicted D/L/W):")
print(table.counts)
print(f"draw precision: {table.draw_precision:.3f}")

rates = CorrectPredictionRates(
    q_win=table.correct_rate("W"), q_loss=table.correct_rate("L"),
    q_draw=table.correct_rate("D"), noscore_share=1 / 3)
n = len(test)
truth_probs = OutcomeProbabilities(
    p_win=actuals.count("W") / n, p_loss=actuals.count("L") / n,
    p_draw=actuals.count("D") / n, noscore_share_of_draws=1 / 3)
model_score = expected_pool_score(strategy="frequencies", rates=rates)
random_score = expected_pool_score(truth_probs)
print(f"\nexpected pool points per game: model {model_score:.3f} vs "
      f"random guessing {random_score:.3f}")
print(f"per eight-game line: {8 * model_score:.2f} vs {8 * random_score:.2f}")

rows = season_summary(fit, season, train)
mae = np.mean([abs(r.predicted_rank - r.actual_rank) for r in rows])
print(f"\nmean absolute rank error of the strength ordering: {mae:.2f}")

if prev is not None:
    prior = extract_priors(prev)
    comp = {k: (None if v is None else round(prior.mode(k), 3))
            for k, v in prior.components.items()}
    print(f"\npriors from the previous season (modes): {comp}")
    table_rows = rmsep_compare([prev, season], h=7)
    print("prediction error by model (current season):")
    for r in table_rows:
        if r.season_id == season.season_id and r.rmsep is not None:
            print(f"   {r.model:15s} rmsep {r.rmsep:.3f}  "
                  f"rank MAE {r.rank_mae:.2f}")
