"""League match prediction with home and away random effects.

The pipeline runs from CSV fixtures through a goal-difference mixed model
(intercept plus a home-strength effect and a minus-signed away-strength
effect) to outcome classification, season summaries, pool scoring, and
prior extraction from a previous season for posterior-mode fits.
"""
import csv
import math
from dataclasses import dataclass
from datetime import date as Date

import numpy as np

from .lmm import (FitResult, ModelSpec, ObservationTable, VariancePrior,
                  map_fit, reml_fit)
from .streams import replicate_rng

__all__ = [
    "MatchRecord",
    "SeasonDataset",
    "OutcomeProbabilities",
    "CorrectPredictionRates",
    "ConfusionTable",
    "PoolScoreModel",
    "HOME_AWAY_SPEC",
    "HOME_ONLY_SPEC",
    "load_matches",
    "load_column_map",
    "training_split",
    "matches_to_table",
    "fit_home_away",
    "predict_goal_diff",
    "classify_outcome",
    "threshold_search",
    "confusion",
    "expected_pool_score",
    "simulate_pool_lines",
    "PoolSimulation",
    "season_summary",
    "SeasonSummaryRow",
    "extract_priors",
    "rmsep_compare",
    "RmsepRow",
    "simulate_season",
]

HOME_AWAY_SPEC = ModelSpec(("home", "away"), {"home": 1, "away": -1})
HOME_ONLY_SPEC = ModelSpec(("home",), {"home": 1})

POOL_POINTS_HOME_WIN = 1.0
POOL_POINTS_AWAY_WIN = 1.5
POOL_POINTS_NOSCORE_DRAW = 2.0
POOL_POINTS_SCORE_DRAW = 3.0


# ---------------------------------------------------------------------------
# records and ingestion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchRecord:
    date: Date
    home_team: str
    away_team: str
    home_goals: int
    away_goals: int

    def __post_init__(self):
        if self.home_team == self.away_team:
            raise ValueError(f"home and away team identical: {self.home_team!r}")
        if self.home_goals < 0 or self.away_goals < 0:
            raise ValueError("goals must be nonnegative")

    @property
    def goal_diff(self) -> int:
        return self.home_goals - self.away_goals


@dataclass
class SeasonDataset:
    season_id: str
    matches: list

    def __post_init__(self):
        self.matches = sorted(self.matches, key=lambda m: m.date)

    @property
    def teams(self):
        names = {m.home_team for m in self.matches}
        names |= {m.away_team for m in self.matches}
        return sorted(names)

    def validate_complete(self):
        """Every ordered pair of teams must meet exactly once."""
        teams = self.teams
        t = len(teams)
        seen = {}
        for m in self.matches:
            key = (m.home_team, m.away_team)
            seen[key] = seen.get(key, 0) + 1
        problems = []
        for h in teams:
            for a in teams:
                if h == a:
                    continue
                c = seen.get((h, a), 0)
                if c != 1:
                    problems.append(f"{h} vs {a}: {c} fixtures")
        if problems:
            raise ValueError(
                f"season {self.season_id!r} is not complete "
                f"({len(self.matches)} matches, {t} teams): "
                + "; ".join(problems[:5]))
        return self


_NATIVE_COLUMNS = {
    "season": "season", "date": "date", "home_team": "home_team",
    "away_team": "away_team", "home_goals": "home_goals",
    "away_goals": "away_goals",
}
_FOOTBALLDATA_COLUMNS = {
    "date": "Date", "home_team": "HomeTeam", "away_team": "AwayTeam",
    "home_goals": "FTHG", "away_goals": "FTAG",
}


def load_column_map(path) -> dict:
    """Parse a key=value file mapping native field names to CSV columns."""
    mapping = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def _parse_date(text, fmt):
    text = text.strip()
    if fmt == "iso":
        return Date.fromisoformat(text)
    day, month, year = text.split("/")
    year = int(year)
    if year < 100:
        year += 2000 if year < 70 else 1900
    return Date(year, int(month), int(day))


def load_matches(path, season=None, column_map=None):
    """Read fixtures from CSV and group them into season datasets.

    Native files carry the header season,date,home_team,away_team,
    home_goals,away_goals with ISO dates.  Public results files with
    Date,HomeTeam,AwayTeam,FTHG,FTAG headers (dd/mm/yy[yy] dates) are
    accepted when ``season`` supplies the season label.  A column map from
    :func:`load_column_map` overrides either convention; the optional
    ``date_format`` key there selects ``iso`` or ``dmy`` parsing.

    Unknown columns are ignored.  Malformed rows raise with their line
    number.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows)
            if r and any(cell.strip() for cell in r) and not r[0].startswith("#")]
    if not rows:
        return []
    header = [c.strip() for c in rows[0][1]]
    body = rows[1:]

    date_fmt = None
    if column_map is not None:
        cols = dict(_NATIVE_COLUMNS)
        cols.update({k: v for k, v in column_map.items() if k != "date_format"})
        date_fmt = column_map.get("date_format")
    elif all(c in header for c in _NATIVE_COLUMNS.values()):
        cols = dict(_NATIVE_COLUMNS)
        date_fmt = "iso"
    elif all(c in header for c in _FOOTBALLDATA_COLUMNS.values()):
        cols = dict(_FOOTBALLDATA_COLUMNS)
        cols.pop("season", None)
        date_fmt = "dmy"
    else:
        raise ValueError(
            f"{path}: unrecognized header {header!r}; supply a column map")

    index = {}
    for field_name, col in cols.items():
        if col in header:
            index[field_name] = header.index(col)
    missing = [c for c in ("date", "home_team", "away_team",
                           "home_goals", "away_goals") if c not in index]
    if missing:
        raise ValueError(f"{path}: missing columns for fields {missing}")
    if date_fmt is None:
        date_fmt = "iso"
    if "season" not in index and season is None:
        raise ValueError(f"{path}: no season column; pass a season label")

    grouped = {}
    for ln, row in body:
        def cell(fieldname):
            i = index[fieldname]
            if i >= len(row):
                raise ValueError(f"{path}:{ln}: row has too few fields")
            return row[i].strip()

        try:
            when = _parse_date(cell("date"), date_fmt)
            hg = int(float(cell("home_goals")))
            ag = int(float(cell("away_goals")))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{ln}: malformed row: {exc}") from exc
        if hg < 0 or ag < 0:
            raise ValueError(f"{path}:{ln}: negative goals")
        home, away = cell("home_team"), cell("away_team")
        if home == away:
            raise ValueError(f"{path}:{ln}: home and away team identical ({home!r})")
        sid = cell("season") if "season" in index else str(season)
        grouped.setdefault(sid, []).append(
            MatchRecord(when, home, away, hg, ag))
    return [SeasonDataset(sid, ms) for sid, ms in sorted(grouped.items())]


# ---------------------------------------------------------------------------
# train/test split and model fitting
# ---------------------------------------------------------------------------

def training_split(season: SeasonDataset, h: int = 7):
    """Split a season at each home side's h-th home fixture.

    A match trains the model when it is among the home team's first ``h``
    home fixtures in date order; everything else is test data.  The two
    lists are disjoint and together cover the season.
    """
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h > 0:
        home_counts = {}
        for m in season.matches:
            home_counts[m.home_team] = home_counts.get(m.home_team, 0) + 1
        for team in season.teams:
            if home_counts.get(team, 0) < h:
                raise ValueError(
                    f"team {team!r} has only {home_counts.get(team, 0)} home "
                    f"fixtures, need {h}")
    seen = {}
    train, test = [], []
    for m in season.matches:
        seen[m.home_team] = seen.get(m.home_team, 0) + 1
        (train if seen[m.home_team] <= h else test).append(m)
    return train, test


def matches_to_table(matches) -> ObservationTable:
    """Goal differences with home and away factor labels."""
    if not matches:
        raise ValueError("no matches to tabulate")
    return ObservationTable(
        np.array([m.goal_diff for m in matches], dtype=float),
        {"home": [m.home_team for m in matches],
         "away": [m.away_team for m in matches]},
    )


def fit_home_away(train, method: str = "reml",
                  prior: VariancePrior = None) -> FitResult:
    """Fit the signed home/away effects model to training matches."""
    if method not in ("reml", "map"):
        raise ValueError("method must be 'reml' or 'map'")
    table = matches_to_table(train)
    teams = sorted({m.home_team for m in train} | {m.away_team for m in train})
    at_home = {m.home_team for m in train}
    at_away = {m.away_team for m in train}
    for team in teams:
        if team not in at_home:
            raise ValueError(f"team {team!r} never appears at home in training data")
        if team not in at_away:
            raise ValueError(f"team {team!r} never appears away in training data")
    if method == "map":
        if prior is None:
            raise ValueError("method='map' requires a VariancePrior")
        return map_fit(table, HOME_AWAY_SPEC, prior)
    return reml_fit(table, HOME_AWAY_SPEC)


def predict_goal_diff(fit: FitResult, home: str, away: str) -> float:
    """Expected goal difference mu + home effect - away effect."""
    if home == away:
        raise ValueError(f"a team cannot play itself: {home!r}")
    h_eff = fit.effects.get("home", {})
    a_eff = fit.effects.get("away", {})
    if home not in h_eff:
        raise ValueError(f"no fitted home effect for {home!r}")
    yhat = fit.mu_hat + h_eff[home]
    if "away" in fit.effects:
        if away not in a_eff:
            raise ValueError(f"no fitted away effect for {away!r}")
        yhat -= a_eff[away]
    return float(yhat)


def classify_outcome(yhat: float, d: float) -> str:
    """Home win above d, home loss below -d, draw in between (ties draw)."""
    if d < 0:
        raise ValueError("threshold must be nonnegative")
    if yhat > d:
        return "W"
    if yhat < -d:
        return "L"
    return "D"


def threshold_search(predictions, actual_draw_count: int, grid) -> float:
    """Grid value whose implied draw count is closest to the actual one.

    Ties break toward the smaller threshold.
    """
    grid = sorted(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    preds = np.abs(np.asarray(predictions, dtype=float))
    best_d, best_gap = None, None
    for d in grid:
        gap = abs(int((preds <= d).sum()) - actual_draw_count)
        if best_gap is None or gap < best_gap:
            best_d, best_gap = d, gap
    return float(best_d)


# ---------------------------------------------------------------------------
# outcome bookkeeping and pool scoring
# ---------------------------------------------------------------------------

_OUTCOMES = ("D", "L", "W")


@dataclass(frozen=True)
class OutcomeProbabilities:
    """Historical win/loss/draw rates plus the no-score share of draws."""

    p_win: float
    p_loss: float
    p_draw: float
    noscore_share_of_draws: float

    def __post_init__(self):
        for p in (self.p_win, self.p_loss, self.p_draw,
                  self.noscore_share_of_draws):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if abs(self.p_win + self.p_loss + self.p_draw - 1.0) > 1e-12:
            raise ValueError("p_win + p_loss + p_draw must equal 1")


@dataclass(frozen=True)
class CorrectPredictionRates:
    """Rates at which a predictor is right, per outcome, over all games."""

    q_win: float
    q_loss: float
    q_draw: float
    noscore_share: float

    def __post_init__(self):
        for q in (self.q_win, self.q_loss, self.q_draw, self.noscore_share):
            if not 0.0 <= q <= 1.0:
                raise ValueError("rates must lie in [0, 1]")
        if self.q_win + self.q_loss + self.q_draw > 1.0 + 1e-12:
            raise ValueError("correct-prediction rates sum above 1")


@dataclass
class ConfusionTable:
    """3x3 actual-by-predicted outcome counts with margins."""

    counts: np.ndarray
    labels: tuple = _OUTCOMES

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int)
        if self.counts.shape != (3, 3):
            raise ValueError("counts must be 3x3 (actual x predicted)")

    @property
    def row_margins(self):
        return self.counts.sum(axis=1)

    @property
    def col_margins(self):
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def draw_precision(self) -> float:
        i = self.labels.index("D")
        predicted = self.counts[:, i].sum()
        if predicted == 0:
            return float("nan")
        return float(self.counts[i, i] / predicted)

    def correct_rate(self, label: str) -> float:
        if self.total == 0:
            return float("nan")
        i = self.labels.index(label)
        return float(self.counts[i, i] / self.total)


def confusion(preds, actuals) -> ConfusionTable:
    """Tally predictions against actual outcomes."""
    preds = list(preds)
    actuals = list(actuals)
    if len(preds) != len(actuals):
        raise ValueError(f"{len(preds)} predictions vs {len(actuals)} actuals")
    idx = {lab: i for i, lab in enumerate(_OUTCOMES)}
    counts = np.zeros((3, 3), dtype=int)
    for p, a in zip(preds, actuals):
        counts[idx[a], idx[p]] += 1
    return ConfusionTable(counts)


def expected_pool_score(truth: OutcomeProbabilities = None,
                        strategy: str = "uniform_random",
                        rates: CorrectPredictionRates = None) -> float:
    """Expected pool points per game under the 1 / 1.5 / 2 / 3 scoring.

    ``uniform_random`` picks each outcome with probability 1/3 against the
    supplied truth; a predicted draw then pays 2 or 3 points depending on
    whether the actual draw was scoreless.  ``frequencies`` scores a
    predictor straight from its correct-prediction rates.
    """
    if strategy == "uniform_random":
        if truth is None:
            raise ValueError("uniform_random needs OutcomeProbabilities")
        share = truth.noscore_share_of_draws
        return (POOL_POINTS_HOME_WIN * truth.p_win / 3.0
                + POOL_POINTS_AWAY_WIN * truth.p_loss / 3.0
                + POOL_POINTS_NOSCORE_DRAW * truth.p_draw / 3.0 * share
                + POOL_POINTS_SCORE_DRAW * truth.p_draw / 3.0 * (1.0 - share))
    if strategy == "frequencies":
        if rates is None:
            raise ValueError("frequencies needs CorrectPredictionRates")
        share = rates.noscore_share
        return (POOL_POINTS_HOME_WIN * rates.q_win
                + POOL_POINTS_AWAY_WIN * rates.q_loss
                + POOL_POINTS_NOSCORE_DRAW * rates.q_draw * share
                + POOL_POINTS_SCORE_DRAW * rates.q_draw * (1.0 - share))
    raise ValueError(f"unknown strategy {strategy!r}")


@dataclass(frozen=True)
class PoolScoreModel:
    """Per-game distribution over pool points earned."""

    points: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.points) != len(self.probs):
            raise ValueError("points and probs must align")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")

    @property
    def mean(self) -> float:
        return float(sum(p * q for p, q in zip(self.points, self.probs)))

    @classmethod
    def from_correct_rates(cls, rates: CorrectPredictionRates):
        share = rates.noscore_share
        probs = (rates.q_win, rates.q_loss, rates.q_draw * share,
                 rates.q_draw * (1.0 - share))
        miss = 1.0 - sum(probs)
        return cls(points=(POOL_POINTS_HOME_WIN, POOL_POINTS_AWAY_WIN,
                           POOL_POINTS_NOSCORE_DRAW, POOL_POINTS_SCORE_DRAW, 0.0),
                   probs=probs + (max(miss, 0.0),))

    @classmethod
    def random_guess(cls, truth: OutcomeProbabilities):
        share = truth.noscore_share_of_draws
        probs = (truth.p_win / 3.0, truth.p_loss / 3.0,
                 truth.p_draw / 3.0 * share, truth.p_draw / 3.0 * (1.0 - share))
        miss = 1.0 - sum(probs)
        return cls(points=(POOL_POINTS_HOME_WIN, POOL_POINTS_AWAY_WIN,
                           POOL_POINTS_NOSCORE_DRAW, POOL_POINTS_SCORE_DRAW, 0.0),
                   probs=probs + (max(miss, 0.0),))


@dataclass
class PoolSimulation:
    samples_a: np.ndarray
    samples_b: np.ndarray
    scores: np.ndarray          # achievable line totals
    cdf_a: np.ndarray
    cdf_b: np.ndarray
    cdf_se: np.ndarray          # combined Monte-Carlo SE of the cdf gap
    a_stochastically_larger: bool
    mean_a: float
    mean_b: float


def simulate_pool_lines(score_model_a: PoolScoreModel,
                        score_model_b: PoolScoreModel,
                        n_lines: int, seed: int,
                        games_per_line: int = 8) -> PoolSimulation:
    """Simulate line totals under two per-game point models.

    Model A is declared stochastically larger when its empirical CDF sits
    at or below model B's at every achievable total, within three combined
    standard errors.
    """
    if n_lines < 1000:
        raise ValueError("need n_lines >= 1000")

    def draw(model, stream):
        rng = replicate_rng(seed, stream)
        pts = np.asarray(model.points, dtype=float)
        picks = rng.choice(len(pts), p=np.asarray(model.probs, dtype=float),
                           size=(n_lines, games_per_line))
        return pts[picks].sum(axis=1)

    samples_a = draw(score_model_a, 0)
    samples_b = draw(score_model_b, 1)
    # totals are multiples of 0.5 up to the max single-game score
    max_total = max(max(score_model_a.points), max(score_model_b.points)) \
        * games_per_line
    scores = np.arange(0.0, max_total + 0.25, 0.5)
    cdf_a = np.array([(samples_a <= s).mean() for s in scores])
    cdf_b = np.array([(samples_b <= s).mean() for s in scores])
    se = np.sqrt(cdf_a * (1 - cdf_a) / n_lines + cdf_b * (1 - cdf_b) / n_lines)
    larger = bool(np.all(cdf_a <= cdf_b + 3.0 * se))
    return PoolSimulation(samples_a, samples_b, scores, cdf_a, cdf_b, se,
                          larger, float(samples_a.mean()), float(samples_b.mean()))


# ---------------------------------------------------------------------------
# season summaries and model comparison
# ---------------------------------------------------------------------------

def _strength(fit: FitResult, team: str) -> float:
    s = fit.effects.get("home", {}).get(team, 0.0)
    if "away" in fit.effects:
        s += fit.effects["away"].get(team, 0.0)
    return s


def _rank_by(teams, score) -> dict:
    """1-based ranks by descending score; ties break by team label."""
    ordered = sorted(teams, key=lambda tm: (-score[tm], tm))
    return {tm: i + 1 for i, tm in enumerate(ordered)}


@dataclass
class SeasonSummaryRow:
    team: str
    predicted_final_gd: float
    actual_final_gd: int
    train_gd: int
    predicted_rank: int
    actual_rank: int


def season_summary(fit: FitResult, season: SeasonDataset, train) -> list:
    """Per-team projected final goal difference and rank.

    Projections add each team's realized goal differences over the
    training matches to the model's expected differences over the test
    matches.  Predicted ranks order teams by the sum of their fitted home
    and away strengths; actual ranks order by realized final goal
    difference.  Ties break by team label.
    """
    train_keys = {(m.date, m.home_team, m.away_team) for m in train}
    teams = season.teams
    train_gd = {tm: 0 for tm in teams}
    actual_gd = {tm: 0 for tm in teams}
    predicted_gd = {tm: 0.0 for tm in teams}
    for m in season.matches:
        in_train = (m.date, m.home_team, m.away_team) in train_keys
        gd = m.goal_diff
        actual_gd[m.home_team] += gd
        actual_gd[m.away_team] -= gd
        if in_train:
            train_gd[m.home_team] += gd
            train_gd[m.away_team] -= gd
            predicted_gd[m.home_team] += gd
            predicted_gd[m.away_team] -= gd
        else:
            yhat = predict_goal_diff(fit, m.home_team, m.away_team)
            predicted_gd[m.home_team] += yhat
            predicted_gd[m.away_team] -= yhat
    strengths = {tm: _strength(fit, tm) for tm in teams}
    pred_rank = _rank_by(teams, strengths)
    act_rank = _rank_by(teams, {tm: float(actual_gd[tm]) for tm in teams})
    return [SeasonSummaryRow(tm, predicted_gd[tm], actual_gd[tm], train_gd[tm],
                             pred_rank[tm], act_rank[tm])
            for tm in teams]


def extract_priors(prev_season: SeasonDataset) -> VariancePrior:
    """Inverse-Gamma priors for the variance components from a full season.

    Main-effect mean squares come from least-squares fits of the two-factor
    model, each factor adjusted for the other.  Expected mean squares with
    a (teams - 1) multiplier convert them to point estimates; effective
    degrees of freedom for the team components follow from the variance of
    the mean-square difference.  A component whose point estimate truncates
    to zero gets a flat prior.
    """
    prev_season.validate_complete()
    teams = prev_season.teams
    T = len(teams)
    idx = {tm: i for i, tm in enumerate(teams)}
    n = len(prev_season.matches)
    y = np.array([m.goal_diff for m in prev_season.matches], dtype=float)

    def dummies(labels):
        # reference coding: drop the first team
        X = np.zeros((n, T - 1))
        for row, lab in enumerate(labels):
            j = idx[lab]
            if j > 0:
                X[row, j - 1] = 1.0
        return X

    Xh = dummies([m.home_team for m in prev_season.matches])
    Xa = dummies([m.away_team for m in prev_season.matches])
    ones = np.ones((n, 1))

    def rss(X):
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        r = y - X @ beta
        return float(r @ r)

    rss_full = rss(np.hstack([ones, Xh, Xa]))
    rss_home = rss(np.hstack([ones, Xh]))
    rss_away = rss(np.hstack([ones, Xa]))

    df_team = T - 1
    df_e = n - 1 - 2 * (T - 1)
    ms_e = rss_full / df_e
    ms_h = (rss_away - rss_full) / df_team
    ms_a = (rss_home - rss_full) / df_team
    mult = T - 1

    components = {"e": (df_e / 2.0, df_e * ms_e / 2.0)}
    for name, ms in (("home", ms_h), ("away", ms_a)):
        x = (ms - ms_e) / mult
        if x <= 0.0:
            components[name] = None
            continue
        d = x ** 2 / ((ms / mult) ** 2 / df_team + (ms_e / mult) ** 2 / df_e)
        components[name] = (d / 2.0, d * x / 2.0)
    return VariancePrior(components)


_RMSEP_MODELS = ("ha_reml", "ha_map", "home_only_reml", "home_only_map")


@dataclass
class RmsepRow:
    season_id: str
    model: str
    rmsep: float          # None when the model cell is unavailable
    rank_mae: float
    n_test: int


def rmsep_compare(seasons, models=_RMSEP_MODELS, h: int = 7) -> list:
    """Root mean squared prediction error per season and model.

    Posterior-mode rows take their priors from the season immediately
    before them in ``seasons``; the first season therefore has no map
    cells (rmsep None).  Rank mean absolute error compares the model's
    strength ordering against the realized goal-difference ordering.
    """
    rows = []
    for si, season in enumerate(seasons):
        train, test = training_split(season, h=h)
        table = matches_to_table(train)
        actual_gd = {tm: 0.0 for tm in season.teams}
        for m in season.matches:
            actual_gd[m.home_team] += m.goal_diff
            actual_gd[m.away_team] -= m.goal_diff
        act_rank = _rank_by(season.teams, actual_gd)

        prior = None
        if any(m.endswith("_map") for m in models) and si > 0:
            try:
                prior = extract_priors(seasons[si - 1])
            except ValueError:
                prior = None

        for model in models:
            spec = HOME_AWAY_SPEC if model.startswith("ha") else HOME_ONLY_SPEC
            if model.endswith("_map"):
                if prior is None:
                    rows.append(RmsepRow(season.season_id, model, None, None,
                                         len(test)))
                    continue
                comp = dict(prior.components)
                if spec is HOME_ONLY_SPEC:
                    comp = {k: v for k, v in comp.items() if k in ("e", "home")}
                fit = map_fit(table, spec, VariancePrior(comp))
            else:
                fit = reml_fit(table, spec)
            if test:
                sq = [(predict_goal_diff(fit, m.home_team, m.away_team)
                       - m.goal_diff) ** 2 for m in test]
                rmsep = math.sqrt(sum(sq) / len(sq))
            else:
                rmsep = None
            strengths = {tm: _strength(fit, tm) for tm in season.teams}
            pred_rank = _rank_by(season.teams, strengths)
            mae = float(np.mean([abs(pred_rank[tm] - act_rank[tm])
                                 for tm in season.teams]))
            rows.append(RmsepRow(season.season_id, model, rmsep, mae, len(test)))
    return rows


# ---------------------------------------------------------------------------
# synthetic leagues
# ---------------------------------------------------------------------------

def simulate_season(teams, sigma_h: float, sigma_a: float, sigma_e: float,
                    mu: float, seed: int, season_id: str = "synthetic",
                    start: Date = Date(2020, 8, 1)):
    """Draw one double round-robin season from the signed-effects model.

    Team strengths are drawn once per season; each fixture's goal
    difference is the model mean plus noise, rounded to the nearest
    integer and encoded as goals for the leading side.  Returns the season
    and the true effects used to generate it.
    """
    teams = list(teams)
    T = len(teams)
    if T % 2 or T < 4:
        raise ValueError("need an even number of teams, at least 4")
    rng = replicate_rng(seed)
    h = rng.normal(0.0, sigma_h, T)
    a = rng.normal(0.0, sigma_a, T)

    # circle method: fix team 0, rotate the rest; mirror for the second half.
    # venues are balanced greedily so every team alternates within one game,
    # which keeps early away fixtures inside every host's training window
    others = list(range(1, T))
    first_half = []
    net_home = [0] * T
    for rnd in range(T - 1):
        ring = [0] + others
        pairs = [(ring[i], ring[T - 1 - i]) for i in range(T // 2)]
        for x, z in pairs:
            if (net_home[x], teams[x]) <= (net_home[z], teams[z]):
                home, away = x, z
            else:
                home, away = z, x
            net_home[home] += 1
            net_home[away] -= 1
            first_half.append((rnd, home, away))
        others = others[1:] + others[:1]

    matches = []
    for half, flip in ((0, False), (1, True)):
        for rnd, home, away in first_half:
            if flip:
                home, away = away, home
            i, j = home, away
            ybar = mu + h[i] - a[j]
            yij = ybar + rng.normal(0.0, sigma_e)
            gd = int(np.rint(yij))
            hg, ag = (gd, 0) if gd >= 0 else (0, -gd)
            when = Date.fromordinal(start.toordinal()
                                    + (half * (T - 1) + rnd) * 7)
            matches.append(MatchRecord(when, teams[i], teams[j], hg, ag))
    season = SeasonDataset(season_id, matches)
    truth = {
        "mu": mu,
        "home_effects": {teams[i]: float(h[i]) for i in range(T)},
        "away_effects": {teams[i]: float(a[i]) for i in range(T)},
    }
    return season, truth
