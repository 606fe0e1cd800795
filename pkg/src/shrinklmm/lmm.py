"""Gaussian linear mixed models with one fixed intercept and independent
random factors.

The engine fits variance components by maximizing the restricted
log-likelihood (optionally penalized by inverse-Gamma priors), then reads
the predicted random effects off the mixed-model equations at the optimum.
Models are small (a few hundred observations, tens of levels), so all
linear algebra is dense and routed through cached cross-products: with
q total levels, one criterion evaluation costs O(q^3) regardless of the
number of observations.

Factor design columns carry an optional sign of -1, which is how a factor
that enters the mean with a minus (an away-team penalty, say) is encoded
without touching the responses.
"""
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

__all__ = [
    "ObservationTable",
    "ModelSpec",
    "VarianceComponents",
    "VariancePrior",
    "FitResult",
    "DisconnectedDesignError",
    "restricted_loglik",
    "balanced_oneway_reml",
    "reml_fit",
    "map_fit",
    "blup_closed_form",
    "gls_estimate",
]


class DisconnectedDesignError(ValueError):
    """Raised when the treatment-block incidence splits into components."""


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------

def _sorted_levels(values):
    uniq = set(values)
    try:
        return sorted(uniq)
    except TypeError:
        return sorted(uniq, key=str)


@dataclass
class ObservationTable:
    """Long-format observations: a response plus one level per factor."""

    responses: np.ndarray
    factors: dict

    def __post_init__(self):
        self.responses = np.asarray(self.responses, dtype=float)
        if self.responses.ndim != 1 or self.responses.size == 0:
            raise ValueError("responses must be a nonempty 1-D array")
        if not np.all(np.isfinite(self.responses)):
            raise ValueError("responses must be finite")
        self.factors = {name: np.asarray(v, dtype=object)
                        for name, v in self.factors.items()}
        for name, v in self.factors.items():
            if v.shape != self.responses.shape:
                raise ValueError(f"factor {name!r} has {v.size} entries "
                                 f"for {self.responses.size} responses")

    @property
    def n_obs(self) -> int:
        return self.responses.size

    def levels(self, factor: str):
        return _sorted_levels(self.factors[factor])

    @classmethod
    def from_rows(cls, rows):
        """Build from an iterable of ``(response, {factor: level})`` pairs."""
        rows = list(rows)
        if not rows:
            raise ValueError("at least one row required")
        names = list(rows[0][1].keys())
        resp = [r[0] for r in rows]
        factors = {}
        for name in names:
            try:
                factors[name] = [r[1][name] for r in rows]
            except KeyError as exc:
                raise ValueError(f"row missing factor {name!r}") from exc
        return cls(np.asarray(resp, dtype=float), factors)

    def to_csv(self, path):
        names = list(self.factors.keys())
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["response"] + names)
            for i in range(self.n_obs):
                w.writerow([repr(float(self.responses[i]))]
                           + [str(self.factors[n][i]) for n in names])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if not rows:
            raise ValueError(f"{path}: empty table")
        header = rows[0]
        if header[0] != "response":
            raise ValueError(f"{path}: first column must be 'response'")
        names = header[1:]
        resp = []
        factors = {n: [] for n in names}
        for ln, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{ln}: expected {len(header)} fields")
            resp.append(float(row[0]))
            for n, v in zip(names, row[1:]):
                factors[n].append(v)
        return cls(np.asarray(resp), factors)


@dataclass(frozen=True)
class ModelSpec:
    """Fixed intercept plus independent random factors with signed loadings."""

    random_factors: tuple
    signs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "random_factors", tuple(self.random_factors))
        if len(set(self.random_factors)) != len(self.random_factors):
            raise ValueError("factor names must be unique")
        signs = dict(self.signs)
        for name in self.random_factors:
            s = signs.setdefault(name, 1)
            if s not in (1, -1):
                raise ValueError(f"sign for {name!r} must be +1 or -1, got {s}")
        object.__setattr__(self, "signs", signs)


@dataclass
class VarianceComponents:
    """Residual variance plus one variance per random factor."""

    sigma2_e: float
    sigma2: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma2_e < 0 or any(v < 0 for v in self.sigma2.values()):
            raise ValueError("variance components must be nonnegative")


@dataclass(frozen=True)
class VariancePrior:
    """Inverse-Gamma priors per variance component; absent entries are flat.

    ``components`` maps a component name ('e' for the residual, otherwise a
    factor name) to an (alpha, beta) pair with alpha, beta > 0.
    """

    components: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, ab in self.components.items():
            if ab is None:
                continue
            a, b = ab
            if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"prior for {name!r} needs finite alpha, beta > 0")

    def is_flat(self, name: str) -> bool:
        return self.components.get(name) is None

    def mode(self, name: str) -> float:
        """Density mode beta / (alpha + 1) of one component's prior."""
        a, b = self.components[name]
        return b / (a + 1.0)

    def log_density(self, name: str, x: float) -> float:
        a, b = self.components[name]
        return a * math.log(b) - gammaln(a) - (a + 1.0) * math.log(x) - b / x

    def log_density_grad(self, name: str, x: float) -> float:
        a, b = self.components[name]
        return -(a + 1.0) / x + b / x ** 2


@dataclass
class FitResult:
    """Fitted intercept, variance components and predicted effects."""

    mu_hat: float
    components: VarianceComponents
    effects: dict
    criterion: float
    converged: bool
    n_iter: int
    floored: tuple = ()

    def to_json(self, path=None):
        payload = {
            "mu_hat": self.mu_hat,
            "sigma2": {"e": self.components.sigma2_e, **self.components.sigma2},
            "effects": {f: {str(k): v for k, v in eff.items()}
                        for f, eff in self.effects.items()},
            "criterion": self.criterion,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "floored": list(self.floored),
        }
        text = json.dumps(payload, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        sigma2 = dict(d["sigma2"])
        sigma2_e = sigma2.pop("e")
        return cls(
            mu_hat=d["mu_hat"],
            components=VarianceComponents(sigma2_e, sigma2),
            effects=d["effects"],
            criterion=d["criterion"],
            converged=d["converged"],
            n_iter=d.get("n_iter", 0),
            floored=tuple(d.get("floored", ())),
        )


# ---------------------------------------------------------------------------
# the REML engine
# ---------------------------------------------------------------------------

class _Workspace:
    """Cross-product cache for one design; y may be swapped for refits."""

    def __init__(self, table: ObservationTable, spec: ModelSpec):
        y = table.responses
        n = y.size
        self.spec = spec
        self.names = list(spec.random_factors)
        self.levels = {}
        cols = []
        slices = {}
        start = 0
        for name in self.names:
            labels = table.factors[name]
            lv = _sorted_levels(labels)
            self.levels[name] = lv
            index = {l: i for i, l in enumerate(lv)}
            Z = np.zeros((n, len(lv)))
            sign = float(spec.signs[name])
            for row, lab in enumerate(labels):
                Z[row, index[lab]] = sign
            cols.append(Z)
            slices[name] = slice(start, start + len(lv))
            start += len(lv)
        self.Z = np.hstack(cols) if cols else np.zeros((n, 0))
        self.slices = slices
        self.q = self.Z.shape[1]
        self.n = n
        X = np.ones((n, 1))
        self.ZZ = self.Z.T @ self.Z
        self.ZX = self.Z.T @ X
        self.XX = X.T @ X
        self._X = X
        self.set_response(y)

    def set_response(self, y):
        y = np.asarray(y, dtype=float)
        self.y = y
        self.Zy = self.Z.T @ y
        self.Xy = self._X.T @ y
        self.yy = float(y @ y)

    # --- theta is the vector (sigma2_e, sigma2 per factor in order) ---

    def _core(self, theta):
        se = theta[0]
        gam = np.zeros(self.q)
        for i, name in enumerate(self.names):
            gam[self.slices[name]] = theta[1 + i] / se
        lam = np.sqrt(gam)
        C = np.eye(self.q) + lam[:, None] * self.ZZ * lam[None, :]
        try:
            L = np.linalg.cholesky(C)
        except np.linalg.LinAlgError:
            return None
        Ci = np.linalg.inv(C)
        T = lam[:, None] * Ci * lam[None, :]
        logdetC = 2.0 * float(np.sum(np.log(np.diag(L))))
        return se, gam, T, logdetC

    def criterion(self, theta) -> float:
        core = self._core(theta)
        if core is None:
            return -np.inf
        se, gam, T, logdetC = core
        XtViX = (self.XX - self.ZX.T @ T @ self.ZX) / se
        # cancellation at extreme variance ratios can push these out of
        # range; report -inf so an optimizer steps back into a sane region
        if not np.isfinite(XtViX[0, 0]) or XtViX[0, 0] <= 0.0:
            return -np.inf
        XtViy = (self.Xy - self.ZX.T @ T @ self.Zy) / se
        ytViy = (self.yy - self.Zy @ T @ self.Zy) / se
        beta = float(XtViy[0] / XtViX[0, 0])
        ytPy = float(ytViy - XtViy[0] * beta)
        logdetV = self.n * math.log(se) + logdetC
        logdetXtViX = math.log(XtViX[0, 0])
        val = -0.5 * (logdetV + logdetXtViX + ytPy)
        return val if np.isfinite(val) else -np.inf

    def gradient(self, theta) -> np.ndarray:
        """d criterion / d theta, on the variance scale."""
        core = self._core(theta)
        if core is None:
            return np.full(len(theta), np.nan)
        se, gam, T, _ = core
        XtViX = (self.XX - self.ZX.T @ T @ self.ZX) / se
        if not np.isfinite(XtViX[0, 0]) or XtViX[0, 0] <= 0.0:
            return np.full(len(theta), np.nan)
        XtViy = (self.Xy - self.ZX.T @ T @ self.Zy) / se
        ytViy = (self.yy - self.Zy @ T @ self.Zy) / se
        w = 1.0 / XtViX[0, 0]
        beta = float(XtViy[0] * w)
        TZZ = T @ self.ZZ
        ZtViZ = (self.ZZ - self.ZZ @ TZZ) / se
        ZtViX = (self.ZX - TZZ.T @ self.ZX) / se
        Ztr = (self.Zy - self.ZX[:, 0] * beta)
        ZtVir = (Ztr - TZZ.T @ Ztr) / se
        g = np.empty(len(theta))
        for i, name in enumerate(self.names):
            sl = self.slices[name]
            tr_pzz = float(np.trace(ZtViZ[sl, sl])) - float(
                w * (ZtViX[sl, 0] @ ZtViX[sl, 0]))
            quad = float(ZtVir[sl] @ ZtVir[sl])
            g[1 + i] = -0.5 * (tr_pzz - quad)
        tr_vi = (self.n - float(np.trace(TZZ))) / se
        XtV2X = (self.XX - 2.0 * self.ZX.T @ T @ self.ZX
                 + self.ZX.T @ T @ self.ZZ @ T @ self.ZX) / se ** 2
        tr_p = tr_vi - float(w * XtV2X[0, 0])
        rtr = self.yy - 2.0 * beta * float(self.Xy[0]) + beta * beta * float(self.XX[0, 0])
        TZtr = T @ Ztr
        py2 = (rtr - 2.0 * float(Ztr @ TZtr) + float(TZtr @ self.ZZ @ TZtr)) / se ** 2
        g[0] = -0.5 * (tr_p - py2)
        return g

    def solve_effects(self, theta):
        """Intercept and per-level effect predictions at the given components."""
        core = self._core(theta)
        if core is None:
            raise np.linalg.LinAlgError("covariance factorization failed")
        se, gam, T, _ = core
        XtViX = (self.XX - self.ZX.T @ T @ self.ZX) / se
        XtViy = (self.Xy - self.ZX.T @ T @ self.Zy) / se
        beta = float(XtViy[0] / XtViX[0, 0])
        Ztr = self.Zy - self.ZX[:, 0] * beta
        u = gam * (Ztr - self.ZZ @ (T @ Ztr))
        effects = {}
        for name in self.names:
            sl = self.slices[name]
            effects[name] = {lab: float(val)
                             for lab, val in zip(self.levels[name], u[sl])}
        return beta, effects


def _validate_theta(spec: ModelSpec, theta: VarianceComponents):
    missing = [f for f in spec.random_factors if f not in theta.sigma2]
    if missing:
        raise ValueError(f"missing variance components for {missing}")
    if theta.sigma2_e <= 0:
        raise ValueError("sigma2_e must be positive")


def restricted_loglik(table: ObservationTable, spec: ModelSpec,
                      theta: VarianceComponents) -> float:
    """Restricted log-likelihood of the variance components.

    The criterion is -(log|V| + log|X'V^-1X| + y'Py)/2 with
    V = sigma2_e*I + sum_k sigma2_k Z_k Z_k' and P the projection that
    sweeps out the intercept; additive constants are dropped.  The value is
    invariant to row reordering and to adding a constant to every response.
    """
    _validate_theta(spec, theta)
    ws = _Workspace(table, spec)
    vec = np.array([theta.sigma2_e] + [theta.sigma2[f] for f in spec.random_factors])
    return ws.criterion(vec)


def balanced_oneway_reml(Y):
    """Closed-form REML for a complete balanced one-way layout.

    Returns ``(mu_hat, sigma2_e, sigma2_u)``.  In the interior case these
    are the one-way ANOVA estimates, MSE and (MSB - MSE)/n.  When MSB < MSE
    the group variance is truncated to zero and the residual variance is
    the boundary profile optimum, the total sum of squares about the grand
    mean divided by tn - 1.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2 or Y.shape[1] < 2:
        raise ValueError("Y must be a t x n table with t >= 2, n >= 2")
    if not np.all(np.isfinite(Y)):
        raise ValueError("table must be complete and finite")
    t, n = Y.shape
    grand = Y.mean()
    row_means = Y.mean(axis=1)
    ssw = float(((Y - row_means[:, None]) ** 2).sum())
    mse = ssw / (t * (n - 1))
    msb = n * float(((row_means - grand) ** 2).sum()) / (t - 1)
    if msb >= mse:
        return float(grand), mse, (msb - mse) / n
    sst = float(((Y - grand) ** 2).sum())
    return float(grand), sst / (t * n - 1), 0.0


def blup_closed_form(ybar, mu_bar, sigma2_u, sigma2e_over_n):
    """Posterior-mean prediction of group means under known components.

    Shrinks ``ybar`` towards the constant vector ``mu_bar`` by the factor
    sigma2_u / (sigma2_u + sigma2e_over_n).
    """
    y = np.asarray(ybar, dtype=float)
    if sigma2_u < 0 or sigma2e_over_n < 0:
        raise ValueError("variances must be nonnegative")
    denom = sigma2_u + sigma2e_over_n
    if denom == 0.0:
        return y.copy()
    factor = sigma2_u / denom
    return mu_bar + factor * (y - mu_bar)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

_MAX_ITER = 500
_ABS_FLOOR = 1e-12


def _moment_starts(table, spec, scale):
    y = table.responses
    n = y.size
    floor = 1e-3 * scale
    starts = []
    for name in spec.random_factors:
        labels = table.factors[name]
        lv = _sorted_levels(labels)
        groups = {l: [] for l in lv}
        for lab, yi in zip(labels, y):
            groups[lab].append(yi)
        grand = y.mean()
        ssw = ssb = 0.0
        dfw = 0
        for vals in groups.values():
            arr = np.asarray(vals)
            ssw += float(((arr - arr.mean()) ** 2).sum())
            ssb += arr.size * (arr.mean() - grand) ** 2
            dfw += arr.size - 1
        msw = ssw / dfw if dfw > 0 else scale
        msb = ssb / (len(lv) - 1)
        nbar = n / len(lv)
        starts.append(max((msb - msw) / nbar, floor))
    # residual start from the additive least-squares fit; the one-way
    # within mean squares are inflated by the other factors' spread
    if spec.random_factors:
        X = [np.ones((n, 1))]
        for name in spec.random_factors:
            labels = table.factors[name]
            lv = _sorted_levels(labels)
            idx = {l: i for i, l in enumerate(lv)}
            D = np.zeros((n, len(lv) - 1))
            for row, lab in enumerate(labels):
                j = idx[lab]
                if j > 0:
                    D[row, j - 1] = 1.0
            X.append(D)
        X = np.hstack(X)
        beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ beta
        dfr = max(n - rank, 1)
        sigma_e0 = max(float(resid @ resid) / dfr, floor)
    else:
        sigma_e0 = max(scale, floor)
    return np.array([sigma_e0] + starts)


def _fit(table: ObservationTable, spec: ModelSpec, prior=None) -> FitResult:
    y = table.responses
    n = y.size
    for name in spec.random_factors:
        if len(set(table.factors[name])) < 2:
            raise ValueError(f"factor {name!r} needs at least 2 distinct levels")
    informative_e = prior is not None and not prior.is_flat("e")
    if n - 1 < 1 and not informative_e:
        raise ValueError("need residual degrees of freedom >= 1")

    ws = _Workspace(table, spec)
    names = ["e"] + list(spec.random_factors)
    scale = float(np.var(y, ddof=1)) if n > 1 else 0.0

    if scale == 0.0 and not informative_e:
        # zero total variance: everything sits at the floor
        theta = np.full(len(names), _ABS_FLOOR)
        mu, effects = ws.solve_effects(theta)
        comps = VarianceComponents(theta[0], dict(zip(names[1:], theta[1:])))
        for eff in effects.values():
            for k in eff:
                eff[k] = 0.0
        return FitResult(mu, comps, effects, ws.criterion(theta), True, 0,
                         floored=tuple(names))
    if scale == 0.0:
        scale = 1.0  # single-observation MAP path: prior supplies the scale

    floor_e = max(1e-10 * scale, _ABS_FLOOR)
    lb = [math.log(floor_e)] + [math.log(1e-14 * scale)] * len(spec.random_factors)
    ub = [math.log(1e8 * scale)] * len(names)

    def penalty(theta):
        if prior is None:
            return 0.0
        tot = 0.0
        for i, name in enumerate(names):
            if not prior.is_flat(name):
                tot += prior.log_density(name, theta[i])
        return tot

    def penalty_grad(theta):
        g = np.zeros(len(names))
        if prior is None:
            return g
        for i, name in enumerate(names):
            if not prior.is_flat(name):
                g[i] = prior.log_density_grad(name, theta[i])
        return g

    def neg(phi):
        theta = np.exp(phi)
        val = ws.criterion(theta) + penalty(theta)
        return -val if np.isfinite(val) else 1e30

    def neg_grad(phi):
        theta = np.exp(phi)
        g = ws.gradient(theta) + penalty_grad(theta)
        if not np.all(np.isfinite(g)):
            return np.zeros_like(phi)
        return -(g * theta)

    def optimize(phi0, free):
        """L-BFGS-B over the free coordinates, fixed ones pinned at phi0."""
        idx = np.array(free)
        base = phi0.copy()

        def f(sub):
            p = base.copy()
            p[idx] = sub
            return neg(p)

        def fg(sub):
            p = base.copy()
            p[idx] = sub
            return neg_grad(p)[idx]

        res = minimize(f, phi0[idx], jac=fg, method="L-BFGS-B",
                       bounds=[(lb[i], ub[i]) for i in idx],
                       options=dict(maxiter=_MAX_ITER, ftol=1e-14, gtol=1e-11))
        out = base.copy()
        out[idx] = res.x
        return out, res

    def polish(phi0, free):
        """Newton refinement of the interior optimum to near machine level."""
        idx = np.array(free)
        lo, hi = np.array(lb)[idx], np.array(ub)[idx]
        base = phi0.copy()

        def f_of(x):
            p = base.copy()
            p[idx] = x
            return neg(p)

        def g_of(x):
            p = base.copy()
            p[idx] = x
            return neg_grad(p)[idx]

        x = phi0[idx].copy()
        f0 = f_of(x)
        g = g_of(x)
        for _ in range(8):
            if np.max(np.abs(g)) < 1e-12 * max(1.0, abs(f0)):
                break
            m = len(idx)
            H = np.zeros((m, m))
            h = 1e-5
            for j in range(m):
                xp, xm = x.copy(), x.copy()
                xp[j] += h
                xm[j] -= h
                H[:, j] = (g_of(xp) - g_of(xm)) / (2 * h)
            H = 0.5 * (H + H.T)
            try:
                step = np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                break
            accepted = False
            for _ in range(5):
                x_new = np.clip(x - step, lo, hi)
                f_new = f_of(x_new)
                if np.isfinite(f_new) and f_new <= f0 + 1e-12 * max(1.0, abs(f0)):
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            x, f0 = x_new, f_new
            g = g_of(x)
        out = base.copy()
        out[idx] = x
        return out

    def kkt_grad_ok(phi):
        g = neg_grad(phi)
        for i in range(len(names)):
            if phi[i] <= lb[i] + 1e-8 and g[i] > 0:
                g[i] = 0.0  # pinned at the floor, gradient points outward
        return float(np.max(np.abs(g))) < 1e-5

    all_free = list(range(len(names)))
    start = _moment_starts(table, spec, scale)
    start = np.clip(start, np.exp(lb), np.exp(ub))
    phi_a, res_a = optimize(np.log(start), all_free)
    n_iter = int(res_a.nit)
    # second start guards against a poor first basin
    even = np.full(len(names), scale / len(names))
    even = np.clip(even, np.exp(lb), np.exp(ub))
    phi_b, res_b = optimize(np.log(even), all_free)
    n_iter += int(res_b.nit)
    if neg(phi_b) < neg(phi_a):
        phi, res1 = phi_b, res_b
    else:
        phi, res1 = phi_a, res_a
    phi = polish(phi, all_free)
    theta = np.exp(phi)
    converged = bool(res1.success) and kkt_grad_ok(phi)

    # snap factor components that ran to the boundary to exactly zero and
    # re-optimize the remainder so the reported optimum is clean
    snap = 1e-9 * scale
    floored = []
    zeroed = [i for i in range(1, len(names)) if theta[i] <= snap]
    if zeroed:
        floored.extend(names[i] for i in zeroed)
        for i in zeroed:
            theta[i] = 0.0
        free = [i for i in range(len(names)) if i not in zeroed]
        phi_free = np.log(np.maximum(theta, 1e-300))
        phi2, res2 = optimize(phi_free, free)
        phi2 = polish(phi2, free)
        theta_free = np.exp(phi2)
        for i in free:
            theta[i] = theta_free[i]
        n_iter += int(res2.nit)
        converged = bool(res2.success) and converged
    if theta[0] <= floor_e * 1.0001:
        theta[0] = floor_e
        floored.insert(0, "e")

    mu, effects = ws.solve_effects(theta)
    comps = VarianceComponents(float(theta[0]),
                               {f: float(v) for f, v in zip(names[1:], theta[1:])})
    crit = ws.criterion(theta)
    return FitResult(mu, comps, effects, float(crit), converged, n_iter,
                     floored=tuple(floored))


def reml_fit(table: ObservationTable, spec: ModelSpec) -> FitResult:
    """Fit variance components by REML and extract predicted effects.

    The criterion of :func:`restricted_loglik` is maximized over
    log-variances with the residual variance floored at 1e-10 times the
    sample variance of the responses.  Factor variances that run to the
    boundary are reported as exactly zero and listed in ``floored``.
    """
    return _fit(table, spec, prior=None)


def map_fit(table: ObservationTable, spec: ModelSpec,
            prior: VariancePrior) -> FitResult:
    """Posterior-mode fit: REML criterion plus log inverse-Gamma priors.

    Components without a prior entry contribute nothing, so an all-flat
    prior reproduces :func:`reml_fit` exactly.  Effects are read off the
    mixed-model equations at the mode, as in the REML path.
    """
    if prior is None:
        raise ValueError("map_fit requires a VariancePrior (use reml_fit for none)")
    return _fit(table, spec, prior=prior)


# ---------------------------------------------------------------------------
# GLS with known components on (possibly incomplete) blocks
# ---------------------------------------------------------------------------

def _connected_components(blocks_to_treats):
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for treats in blocks_to_treats.values():
        for tr in treats:
            parent.setdefault(tr, tr)
        for tr in treats[1:]:
            union(treats[0], tr)
    comps = {}
    for tr in parent:
        comps.setdefault(find(tr), []).append(tr)
    return [sorted(v, key=str) for v in comps.values()]


def gls_estimate(table: ObservationTable, sigma2_e: float, sigma2_b: float,
                 treatment: str = "treatment", block: str = "block"):
    """Generalized least squares treatment means under block correlation.

    Each block contributes its own k x k covariance sigma2_e*I + sigma2_b*J,
    inverted in closed form; the per-block information and right-hand sides
    are accumulated and solved for the full treatment-mean vector.  With
    complete blocks this reduces exactly to the raw treatment means.

    Returns
    -------
    (levels, estimate) : (list, np.ndarray)
        Treatment levels in sorted order with their GLS estimates.
    """
    if sigma2_e <= 0:
        raise ValueError("sigma2_e must be positive")
    if sigma2_b < 0:
        raise ValueError("sigma2_b must be nonnegative")
    levels = table.levels(treatment)
    index = {l: i for i, l in enumerate(levels)}
    t = len(levels)

    by_block = {}
    for resp, tr, bl in zip(table.responses, table.factors[treatment],
                            table.factors[block]):
        by_block.setdefault(bl, []).append((index[tr], resp))

    comps = _connected_components(
        {b: [tr for tr, _ in rows] for b, rows in by_block.items()})
    if len(comps) > 1:
        names = [[levels[i] for i in c] for c in comps]
        raise DisconnectedDesignError(
            f"treatment-block incidence is disconnected; components: {names}")

    A = np.zeros((t, t))
    c = np.zeros(t)
    for rows in by_block.values():
        idx = np.array([tr for tr, _ in rows])
        yb = np.array([resp for _, resp in rows])
        if len(set(idx.tolist())) != len(idx):
            raise ValueError("a treatment appears twice in one block")
        k = len(idx)
        w = sigma2_b / (sigma2_e + k * sigma2_b)
        c[idx] += (yb - w * yb.sum()) / sigma2_e
        A[np.ix_(idx, idx)] += (np.eye(k) - w) / sigma2_e
    try:
        est = np.linalg.solve(A, c)
    except np.linalg.LinAlgError as exc:
        raise DisconnectedDesignError(f"singular GLS system: {exc}") from exc
    return levels, est
