"""Estimators: power laws, chi extrapolation, Luttinger parameter, central
charge, finite-size-scaling collapse and order-parameter marginals."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from .theory import log_norm_phi, log_norm_rho


class FitError(ValueError):
    pass


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class FitResult:
    kind: str
    params: dict
    stderr: dict
    windows: list = field(default_factory=list)
    residual: float = 0.0
    r2: float | None = None
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    @property
    def ok(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


@dataclass
class CollapseResult:
    beta_over_nu: float
    inv_nu: float
    delta_c: float
    residual: float
    branches: dict
    sizes: list
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# ------------------------------------------------------------ linear helpers


def _linfit(x, y, w=None):
    """Weighted straight line; returns slope, intercept, their stderrs, r2, rss."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.ones_like(x) if w is None else np.asarray(w, float)
    a = np.vstack([x, np.ones_like(x)]).T
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(a * sw[:, None], y * sw, rcond=None)
    res = y - a @ coef
    rss = float(np.sum(w * res**2))
    dof = x.size - 2
    if dof > 0:
        cov = np.linalg.pinv((a * w[:, None]).T @ a) * rss / dof
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    else:
        err = np.zeros(2)
    ybar = np.average(y, weights=w)
    tss = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss <= 1e-30 else 0.0)
    return coef[0], coef[1], err[0], err[1], r2, rss


def _window_mask(x, window):
    lo, hi = window
    return (x >= lo) & (x <= hi)


def loglog_fit(x, y, windows=None, min_points: int = 4) -> FitResult:
    """Slope of ``log y`` against ``log x``.

    With two windows the quoted uncertainty is the spread ``|s1 - s2|`` of
    the two slopes; the regression stderr is kept as a separate field and a
    ``combined`` value ``hypot(spread, max stderr)`` is also given.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if windows is None:
        windows = [(x.min(), x.max())]
    elif np.ndim(windows) == 1:
        windows = [tuple(windows)]
    windows = [tuple(map(float, w)) for w in windows]
    if not 1 <= len(windows) <= 2:
        raise FitError("one or two windows")
    fits = []
    for w in windows:
        sel = _window_mask(x, w)
        if sel.sum() < min_points:
            raise FitError(f"window {w} holds {sel.sum()} points, need {min_points}")
        if np.any(x[sel] <= 0) or np.any(y[sel] <= 0):
            raise FitError(f"nonpositive values in window {w}")
        fits.append(_linfit(np.log(x[sel]), np.log(y[sel])))
    slope, icpt, s_err, i_err, r2, rss = fits[0]
    reg = max(f[2] for f in fits)
    spread = abs(fits[0][0] - fits[1][0]) if len(fits) == 2 else 0.0
    stderr = {"slope": reg, "intercept": i_err, "window_spread": spread, "combined": math.hypot(spread, reg)}
    extra = {"slopes": [f[0] for f in fits]}
    return FitResult("loglog", {"slope": slope, "intercept": icpt}, stderr, windows, rss, r2, extra=extra)


def chi_extrapolate(chi, values) -> FitResult:
    """Quadratic least squares in ``1/chi`` evaluated at ``1/chi = 0``."""
    chi = np.asarray(chi, float)
    v = np.asarray(values, float)
    if chi.size < 3:
        raise FitError("need at least three bond dimensions")
    if np.any(np.diff(chi) <= 0):
        raise FitError("chi must be strictly increasing")
    t = 1.0 / chi
    a = np.vstack([np.ones_like(t), t, t * t]).T
    coef, *_ = np.linalg.lstsq(a, v, rcond=None)
    res = v - a @ coef
    rss = float(res @ res)
    dof = chi.size - 3
    err = np.sqrt(np.diag(np.linalg.pinv(a.T @ a)) * rss / dof) if dof > 0 else np.zeros(3)
    span = float(abs(coef[0] - v[-1]))
    return FitResult(
        "chi_extrapolation",
        {"limit": coef[0], "a1": coef[1], "a2": coef[2]},
        {"limit": err[0], "a1": err[1], "a2": err[2]},
        [(float(chi[0]), float(chi[-1]))],
        rss,
        extra={"extrapolation_span": span},
    )


def luttinger_from_C1(r, c1, window=None) -> FitResult:
    """``K' = 2 |slope|`` of ``log C1`` vs ``log r``.

    A straight line in ``log C1`` vs ``r`` (exponential decay) is also fitted;
    when it describes the data better by R^2 the series is flagged as off
    critical and no ``K'`` is returned.
    """
    r = np.asarray(r, float)
    c = np.real(np.asarray(c1))
    window = (r.min(), r.max()) if window is None else tuple(window)
    sel = _window_mask(r, window)
    if sel.sum() < 3:
        raise FitError("need at least three separations in the window")
    if np.any(c[sel] <= 0):
        raise FitError("C1 must be positive in the fit window")
    lr, lc = np.log(r[sel]), np.log(c[sel])
    pw = _linfit(lr, lc)
    ex = _linfit(r[sel], lc)
    extra = {"r2_power": pw[4], "r2_exponential": ex[4], "xi_exponential": -1 / ex[0] if ex[0] < 0 else math.inf}
    if ex[4] > pw[4]:
        return FitResult("luttinger", {"K_prime": math.nan}, {"K_prime": math.nan}, [window], pw[5], pw[4],
                         ["off-critical: exponential decay fits better"], extra)
    return FitResult("luttinger", {"K_prime": 2 * abs(pw[0]), "slope": pw[0]}, {"K_prime": 2 * pw[2], "slope": pw[2]},
                     [window], pw[5], pw[4], [], extra)


def central_charge_fit(entropy, xi=None, length=None, positions=None, window=None) -> FitResult:
    """Central charge from entanglement entropies.

    ``xi`` given: ``S = (c/6) ln xi + const`` over a chi series.
    ``length`` given: open-chain profile ``S(x) = (c/6) ln[(2L/pi) sin(pi x/L)] + const``
    with bond positions ``x`` (default 1..L-1).
    """
    s = np.asarray(entropy, float)
    if xi is not None:
        xs = np.log(np.asarray(xi, float))
        label = "central_charge_xi"
    elif length is not None:
        pos = np.arange(1, length) if positions is None else np.asarray(positions, float)
        xs = np.log(2 * length / np.pi * np.sin(np.pi * pos / length))
        if window is not None:
            sel = _window_mask(pos, window)
            xs, s = xs[sel], s[sel]
        label = "central_charge_profile"
    else:
        raise FitError("give xi or length")
    if s.size < 4:
        raise FitError("need at least four entropy values")
    if np.ptp(xs) == 0:
        raise FitError("degenerate abscissa")
    slope, icpt, se, ie, r2, rss = _linfit(xs, s)
    return FitResult(label, {"c": 6 * slope, "const": icpt}, {"c": 6 * se, "const": ie},
                     [window] if window else [], rss, r2)


def exponent_consistency(nu: float, beta: float) -> float:
    """``|(2 - 1/nu) - 2 beta/(1 + beta)|``; zero when both describe one x3."""
    return abs((2 - 1 / nu) - 2 * beta / (1 + beta))


# ------------------------------------------------------------------ collapse


def rescale(datasets, beta_over_nu, inv_nu, delta_c):
    """``{l: (dbar, x, y)}`` with ``x = |dbar| l^(1/nu)``, ``y = |O| l^(beta/nu)``."""
    out = {}
    for l, (d, o) in datasets.items():
        d = np.asarray(d, float)
        o = np.asarray(o, float)
        dbar = d - delta_c
        out[l] = (dbar, np.abs(dbar) * l**inv_nu, np.abs(o) * l**beta_over_nu)
    return out


def _curve(x, y):
    order = np.argsort(x)
    x, y = x[order], y[order]
    keep = np.concatenate([[True], np.diff(x) > 0])
    return x[keep], y[keep]


def collapse_residual(datasets, beta_over_nu, inv_nu, delta_c, grid: int = 64, normalize: bool = True):
    """Mean squared pairwise distance of the rescaled curves.

    Each sign branch of ``dbar`` is handled separately; points at
    ``dbar = 0`` belong to both. For every pair of sizes the curves are
    interpolated (monotone cubic) on ``grid`` points of their common
    x-overlap. With ``normalize`` the mean squared difference is divided by
    the mean of ``y^2`` on the same grid, making the metric independent of
    the overall scale set by ``beta/nu``.
    """
    resc = rescale(datasets, beta_over_nu, inv_nu, delta_c)
    branches = {}
    total, count = 0.0, 0
    for name, sel in (("below", lambda d: d <= 0), ("above", lambda d: d >= 0)):
        curves = {}
        for l, (d, x, y) in resc.items():
            m = sel(d)
            if m.sum() >= 2:
                cx, cy = _curve(x[m], y[m])
                if cx.size >= 2:
                    curves[l] = (cx, cy)
        vals = []
        for (la, (xa, ya)), (lb, (xb, yb)) in itertools.combinations(sorted(curves.items()), 2):
            lo, hi = max(xa[0], xb[0]), min(xa[-1], xb[-1])
            if hi <= lo:
                continue
            g = np.linspace(lo, hi, grid)
            fa = PchipInterpolator(xa, ya)(g)
            fb = PchipInterpolator(xb, yb)(g)
            msd = float(np.mean((fa - fb) ** 2))
            if normalize:
                scale = float(np.mean(0.5 * (fa**2 + fb**2)))
                msd = msd / scale if scale > 0 else 0.0
            vals.append(msd)
        if vals:
            branches[name] = {"residual": float(np.mean(vals)), "pairs": len(vals)}
            total += float(np.sum(vals))
            count += len(vals)
    if count == 0:
        raise FitError("rescaled curves have disjoint supports")
    return total / count, branches


def fss_collapse(datasets, beta_over_nu, inv_nu, delta_c, l_y: int = 1, grid: int = 64, normalize: bool = True,
                 optimize_over=(), grids=None, rounds: int = 3, polish: bool = True,
                 require_quasi_1d: bool = True) -> CollapseResult:
    """Collapse quality of ``|O| l^(beta/nu)`` against ``|dbar| l^(1/nu)``.

    ``datasets`` maps ``l_x`` to ``(delta_over_u, order_parameter)``.
    ``optimize_over`` may name any of ``beta_over_nu``, ``inv_nu``,
    ``delta_c``; each is then refined by coordinate descent over the
    matching entry of ``grids`` (arrays of candidate values, defaults
    +-50% around the start for exponents and +-0.02 for ``delta_c``).
    Coordinate descent crawls along the correlated beta/nu - 1/nu valley, so
    with ``polish`` the best grid point seeds a Nelder-Mead search.

    Lengths with ``l_x <= 4 l_y`` are outside the quasi-1D regime and raise
    unless ``require_quasi_1d`` is False, in which case they are listed in
    ``extra["short_lengths"]``.
    """
    if len(datasets) < 2:
        raise FitError("need at least two system lengths")
    small = sorted(l for l in datasets if not l > 4 * l_y)
    if small and require_quasi_1d:
        raise FitError(f"lengths {small} violate l_x > 4 l_y")
    p = {"beta_over_nu": float(beta_over_nu), "inv_nu": float(inv_nu), "delta_c": float(delta_c)}

    def score(q):
        return collapse_residual(datasets, q["beta_over_nu"], q["inv_nu"], q["delta_c"], grid, normalize)[0]

    used_grids = {}
    if optimize_over:
        grids = dict(grids or {})
        for k in optimize_over:
            if k not in grids:
                c = p[k]
                grids[k] = np.linspace(c - 0.02, c + 0.02, 41) if k == "delta_c" else np.linspace(0.5 * c, 1.5 * c, 41)
            used_grids[k] = np.asarray(grids[k], float).tolist()
        for _ in range(rounds):
            for k in optimize_over:
                best, best_v = math.inf, p[k]
                for v in grids[k]:
                    q = dict(p, **{k: float(v)})
                    try:
                        s = score(q)
                    except FitError:
                        continue
                    if s < best:
                        best, best_v = s, float(v)
                p[k] = best_v
        if polish:
            keys = list(optimize_over)

            def objective(v):
                try:
                    return score(dict(p, **dict(zip(keys, map(float, v)))))
                except FitError:
                    return math.inf

            x0 = np.array([p[k] for k in keys])
            sol = optimize.minimize(objective, x0, method="Nelder-Mead",
                                    options={"xatol": 1e-7, "fatol": 1e-16, "maxiter": 2000 * len(keys)})
            if sol.fun < objective(x0):
                p.update(zip(keys, map(float, sol.x)))
    res, branches = collapse_residual(datasets, p["beta_over_nu"], p["inv_nu"], p["delta_c"], grid, normalize)
    extra = {"grid_points": grid, "normalized": normalize, "optimized": list(optimize_over), "search_grids": used_grids,
             "polished": bool(optimize_over and polish), "short_lengths": small}
    return CollapseResult(p["beta_over_nu"], p["inv_nu"], p["delta_c"], res, branches, sorted(datasets), extra)


# ----------------------------------------------------------------- marginals

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _bin_average(logpdf, edges):
    """Average of ``exp(logpdf)`` over each bin by Gauss-Legendre quadrature."""
    edges = np.asarray(edges, float)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    pts = 0.5 * (hi + lo)[:, None] + half[:, None] * _GL_X[None, :]
    return 0.5 * (np.exp(logpdf(pts)) @ _GL_W)


def phi_bin_model(edges, a3, a6):
    lz = log_norm_phi(a3, a6)
    return _bin_average(lambda p: -a3 * np.cos(3 * p) - a6 * np.cos(6 * p) - lz, edges)


def rho_bin_model(edges, m, l):
    lz = log_norm_rho(m, l)

    def lp(r):
        with np.errstate(divide="ignore"):
            return np.where(r > 0, np.log(np.where(r > 0, r, 1.0)) + m * r**2 - l * r**4 - lz, -np.inf)

    return _bin_average(lp, edges)


def _hist_fit(kind, edges, counts, model, p0, names, bounds):
    edges = np.asarray(edges, float)
    counts = np.asarray(counts, float)
    if counts.size < 10:
        raise FitError("need at least ten bins")
    if counts.size != edges.size - 1:
        raise FitError("edges and counts disagree")
    n = counts.sum()
    width = np.diff(edges)
    dens = counts / (n * width)

    # Poisson deviance residuals: least squares on these is the binned
    # Poisson likelihood, which avoids the bias of weights taken from counts
    def resid(p):
        mu = np.maximum(n * width * model(edges, *p), 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(counts > 0, counts * np.log(counts / mu), 0.0)
        dev = np.maximum(2.0 * (mu - counts + term), 0.0)
        return np.sign(mu - counts) * np.sqrt(dev)

    sol = optimize.least_squares(resid, p0, bounds=bounds, method="trf", x_scale="jac", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    flags = [] if sol.success else [f"not converged: {sol.message}"]
    j = sol.jac
    try:
        cov = np.linalg.inv(j.T @ j)
    except np.linalg.LinAlgError:
        cov = np.full((len(p0), len(p0)), np.nan)
        flags.append("singular covariance")
    err = np.sqrt(np.clip(np.diag(cov), 0, None))
    params = dict(zip(names, sol.x))
    rss = float(np.sum((model(edges, *sol.x) - dens) ** 2))
    deviance = float(2 * sol.cost)
    extra = {"covariance": cov, "deviance": deviance, "dof": int(counts.size - len(p0)), "weights": "poisson", "n_samples": n,
             "bins": int(counts.size)}
    return sol, FitResult(kind, params, dict(zip(names, err)), [(float(edges[0]), float(edges[-1]))], rss, None, flags, extra)


def fit_phi_marginal(edges, counts, p0=(0.0, 0.0)) -> FitResult:
    """Fit ``(A3, A6)`` of the angular marginal to a binned histogram."""
    sol, res = _hist_fit("marginal_phi", edges, counts, phi_bin_model, np.asarray(p0, float), ["A3", "A6"],
                         (-np.inf, np.inf))
    res.extra["A3_sign"] = int(np.sign(res.params["A3"]))
    return res


def fit_rho_marginal(edges, counts, p0=None) -> FitResult:
    """Fit ``(M, L)`` of the radial marginal; also reports ``rho0^2 = M/2L``."""
    edges = np.asarray(edges, float)
    counts = np.asarray(counts, float)
    if p0 is None:
        centers = 0.5 * (edges[1:] + edges[:-1])
        mean_r2 = np.average(centers**2, weights=np.maximum(counts, 1e-12))
        mean_r4 = np.average(centers**4, weights=np.maximum(counts, 1e-12))
        var = max(mean_r4 - mean_r2**2, 1e-6)
        # moments of u = rho^2 for a Gaussian in u centred at M/2L with variance 1/2L
        l0 = 1 / (2 * var)
        p0 = (2 * l0 * mean_r2, l0)
    sol, res = _hist_fit("marginal_rho", edges, counts, rho_bin_model, np.asarray(p0, float), ["M", "L"],
                         ([-np.inf, 1e-12], [np.inf, np.inf]))
    m, l = sol.x
    cov = res.extra["covariance"]
    r02 = m / (2 * l)
    grad = np.array([1 / (2 * l), -m / (2 * l * l)])
    res.params["rho0_sq"] = r02
    res.stderr["rho0_sq"] = float(np.sqrt(max(grad @ cov @ grad, 0.0))) if np.all(np.isfinite(cov)) else math.nan
    return res


def fit_marginals(phi_hist=None, rho_hist=None) -> dict:
    """Fit whichever of ``(edges, counts)`` histograms are given."""
    out = {}
    if phi_hist is not None:
        out["phi"] = fit_phi_marginal(*phi_hist)
    if rho_hist is not None:
        out["rho"] = fit_rho_marginal(*rho_hist)
    if not out:
        raise FitError("no histogram given")
    return out
