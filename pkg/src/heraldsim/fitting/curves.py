"""Curve fitters with a scikit-learn estimator interface.

Each fitter takes ``X`` as a 1-D array (or one-column 2-D array) of the
series abscissa, ``y`` as the measured values and an optional ``y_err``.
Fitted parameters are exposed as ``<name>_`` attributes and the full
:class:`FitResult` as ``result_``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..model import PhysicalParams
from ..oracle import alpha_grid
from ..protocol import ProtocolConfig, storage_delay
from .lm import nlls_minimize
from .series import DataSeries, SeriesKind


def _as_x(X):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature column, got {X.shape[1]}")
        X = X[:, 0]
    return X


class CurveFitter(RegressorMixin, BaseEstimator):
    """Shared fit/predict plumbing; subclasses define the model and its defaults."""

    kinds = ()
    default_init = {}
    default_bounds = {}

    def _model(self, x, **p):
        raise NotImplementedError

    def _start(self):
        init = {**self.default_init, **(self.init or {})}
        bounds = {**self.default_bounds, **(self.bounds or {})}
        return init, bounds

    def _free_start(self):
        fixed = dict(getattr(self, "fixed", None) or {})
        init, bounds = self._start()
        unknown = set(fixed) - set(init)
        if unknown:
            raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
        init = {k: v for k, v in init.items() if k not in fixed}
        return init, bounds, fixed

    def _derive(self, result, x):
        pass

    def fit(self, X, y, y_err=None):
        x = _as_x(X)
        y = check_array(y, ensure_2d=False, dtype=float)
        if len(x) != len(y):
            raise ValueError("X and y have different lengths")
        e = np.ones_like(y) if y_err is None else check_array(y_err, ensure_2d=False, dtype=float)
        order = np.argsort(x, kind="stable")
        x, y, e = x[order], y[order], e[order]
        init, bounds, fixed = self._free_start()

        def model(x, **p):
            return self._model(x, **p, **fixed)

        result = nlls_minimize(model, (x, y, e), init, bounds,
                               n_grid=self.n_grid, n_starts=self.n_starts)
        self.fixed_ = fixed
        self._derive(result, x)
        self.result_ = result
        for k, v in result.estimates.items():
            setattr(self, k + "_", v)
        self.n_features_in_ = 1
        return self

    def fit_series(self, series):
        if series.kind not in self.kinds:
            raise ValueError(f"{type(self).__name__} cannot fit a {series.kind.value} series")
        return self.fit(series.x, series.y, series.y_err)

    def predict(self, X):
        check_is_fitted(self, "result_")
        return np.asarray(self._model(_as_x(X), **self.result_.estimates, **self.fixed_), dtype=float)


class G2PasFitter(CurveFitter):
    """g2 versus herald probability with no herald background.

    ``g2(p) = 1 + 1 / (p / eta_as + r)`` where ``r`` is the Stokes
    background over the retrieve efficiency; those two are only identifiable
    through their ratio.
    """

    kinds = (SeriesKind.G2_VS_PAS,)
    default_init = {"eta_as": 0.05, "r": 1e-3}
    default_bounds = {"eta_as": (1e-4, 1.0), "r": (0.0, 1.0)}

    def __init__(self, init=None, bounds=None, fixed=None, n_grid=5, n_starts=3):
        self.init = init
        self.fixed = fixed
        self.bounds = bounds
        self.n_grid = n_grid
        self.n_starts = n_starts

    def _model(self, x, eta_as, r):
        return 1.0 + 1.0 / (x / eta_as + r)


class G2DelayFitter(CurveFitter):
    """g2 versus storage time with a Gaussian memory decay.

    Parameters: ``tau_c`` (ns), ``excitation`` (chi plus the herald
    background) and ``d_const``. Only ``d_const / gamma0`` is identifiable,
    so ``gamma0`` is held at the supplied value. When the herald probability
    and efficiency are known, pass ``fixed={"excitation": p_as / eta_as}``.
    """

    kinds = (SeriesKind.G2_VS_DELAY,)
    default_init = {"tau_c": 10_000.0, "excitation": 0.05, "d_const": 0.01}
    default_bounds = {"tau_c": (100.0, 1e6), "excitation": (0.0, 1.0), "d_const": (0.0, 10.0)}

    def __init__(self, gamma0=0.3, init=None, bounds=None, fixed=None, n_grid=5, n_starts=3):
        self.gamma0 = gamma0
        self.init = init
        self.fixed = fixed
        self.bounds = bounds
        self.n_grid = n_grid
        self.n_starts = n_starts

    def _model(self, x, tau_c, excitation, d_const):
        gamma = self.gamma0 * np.exp(-(x / tau_c) ** 2)
        return 1.0 + gamma / (excitation * gamma + d_const)


PHYSICAL_FIELDS = ("chi", "eta_as", "eta_s", "gamma0", "tau_c", "bg_as", "bg_s")
_PHYSICAL_BOUNDS = {
    "chi": (0.0, 0.5), "eta_as": (1e-4, 1.0), "eta_s": (1e-4, 1.0), "gamma0": (1e-4, 1.0),
    "tau_c": (100.0, 1e6), "bg_as": (0.0, 1.0), "bg_s": (0.0, 1.0),
}


def chi_from_herald_probability(p_herald, eta_as, bg_as):
    """Invert the exact per-write herald probability for chi.

    With thermal pair statistics ``1 - P = (1 - b) (1 - chi) / (1 - chi (1 - eta))``
    where ``b = min(bg_as * eta_as, 1)``.
    """
    b = min(bg_as * eta_as, 1.0)
    s = (1.0 - np.asarray(p_herald, dtype=float)) / (1.0 - b)
    chi = (1.0 - s) / (1.0 - s * (1.0 - eta_as))
    return np.clip(chi, 0.0, None)


def alpha_vs_pas(x, params, protocol):
    """Predicted alpha at per-write herald probabilities ``x`` for a write train."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    chis = chi_from_herald_probability(x, params.eta_as, params.bg_as)
    if np.any(chis >= 1.0):
        return np.full_like(x, np.nan)
    delays = [storage_delay(protocol, i) for i in range(protocol.n_pulses)]
    weights = (1.0 - x[:, None]) ** np.arange(protocol.n_pulses)[None, :]
    return alpha_grid(params, chis, delays, slot_weights=weights)


def alpha_vs_delay(x, params):
    """Predicted alpha at fixed storage delays ``x`` (ns)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    chis = np.full(len(x), params.chi)
    return alpha_grid(params, chis, x, slot_weights=np.eye(len(x)))


class AlphaCurveFitter(CurveFitter):
    """Anti-correlation parameter versus herald probability or storage delay.

    ``model="physical"`` evaluates alpha exactly for ``params`` and
    ``protocol`` with the names in ``free`` (fields of PhysicalParams,
    typically the backgrounds) released. For excitation series ``x`` is the
    per-write herald probability; the derived ``alpha0`` is the prediction
    for x -> 0 and ``slope`` the secant slope across the data.

    ``model="linear"`` fits ``alpha0 + slope * x`` directly.
    """

    kinds = (SeriesKind.ALPHA_VS_PAS, SeriesKind.ALPHA_VS_DELAY)

    def __init__(self, params=None, protocol=None, kind="AlphaVsPas", model="physical",
                 free=("bg_as", "bg_s"), init=None, bounds=None, n_grid=5, n_starts=3):
        self.params = params
        self.protocol = protocol
        self.kind = kind
        self.model = model
        self.free = free
        self.init = init
        self.bounds = bounds
        self.n_grid = n_grid
        self.n_starts = n_starts

    def _base(self):
        return (self.params or PhysicalParams(), self.protocol or ProtocolConfig())

    def _start(self):
        if self.model == "linear":
            init = {"alpha0": 0.05, "slope": 1.0, **(self.init or {})}
            bounds = {"alpha0": (-1.0, 2.0), "slope": (-1e4, 1e4), **(self.bounds or {})}
            return init, bounds
        if self.model != "physical":
            raise ValueError(f"unknown model {self.model!r}")
        unknown = set(self.free) - set(PHYSICAL_FIELDS)
        if unknown:
            raise ValueError(f"cannot free {sorted(unknown)}: not physical parameters")
        params, _ = self._base()
        init = {k: getattr(params, k) for k in self.free}
        init.update(self.init or {})
        bounds = {k: _PHYSICAL_BOUNDS[k] for k in self.free}
        bounds.update(self.bounds or {})
        return init, bounds

    def _model(self, x, **p):
        if self.model == "linear":
            return p["alpha0"] + p["slope"] * x
        base, protocol = self._base()
        try:
            params = base.replace(**p)
        except ValueError:
            return np.full_like(x, np.nan)
        if SeriesKind(self.kind) is SeriesKind.ALPHA_VS_DELAY:
            return alpha_vs_delay(x, params)
        return alpha_vs_pas(x, params, protocol)

    def fit_series(self, series):
        self.kind = series.kind.value
        return super().fit_series(series)

    def _derive(self, result, x):
        if self.model == "linear" or SeriesKind(self.kind) is not SeriesKind.ALPHA_VS_PAS:
            return
        names = list(result.estimates)
        theta = np.array([result.estimates[k] for k in names])
        lo_x, hi_x = float(x.min()), float(x.max())

        def quantities(t):
            p = dict(zip(names, t))
            a0, a_lo, a_hi = self._model(np.array([1e-12, lo_x, hi_x]), **p)
            return np.array([a0, (a_hi - a_lo) / (hi_x - lo_x)])

        q0 = quantities(theta)
        G = np.empty((2, len(names)))
        for j in range(len(names)):
            h = max(1e-9, 1e-6 * abs(theta[j]))
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] = max(dn[j] - h, 0.0)
            G[:, j] = (quantities(up) - quantities(dn)) / (up[j] - dn[j])
        cov = G @ result.covariance @ G.T
        err = np.sqrt(np.abs(np.diag(cov)))
        result.derived = {"alpha0": (float(q0[0]), float(err[0])), "slope": (float(q0[1]), float(err[1]))}


def fit_g2_vs_pas(series, **kwargs):
    return G2PasFitter(**kwargs).fit_series(series).result_


def fit_g2_vs_delay(series, **kwargs):
    return G2DelayFitter(**kwargs).fit_series(series).result_


def fit_alpha_curves(series, protocol=None, params=None, **kwargs):
    return AlphaCurveFitter(params=params, protocol=protocol, **kwargs).fit_series(series).result_


__all__ = [
    "AlphaCurveFitter",
    "CurveFitter",
    "DataSeries",
    "G2DelayFitter",
    "G2PasFitter",
    "alpha_vs_delay",
    "alpha_vs_pas",
    "chi_from_herald_probability",
    "fit_alpha_curves",
    "fit_g2_vs_delay",
    "fit_g2_vs_pas",
]
