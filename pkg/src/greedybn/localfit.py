"""Local distributions: CPTs, Gaussian regressions and CLG mixtures.

Gaussian fits go through one of two estimators: Householder least squares
(``FitMethod.QR``) or the covariance-based closed forms for up to one or two
continuous regressors (``CLOSED1`` / ``CLOSED2``). Variances used in
likelihoods are maximum likelihood (divisor n); the divisor ``n - p - 1``
estimate is kept as ``unbiased_variance`` for reporting only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from itertools import product

import numpy as np

from . import kernels as K
from .dataset import CONTINUOUS, DISCRETE, Dataset, Schema
from .graph import Dag

SIGMA2_FLOOR = 1e-12
P_FLOOR = 1e-300
SINGULAR_TOL = 1e-12
RANK_TOL = 1e-9
LOG_2PI = math.log(2.0 * math.pi)


class FitError(ValueError):
    """The requested fit cannot be computed."""


class InvalidFit(FitError):
    """Some observed discrete configuration has too few rows for its regression."""


class SingularFit(FitError):
    """Closed-form denominators vanish; the regressors are collinear."""


class FitMethod(str, Enum):
    QR = "qr"
    CLOSED1 = "1p"
    CLOSED2 = "2p"

    @property
    def closed_cap(self) -> int:
        """Largest continuous-parent count fitted in closed form (-1: none)."""
        return {"qr": -1, "1p": 1, "2p": 2}[self.value]


# -- array-level estimators shared by fitting and scoring -------------------

def _intp(idx) -> np.ndarray:
    return np.asarray(idx, dtype=np.intp)


def regress(cont, y, xs, codes, ngroups, method: FitMethod):
    """Per-group least squares of column ``y`` on ``[1, xs]``.

    Returns ``(counts, coef, ssr)``. Closed-form groups whose covariance
    matrix is singular are refitted with QR, which drops dependent columns.
    """
    xs = _intp(xs)
    if len(xs) <= method.closed_cap:
        counts, coef, ssr, singular = K.moments_fit(cont, y, xs, codes, ngroups, SINGULAR_TOL)
        if singular.any():
            bad = np.flatnonzero(singular)
            remap = np.full(ngroups, -1, dtype=np.int64)
            remap[bad] = np.arange(len(bad))
            if codes is None:
                sub = None
            else:
                sub = np.where(codes >= 0, remap[np.maximum(codes, 0)], -1)
            _, c2, s2 = K.qr_fit(cont, y, xs, sub, len(bad), RANK_TOL)
            coef[bad] = c2
            ssr[bad] = s2
        return counts, coef, ssr
    return K.qr_fit(cont, y, xs, codes, ngroups, RANK_TOL)


def gauss_loglik(counts, ssr, sigma2) -> float:
    """Sum of normal log-densities given per-group row counts and residual SS."""
    seen = counts > 0
    m = counts[seen]
    s2 = sigma2[seen]
    return float(np.sum(-0.5 * m * (LOG_2PI + np.log(s2)) - ssr[seen] / (2.0 * s2)))


def mle_variance(counts, ssr):
    safe = np.maximum(counts, 1)
    return np.maximum(ssr / safe, SIGMA2_FLOOR)


# -- distribution types -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class Cpt:
    child: str
    parents: tuple[str, ...]
    levels: tuple[str, ...]
    parent_levels: tuple[tuple[str, ...], ...]
    probs: np.ndarray   # (child levels, parent configurations)
    counts: np.ndarray  # same shape

    family = "cpt"

    @property
    def nconfig(self) -> int:
        return self.probs.shape[1]

    @property
    def param_count(self) -> int:
        return (len(self.levels) - 1) * self.nconfig

    def configurations(self):
        return list(product(*self.parent_levels))


@dataclass(frozen=True, eq=False)
class GaussRegression:
    child: str
    parents: tuple[str, ...]
    intercept: float
    coefficients: tuple[float, ...]
    variance: float
    unbiased_variance: float
    n: int

    family = "gaussian"

    @property
    def param_count(self) -> int:
        return len(self.parents) + 2

    @property
    def coef_row(self) -> np.ndarray:
        return np.array((self.intercept,) + tuple(self.coefficients))


@dataclass(frozen=True, eq=False)
class ClgMixture:
    child: str
    discrete_parents: tuple[str, ...]
    continuous_parents: tuple[str, ...]
    parent_levels: tuple[tuple[str, ...], ...]
    components: tuple            # GaussRegression or None per configuration
    counts: tuple[int, ...]
    pooled: GaussRegression | None

    family = "clg"

    @property
    def parents(self) -> tuple[str, ...]:
        return self.discrete_parents + self.continuous_parents

    @property
    def param_count(self) -> int:
        return len(self.components) * (len(self.continuous_parents) + 2)

    def configurations(self):
        return list(product(*self.parent_levels))

    def coef_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-configuration coefficient rows and variances (pooled for unseen)."""
        p = len(self.continuous_parents) + 1
        coef = np.empty((len(self.components), p))
        var = np.empty(len(self.components))
        for g, comp in enumerate(self.components):
            use = comp if comp is not None else self.pooled
            if use is None:
                coef[g] = np.nan
                var[g] = np.nan
            else:
                coef[g] = use.coef_row
                var[g] = use.variance
        return coef, var


# -- fitting ----------------------------------------------------------------

def _disc_meta(ds: Dataset, names):
    pidx, nlev, levels = [], [], []
    for name in names:
        kind, pos = ds.index[name]
        if kind != DISCRETE:
            raise FitError(f"{name!r} is not discrete")
        pidx.append(pos)
        nlev.append(ds.schema[name].nlevels)
        levels.append(ds.schema[name].levels)
    return _intp(pidx), np.asarray(nlev, dtype=np.int64), tuple(levels)


def _cont_index(ds: Dataset, names):
    out = []
    for name in names:
        kind, pos = ds.index[name]
        if kind != CONTINUOUS:
            raise FitError(f"{name!r} is not continuous")
        out.append(pos)
    return _intp(out)


def _check_parents(child, parents):
    if child in parents:
        raise FitError(f"{child!r} cannot be its own parent")
    if len(set(parents)) != len(parents):
        raise FitError("repeated parent")


def fit_cpt(ds: Dataset, child: str, parents=()) -> Cpt:
    parents = tuple(parents)
    _check_parents(child, parents)
    (cidx,), (lchild,), (levels,) = _disc_meta(ds, [child])
    pidx, nlev, plevels = _disc_meta(ds, parents)
    counts = K.cpt_counts(ds.disc, cidx, pidx, nlev, lchild).T.copy()
    totals = counts.sum(axis=0)
    probs = np.full(counts.shape, 1.0 / lchild)
    seen = totals > 0
    probs[:, seen] = counts[:, seen] / totals[seen]
    return Cpt(child, parents, levels, plevels, probs, counts)


def _regression(child, parents, coef_row, ssr, m) -> GaussRegression:
    p = len(parents)
    var = max(ssr / m, SIGMA2_FLOOR)
    dof = m - p - 1
    unbiased = max(ssr / dof, SIGMA2_FLOOR) if dof > 0 else float("nan")
    return GaussRegression(
        child, tuple(parents), float(coef_row[0]), tuple(float(b) for b in coef_row[1:]),
        float(var), float(unbiased), int(m),
    )


def _subset(ds, rows):
    return ds if rows is None else ds.take(rows)


def _gauss(ds, child, parents, rows, method) -> GaussRegression:
    parents = tuple(parents)
    _check_parents(child, parents)
    ds = _subset(ds, rows)
    (y,) = _cont_index(ds, [child])
    xs = _cont_index(ds, parents)
    if ds.n < len(parents) + 2:
        raise FitError(f"{ds.n} rows cannot support {len(parents)} regressors")
    counts, coef, ssr = regress(ds.cont, y, xs, None, 1, method)
    return _regression(child, parents, coef[0], ssr[0], counts[0])


def fit_gauss_qr(ds: Dataset, child: str, parents=(), rows=None) -> GaussRegression:
    return _gauss(ds, child, parents, rows, FitMethod.QR)


def fit_gauss_closed(ds: Dataset, child: str, parents=(), rows=None) -> GaussRegression:
    parents = tuple(parents)
    if len(parents) > 2:
        raise FitError("closed-form estimator handles at most two parents")
    _check_parents(child, parents)
    sub = _subset(ds, rows)
    (y,) = _cont_index(sub, [child])
    xs = _cont_index(sub, parents)
    if sub.n < len(parents) + 2:
        raise FitError(f"{sub.n} rows cannot support {len(parents)} regressors")
    counts, coef, ssr, singular = K.moments_fit(sub.cont, y, xs, None, 1, SINGULAR_TOL)
    if singular[0]:
        raise SingularFit(f"regressors of {child!r} are collinear")
    return _regression(child, parents, coef[0], ssr[0], counts[0])


def fit_clg(ds: Dataset, child: str, dparents=(), gparents=(), method=FitMethod.QR):
    """Conditional linear Gaussian fit; a plain regression when ``dparents`` is empty."""
    dparents, gparents = tuple(dparents), tuple(gparents)
    _check_parents(child, dparents + gparents)
    method = FitMethod(method)
    if not dparents:
        return _gauss(ds, child, gparents, None, method)
    (y,) = _cont_index(ds, [child])
    xs = _cont_index(ds, gparents)
    pidx, nlev, plevels = _disc_meta(ds, dparents)
    ngroups = int(np.prod(nlev))
    codes = K.config_codes(ds.disc, pidx, nlev)
    counts, coef, ssr = regress(ds.cont, y, xs, codes, ngroups, method)
    need = len(gparents) + 2
    small = (counts > 0) & (counts < need)
    if small.any():
        raise InvalidFit(
            f"{child!r}: {int(small.sum())} parent configuration(s) with fewer than {need} rows"
        )
    comps = tuple(
        _regression(child, gparents, coef[g], ssr[g], counts[g]) if counts[g] else None
        for g in range(ngroups)
    )
    pooled = _gauss(ds, child, gparents, None, method) if ds.n >= need else None
    return ClgMixture(child, dparents, gparents, plevels, comps,
                      tuple(int(c) for c in counts), pooled)


# -- evaluation -------------------------------------------------------------

def cpt_log_table(cpt: Cpt) -> np.ndarray:
    """(configurations, levels) table of clamped log-probabilities."""
    return np.ascontiguousarray(np.log(np.maximum(cpt.probs.T, P_FLOOR)))


def loglik(dist, ds: Dataset, rows=None) -> float:
    ds = _subset(ds, rows)
    if isinstance(dist, Cpt):
        (cidx,), _, _ = _disc_meta(ds, [dist.child])
        pidx, nlev, _ = _disc_meta(ds, dist.parents)
        return float(K.cpt_logprob_sum(ds.disc, cidx, pidx, nlev, cpt_log_table(dist)))
    (y,) = _cont_index(ds, [dist.child])
    if isinstance(dist, GaussRegression):
        xs = _cont_index(ds, dist.parents)
        counts, ssr = K.resid_ssr(ds.cont, y, xs, None, dist.coef_row[None, :])
        return gauss_loglik(counts, ssr, np.array([dist.variance]))
    if isinstance(dist, ClgMixture):
        xs = _cont_index(ds, dist.continuous_parents)
        pidx, nlev, _ = _disc_meta(ds, dist.discrete_parents)
        codes = K.config_codes(ds.disc, pidx, nlev)
        coef, var = dist.coef_table()
        counts, ssr = K.resid_ssr(ds.cont, y, xs, codes, np.ascontiguousarray(coef))
        return gauss_loglik(counts, ssr, var)
    raise TypeError(f"unsupported distribution {type(dist).__name__}")


# -- whole networks ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BnModel:
    dag: Dag
    distributions: dict
    schema: Schema

    def __post_init__(self):
        for node in self.dag.nodes:
            dist = self.distributions[node]
            parents = set(self.dag.parents(node))
            if set(dist.parents) != parents:
                raise FitError(f"{node!r}: distribution parents disagree with the DAG")
            col = self.schema[node]
            pkinds = {self.schema[p].kind for p in parents}
            if col.kind == DISCRETE:
                ok = isinstance(dist, Cpt) and pkinds <= {DISCRETE}
            elif DISCRETE in pkinds:
                ok = isinstance(dist, ClgMixture)
            else:
                ok = isinstance(dist, GaussRegression)
            if not ok:
                raise FitError(f"{node!r}: {type(dist).__name__} does not match its node family")

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.dag.nodes

    def param_count(self) -> int:
        return sum(d.param_count for d in self.distributions.values())


def fit_node(ds: Dataset, node: str, parents, method=FitMethod.QR):
    parents = tuple(parents)
    if ds.kind(node) == DISCRETE:
        return fit_cpt(ds, node, parents)
    dpar = tuple(p for p in parents if ds.kind(p) == DISCRETE)
    gpar = tuple(p for p in parents if ds.kind(p) == CONTINUOUS)
    if dpar:
        return fit_clg(ds, node, dpar, gpar, method)
    return _gauss(ds, node, gpar, None, FitMethod(method))


def fit_model(ds: Dataset, dag: Dag, method=FitMethod.QR) -> BnModel:
    dists = {v: fit_node(ds, v, dag.parents(v), method) for v in dag.nodes}
    schema = Schema(tuple(ds.schema[v] for v in dag.nodes))
    return BnModel(dag, dists, schema)


def model_loglik(model: BnModel, ds: Dataset) -> float:
    return sum(loglik(model.distributions[v], ds) for v in model.nodes)


# -- JSON -------------------------------------------------------------------

def _num(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _reg_json(r: GaussRegression) -> dict:
    return {
        "intercept": r.intercept,
        "coefficients": list(r.coefficients),
        "variance": r.variance,
        "unbiased_variance": _num(r.unbiased_variance),
        "n": r.n,
    }


def _reg_from(child, parents, obj) -> GaussRegression:
    ub = obj.get("unbiased_variance")
    return GaussRegression(
        child, tuple(parents), float(obj["intercept"]),
        tuple(float(b) for b in obj["coefficients"]), float(obj["variance"]),
        float("nan") if ub is None else float(ub), int(obj.get("n", 0)),
    )


def dist_to_json(dist) -> dict:
    if isinstance(dist, Cpt):
        return {
            "family": "cpt",
            "parents": list(dist.parents),
            "levels": list(dist.levels),
            "parent_levels": [list(lv) for lv in dist.parent_levels],
            "probabilities": dist.probs.tolist(),
            "counts": dist.counts.tolist(),
        }
    if isinstance(dist, GaussRegression):
        return {"family": "gaussian", "parents": list(dist.parents), **_reg_json(dist)}
    comps = []
    for cfg, comp, cnt in zip(dist.configurations(), dist.components, dist.counts):
        entry = {"configuration": list(cfg), "count": cnt}
        entry["regression"] = None if comp is None else _reg_json(comp)
        comps.append(entry)
    return {
        "family": "clg",
        "discrete_parents": list(dist.discrete_parents),
        "continuous_parents": list(dist.continuous_parents),
        "parent_levels": [list(lv) for lv in dist.parent_levels],
        "components": comps,
        "pooled": None if dist.pooled is None else _reg_json(dist.pooled),
    }


def dist_from_json(child: str, obj: dict):
    fam = obj["family"]
    if fam == "cpt":
        probs = np.asarray(obj["probabilities"], dtype=float)
        counts = np.asarray(obj.get("counts", np.zeros_like(probs)), dtype=np.int64)
        return Cpt(child, tuple(obj["parents"]), tuple(obj["levels"]),
                   tuple(tuple(lv) for lv in obj["parent_levels"]), probs, counts)
    if fam == "gaussian":
        return _reg_from(child, obj["parents"], obj)
    if fam == "clg":
        gpar = tuple(obj["continuous_parents"])
        comps = tuple(
            None if c["regression"] is None else _reg_from(child, gpar, c["regression"])
            for c in obj["components"]
        )
        pooled = None if obj.get("pooled") is None else _reg_from(child, gpar, obj["pooled"])
        return ClgMixture(child, tuple(obj["discrete_parents"]), gpar,
                          tuple(tuple(lv) for lv in obj["parent_levels"]), comps,
                          tuple(int(c["count"]) for c in obj["components"]), pooled)
    raise ValueError(f"unknown family {fam!r}")


def model_to_json(model: BnModel) -> dict:
    return {
        "format": "greedybn-model/1",
        "schema": model.schema.to_json(),
        "nodes": list(model.nodes),
        "arcs": [list(a) for a in model.dag.sorted_arcs()],
        "distributions": {v: dist_to_json(model.distributions[v]) for v in model.nodes},
    }


def model_from_json(obj: dict) -> BnModel:
    schema = Schema.from_json(obj["schema"])
    dag = Dag(obj["nodes"], [tuple(a) for a in obj["arcs"]])
    dists = {v: dist_from_json(v, obj["distributions"][v]) for v in dag.nodes}
    return BnModel(dag, dists, schema)


def save_model(model: BnModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_json(model), fh, indent=1)


def load_model(path) -> BnModel:
    with open(path) as fh:
        return model_from_json(json.load(fh))
