"""File formats: CSV inputs, JSON run configuration, fit outputs.

Response CSV
    Header ``y``; one value per row.
Functional covariate CSV (wide)
    First row ``t,<t_1>,...,<t_m>``; each further row is ``<label>,<x_1>,...,<x_m>``
    where the leading label (typically the observation number) is ignored.
Scalar covariate CSV
    Header of names; one row per observation.

Floats are written with ``repr`` so values survive a write/read round trip
exactly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .data import Covariate, FunctionalDataset
from .errors import InputError
from .pipeline import BandConfig, FitConfig
from .state import PriorConfig

CONFIG_KEYS = {"response", "covariates", "scalar_covariates", "K", "K_list", "priors", "tol",
               "max_iter", "n_restarts", "seed", "partial", "bands"}
PRIOR_KEYS = {"delta1", "delta2", "lambda2_init", "sigma2_init", "chi_init"}
BAND_KEYS = {"n_samples", "level"}


def fmt(x):
    """Shortest decimal text that reads back to the same double."""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise InputError("refusing to write a non-finite value")
    return repr(x)


def _read_rows(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    return rows


def _floats(cells, path, line):
    try:
        return [float(c) for c in cells]
    except ValueError as exc:
        raise InputError(f"{path}, line {line}: {exc}") from None


def read_response(path):
    rows = _read_rows(path)
    if [c.strip() for c in rows[0]] != ["y"]:
        raise InputError(f"{path}: response file must have the single header 'y'")
    values = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 1:
            raise InputError(f"{path}, line {i}: expected one column")
        values.extend(_floats(row, path, i))
    if not values:
        raise InputError(f"{path}: no observations")
    return np.array(values)


def read_functional(path):
    rows = _read_rows(path)
    head = rows[0]
    if head[0].strip() != "t" or len(head) < 3:
        raise InputError(f"{path}: first row must be 't' followed by the grid values")
    grid = np.array(_floats(head[1:], path, 1))
    values = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != grid.size + 1:
            raise InputError(f"{path}, line {i}: expected {grid.size + 1} columns, got {len(row)}")
        values.append(_floats(row[1:], path, i))
    if not values:
        raise InputError(f"{path}: no observations")
    return Covariate(grid, np.array(values))


def read_scalars(path):
    rows = _read_rows(path)
    names = [c.strip() for c in rows[0]]
    values = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(names):
            raise InputError(f"{path}, line {i}: expected {len(names)} columns")
        values.append(_floats(row, path, i))
    if not values:
        raise InputError(f"{path}: no observations")
    return names, np.array(values)


def write_response(path, y):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("y\n")
        for v in y:
            fh.write(fmt(v) + "\n")


def write_functional(path, covariate):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["t"] + [fmt(t) for t in covariate.grid]) + "\n")
        for i, row in enumerate(covariate.values, start=1):
            fh.write(",".join([str(i)] + [fmt(v) for v in row]) + "\n")


def write_scalars(path, names, values):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in np.atleast_2d(values):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path, obj):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


@dataclass
class RunConfig:
    """Validated contents of a JSON run configuration (paths resolved)."""

    response: Path
    covariates: List[Path]
    scalar_covariates: Optional[Path] = None
    K_list: List[int] = field(default_factory=lambda: [4])
    prior: PriorConfig = field(default_factory=PriorConfig)
    n_restarts: int = 50
    seed: int = 0
    partial: bool = False
    bands: Optional[BandConfig] = None

    @property
    def K(self):
        return self.K_list[0]

    def fit_config(self, K=None):
        return FitConfig(K=self.K if K is None else int(K), prior=self.prior,
                         n_restarts=self.n_restarts, seed=self.seed, partial=self.partial,
                         bands=self.bands)


def _require(cond, message):
    if not cond:
        raise InputError(message)


def _number(value, key):
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"config: {key} must be a number")
    return value


def load_config(path):
    """Parse and validate a run configuration; relative paths are resolved
    against the configuration file's directory."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    _require(isinstance(raw, dict), "config: top level must be an object")
    unknown = set(raw) - CONFIG_KEYS
    _require(not unknown, f"config: unknown keys {sorted(unknown)}")
    _require("response" in raw and "covariates" in raw, "config: 'response' and 'covariates' are required")
    _require(isinstance(raw["covariates"], list) and raw["covariates"]
             and all(isinstance(c, str) for c in raw["covariates"]),
             "config: covariates must be a non-empty list of paths")
    base = path.parent

    def resolve(p):
        _require(isinstance(p, str), "config: paths must be strings")
        return (base / p) if not Path(p).is_absolute() else Path(p)

    _require(not ("K" in raw and "K_list" in raw), "config: give K or K_list, not both")
    K_list = raw.get("K_list", [raw.get("K", 4)])
    _require(isinstance(K_list, list) and K_list
             and all(isinstance(k, int) and not isinstance(k, bool) and k >= 4 for k in K_list),
             "config: K values must be integers >= 4")

    priors = raw.get("priors", {}) or {}
    _require(isinstance(priors, dict), "config: priors must be an object")
    unknown = set(priors) - PRIOR_KEYS
    _require(not unknown, f"config: unknown prior keys {sorted(unknown)}")
    prior_kwargs = {}
    for key in ("delta1", "delta2", "lambda2_init", "chi_init"):
        if key in priors:
            prior_kwargs[key] = float(_number(priors[key], f"priors.{key}"))
    if "sigma2_init" in priors:
        prior_kwargs["sigma2_mean_init"] = float(_number(priors["sigma2_init"], "priors.sigma2_init"))
    if "tol" in raw:
        prior_kwargs["tol"] = float(_number(raw["tol"], "tol"))
    if "max_iter" in raw:
        _require(isinstance(raw["max_iter"], int), "config: max_iter must be an integer")
        prior_kwargs["max_iter"] = raw["max_iter"]
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
             "config: seed must be a non-negative integer")
    prior = PriorConfig(seed=seed, **prior_kwargs)

    n_restarts = raw.get("n_restarts", 50)
    _require(isinstance(n_restarts, int) and n_restarts >= 1, "config: n_restarts must be a positive integer")
    partial = raw.get("partial", False)
    _require(isinstance(partial, bool), "config: partial must be true or false")

    bands = raw.get("bands")
    if bands is not None:
        _require(isinstance(bands, dict), "config: bands must be an object or null")
        unknown = set(bands) - BAND_KEYS
        _require(not unknown, f"config: unknown band keys {sorted(unknown)}")
        bands = BandConfig(n_samples=int(_number(bands.get("n_samples", 200), "bands.n_samples")),
                           level=float(_number(bands.get("level", 0.95), "bands.level")))
    scal = raw.get("scalar_covariates")
    return RunConfig(
        response=resolve(raw["response"]),
        covariates=[resolve(c) for c in raw["covariates"]],
        scalar_covariates=resolve(scal) if scal is not None else None,
        K_list=list(K_list), prior=prior, n_restarts=n_restarts, seed=seed,
        partial=partial, bands=bands,
    )


def load_dataset(config):
    """Read the files named by a :class:`RunConfig` into a dataset."""
    y = read_response(config.response)
    covs = [read_functional(p) for p in config.covariates]
    names = [Path(p).stem for p in config.covariates]
    Xs, snames = None, None
    if config.scalar_covariates is not None:
        snames, Xs = read_scalars(config.scalar_covariates)
    return FunctionalDataset(y, covs, scalar_covariates=Xs, names=names, scalar_names=snames)


def fit_to_dict(fit, K):
    """JSON-ready summary of an original-scale fit."""
    state = fit.state
    out = {
        "scale": fit.scale,
        "K": int(K),
        "names": list(fit.names),
        "selected": [int(v) for v in fit.selected],
        "pz": [float(v) for v in fit.pz],
        "intercept": float(fit.intercept),
        "elbo": float(fit.elbo),
        "elbo_trace": [float(v) for v in fit.elbo_trace.values],
        "converged": bool(fit.converged),
        "n_iter": int(fit.n_iter),
        "lambda2": [float(v) for v in state.lambda2],
        "sigma2_mean": float(state.delta2_star / (state.delta1_star - 1.0)),
    }
    if fit.partial:
        out.update({
            "scalar_names": list(fit.scalar_names),
            "selected_scalar": [int(v) for v in fit.selected_scalar],
            "pu": [float(v) for v in fit.pu],
            "alpha_hat": [float(v) for v in fit.alpha_hat],
            "lambda2_alpha": [float(v) for v in state.lambda2_alpha],
        })
    diag = fit.diagnostics
    if "restart_elbos" in diag:
        out["restarts"] = {
            "best": int(diag["best_restart"]),
            "elbos": [float(v) for v in diag["restart_elbos"]],
            "failed": [[int(r), str(m)] for r, m in diag.get("failed_restarts", [])],
        }
    return out


def write_curves(path, fit):
    """Long-format curves: ``covariate,t,estimate,lower,upper`` (band columns empty without bands)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("covariate,t,estimate,lower,upper\n")
        for j, (name, grid, curve) in enumerate(zip(fit.names, fit.grids, fit.beta_curves)):
            band = fit.bands[j] if fit.bands is not None else None
            for m, t in enumerate(grid):
                lo = fmt(band[0][m]) if band is not None else ""
                hi = fmt(band[1][m]) if band is not None else ""
                fh.write(f"{name},{fmt(t)},{fmt(curve[m])},{lo},{hi}\n")


def summary_text(fit, K):
    lines = [f"K = {K}, converged = {fit.converged} after {fit.n_iter} iterations",
             f"final ELBO = {fit.elbo:.6f}", f"intercept = {fit.intercept:.6f}", "",
             "functional covariates (inclusion probability, selected):"]
    for name, p, s in zip(fit.names, fit.pz, fit.selected):
        lines.append(f"  {name:<20s} {p:8.4f}  {'yes' if s else 'no'}")
    if fit.partial:
        lines.append("scalar covariates (inclusion probability, selected, effect):")
        for name, p, s, a in zip(fit.scalar_names, fit.pu, fit.selected_scalar, fit.alpha_hat):
            lines.append(f"  {name:<20s} {p:8.4f}  {'yes' if s else 'no':<4s} {a: .6f}")
    return "\n".join(lines) + "\n"
