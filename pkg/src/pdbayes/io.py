"""Readers and writers for clouds, diagrams, model configs, posteriors and reports.

Structured data is JSON, tabular data is CSV. Every writer goes through a
temporary file in the destination directory followed by an atomic rename, so a
failed write never leaves a partial file behind.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .persistence import PersistenceDiagram, as_cloud
from .pointprocess import (
    BinomialCardinality,
    GaussianMixtureIntensity,
    IidClusterPrior,
    ModelConfig,
    ObservationModel,
    UnexpectedModel,
)
from .posterior import CardinalityPmf, PosteriorDistribution


class ConfigError(ValueError):
    """A configuration file is missing keys, has unknown keys, or has out-of-range values."""


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------


def parse_point_cloud(text: str, header: bool = False) -> np.ndarray:
    """Parse CSV text, one point per line. Blank lines and ``#`` comments are skipped.

    With ``header=True`` the first non-comment line is skipped.
    """
    rows = []
    dim = None
    skip_header = header
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if skip_header:
            skip_header = False
            continue
        fields = [f.strip() for f in next(csv.reader([line]))]
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise ValueError(f"line {lineno}: cannot parse {raw!r} as numbers") from None
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"line {lineno}: non-finite coordinate")
        if dim is None:
            dim = len(vals)
        elif len(vals) != dim:
            raise ValueError(f"line {lineno}: expected {dim} coordinates, found {len(vals)}")
        rows.append(vals)
    if not rows:
        raise ValueError("point cloud file contains no points")
    return as_cloud(np.array(rows, dtype=float))


def read_point_cloud(path, header: bool = False) -> np.ndarray:
    return parse_point_cloud(Path(path).read_text(encoding="utf-8"), header=header)


def format_point_cloud(cloud) -> str:
    cloud = as_cloud(cloud)
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in cloud)


def write_point_cloud(path, cloud) -> None:
    atomic_write_text(path, format_point_cloud(cloud))


# ---------------------------------------------------------------------------
# Diagrams
# ---------------------------------------------------------------------------


def diagram_to_dict(pd: PersistenceDiagram) -> dict:
    return {"dim": int(pd.dim), "points": [[float(b), float(p)] for b, p in pd.points]}


def diagram_from_dict(obj) -> PersistenceDiagram:
    if not isinstance(obj, dict):
        raise ValueError("diagram must be a JSON object")
    unknown = set(obj) - {"dim", "points"}
    if unknown:
        raise ValueError(f"unknown diagram keys: {sorted(unknown)}")
    for key in ("dim", "points"):
        if key not in obj:
            raise ValueError(f"diagram is missing key {key!r}")
    dim = obj["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 0:
        raise ValueError("diagram 'dim' must be a nonnegative integer")
    pts = obj["points"]
    if not isinstance(pts, list) or any(not isinstance(p, list) or len(p) != 2 for p in pts):
        raise ValueError("diagram 'points' must be a list of [birth, persistence] pairs")
    return PersistenceDiagram(dim, np.array(pts, dtype=float).reshape(-1, 2))


def read_diagram(path) -> PersistenceDiagram:
    return diagram_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_diagram(path, pd: PersistenceDiagram) -> None:
    atomic_write_text(path, _dump_json(diagram_to_dict(pd)))


# ---------------------------------------------------------------------------
# Model configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    b_max: float = 1.0
    p_max: float = 1.0
    nb: int = 100
    np_: int = 100


@dataclass(frozen=True)
class ClassifierSpec:
    c: float = 1.0
    k: int = 10
    seed: int = 0
    subsample: int | None = None
    strategy: str = "top_persistence"


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    grid: GridSpec = field(default_factory=GridSpec)
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)


def _take(block: dict, where: str, required, optional=()):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(block) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in block]
    if missing:
        raise ConfigError(f"{where}: missing keys {missing}")
    return block


def _number(block, key, where, lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{where}.{key} must be a finite number")
    low_bad = val <= lo if lo_open else val < lo
    high_bad = val >= hi if hi_open else val > hi
    if low_bad or high_bad:
        lb = "(" if lo_open else "["
        hb = ")" if hi_open else "]"
        raise ConfigError(f"{where}.{key}={val} is out of range {lb}{lo}, {hi}{hb}")
    return float(val)


def _integer(block, key, where, lo=0):
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, int) or val < lo:
        raise ConfigError(f"{where}.{key} must be an integer >= {lo}")
    return val


def config_from_dict(obj) -> RunConfig:
    """Validate a parsed config object and build the model objects."""
    top = _take(obj, "config", ["prior", "obs", "unexpected"], ["N_max", "grid", "classifier"])

    prior = _take(top["prior"], "prior", ["components", "N0", "rho_x"])
    comps = prior["components"]
    if not isinstance(comps, list) or not comps:
        raise ConfigError("prior.components must be a nonempty list")
    triples = []
    for i, comp in enumerate(comps):
        where = f"prior.components[{i}]"
        _take(comp, where, ["c", "mu", "sigma"])
        mu = comp["mu"]
        if not isinstance(mu, list) or len(mu) != 2:
            raise ConfigError(f"{where}.mu must be [birth, persistence]")
        mu_block = {"b": mu[0], "p": mu[1]}
        b = _number(mu_block, "b", f"{where}.mu", lo=0.0)
        p = _number(mu_block, "p", f"{where}.mu", lo=0.0)
        triples.append(
            (_number(comp, "c", where, lo=0.0, lo_open=True), (b, p), _number(comp, "sigma", where, lo=0.0, lo_open=True))
        )
    n0 = _integer(prior, "N0", "prior")
    rho_x = _number(prior, "rho_x", "prior", 0.0, 1.0)

    ob = _take(top["obs"], "obs", ["alpha", "sigma_yo"])
    alpha = _number(ob, "alpha", "obs", 0.0, 1.0)
    sigma_yo = _number(ob, "sigma_yo", "obs", lo=0.0, lo_open=True)

    un = _take(top["unexpected"], "unexpected", ["mu_yu", "M0", "rho_y"])
    mu_yu = _number(un, "mu_yu", "unexpected", lo=0.0, lo_open=True)
    m0 = _integer(un, "M0", "unexpected")
    rho_y = _number(un, "rho_y", "unexpected", 0.0, 1.0)

    n_max = None
    if "N_max" in top:
        n_max = _integer(top, "N_max", "config")
        if n_max < n0 and rho_x > 0:
            raise ConfigError("config.N_max must be >= prior.N0")

    grid = GridSpec()
    if "grid" in top:
        g = _take(top["grid"], "grid", [], ["b_max", "p_max", "nb", "np"])
        grid = GridSpec(
            b_max=_number(g, "b_max", "grid", lo=0.0, lo_open=True) if "b_max" in g else grid.b_max,
            p_max=_number(g, "p_max", "grid", lo=0.0, lo_open=True) if "p_max" in g else grid.p_max,
            nb=_integer(g, "nb", "grid", lo=1) if "nb" in g else grid.nb,
            np_=_integer(g, "np", "grid", lo=1) if "np" in g else grid.np_,
        )

    clf = ClassifierSpec()
    if "classifier" in top:
        cb = _take(top["classifier"], "classifier", [], ["c", "k", "seed", "subsample", "strategy"])
        strategy = cb.get("strategy", clf.strategy)
        if strategy not in ("top_persistence", "uniform_random"):
            raise ConfigError("classifier.strategy must be 'top_persistence' or 'uniform_random'")
        clf = ClassifierSpec(
            c=_number(cb, "c", "classifier", lo=0.0, lo_open=True) if "c" in cb else clf.c,
            k=_integer(cb, "k", "classifier", lo=2) if "k" in cb else clf.k,
            seed=_integer(cb, "seed", "classifier") if "seed" in cb else clf.seed,
            subsample=(
                None if cb.get("subsample") is None else _integer(cb, "subsample", "classifier", lo=1)
            ),
            strategy=strategy,
        )

    model = ModelConfig(
        prior=IidClusterPrior(
            GaussianMixtureIntensity.from_components(triples), BinomialCardinality(n0, rho_x)
        ),
        obs=ObservationModel(alpha, sigma_yo),
        unexpected=UnexpectedModel(mu_yu, BinomialCardinality(m0, rho_y)),
        n_max=n_max,
    )
    return RunConfig(model=model, grid=grid, classifier=clf)


def read_config(path) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(obj)


def shipped_config_path(name: str) -> Path:
    """Path of a config bundled with the package, e.g. ``"network"``."""
    path = resources.files("pdbayes") / "data" / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(f"no shipped config named {name!r}")
    return Path(str(path))


def load_shipped_config(name: str) -> RunConfig:
    return read_config(shipped_config_path(name))


# ---------------------------------------------------------------------------
# Posteriors, grids, reports, manifests
# ---------------------------------------------------------------------------


def posterior_to_dict(post: PosteriorDistribution) -> dict:
    pri = post.prior_intensity
    return {
        "cardinality": [float(v) for v in post.cardinality.probs],
        "vanished_scale": float(post.vanished_scale),
        "components": [
            {"C": float(c), "mu": [float(mu[0]), float(mu[1])], "sigma": float(s)}
            for c, mu, s in zip(post.weights, post.means, post.variances)
        ],
        "prior_components": [
            {"c": float(c), "mu": [float(mu[0]), float(mu[1])], "sigma": float(s)}
            for c, mu, s in zip(pri.weights, pri.means, pri.variances)
        ],
        "m": int(post.m),
    }


def posterior_from_dict(obj) -> PosteriorDistribution:
    _take(obj, "posterior", ["cardinality", "vanished_scale", "components", "prior_components", "m"])
    comps = obj["components"]
    return PosteriorDistribution(
        prior_intensity=GaussianMixtureIntensity.from_components(
            [(c["c"], tuple(c["mu"]), c["sigma"]) for c in obj["prior_components"]]
        ),
        vanished_scale=float(obj["vanished_scale"]),
        weights=np.array([c["C"] for c in comps], dtype=float),
        means=np.array([c["mu"] for c in comps], dtype=float).reshape(-1, 2),
        variances=np.array([c["sigma"] for c in comps], dtype=float),
        cardinality=CardinalityPmf(obj["cardinality"]),
        m=int(obj["m"]),
    )


def write_posterior(path, post: PosteriorDistribution) -> None:
    atomic_write_text(path, _dump_json(posterior_to_dict(post)))


def read_posterior(path) -> PosteriorDistribution:
    return posterior_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _format_csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v) for v in row])
    return buf.getvalue()


def write_grid(path, rows) -> None:
    """Intensity grid rows (b, p, normalized_intensity)."""
    atomic_write_text(path, _format_csv(["b", "p", "normalized_intensity"], rows))


def write_pmf(path, probs) -> None:
    atomic_write_text(path, _format_csv(["n", "probability"], [(int(n), float(p)) for n, p in enumerate(probs)]))


def write_json(path, obj) -> None:
    atomic_write_text(path, _dump_json(obj))


def read_manifest(path):
    """Labeled diagrams from a JSON list of {"label": str, "diagram": path-or-inline}.

    Relative diagram paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(entries, list) or not entries:
        raise ValueError("manifest must be a nonempty JSON list")
    out = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or set(entry) != {"label", "diagram"}:
            raise ValueError(f"manifest entry {i} must have exactly the keys 'label' and 'diagram'")
        label = entry["label"]
        if not isinstance(label, str):
            raise ValueError(f"manifest entry {i}: label must be a string")
        diag = entry["diagram"]
        if isinstance(diag, str):
            p = Path(diag)
            pd = read_diagram(p if p.is_absolute() else path.parent / p)
        else:
            pd = diagram_from_dict(diag)
        out.append((label, pd))
    return out


def write_manifest(path, labeled) -> None:
    """Write labeled diagrams inline."""
    write_json(path, [{"label": str(lbl), "diagram": diagram_to_dict(pd)} for lbl, pd in labeled])
