"""Batch driver: config file in, CSV tables and a text report out.

Usage::

    python -m deltasurf CONFIG [--validate] [--output-dir DIR] [--seed N] [--jobs N]

The config is an INI file; every section and key is listed in ``SCHEMA``
below and documented in the README.  The exit status is 0 when every
enabled check passes, 1 when one fails, 2 on a configuration error and 3
when a pipeline aborts.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DeltaSurfError, InsufficientData, PipelineError

log = logging.getLogger("deltasurf")

PIPELINES = ("geometry", "comparison", "bracketing", "bs", "squeeze", "variational")

SCHEMA: dict[str, dict[str, str]] = {
    "surface": {
        "family": "plane | gaussian | paraboloid | hyperboloid | graph",
        "h": "bump height (gaussian)",
        "w": "bump width (gaussian)",
        "a": "curvature radius (paraboloid, hyperboloid)",
        "f": "height expression in x, y (graph)",
        "fx": "expression for df/dx (graph, optional)",
        "fy": "expression for df/dy (graph, optional)",
        "fxx": "expression for d2f/dx2 (graph, optional)",
        "fxy": "expression for d2f/dxdy (graph, optional)",
        "fyy": "expression for d2f/dy2 (graph, optional)",
        "length_scale": "geometric length scale (graph)",
    },
    "grid": {
        "L": "half-side of the truncation square",
        "ds": "lattice spacing",
        "stretch": "sinh grading length, empty for a uniform lattice",
        "Nu": "transverse samples of the layer fields",
        "r_max": "radius of the radial oracle disc (geodesic)",
        "dr": "step of the radial oracle",
        "scale_guard": "minimum L in units of the length scale",
    },
    "patch": {
        "L": "half-side of the patch used for bracketing",
        "ds": "lattice spacing of the bracketing patch",
        "bs_ds": "lattice spacing of the two-dimensional direct solver",
        "support_radius": "disc radius of the direct solver on radial surfaces (default patch L)",
        "window": "search below -alpha^2/4 + window for patch eigenvalues",
    },
    "sweep": {
        "alphas": "comma separated couplings",
        "range": "a0, a1, points_per_decade (geometric)",
        "j_max": "number of eigenvalue branches",
        "C_N": "constant of the essential-spectrum threshold",
    },
    "solver": {
        "eig_tol": "relative eigen-residual tolerance",
        "root_tol": "absolute tolerance of the kappa root search",
        "maxiter": "Lanczos iteration cap (empty for the default)",
        "seed": "seed of the Lanczos start vectors",
        "memory_limit_gb": "threshold of the memory diagnostic",
    },
    "pipelines": {p: "yes | no" for p in PIPELINES},
    "squeeze": {
        "alpha": "coupling",
        "d": "comma separated half-widths",
        "profiles": "square, triangle",
        "dR": "radial step",
        "d_box": "half-height of the box (default 0.9 rho, or d + 40 / alpha when flat)",
    },
    "variational": {
        "alpha": "coupling",
        "sigma": "comma separated sigma values",
        "r0": "comma separated r0 values",
        "form": "separated | layer",
    },
    "output": {"dir": "output directory"},
}


@dataclass
class SurfaceConfig:
    family: str
    params: dict[str, float] = field(default_factory=dict)
    expressions: dict[str, str] = field(default_factory=dict)


@dataclass
class GridConfig:
    L: float = 12.0
    ds: float = 0.1
    stretch: float | None = None
    Nu: int = 9
    r_max: float = 12.0
    dr: float = 0.01
    scale_guard: float = 10.0


@dataclass
class PatchConfig:
    L: float = 6.0
    ds: float = 0.05
    bs_ds: float = 0.1
    support_radius: float | None = None
    window: float = 5.0


@dataclass
class SweepConfig:
    alphas: tuple[float, ...] = ()
    j_max: int = 1
    C_N: float = 2.0


@dataclass
class SolverConfig:
    eig_tol: float = 1e-8
    root_tol: float = 1e-10
    maxiter: int | None = None
    seed: int = 0
    memory_limit_gb: float = 4.0


@dataclass
class SqueezeConfig:
    alpha: float = 60.0
    ds: tuple[float, ...] = (0.00625, 0.003125, 0.0015625)
    profiles: tuple[str, ...] = ("square", "triangle")
    dR: float = 0.02
    d_box: float | None = None


@dataclass
class VariationalConfig:
    alpha: float = 50.0
    sigmas: tuple[float, ...] = (0.003, 0.01, 0.03, 0.1)
    r0s: tuple[float, ...] = (0.5, 1.0, 2.0)
    form: str = "separated"


@dataclass
class RunConfig:
    surface: SurfaceConfig
    grid: GridConfig = field(default_factory=GridConfig)
    patch: PatchConfig = field(default_factory=PatchConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    squeeze: SqueezeConfig = field(default_factory=SqueezeConfig)
    variational: VariationalConfig = field(default_factory=VariationalConfig)
    pipelines: frozenset[str] = frozenset(PIPELINES)
    output_dir: Path = Path("out")
    jobs: int = 1


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}", key) from exc


def _float(sec, name, default, key):
    if name not in sec or sec[name].strip() == "":
        return default
    try:
        return float(sec[name])
    except ValueError as exc:
        raise ConfigError(f"not a number: {sec[name]!r}", key) from exc


def _int(sec, name, default, key):
    if name not in sec or sec[name].strip() == "":
        return default
    try:
        return int(sec[name])
    except ValueError as exc:
        raise ConfigError(f"not an integer: {sec[name]!r}", key) from exc


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Parse INI text into a validated :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}", "<file>") from exc
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", sec)
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r}", f"{sec}.{key}")
    if "surface" not in cp or "family" not in cp["surface"]:
        raise ConfigError("missing surface family", "surface.family")
    s = cp["surface"]
    fam = s["family"].strip().lower()
    if fam not in ("plane", "gaussian", "paraboloid", "hyperboloid", "graph"):
        raise ConfigError(f"unknown family {fam!r}", "surface.family")
    params = {}
    for name in ("h", "w", "a", "length_scale"):
        if name in s:
            params[name] = _float(s, name, None, f"surface.{name}")
    exprs = {k: s[k] for k in ("f", "fx", "fy", "fxx", "fxy", "fyy") if k in s}
    if fam == "graph" and "f" not in exprs:
        raise ConfigError("graph family needs an expression f", "surface.f")
    cfg = RunConfig(SurfaceConfig(fam, params, exprs))

    def sec(name):
        return cp[name] if name in cp else {}

    g = sec("grid")
    cfg.grid = GridConfig(
        L=_float(g, "L", 12.0, "grid.L"),
        ds=_float(g, "ds", 0.1, "grid.ds"),
        stretch=_float(g, "stretch", None, "grid.stretch"),
        Nu=_int(g, "Nu", 9, "grid.Nu"),
        r_max=_float(g, "r_max", 12.0, "grid.r_max"),
        dr=_float(g, "dr", 0.01, "grid.dr"),
        scale_guard=_float(g, "scale_guard", 10.0, "grid.scale_guard"),
    )
    p = sec("patch")
    cfg.patch = PatchConfig(
        L=_float(p, "L", 6.0, "patch.L"),
        ds=_float(p, "ds", 0.05, "patch.ds"),
        bs_ds=_float(p, "bs_ds", 0.1, "patch.bs_ds"),
        support_radius=_float(p, "support_radius", None, "patch.support_radius"),
        window=_float(p, "window", 5.0, "patch.window"),
    )
    w = sec("sweep")
    alphas: tuple[float, ...] = ()
    if "alphas" in w and w["alphas"].strip():
        alphas = _floats(w["alphas"], "sweep.alphas")
    if "range" in w and w["range"].strip():
        r = _floats(w["range"], "sweep.range")
        if len(r) != 3:
            raise ConfigError("range needs a0, a1, points_per_decade", "sweep.range")
        from .bracketing import geometric_sweep

        alphas = alphas + tuple(float(a) for a in geometric_sweep(r[0], r[1], int(r[2])))
    cfg.sweep = SweepConfig(alphas, _int(w, "j_max", 1, "sweep.j_max"), _float(w, "C_N", 2.0, "sweep.C_N"))
    o = sec("solver")
    cfg.solver = SolverConfig(
        eig_tol=_float(o, "eig_tol", 1e-8, "solver.eig_tol"),
        root_tol=_float(o, "root_tol", 1e-10, "solver.root_tol"),
        maxiter=_int(o, "maxiter", None, "solver.maxiter"),
        seed=_int(o, "seed", 0, "solver.seed"),
        memory_limit_gb=_float(o, "memory_limit_gb", 4.0, "solver.memory_limit_gb"),
    )
    pl = sec("pipelines")
    enabled = set(PIPELINES)
    for name in PIPELINES:
        if name in pl:
            val = pl[name].strip().lower()
            if val not in ("yes", "no", "true", "false", "on", "off", "1", "0"):
                raise ConfigError(f"expected yes or no, got {val!r}", f"pipelines.{name}")
            if val in ("no", "false", "off", "0"):
                enabled.discard(name)
    cfg.pipelines = frozenset(enabled)
    q = sec("squeeze")
    cfg.squeeze = SqueezeConfig(
        alpha=_float(q, "alpha", 60.0, "squeeze.alpha"),
        ds=_floats(q["d"], "squeeze.d") if "d" in q else SqueezeConfig.ds,
        profiles=tuple(t.strip() for t in q["profiles"].split(",")) if "profiles" in q else SqueezeConfig.profiles,
        dR=_float(q, "dR", 0.02, "squeeze.dR"),
        d_box=_float(q, "d_box", None, "squeeze.d_box"),
    )
    v = sec("variational")
    cfg.variational = VariationalConfig(
        alpha=_float(v, "alpha", 50.0, "variational.alpha"),
        sigmas=_floats(v["sigma"], "variational.sigma") if "sigma" in v else VariationalConfig.sigmas,
        r0s=_floats(v["r0"], "variational.r0") if "r0" in v else VariationalConfig.r0s,
        form=v.get("form", "separated").strip(),
    )
    out = sec("output")
    if "dir" in out:
        d = Path(out["dir"])
        cfg.output_dir = d if d.is_absolute() or base_dir is None else base_dir / d
    check_config(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return parse_config(text, path.parent)


def check_config(cfg: RunConfig) -> None:
    """Raise ConfigError on invalid values; warn on an under-resolved lattice."""
    positive = {
        "grid.L": cfg.grid.L,
        "grid.ds": cfg.grid.ds,
        "grid.r_max": cfg.grid.r_max,
        "grid.dr": cfg.grid.dr,
        "patch.L": cfg.patch.L,
        "patch.ds": cfg.patch.ds,
        "patch.bs_ds": cfg.patch.bs_ds,
        "patch.window": cfg.patch.window,
        "sweep.C_N": cfg.sweep.C_N,
        "solver.eig_tol": cfg.solver.eig_tol,
        "solver.root_tol": cfg.solver.root_tol,
        "solver.memory_limit_gb": cfg.solver.memory_limit_gb,
        "squeeze.alpha": cfg.squeeze.alpha,
        "squeeze.dR": cfg.squeeze.dR,
        "variational.alpha": cfg.variational.alpha,
    }
    for key, val in positive.items():
        if not (val > 0):
            raise ConfigError(f"must be positive, got {val}", key)
    for key, vals in (
        ("sweep.alphas", cfg.sweep.alphas),
        ("squeeze.d", cfg.squeeze.ds),
        ("variational.sigma", cfg.variational.sigmas),
        ("variational.r0", cfg.variational.r0s),
    ):
        if any(not (x > 0) for x in vals):
            raise ConfigError("values must be positive", key)
    if cfg.sweep.j_max < 1:
        raise ConfigError("must be at least 1", "sweep.j_max")
    if cfg.grid.Nu < 8:
        raise ConfigError("at least 8 transverse samples are needed", "grid.Nu")
    if cfg.solver.maxiter is not None and cfg.solver.maxiter < 1:
        raise ConfigError("must be positive", "solver.maxiter")
    if cfg.patch.support_radius is not None and not 0 < cfg.patch.support_radius <= cfg.patch.L:
        raise ConfigError("must lie in (0, patch.L]", "patch.support_radius")
    if cfg.variational.form not in ("separated", "layer"):
        raise ConfigError(f"unknown form {cfg.variational.form!r}", "variational.form")
    for prof in cfg.squeeze.profiles:
        if prof not in ("square", "triangle"):
            raise ConfigError(f"unknown profile {prof!r}", "squeeze.profiles")
    fam, prm = cfg.surface.family, cfg.surface.params
    for name in {"gaussian": ("h", "w"), "paraboloid": ("a",), "hyperboloid": ("a",)}.get(fam, ()):
        if name in prm and not prm[name] > 0:
            raise ConfigError("must be positive", f"surface.{name}")
    scale = build_model(cfg.surface).length_scale
    if fam != "plane" and cfg.grid.ds >= scale / 10.0:
        warnings.warn(
            f"grid.ds = {cfg.grid.ds} is not below length_scale / 10 = {scale / 10:.6g}; curvature is under-resolved",
            stacklevel=2,
        )


_SAFE = {name: getattr(np, name) for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "arctan", "abs", "pi")}


def _expr(text: str, key: str):
    try:
        code = compile(text, key, "eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {text!r}", key) from exc
    bad = [n for n in code.co_names if n not in _SAFE and n not in ("x", "y")]
    if bad:
        raise ConfigError(f"unknown names {bad} in expression", key)

    def fun(x, y):
        out = eval(code, {"__builtins__": {}}, dict(_SAFE, x=x, y=y))
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)

    return fun


def build_model(sc: SurfaceConfig):
    from . import geometry as G

    p = sc.params
    if sc.family == "plane":
        return G.plane()
    if sc.family == "gaussian":
        return G.gaussian_bump(p.get("h", 1.0), p.get("w", 1.0))
    if sc.family == "paraboloid":
        return G.paraboloid(p.get("a", 1.0))
    if sc.family == "hyperboloid":
        return G.hyperboloid(p.get("a", 1.0))
    e = sc.expressions
    f = _expr(e["f"], "surface.f")
    grad = hess = None
    if "fx" in e and "fy" in e:
        fx, fy = _expr(e["fx"], "surface.fx"), _expr(e["fy"], "surface.fy")
        grad = lambda x, y: (fx(x, y), fy(x, y))  # noqa: E731
    if all(k in e for k in ("fxx", "fxy", "fyy")):
        fxx, fxy, fyy = (_expr(e[k], f"surface.{k}") for k in ("fxx", "fxy", "fyy"))
        hess = lambda x, y: (fxx(x, y), fxy(x, y), fyy(x, y))  # noqa: E731
    return G.general_graph(f, grad, hess, p.get("length_scale", 1.0), "graph")


# ---------------------------------------------------------------------------
# Dry run
# ---------------------------------------------------------------------------


@dataclass
class Diagnostic:
    level: str
    message: str

    def __str__(self) -> str:
        return f"[{self.level}] {self.message}"


def _nodes(L: float, ds: float, stretch: float | None) -> int:
    if stretch is None:
        n = int(round(2 * L / ds)) + 1
    else:
        n = 2 * int(math.ceil(stretch * math.asinh(L / stretch) / ds)) + 1
    return n * n


def memory_estimate(n_nodes: int, count: int = 1) -> float:
    """Bytes for assembling and shift-invert solving a 9-point operator on ``n_nodes`` nodes.

    Counts the stiffness matrix, the Lanczos basis and a sparse LU whose
    fill is taken as 200 entries per row, which is what SuperLU reaches on
    the lattices used here.
    """
    per_row = 9 * 12 + (count + 24) * 8 + 200 * 12
    return float(n_nodes * per_row)


def _runtime_class(n_nodes: int) -> str:
    if n_nodes < 2e4:
        return "seconds"
    if n_nodes < 3e5:
        return "minutes"
    return "hours"


def validate(cfg: RunConfig) -> list[Diagnostic]:
    """Dry-run diagnostics: dropped sweep points, memory and runtime class."""
    from .bracketing import layer_width
    from .geometry import build_geometry

    out = []
    model = build_model(cfg.surface)
    needs_sweep = {"bracketing", "bs"} & cfg.pipelines
    if not cfg.pipelines or (needs_sweep == cfg.pipelines and not cfg.sweep.alphas):
        out.append(Diagnostic("info", "nothing to run"))
        return out
    if needs_sweep and not cfg.sweep.alphas:
        out.append(Diagnostic("info", "empty sweep: bracketing and bs have nothing to run"))
    ds0 = max(cfg.patch.L / 60.0, cfg.patch.ds)
    coarse = build_geometry(model, cfg.patch.L, ds0, scale_guard=None)
    rho = coarse.rho
    out.append(Diagnostic("info", f"rho = {rho:.6g} (sampled on a lattice of spacing {ds0:.3g})"))
    for a in cfg.sweep.alphas:
        d = layer_width(a)
        if d >= rho:
            out.append(Diagnostic("warning", f"alpha = {a:g}: d(alpha) = {d:.6g} >= rho = {rho:.6g}: point will be dropped"))
    limit = cfg.solver.memory_limit_gb * 2**30
    for label, L, ds, st in (
        ("grid", cfg.grid.L, cfg.grid.ds, cfg.grid.stretch),
        ("patch", cfg.patch.L, cfg.patch.ds, None),
    ):
        n = _nodes(L, ds, st)
        mem = memory_estimate(n, cfg.sweep.j_max)
        lvl = "warning" if mem > limit else "info"
        msg = f"{label}: {n} nodes, about {mem / 2**30:.3g} GiB, runtime class {_runtime_class(n)}"
        if mem > limit:
            msg += f" (over the {cfg.solver.memory_limit_gb:g} GiB threshold)"
        out.append(Diagnostic(lvl, msg))
    if "squeeze" in cfg.pipelines and not model.is_radial:
        out.append(Diagnostic("warning", "squeeze needs a radial surface and will be skipped"))
    return out


# ---------------------------------------------------------------------------
# Run
# ---------------------------------------------------------------------------


class Report:
    """Collects report lines, warnings and check verdicts."""

    def __init__(self):
        self.lines: list[str] = []
        self.warnings: list[str] = []
        self.checks: list[tuple[str, bool]] = []

    def section(self, title: str) -> None:
        self.lines += ["", title, "-" * len(title)]

    def add(self, text: str) -> None:
        self.lines.append(text)

    def check(self, name: str, ok: bool) -> None:
        self.checks.append((name, bool(ok)))
        self.lines.append(f"check {name}: {'PASS' if ok else 'FAIL'}")

    @property
    def ok(self) -> bool:
        return all(ok for _, ok in self.checks)

    def text(self) -> str:
        body = ["deltasurf report"] + self.lines
        body += ["", "Warnings", "--------"] + (self.warnings or ["none"])
        body += ["", f"overall: {'PASS' if self.ok else 'FAIL'}"]
        return "\n".join(body) + "\n"


def _pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _bs_point(args):
    model, cfg, a = args
    from .birman_schwinger import find_eigenvalues, find_eigenvalues_radial
    from .geometry import build_geometry

    kmin = math.sqrt(max(a * a / 4.0 - cfg.patch.window, 1e-12))
    R = cfg.patch.support_radius or cfg.patch.L
    if model.is_radial:
        res = find_eigenvalues_radial(
            model, a, R, cfg.sweep.j_max, m_max=cfg.sweep.j_max, kappa_min=kmin, xtol=cfg.solver.root_tol, estimate_error=True
        )
    else:
        g = build_geometry(model, cfg.patch.L, cfg.patch.bs_ds, scale_guard=None)
        res = find_eigenvalues(g, a, cfg.sweep.j_max, kappa_min=kmin, xtol=cfg.solver.root_tol)
    return a, res


def _sandwich_point(args):
    geom, coarse, a, cfg, mu, disc = args
    from .bracketing import sandwich

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = sandwich(
            geom, [a], cfg.sweep.j_max, cfg.sweep.C_N, cfg.grid.Nu,
            coarse=coarse, mu=mu, seed=cfg.solver.seed, disc_radius=disc, dr=cfg.grid.dr,
        )
    return rep, [str(w.message) for w in caught]


def run(cfg: RunConfig) -> int:
    """Execute the enabled pipelines; return the exit status."""
    from . import io
    from .geometry import build_geometry, ellipticity_report, meridian_length

    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}", "output.dir") from exc
    rep = Report()
    model = build_model(cfg.surface)
    rep.add(f"surface: {model.name} {cfg.surface.params or ''}".rstrip())
    rep.add(f"pipelines: {', '.join(p for p in PIPELINES if p in cfg.pipelines) or 'none'}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            _run_pipelines(cfg, model, rep, out, io, build_geometry, ellipticity_report, meridian_length)
        except (PipelineError, ConfigError):
            raise
        except DeltaSurfError as exc:
            raise PipelineError(str(exc), type(exc).__name__) from exc
    for w in caught:
        msg = str(w.message)
        if msg not in rep.warnings:
            rep.warnings.append(msg)
    (out / "report.txt").write_text(rep.text())
    return 0 if rep.ok else 1


def _run_pipelines(cfg, model, rep, out, io, build_geometry, ellipticity_report, meridian_length):
    en = cfg.pipelines
    seed = cfg.solver.seed
    geom = None
    mu_grid = None
    if {"geometry", "comparison", "variational"} & en:
        try:
            geom = build_geometry(model, cfg.grid.L, cfg.grid.ds, stretch=cfg.grid.stretch, scale_guard=cfg.grid.scale_guard)
        except ValueError as exc:
            raise PipelineError(str(exc), f"grid.L = {cfg.grid.L}") from exc

    if "geometry" in en:
        rep.section("Geometry")
        geom.to_csv(out / "geometry.csv")
        er = ellipticity_report(geom)
        rep.add(f"c_minus = {float(er.c_minus)!r}")
        rep.add(f"c_plus = {float(er.c_plus)!r}")
        rep.add(f"rho = {float(geom.rho)!r}")
        rep.add(f"total Gauss curvature = {float(er.total_gauss)!r}")
        rep.add(f"total absolute Gauss curvature = {float(er.abs_gauss)!r} (small: {er.small_total_curvature})")
        rep.add(f"squared mean curvature integral = {float(er.total_mean_sq)!r}")
        lhs = geom.K - geom.M**2
        rhs = -0.25 * (geom.k1 - geom.k2) ** 2
        scale = np.maximum(np.abs(geom.K) + geom.M**2, np.finfo(float).tiny)
        err = float(np.max(np.abs(lhs - rhs) / scale))
        rep.add(f"max relative curvature identity defect = {err:.3e}")
        rep.check("curvature identity", err <= 1e-12)
        rep.check("uniform ellipticity", er.c_minus > 0)

    if "comparison" in en:
        from .surface_operator import assemble_S, radial_reduce_solve, solve_eigen

        rep.section("Comparison operator")
        res = solve_eigen(assemble_S(geom), cfg.sweep.j_max, seed=seed, tol=cfg.solver.eig_tol, maxiter=cfg.solver.maxiter)
        res.to_csv(out / "spectrum_S.csv")
        mu_grid = res.eigenvalues
        for j, (m, r) in enumerate(zip(res.eigenvalues, res.residuals), 1):
            rep.add(f"mu_{j} = {float(m)!r} (residual {r:.2e})")
        for c in res.clusters:
            if len(c) > 1:
                rep.add(f"cluster: indices {[i + 1 for i in c]}")
        if model.is_radial:
            rad = radial_reduce_solve(model, cfg.sweep.j_max, cfg.grid.r_max, cfg.grid.dr)
            rep.add(f"radial oracle on the geodesic disc of radius {cfg.grid.r_max:g}: mu_1 = {float(rad.eigenvalues[0])!r}")
        if not res.all_converged:
            rep.warnings.append("comparison: eigensolver did not reach the residual tolerance")
        rep.check("comparison eigensolver converged", res.all_converged)

    bs_values: dict[float, list] = {}
    if "bs" in en and cfg.sweep.alphas:
        rep.section("Direct solver")
        if model.is_radial:
            R = cfg.patch.support_radius or cfg.patch.L
            rep.add(f"interaction supported on the disc |s| <= {R:g}, axisymmetric collocation")
        else:
            rep.add(f"interaction supported on the patch square, lattice of spacing {cfg.patch.bs_ds:g}")
        rows = {k: [] for k in ("alpha", "j", "kappa", "eigenvalue", "shifted", "error")}
        for a, res in _pmap(_bs_point, [(model, cfg, a) for a in cfg.sweep.alphas], cfg.jobs):
            bs_values[a] = res
            for e in res:
                rows["alpha"].append(a)
                rows["j"].append(e.j)
                rows["kappa"].append(e.kappa)
                rows["eigenvalue"].append(e.eigenvalue)
                rows["shifted"].append(None if not e.present else e.eigenvalue + a * a / 4)
                rows["error"].append(e.error)
                txt = "none found" if not e.present else f"lambda + alpha^2/4 = {e.eigenvalue + a * a / 4:.10g}"
                rep.add(f"alpha = {a:g}, j = {e.j}: {txt}")
        io.write_csv(out / "bs.csv", "bs", rows)
        below = [a for a, res in bs_values.items() if any(e.present and e.eigenvalue < -a * a / 4 for e in res)]
        if below:
            rep.add(f"eigenvalues below -alpha^2/4 at alpha = {', '.join(f'{a:g}' for a in below)}")
        else:
            rep.add("no eigenvalue below -alpha^2/4 on the patch; values above it belong to the truncated interaction")

    if "bracketing" in en and cfg.sweep.alphas:
        from .bracketing import BracketReport, asymptotic_residuals

        rep.section("Bracketing")
        pg = build_geometry(model, cfg.patch.L, cfg.patch.ds, scale_guard=None)
        pc = None if model.is_radial else build_geometry(model, cfg.patch.L, 2 * cfg.patch.ds, scale_guard=None)
        disc = (cfg.patch.support_radius or cfg.patch.L) if model.is_radial else None
        mu, where = _patch_mu(model, cfg, pg)
        rep.add(f"layer fields on [-{cfg.patch.L:g}, {cfg.patch.L:g}]^2, spacing {cfg.patch.ds:g}")
        rep.add(f"surface operators and reference mu on the {where}: {', '.join(repr(float(m)) for m in mu)}")
        parts = _pmap(_sandwich_point, [(pg, pc, a, cfg, mu, disc) for a in cfg.sweep.alphas], cfg.jobs)
        br = BracketReport([], [], {"L": cfg.patch.L, "ds": cfg.patch.ds})
        for part, msgs in parts:
            br.rows += part.rows
            br.dropped += part.dropped
            rep.warnings.extend(msgs)
        for a, res in bs_values.items():
            br.attach_direct(a, [e.eigenvalue for e in res], tol=max((e.error for e in res if e.present and np.isfinite(e.error)), default=0.0))
        br.to_csv(out / "bracket.csv")
        for a, why in br.dropped:
            rep.add(f"dropped alpha = {a:g}: {why}")
        certified = [r for r in br.rows if r.certified_below_threshold]
        for r in sorted(br.rows, key=lambda r: (r.alpha, r.j)):
            verdict = {None: "no direct value", True: "inside", False: "OUTSIDE"}[r.contains_direct()]
            rep.add(
                f"alpha = {r.alpha:g}, j = {r.j}: [{r.lower!r}, {r.upper!r}] (+- {r.tol:.3g}), "
                f"epsilon = {r.epsilon!r}, direct {verdict}"
            )
        if certified:
            rep.add("discrete spectrum certified at alpha = " + ", ".join(f"{r.alpha:g} (j = {r.j})" for r in certified))
        else:
            rep.add("no discrete spectrum certified (no upper bound lies below epsilon(alpha))")
        try:
            for fs in asymptotic_residuals(br).values():
                rep.add(fs.text())
        except InsufficientData as exc:
            rep.add(f"asymptotic residual fit skipped: {exc}")
        rep.check("bracket ordering", br.ordered())
        inc = br.inclusion()
        if inc:
            rep.check("sandwich inclusion", all(inc.values()))

    if "squeeze" in en:
        if not model.is_radial:
            rep.warnings.append("squeeze skipped: the surface is not radially symmetric")
        else:
            from .birman_schwinger import find_eigenvalues_radial
            from .squeezed import SqueezeProblem, solve_squeezed, square_profile, triangle_profile

            rep.section("Squeezed potentials")
            sq = cfg.squeeze
            R = cfg.patch.support_radius or cfg.patch.L
            kmin = math.sqrt(max(sq.alpha**2 / 4 - cfg.patch.window, 1e-12))
            ref = find_eigenvalues_radial(model, sq.alpha, R, 1, kappa_min=kmin, xtol=cfg.solver.root_tol)[0]
            ref_val = ref.eigenvalue
            rep.add(f"reference direct eigenvalue at alpha = {sq.alpha:g}: {ref_val!r}")
            rows = {k: [] for k in ("d", "alpha", "profile", "lambda1", "reference", "gap", "error")}
            r_wall = meridian_length(model, R) + 1.0
            ok = True
            for name in sq.profiles:
                prof = (square_profile if name == "square" else triangle_profile)(sq.alpha)
                gaps = []
                for d in sorted(sq.ds, reverse=True):
                    res = solve_squeezed(model, SqueezeProblem(prof, d, r_wall, dR=sq.dR, d_box=sq.d_box, support_radius=R), seed=seed)
                    lam = float(res.eigenvalues[0])
                    gap = None if ref_val is None else abs(lam - ref_val)
                    gaps.append(gap)
                    for k, v in zip(rows, (d, sq.alpha, name, lam, ref_val, gap, float(res.residuals[0]))):
                        rows[k].append(v)
                    rep.add(f"{name}, d = {d:g}: lambda_1 = {lam!r}, gap = {gap!r}")
                if None not in gaps and len(gaps) > 1:
                    mono = all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
                    ok &= mono
            io.write_csv(out / "squeeze.csv", "squeeze", rows)
            rep.check("squeezed gaps decrease", ok)

    if "variational" in en:
        from .surface_operator import variational_bound

        rep.section("Variational certificate")
        v = cfg.variational
        best = None
        for s in v.sigmas:
            for r0 in v.r0s:
                try:
                    res = variational_bound(geom, v.alpha, s, r0, form=v.form)
                except DeltaSurfError as exc:
                    rep.warnings.append(f"variational sigma = {s:g}, r0 = {r0:g}: {exc}")
                    continue
                val = res.form_value / res.norm_sq
                rep.add(f"sigma = {s:g}, r0 = {r0:g}: form value per unit norm = {float(val)!r}")
                if best is None or val < best[0]:
                    best = (val, s, r0)
        if best is not None:
            status = "certified" if best[0] < 0 else "not certified"
            rep.add(f"best ({v.form} form): {float(best[0])!r} at sigma = {best[1]:g}, r0 = {best[2]:g}: bound state {status}")


def _patch_mu(model, cfg, pg):
    """Reference mu_j for the bracket residuals, on the domain of the direct solver.

    Radial surfaces use the disc of the axisymmetric direct solver, others
    the patch square.
    """
    from .geometry import meridian_length
    from .surface_operator import assemble_S, radial_reduce_solve, solve_eigen

    j = cfg.sweep.j_max
    if model.is_radial:
        R = cfg.patch.support_radius or cfg.patch.L
        rad = radial_reduce_solve(model, j, meridian_length(model, R), cfg.grid.dr)
        return rad.eigenvalues[:j], f"disc |s| <= {R:g}"
    mu = solve_eigen(assemble_S(pg), j, seed=cfg.solver.seed, tol=cfg.solver.eig_tol).eigenvalues
    return mu, "patch square"


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deltasurf", description="Spectral analysis of delta interactions on surfaces.")
    p.add_argument("config", help="path to an INI config file")
    p.add_argument("--validate", action="store_true", help="dry run: print diagnostics and exit")
    p.add_argument("--output-dir", type=Path, help="override [output] dir")
    p.add_argument("--seed", type=int, help="override [solver] seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes over sweep points")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = load_config(args.config)
        if args.output_dir is not None:
            cfg.output_dir = args.output_dir
        if args.seed is not None:
            cfg.solver = replace(cfg.solver, seed=args.seed)
        if args.jobs < 1:
            raise ConfigError("must be at least 1", "--jobs")
        cfg.jobs = args.jobs
        if args.validate:
            for d in validate(cfg):
                print(d)
            return 0
        status = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 3
    print((Path(cfg.output_dir) / "report.txt").read_text(), end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
