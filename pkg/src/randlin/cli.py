"""Command-line harness: ``randlin <subcommand> --system FILE [options]``.

Every subcommand writes a JSON report and, where there is a table, a CSV
file into ``--out``; two-dimensional and three-dimensional systems also get
an SVG plot of leaves.  Each artifact starts with a header carrying the tool
version, a hash of the configuration and the seed.

Exit codes: 0 when all checks pass, 2 when a resonance or precondition
aborts the run, 1 on numeric failure.
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .system import SystemError_, catalog_names, load_system

EXIT_OK, EXIT_NUMERIC, EXIT_PRECONDITION = 0, 1, 2


class CheckFailed(Exception):
    """A verification threshold was missed."""


# ----------------------------------------------------------------------
# configuration and output helpers
# ----------------------------------------------------------------------
@dataclass
class RunConfig:
    subcommand: str
    system_path: str
    seed: int = 0
    out: str = "randlin-out"
    radius: float | None = None
    horizon: int | None = None
    tol: float | None = None
    strict_radius: bool = False
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.radius is not None and not 0 < self.radius <= 1:
            raise click.BadParameter("radius must lie in (0, 1]")
        if self.horizon is not None and not 10 <= self.horizon <= 100_000:
            raise click.BadParameter("horizon must lie in [10, 100000]")
        if self.tol is not None and not 0 < self.tol < 1:
            raise click.BadParameter("tol must lie in (0, 1)")
        if not 1 <= self.workers <= 256:
            raise click.BadParameter("workers must lie in [1, 256]")

    def options(self) -> dict:
        return {"seed": self.seed, "radius": self.radius, "horizon": self.horizon,
                "tol": self.tol, "strict_radius": self.strict_radius, **self.extra}


def parse_system(path):
    """System and driving from a JSON file or a bundled catalog name."""
    return load_system(path)


def config_hash(cfg: RunConfig, system, driving) -> str:
    blob = json.dumps({"subcommand": cfg.subcommand, "system": system.to_dict(),
                       "driving": driving.to_dict(), "options": cfg.options()},
                      sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if hasattr(v, "to_dict"):
        return v.to_dict()
    return str(v)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class Reporter:
    def __init__(self, cfg: RunConfig, system, driving):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = {"tool": "randlin", "version": __version__,
                       "config_hash": config_hash(cfg, system, driving), "seed": cfg.seed,
                       "subcommand": cfg.subcommand, "system": system.name or cfg.system_path}
        self.files: list = []

    def _path(self, suffix):
        return self.dir / f"{self.cfg.subcommand}{suffix}"

    def json(self, payload: dict, suffix=".json"):
        path = self._path(suffix)
        path.write_text(json.dumps(_clean({"header": self.header, **payload}), indent=2,
                                   sort_keys=True) + "\n")
        self.files.append(str(path))
        return path

    def csv(self, columns, rows, suffix=".csv"):
        path = self._path(suffix)
        lines = [f"# {k}: {v}" for k, v in self.header.items()]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        path.write_text("\n".join(lines) + "\n")
        self.files.append(str(path))
        return path

    def svg(self, curves, title, suffix=".svg"):
        path = self._path(suffix)
        path.write_text(svg_plot(curves, title, self.header))
        self.files.append(str(path))
        return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def svg_plot(curves, title, header, size=480, pad=40) -> str:
    """Static SVG of polylines; ``curves`` is a list of (label, (N, 2) array)."""
    pts = np.concatenate([c for _, c in curves]) if curves else np.zeros((1, 2))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)

    def tr(p):
        q = (p - lo) / span
        return pad + q[:, 0] * (size - 2 * pad), size - pad - q[:, 1] * (size - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
            f"<!-- {json.dumps(header, sort_keys=True)} -->",
            f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
            f'<text x="{pad}" y="{pad / 2}" font-size="12">{title}</text>',
            f'<rect x="{pad}" y="{pad}" width="{size - 2 * pad}" height="{size - 2 * pad}" '
            'fill="none" stroke="#999"/>']
    for k, (label, c) in enumerate(curves):
        xs, ys = tr(np.asarray(c, dtype=float))
        path = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
        body.append(f'<polyline fill="none" stroke="{colors[k % len(colors)]}" '
                    f'stroke-width="1.2" points="{path}"><title>{label}</title></polyline>')
    body.append("</svg>")
    return "\n".join(body) + "\n"


CHUNK = 64  # fixed partition so results do not depend on the worker count


def _chunks(x):
    return [x[k:k + CHUNK] for k in range(0, x.shape[0], CHUNK)]


def _parallel(fn, x, workers):
    parts = _chunks(x)
    if workers == 1 or len(parts) == 1:
        return [fn(p) for p in parts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, parts))


def _radius(cfg, system, spectrum):
    if cfg.strict_radius:
        from .spectrum import strict_radius
        from .system import bound_constants
        bc = bound_constants(system)
        return strict_radius(bc["M"], 1.0, spectrum, bc["C_u"])
    if cfg.radius is not None:
        return cfg.radius
    return system.rho / 4


# ----------------------------------------------------------------------
# subcommand bodies
# ----------------------------------------------------------------------
def run_spectrum(cfg, system, driving, rep):
    from .spectrum import lyapunov_exponents
    n_steps = int(cfg.extra.get("steps", 10_000))
    t = time.perf_counter()
    sp = lyapunov_exponents(system, driving, n_steps=n_steps)
    elapsed = time.perf_counter() - t
    rows = [(j + 1, sp.exponents[j], sp.multiplicities[j], " ".join(map(str, sp.coords[j])))
            for j in range(sp.p)]
    rep.csv(["block", "exponent", "multiplicity", "coordinates"], rows)
    rep.json({"exponents": list(sp.exponents), "multiplicities": list(sp.multiplicities),
              "coords": [list(c) for c in sp.coords], "tau": sp.tau, "steps": n_steps,
              "runtime_s": elapsed})
    for r in rows:
        click.echo(f"block {r[0]}: exponent {r[1]:+.10f} multiplicity {r[2]} coords [{r[3]}]")
    return EXIT_OK


def _spectrum_from_cli(cfg, system, driving):
    from .spectrum import Spectrum, system_spectrum
    exps = cfg.extra.get("exponents")
    if exps:
        return Spectrum.from_exponents(sorted(exps, reverse=True))
    return system_spectrum(system, driving)


def run_check(cfg, system, driving, rep):
    from .spectrum import resonance_report
    sp = _spectrum_from_cli(cfg, system, driving)
    r = resonance_report(sp, system.alpha)
    rows = [(i, k, j, sp.exponents[i - 1] + sp.exponents[k - 1] - sp.exponents[j - 1])
            for i, k, j in r.violations]
    rep.csv(["i", "kappa", "j", "defect"], rows)
    rep.json({"resonance": r.to_dict()})
    click.echo(f"exponents: {', '.join(f'{v:+.6f}' for v in sp.exponents)}")
    click.echo(f"Belitskii non-resonance: {'ok' if r.belitskii_ok else 'VIOLATED'}")
    for v in r.violations:
        click.echo(f"  resonant triple (i, kappa, j) = {v}")
    click.echo(f"bunching: {'holds' if r.bunching_ok else 'fails'} (not required)")
    return EXIT_OK if r.belitskii_ok else EXIT_PRECONDITION


def run_foliate(cfg, system, driving, rep):
    from .foliation import LPConfig, invariance_residual, leaf_chart, solve_lp
    from .spectrum import system_spectrum
    sp = system_spectrum(system, driving)
    side = cfg.extra.get("side", "stable")
    n_base = int(cfg.extra.get("points", 5))
    radius = _radius(cfg, system, sp)
    rng = np.random.default_rng(cfg.seed)
    bases = rng.uniform(-radius, radius, size=(n_base, system.d))
    lp = LPConfig(horizon=cfg.horizon, tol=cfg.tol or 1e-13)
    rows, curves, summary = [], [], []
    t = np.linspace(-radius, radius, 41)
    for b, x in enumerate(bases):
        leaf = leaf_chart(system, driving, x, side, config=lp, spectrum=sp)
        m = leaf.graph.size
        Y = leaf.base_coords() + np.zeros((t.size, m))
        Y[:, 0] = x[leaf.graph[0]] + t
        pts = leaf.chart(Y)
        inv = invariance_residual(leaf, samples=20, radius=radius / 2, seed=cfg.seed + b)
        sol = solve_lp(system, driving, np.repeat(x[None], t.size, 0), Y,
                       LPConfig(leaf.config.side, leaf.config.split, None, cfg.horizon,
                                cfg.tol or 1e-13), sp)
        summary.append({"base": x, "invariance": inv, "lp_residual": float(sol.residual.max())})
        for k in range(t.size):
            rows.append((b, k, *pts[k]))
        if system.d in (2, 3):
            curves.append((f"leaf {b}", pts[:, :2]))
    rep.csv(["leaf", "sample"] + [f"x{c}" for c in range(system.d)], rows)
    worst = max(s["invariance"] for s in summary)
    resid = max(s["lp_residual"] for s in summary)
    rep.json({"side": side, "radius": radius, "leaves": summary,
              "max_invariance": worst, "max_lp_residual": resid})
    if curves:
        rep.svg(curves, f"{side} leaves ({system.name})")
    click.echo(f"{side} leaves: max invariance residual {worst:.3e}, "
               f"max Lyapunov-Perron residual {resid:.3e}")
    return EXIT_OK if worst < 1e-6 and resid < 1e-10 else EXIT_NUMERIC


def run_normalform(cfg, system, driving, rep):
    from .normalform import NormalFormMaps, mixed_derivative
    nm = NormalFormMaps(system, driving)
    co = nm.solver.coeffs(0)
    rows = [(tc.i, tc.kappa, tc.j, tc.branch, tc.k_star, tc.norm, tc.residual, tc.tail)
            for tc in co.triples]
    rep.csv(["i", "kappa", "j", "branch", "terms", "norm", "residual", "last_term"], rows)
    before = mixed_derivative(nm.hat)
    after = mixed_derivative(nm)
    rep.json({"radius": nm.radius, "mixed_before": before, "mixed_after": after,
              "coefficients": co.full, "max_residual": max([r[6] for r in rows], default=0.0)})
    click.echo(f"mixed derivative before {before:.3e}, after {after:.3e}; chart radius {nm.radius:.4g}")
    return EXIT_OK if after < 1e-7 else EXIT_NUMERIC


def run_frame(cfg, system, driving, rep):
    from .cohomology import canonical_frame, cohomological_identity_residual, solve_stable_frame
    from .normalform import NormalFormMaps
    from .spectrum import system_spectrum
    sp = system_spectrum(system, driving)
    radius = _radius(cfg, system, sp)
    n = int(cfg.extra.get("points", 20))
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(-radius, radius, size=(n, system.d))

    def work(chunk):
        fr = canonical_frame(system, driving, chunk, sp)
        return fr, cohomological_identity_residual(system, driving, chunk, sp)

    parts = _parallel(work, x, cfg.workers)
    zeta = np.concatenate([p[0].zeta for p in parts])
    recon = np.concatenate([p[0].zeta_reconstructed for p in parts])
    gram = np.concatenate([p[0].gram for p in parts])
    coh = max(p[1] for p in parts)
    sc = sp.stable_coords
    rows = []
    for q in range(n):
        for c, s in enumerate(sc):
            rows.append((q, s, *x[q], *zeta[q, :, c], float(np.abs(recon[q, :, c] - zeta[q, :, c]).max()),
                         gram[q]))
    cols = (["point", "stable_coord"] + [f"x{k}" for k in range(system.d)]
            + [f"zeta{k}" for k in range(system.d)] + ["reconstruction_error", "gram"])
    rep.csv(cols, rows)
    nm = NormalFormMaps(system, driving, spectrum=sp)
    rec = []
    for i in range(sp.tau):
        for k in range(sp.tau, sp.p):
            fr = solve_stable_frame(nm, k, 0, i, seed=cfg.seed, tol=cfg.tol or 1e-10)
            rec.append({"i": i + 1, "kappa": k + 1, "iterations": fr.iterations,
                        "ratios": fr.ratios, "max_ratio": fr.max_ratio,
                        "cohomology_residual": fr.cohomology_residual})
    recon_err = float(np.abs(recon - zeta).max())
    worst_ratio = max((r["max_ratio"] for r in rec), default=0.0)
    rep.json({"radius": radius, "reconstruction_error": recon_err, "cohomology_residual": coh,
              "min_gram": float(gram.min()), "recursions": rec})
    click.echo(f"frame reconstruction error {recon_err:.3e}; cohomological identity {coh:.3e}; "
               f"largest recursion ratio {worst_ratio:.3f}")
    ok = recon_err < 1e-8 and coh < 1e-7 and worst_ratio <= 0.55
    return EXIT_OK if ok else EXIT_NUMERIC


def run_linearize(cfg, system, driving, rep):
    from .linearize import full_conjugacy, halton_ball
    from .spectrum import system_spectrum
    sp = system_spectrum(system, driving)
    radius = _radius(cfg, system, sp)
    n = int(cfg.extra.get("points", 1000))
    tol = cfg.tol or 1e-6
    conj = full_conjugacy(system, driving, radius, sp)
    nxt = conj.shifted(1)
    x = halton_ball(n, system.d, radius, cfg.seed)
    A0 = conj.maps.A(0)
    eye = np.eye(system.d)

    def work(chunk):
        here = conj(chunk)
        there = nxt(conj.maps.F(0, chunk))
        res = np.abs(there - here @ A0.T).max(axis=1)
        rt = np.abs(conj.inverse(here) - chunk).max(axis=1)
        dd = np.abs(conj.derivative(chunk, h=1e-6) - eye).max(axis=(1, 2))
        return res, rt, dd

    t = time.perf_counter()
    parts = _parallel(work, x, cfg.workers)
    res = np.concatenate([p[0] for p in parts])
    rt = np.concatenate([p[1] for p in parts])
    dd = np.concatenate([p[2] for p in parts])
    d0 = float(np.abs(conj.derivative(np.zeros((1, system.d)))[0] - eye).max())
    elapsed = time.perf_counter() - t
    rows = [(q, *x[q], res[q], dd[q], rt[q]) for q in range(n)]
    rep.csv(["point"] + [f"x{k}" for k in range(system.d)]
            + ["residual", "derivative_deviation", "roundtrip"], rows)
    summary = {"radius": radius, "points": n, "max_residual": float(res.max()),
               "mean_residual": float(res.mean()), "max_roundtrip": float(rt.max()),
               "derivative_at_zero_deviation": d0, "tolerance": tol, "runtime_s": elapsed}
    rep.json(summary)
    click.echo(f"conjugacy on radius {radius:.4g}: max residual {res.max():.3e}, "
               f"round trip {rt.max():.3e}, |DPhi(0) - I| {d0:.3e}")
    ok = res.max() < tol and rt.max() < 1e-9 and d0 < 1e-6
    return EXIT_OK if ok else EXIT_NUMERIC


def run_verify(cfg, system, driving, rep):
    """Full invariant suite; each check is a row of the CSV."""
    from .cohomology import canonical_frame, cohomological_identity_residual, solve_stable_frame
    from .foliation import LPConfig, invariance_residual, leaf_chart, solve_lp
    from .linearize import escape_time, full_conjugacy, halton_ball, verify_conjugacy
    from .normalform import NormalFormMaps, mixed_derivative
    from .spectrum import lyapunov_exponents, resonance_report, system_spectrum

    checks = []

    def check(name, value, limit, better="below"):
        ok = value < limit if better == "below" else value <= limit
        checks.append((name, float(value), float(limit), "pass" if ok else "FAIL"))

    sp_run = lyapunov_exponents(system, driving, n_steps=10_000)
    sp = system_spectrum(system, driving)
    check("spectrum_agreement", max(abs(a - b) for a, b in zip(sp.exponents, sp_run.exponents)),
          5e-2)
    r = resonance_report(sp, system.alpha)
    if not r.belitskii_ok:
        click.echo(f"resonant triples {r.violations}: verification aborted")
        rep.json({"aborted": "resonance", "violations": r.violations})
        return EXIT_PRECONDITION
    radius = _radius(cfg, system, sp)
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(-radius, radius, size=(10, system.d))
    lp = LPConfig(horizon=cfg.horizon, tol=cfg.tol or 1e-13)
    worst_inv, worst_lp = 0.0, 0.0
    for side in ("stable", "unstable"):
        for b in range(3):
            leaf = leaf_chart(system, driving, x[b], side, config=lp, spectrum=sp)
            worst_inv = max(worst_inv, invariance_residual(leaf, 20, radius / 2, seed=b))
        cfg_side = LPConfig(side, None, None, cfg.horizon, cfg.tol or 1e-13)
        graph = cfg_side.resolve(sp).graph
        sol = solve_lp(system, driving, x, x[:, graph] + 0.1 * radius, cfg_side, sp)
        worst_lp = max(worst_lp, float(sol.residual.max()))
    check("lp_residual", worst_lp, 1e-10)
    check("foliation_invariance", worst_inv, 1e-6)
    nm = NormalFormMaps(system, driving, spectrum=sp)
    check("mixed_derivative_after", mixed_derivative(nm), 1e-7)
    fr = canonical_frame(system, driving, x, sp)
    check("frame_reconstruction", fr.reconstruction_error, 1e-8)
    check("cohomological_identity", cohomological_identity_residual(system, driving, x, sp), 1e-7)
    worst_ratio = 0.0
    for i in range(sp.tau):
        for k in range(sp.tau, sp.p):
            worst_ratio = max(worst_ratio, solve_stable_frame(nm, k, 0, i, seed=cfg.seed).max_ratio)
    check("frame_recursion_ratio", worst_ratio, 0.55, "at_most")
    conj = full_conjugacy(system, driving, radius, sp)
    vr = verify_conjugacy(conj, int(cfg.extra.get("points", 200)), radius, cfg.seed,
                          local_derivatives=False)
    check("conjugacy_residual", vr.max_residual, 1e-6)
    check("conjugacy_roundtrip", vr.max_roundtrip, 1e-9)
    check("conjugacy_derivative_at_zero", vr.derivative_at_zero, 1e-6)
    pts = halton_ball(50, system.d, 0.5, cfg.seed)
    esc = escape_time(system, driving, pts, sp, conjugacy=conj)
    fin = np.isfinite(esc.measured)
    excess = float(np.max(esc.measured[fin] - np.ceil(esc.bound[fin]))) if fin.any() else -1.0
    check("escape_time_excess", excess, 0.0, "at_most")
    rep.csv(["check", "value", "limit", "status"], checks)
    failed = [c[0] for c in checks if c[3] != "pass"]
    rep.json({"checks": [dict(zip(("check", "value", "limit", "status"), c)) for c in checks],
              "failed": failed})
    for c in checks:
        click.echo(f"{c[3]:>4}  {c[0]:<32} {c[1]:.3e}  (limit {c[2]:.1e})")
    return EXIT_OK if not failed else EXIT_NUMERIC


RUNNERS = {"spectrum": run_spectrum, "check": run_check, "foliate": run_foliate,
           "normalform": run_normalform, "frame": run_frame, "linearize": run_linearize,
           "verify": run_verify}

PRECONDITION_ERRORS = ("ResonanceError", "PreconditionError", "HyperbolicityError",
                       "SystemError_")


def run(cfg: RunConfig) -> int:
    """Execute a subcommand; returns the exit status."""
    try:
        system, driving = parse_system(cfg.system_path)
    except (SystemError_, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        click.echo(f"[system] {exc}", err=True)
        return EXIT_PRECONDITION
    rep = Reporter(cfg, system, driving)
    try:
        status = RUNNERS[cfg.subcommand](cfg, system, driving, rep)
    except Exception as exc:  # surface with the raising module's name
        tag = type(exc).__module__.rsplit(".", 1)[-1]
        click.echo(f"[{tag}] {type(exc).__name__}: {exc}", err=True)
        if type(exc).__name__ in PRECONDITION_ERRORS:
            return EXIT_PRECONDITION
        return EXIT_NUMERIC
    for f in rep.files:
        click.echo(f"wrote {f}")
    return status


# ----------------------------------------------------------------------
# click wiring
# ----------------------------------------------------------------------
def _common(fn):
    opts = [
        click.option("--system", "system_path", required=True,
                     help="System JSON file or bundled name (" + ", ".join(catalog_names()) + ")."),
        click.option("--seed", default=0, show_default=True, type=int,
                     help="Seed for sample points; recorded in every output."),
        click.option("--out", default="randlin-out", show_default=True,
                     type=click.Path(file_okay=False), help="Output directory."),
        click.option("--radius", type=float, default=None, help="Sample/verification radius."),
        click.option("--horizon", type=int, default=None, help="Lyapunov-Perron horizon."),
        click.option("--tol", type=float, default=None, help="Tolerance override."),
        click.option("--strict-radius", is_flag=True, help="Use the pessimistic budget radius."),
        click.option("--workers", default=1, show_default=True, type=int,
                     help="Worker threads for point-parallel work."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _dispatch(name, extra=None, **kw):
    cfg = RunConfig(name, kw["system_path"], kw["seed"], kw["out"], kw["radius"], kw["horizon"],
                    kw["tol"], kw["strict_radius"], kw["workers"], extra or {})
    sys.exit(run(cfg))


@click.group()
@click.version_option(__version__, prog_name="randlin")
def main():
    """Linearization toolkit for hyperbolic random maps."""


@main.command()
@_common
@click.option("--steps", default=10_000, show_default=True, type=int)
def spectrum(steps, **kw):
    """Lyapunov exponents of the linear cocycle."""
    _dispatch("spectrum", {"steps": steps}, **kw)


@main.command()
@_common
@click.option("--exponents", default=None,
              help="Comma-separated exponents to triage instead of the system's.")
def check(exponents, **kw):
    """Resonance and bunching triage (exit 2 on resonance)."""
    extra = {}
    if exponents:
        extra["exponents"] = [float(v) for v in exponents.split(",")]
    _dispatch("check", extra, **kw)


@main.command()
@_common
@click.option("--side", default="stable", show_default=True,
              type=click.Choice(["stable", "unstable", "strong-stable", "strong-unstable"]))
@click.option("--points", default=5, show_default=True, type=int)
def foliate(side, points, **kw):
    """Leaves through random base points, with invariance residuals."""
    _dispatch("foliate", {"side": side, "points": points}, **kw)


@main.command()
@_common
def normalform(**kw):
    """Normal-form coefficients and mixed derivatives before and after."""
    _dispatch("normalform", {}, **kw)


@main.command()
@_common
@click.option("--points", default=20, show_default=True, type=int)
def frame(points, **kw):
    """Canonical stable frame, its reconstruction and the frame recursion."""
    _dispatch("frame", {"points": points}, **kw)


@main.command()
@_common
@click.option("--points", default=1000, show_default=True, type=int)
def linearize(points, **kw):
    """Conjugacy residual table on Halton points."""
    _dispatch("linearize", {"points": points}, **kw)


@main.command()
@_common
@click.option("--points", default=200, show_default=True, type=int)
def verify(points, **kw):
    """Run the full invariant suite."""
    _dispatch("verify", {"points": points}, **kw)


if __name__ == "__main__":
    main()
