"""Command-line front end: ``periodize validate | apply | bench``."""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import dataclass

import click
import numpy as np

from .apply import choose_path, direct_free_space, total_field
from .cell import ParticleSystem, UnitCell, cell_from_aspect, make_unit_cell, random_points
from .errors import ParseError, PeriodizeError
from .kernels import PDE
from .oracle import face_samples, periodicity_residual

EPS_RANGE = (1e-13, 1e-3)
GATE_FACTOR = 5.0
DEFAULT_N_SRC = 4000


def build_periodizer(pde, beta: float, cell: UnitCell, eps: float, periodicity=None):
    """Far-field velocity or potential operator for any supported PDE."""
    from .scalar import assemble
    from .stokes import assemble_velocity

    pde = PDE.parse(pde)
    if pde in (PDE.STOKES, PDE.MOD_STOKES):
        return assemble_velocity(pde, beta, cell, periodicity, eps)
    return assemble(pde, beta, cell, periodicity, eps)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    pde: PDE
    beta: float
    cell: UnitCell
    eps: float
    n_src: int = DEFAULT_N_SRC
    seed: int = 0
    accel: str = "auto"
    samples: int = 500
    out: str | None = None
    aspect: float | None = None
    theta: float | None = None

    @property
    def vector(self) -> bool:
        return self.pde.vector

    @property
    def neutral(self) -> bool:
        return self.pde in (PDE.POISSON, PDE.STOKES, PDE.MOD_STOKES) or self.beta < 1e-6

    def describe(self) -> dict:
        c = self.cell
        out = {"pde": self.pde.value, "beta": self.beta,
               "cell": {"d": c.d, "xi": c.xi, "eta": c.eta, "periodicity": 2 if c.doubly else 1},
               "eps": self.eps, "n_src": self.n_src, "seed": self.seed, "accel": self.accel}
        if self.aspect is not None:
            out["cell"].update(aspect=self.aspect, theta=self.theta)
        return out


def make_config(pde, beta, cell, aspect, theta, periodicity, eps, n_src=DEFAULT_N_SRC, seed=0,
                accel="auto", samples=500, out=None) -> RunConfig:
    try:
        pde = PDE.parse(pde)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    if not EPS_RANGE[0] <= eps <= EPS_RANGE[1]:
        raise click.UsageError(f"--eps must lie in [{EPS_RANGE[0]:g}, {EPS_RANGE[1]:g}], got {eps:g}")
    if pde.screened and not (beta is not None and beta > 0):
        raise click.UsageError(f"--beta > 0 is required for --pde {pde.value}")
    beta = 0.0 if not pde.screened else float(beta)
    if cell is not None and (aspect is not None or theta is not None):
        raise click.UsageError("give either --cell or --aspect/--theta, not both")
    per = "doubly" if periodicity == 2 else "singly"
    try:
        if cell is not None:
            parts = [float(v) for v in cell.split(",")]
            if len(parts) != 3:
                raise click.UsageError("--cell expects three numbers d,xi,eta")
            uc = make_unit_cell(*parts, periodicity=per)
        else:
            aspect = 1.0 if aspect is None else float(aspect)
            theta = math.pi / 2 if theta is None else float(theta)
            uc = cell_from_aspect(aspect, theta, per)
    except PeriodizeError as exc:
        raise click.UsageError(str(exc)) from None
    if n_src < 1:
        raise click.UsageError("--n-src must be >= 1")
    if samples < 10:
        raise click.UsageError("--samples must be >= 10")
    return RunConfig(pde, beta, uc, eps, n_src, seed, accel, samples, out, aspect, theta)


def random_system(config: RunConfig, targets) -> ParticleSystem:
    """Uniform sources; all randomness comes from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    src = random_points(config.cell, config.n_src, rng)
    shape = (config.n_src, 2) if config.vector else (config.n_src,)
    q = rng.standard_normal(shape)
    if config.neutral:
        q = q - q.mean(axis=0)
    return ParticleSystem(src, q, targets)


# ---------------------------------------------------------------------------
# file formats


def read_points(path: str, vector: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Parse ``x y q`` or ``x y qx qy [nx ny]`` records; ``#`` starts a comment."""
    width = (4, 6) if vector else (3,)
    pts, qs, normals = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            cols = line.split()
            if len(cols) not in width:
                raise ParseError(f"{path}: expected {' or '.join(map(str, width))} "
                                 f"columns, got {len(cols)}", lineno)
            try:
                vals = [float(c) for c in cols]
            except ValueError:
                raise ParseError(f"{path}: non-numeric value in {line!r}", lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(f"{path}: non-finite value", lineno)
            if normals and len(vals) != 6 or (pts and not normals and len(vals) == 6):
                raise ParseError(f"{path}: normals given on some records only", lineno)
            pts.append(vals[:2])
            qs.append(vals[2:4] if vector else vals[2])
            if len(vals) == 6:
                normals.append(vals[4:])
    P = np.asarray(pts, dtype=float).reshape(-1, 2)
    Q = np.asarray(qs, dtype=float).reshape((-1, 2) if vector else (-1,))
    return P, Q, (np.asarray(normals) if normals else None)


def read_targets(path: str) -> np.ndarray:
    pts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            cols = line.split()
            if len(cols) < 2:
                raise ParseError(f"{path}: expected at least 2 columns", lineno)
            try:
                pts.append([float(cols[0]), float(cols[1])])
            except ValueError:
                raise ParseError(f"{path}: non-numeric value in {line!r}", lineno) from None
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def write_points(path: str, points, strengths) -> None:
    q = np.asarray(strengths).reshape(len(points), -1)
    with open(path, "w", encoding="utf-8") as fh:
        for p, row in zip(points, q):
            fh.write(" ".join(repr(float(v)) for v in (*p, *row)) + "\n")


def write_field(fh, targets, values, pressure=None, width: int = 1) -> None:
    """One ``x y value...`` record per target, with a ``#`` header."""
    v = np.real(np.asarray(values)).reshape(len(targets), width)
    if pressure is not None:
        v = np.concatenate([v, np.real(np.asarray(pressure)).reshape(-1, 1)], axis=1)
    fh.write("# x y " + ("value" if width == 1 else "vx vy")
             + (" p" if pressure is not None else "") + "\n")
    for t, row in zip(targets, v):
        fh.write(" ".join(repr(float(x)) for x in (*t, *row)) + "\n")


# ---------------------------------------------------------------------------
# runs


def boundary_targets(cell: UnitCell, samples: int) -> np.ndarray:
    return np.vstack([np.vstack(pair) for pair in face_samples(cell, samples).values()])


def evaluate(config: RunConfig, system: ParticleSystem, pressure: bool = False):
    """Total field on ``system.targets`` plus the timing record."""
    timings = {}
    t0 = time.perf_counter()
    if system.normals is not None:
        from .stokes import build_stresslet_periodizer

        per = build_stresslet_periodizer(config.cell, config.eps, normals=system.normals)
    else:
        per = build_periodizer(config.pde, config.beta, config.cell, config.eps)
    timings["t_build"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = total_field(per, system, path=config.accel)
    timings["t_total"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    per.apply(system.sources, system.strengths, system.targets, path=config.accel)
    timings["t_per"] = time.perf_counter() - t0
    timings["t_near"] = max(timings["t_total"] - timings["t_per"], 0.0)
    t0 = time.perf_counter()
    direct_free_space(per.kernel, system.sources, per.expand_strengths(system.strengths),
                      system.targets)
    timings["t_free"] = time.perf_counter() - t0
    p = None
    if pressure:
        from .stokes import build_pressure_periodizer

        pper = build_pressure_periodizer(config.pde, config.cell, config.eps)
        p = total_field(pper, system, path=config.accel).values
    return per, res.values, p, timings


def part_summary(per, n_sources: int, n_targets: int, accel: str) -> list[dict]:
    override = None if accel == "auto" else accel
    return [{"direction": p.direction.name.lower(), "rank": p.rank,
             "path": choose_path(p, n_sources, n_targets, override, per.cell).value}
            for p in per.parts]


def run_validate(config: RunConfig) -> dict:
    targets = boundary_targets(config.cell, config.samples)
    system = random_system(config, targets)
    pressure = config.pde in (PDE.STOKES, PDE.MOD_STOKES)
    per, values, p, timings = evaluate(config, system, pressure)

    def residual(vals, gauge, name):
        # chunks arrive in face order, matching the residual's evaluation order
        chunks = iter(np.split(np.asarray(vals), len(face_samples(config.cell, 2))))
        rep = periodicity_residual(lambda pts: next(chunks), config.cell,
                                   samples=config.samples, gauge=gauge, name=name)
        return rep.as_dict()

    report = {**config.describe(), "rank": per.rank,
              "parts": part_summary(per, system.n_sources, system.n_targets, config.accel),
              "timings": timings}
    residuals = {"field": residual(values, per.gauge, per.label)}
    if p is not None:
        residuals["pressure"] = residual(p, True, "pressure")
    gate = GATE_FACTOR * config.eps
    report["residuals"] = residuals
    report["gate"] = gate
    report["error"] = max(r["gate"] for r in residuals.values())
    report["passed"] = bool(report["error"] <= gate)
    report["row"] = {"A": config.cell.aspect, **{k: timings[k] for k in ("t_per", "t_near", "t_total", "t_free")},
                     "Error": report["error"]}
    return report


def run_apply(config: RunConfig, sources_path: str, targets_path: str, pressure: bool) -> dict:
    S, Q, normals = read_points(sources_path, config.vector)
    T = read_targets(targets_path)
    if not S.shape[0]:
        raise click.UsageError(f"{sources_path}: no source records")
    if normals is not None and config.pde is not PDE.STOKES:
        raise click.UsageError("normals (double-layer sources) are supported for stokes only")
    if normals is not None and pressure:
        raise click.UsageError("--pressure is available for point forces only")
    system = ParticleSystem(S, Q, T, normals)
    if T.shape[0] == 0:
        values, p, timings = np.zeros((0,)), (np.zeros(0) if pressure else None), {}
        rank = None
    else:
        per, values, p, timings = evaluate(config, system, pressure)
        rank = per.rank
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            write_field(fh, T, values, p, 2 if config.vector else 1)
    else:
        write_field(click.get_text_stream("stdout"), T, values, p, 2 if config.vector else 1)
    return {**config.describe(), "rank": rank, "n_targets": int(T.shape[0]), "timings": timings}


def run_bench(config: RunConfig, aspects, sizes, repeats: int) -> dict:
    rows = []
    for A in aspects:
        cfg = make_config(config.pde.value, config.beta, None, A,
                          config.theta if config.theta is not None else math.pi / 2,
                          2 if config.cell.doubly else 1, config.eps, config.n_src,
                          config.seed, config.accel, config.samples)
        per = build_periodizer(cfg.pde, cfg.beta, cfg.cell, cfg.eps)
        for n in sizes:
            cfg.n_src = n
            targets = random_points(cfg.cell, n, np.random.default_rng(cfg.seed + 1))
            system = random_system(cfg, targets)
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                per.apply(system.sources, system.strengths, system.targets, path=cfg.accel)
                times.append(time.perf_counter() - t0)
            med = float(np.median(times))
            rows.append({"aspect": A, "n": n, "rank": per.rank, "t_per": med,
                         "t_min": float(min(times)), "t_max": float(max(times)),
                         "spread": float((max(times) - min(times)) / med) if med > 0 else 0.0,
                         "parts": part_summary(per, n, n, cfg.accel)})
    return {**config.describe(), "repeats": repeats, "rows": rows}


# ---------------------------------------------------------------------------
# click plumbing


def _common(fn):
    opts = [
        click.option("--pde", type=click.Choice(["poisson", "mhelm", "stokes", "mstokes"]),
                     required=True),
        click.option("--beta", type=float, default=None, help="screening parameter"),
        click.option("--cell", "cell", default=None, help="d,xi,eta"),
        click.option("--aspect", type=float, default=None),
        click.option("--theta", type=float, default=None, help="lattice angle in radians"),
        click.option("--periodicity", type=click.IntRange(1, 2), default=2),
        click.option("--eps", type=float, default=1e-12),
        click.option("--n-src", type=int, default=DEFAULT_N_SRC),
        click.option("--seed", type=int, default=0),
        click.option("--accel", type=click.Choice(["auto", "direct", "nufft"]), default="auto"),
        click.option("--samples", type=int, default=500, help="boundary targets per face"),
        click.option("--out", type=click.Path(dir_okay=False), default=None),
        click.option("--threads", type=click.IntRange(min=1), default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _setup(kw) -> RunConfig:
    from .nufft import set_threads

    set_threads(kw.pop("threads"))
    return make_config(kw.pop("pde"), kw.pop("beta"), kw.pop("cell"), kw.pop("aspect"),
                       kw.pop("theta"), kw.pop("periodicity"), kw.pop("eps"), kw.pop("n_src"),
                       kw.pop("seed"), kw.pop("accel"), kw.pop("samples"), kw.pop("out"))


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=float)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


@click.group()
def main():
    """Periodic far-field operators for 2D particle interactions."""


@main.command()
@_common
def validate(**kw):
    """Periodicity residual on boundary targets for random sources."""
    config = _setup(kw)
    try:
        report = run_validate(config)
    except PeriodizeError as exc:
        _emit({"passed": False, "failure": type(exc).__name__, "message": str(exc)}, config.out)
        sys.exit(1)
    _emit(report, config.out)
    if not report["passed"]:
        click.echo(json.dumps({"passed": False, "error": report["error"],
                               "gate": report["gate"]}), err=True)
        sys.exit(1)


@main.command()
@_common
@click.option("--sources", "sources_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--targets", "targets_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--pressure", is_flag=True, help="append the pressure column (Stokes types)")
@click.option("--report", type=click.Path(dir_okay=False), default=None)
def apply(sources_path, targets_path, pressure, report, **kw):
    """Periodic field at the targets for sources read from a file."""
    config = _setup(kw)
    if pressure and config.pde not in (PDE.STOKES, PDE.MOD_STOKES):
        raise click.UsageError("--pressure applies to stokes and mstokes only")
    try:
        info = run_apply(config, sources_path, targets_path, pressure)
    except ParseError as exc:
        raise click.ClickException(str(exc)) from None
    except PeriodizeError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from None
    if report:
        _emit(info, report)


@main.command()
@_common
@click.option("--aspects", default="1,10,100,1000", help="comma-separated aspect ratios")
@click.option("--sizes", default=None, help="comma-separated N values (default: --n-src)")
@click.option("--repeats", type=click.IntRange(min=1), default=3)
def bench(aspects, sizes, repeats, **kw):
    """Wall-clock table of far-field applies over aspect ratios and sizes."""
    config = _setup(kw)
    try:
        A = [float(a) for a in aspects.split(",")]
        N = [int(n) for n in sizes.split(",")] if sizes else [config.n_src]
    except ValueError:
        raise click.UsageError("--aspects and --sizes take comma-separated numbers") from None
    _emit(run_bench(config, A, N, repeats), config.out)


if __name__ == "__main__":  # pragma: no cover
    main()
