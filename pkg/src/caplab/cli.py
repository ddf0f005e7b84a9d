"""Command-line entry point.

Single binary with subcommand groups: walk sampling, kernel evaluation
and tables, capacity backends, decomposition checks, and the Monte Carlo
campaigns. A config file supplies defaults per subcommand (section name =
dotted command path); flags override file values. Exit codes: 0 ok,
1 validation, 2 numerical failure, 3 I/O.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import capacity as cap_mod
from . import decomp as decomp_mod
from . import experiments as exp_mod
from .config import (OUTPUT_DIR_ENV, RunConfig, atomic_write,
                     parse_and_validate, read_config_file)
from .errors import NumericalError, OutputError, ValidationError
from .gates import default_gates, load_gates
from .green import GreenOracle, build_table, default_oracle, green_exact
from .lattice import sample_walk, stream
from .sites import SiteSet


def _ctx_defaults(ctx, leaf: str) -> dict:
    file_values = ctx.obj.get("file_values", {})
    path = f"{ctx.info_name}.{leaf}" if ctx.info_name != "caplab" else leaf
    merged = {}
    for section in (leaf, path):
        merged.update(file_values.get(section, {}))
    return merged


def _build_config(ctx, leaf, needs_dimension=True, **flags) -> RunConfig:
    base = dict(ctx.obj.get("globals", {}))
    base.update({k: v for k, v in flags.items() if v is not None})
    cfg = parse_and_validate(leaf, _ctx_defaults(ctx, leaf), base,
                             needs_dimension=needs_dimension)
    return cfg


def _gates(cfg: RunConfig):
    return load_gates(cfg.gates_file) if cfg.gates_file else default_gates()


def _oracle(cfg: RunConfig, d: int) -> GreenOracle:
    table = cfg.extras.get("table_file")
    if table:
        return GreenOracle.load(table)
    if cfg.oracle_radius is not None:
        return build_table(d, cfg.oracle_radius, cfg.oracle_tol)
    return default_oracle(d)


@click.group(name="caplab")
@click.option("--config", "config_file", type=click.Path(), default=None,
              help="INI config file with per-subcommand sections.")
@click.option("--output-dir", default=None,
              help=f"Artifact directory (default ${OUTPUT_DIR_ENV} or cwd).")
@click.option("--gates-file", default=None,
              help="Override the bundled acceptance-gate constants.")
@click.option("--workers", type=int, default=None,
              help="Worker processes for replica-parallel campaigns.")
@click.pass_context
def cli(ctx, config_file, output_dir, gates_file, workers):
    ctx.ensure_object(dict)
    ctx.obj["file_values"] = read_config_file(config_file) if config_file else {}
    ctx.obj["globals"] = {
        "output_dir": output_dir, "gates_file": gates_file, "workers": workers}


# ---------------------------------------------------------------------------

@cli.command()
@click.option("--d", type=int, required=False)
@click.option("--n", type=int, required=False)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def walk(ctx, d, n, seed, out):
    """Sample a simple random walk; write or print its visited sites."""
    cfg = _build_config(ctx, "walk", needs_dimension=False,
                        d=d, n=n, seed=seed)
    missing = [f"{k}: required" for k, v in (("d", cfg.d), ("n", cfg.n))
               if v is None]
    if missing:
        raise ValidationError(missing)
    w = sample_walk(cfg.d, cfg.n, stream(cfg.seed))
    rng_set = w.range
    if out:
        rng_set.save(out)
        click.echo(f"wrote {len(rng_set)} sites to {out}")
    else:
        click.echo(f"d={cfg.d} n={cfg.n} range_size={len(rng_set)} "
                   f"endpoint={w.path[-1].tolist()}")


@cli.group()
def green():
    """Lattice Green kernel evaluation and tables."""


@green.command("eval")
@click.option("--d", type=int, required=True)
@click.option("--x", required=True, help="Lattice point, e.g. '1 0 2'.")
@click.pass_context
def green_eval(ctx, d, x):
    cfg = _build_config(ctx, "eval", d=d, x=x)
    point = np.array([int(t) for t in str(cfg.extras["x"]).split()])
    if len(point) != cfg.d:
        raise ValidationError(f"x has {len(point)} coordinates, d={cfg.d}")
    click.echo(repr(green_exact(cfg.d, point)))


@green.command("build-table")
@click.option("--d", type=int, required=True)
@click.option("--radius", "oracle_radius", type=int, required=True)
@click.option("--tol", "oracle_tol", type=float, default=None)
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
def green_build_table(ctx, d, oracle_radius, oracle_tol, out):
    cfg = _build_config(ctx, "build-table", d=d, oracle_radius=oracle_radius,
                        oracle_tol=oracle_tol)
    oracle = build_table(cfg.d, cfg.oracle_radius, cfg.oracle_tol)
    oracle.save(out)
    click.echo(f"table d={cfg.d} radius={cfg.oracle_radius} -> {out}")


# ---------------------------------------------------------------------------

def _load_set(cfg) -> SiteSet:
    path = cfg.extras.get("set_file")
    if not path:
        raise ValidationError("set_file: a site-set file is required")
    return SiteSet.load(path)


@cli.command()
@click.argument("backend", type=click.Choice(
    ["exact", "variational", "escape", "representation"]))
@click.option("--set", "set_file", type=click.Path(), default=None)
@click.option("--d", type=int, default=None)
@click.option("--n", type=int, default=None,
              help="Walk length (representation backend samples its own walk).")
@click.option("--seed", type=int, default=None)
@click.option("--trials", type=int, default=None)
@click.option("--table", "table_file", type=click.Path(), default=None)
@click.pass_context
def capacity(ctx, backend, set_file, d, n, seed, trials, table_file):
    """Capacity of a site set (or a sampled range) by the chosen backend."""
    cfg = _build_config(ctx, "capacity", backend=backend, set_file=set_file,
                        d=d, n=n, seed=seed, trials=trials,
                        table_file=table_file, needs_dimension=False)
    gates = _gates(cfg)
    if backend == "representation":
        if cfg.d is None or cfg.n is None:
            raise ValidationError("representation backend needs --d and --n")
        oracle = _oracle(cfg, cfg.d)
        rng = stream(cfg.seed)
        w = sample_walk(cfg.d, cfg.n, rng)
        est = cap_mod.capacity_representation_mc(
            w, exp_mod._aux_horizon(cfg.d, cfg.n, gates),
            trials=int(cfg.extras.get("trials", 1)), oracle=oracle, seed=rng,
            time_sample=gates["backends.time_sample"])
        click.echo(f"capacity~={est.estimate!r} se={est.se!r} "
                   f"bias_bound={est.bias_bound!r}")
        return
    a = _load_set(cfg)
    if cfg.d is not None and cfg.d != a.d:
        raise ValidationError(f"--d {cfg.d} disagrees with set file d={a.d}")
    if a.d < 3:
        raise ValidationError(f"capacity requires d >= 3, got {a.d}")
    oracle = _oracle(cfg, a.d)
    if backend == "exact":
        res = cap_mod.equilibrium_measure(a, oracle)
        click.echo(f"capacity={res.capacity!r} residual={res.residual!r} "
                   f"method={res.method}")
    elif backend == "variational":
        res = cap_mod.capacity_variational(a, oracle)
        click.echo(f"capacity>={res.bound!r} gap={res.gap!r} "
                   f"converged={res.converged}")
    else:
        est = cap_mod.capacity_escape_mc(
            a, oracle, trials_per_site=int(
                cfg.extras.get("trials", gates["backends.escape_trials"])),
            seed=cfg.seed)
        click.echo(f"capacity~={est.estimate!r} se={est.se!r} "
                   f"bias_bound={est.bias_bound!r}")


# ---------------------------------------------------------------------------

@cli.group()
def decomp():
    """Capacity decomposition inequalities on sets and sampled paths."""


def _two_sets(set_a, set_b):
    a, b = SiteSet.load(set_a), SiteSet.load(set_b)
    if a.d != b.d:
        raise ValidationError(f"set dimensions differ: {a.d} vs {b.d}")
    return a, b


@decomp.command("lower")
@click.option("--set-a", type=click.Path(), required=True)
@click.option("--set-b", type=click.Path(), required=True)
def decomp_lower(set_a, set_b):
    a, b = _two_sets(set_a, set_b)
    chk = decomp_mod.check_lower_bound(a, b, default_oracle(a.d))
    click.echo(f"cap(AuB)={chk.lhs!r} lower={chk.rhs!r} slack={chk.slack!r}")


@decomp.command("upper")
@click.option("--set-a", type=click.Path(), required=True)
@click.option("--set-b", type=click.Path(), required=True)
def decomp_upper(set_a, set_b):
    a, b = _two_sets(set_a, set_b)
    chk = decomp_mod.check_upper_bound(a, b, default_oracle(a.d))
    click.echo(f"cap(AuB)={chk.lhs!r} upper={chk.rhs!r} slack={chk.slack!r}")


@decomp.command("dyadic")
@click.option("--d", type=int, required=True)
@click.option("--n", type=int, required=True)
@click.option("--levels", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.pass_context
def decomp_dyadic(ctx, d, n, levels, seed):
    cfg = _build_config(ctx, "dyadic", d=d, n=n, levels=levels, seed=seed)
    w = sample_walk(cfg.d, cfg.n, stream(cfg.seed))
    rep = decomp_mod.dyadic_decompose(w, int(cfg.extras["levels"]),
                                      default_oracle(cfg.d))
    click.echo(f"lower={rep.lower!r} cap={rep.middle!r} upper={rep.upper!r} "
               f"slacks=({rep.slack_low!r}, {rep.slack_high!r})")


@decomp.command("moments")
@click.option("--d", type=int, required=True)
@click.option("--n", type=int, required=True)
@click.option("--order", type=int, default=1)
@click.option("--replicas", type=int, default=50)
@click.option("--seed", type=int, default=0)
@click.pass_context
def decomp_moments(ctx, d, n, order, replicas, seed):
    cfg = _build_config(ctx, "moments", d=d, n=n, order=order,
                        replicas=replicas, seed=seed)
    est = decomp_mod.cross_term_moment(cfg.d, cfg.n,
                                       int(cfg.extras.get("order", 1)),
                                       cfg.replicas, default_oracle(cfg.d),
                                       seed=cfg.seed)
    click.echo(f"E[chi^{est.order}]={est.mean!r} se={est.se!r} "
               f"replicas={est.replicas}")


# ---------------------------------------------------------------------------

_EXPERIMENTS = ("lln", "variance", "clt", "d4", "d3",
                "nonintersection", "conjectures")


@cli.command()
@click.argument("name", type=click.Choice(_EXPERIMENTS))
@click.option("--d", type=int, default=None)
@click.option("--n", type=int, default=None)
@click.option("--n-grid", "n_grid", default=None,
              help="Horizon grid, e.g. '1024 2048 4096'.")
@click.option("--replicas", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--backend", default=None)
@click.pass_context
def experiment(ctx, name, d, n, n_grid, replicas, seed, backend):
    """Run a Monte Carlo campaign and write CSV/JSON/plot artifacts."""
    fixed_d = {"d4": 4, "d3": 3, "nonintersection": 4}
    cfg = _build_config(ctx, name, d=d, n=n, n_grid=n_grid,
                        replicas=replicas, seed=seed, backend=backend,
                        needs_dimension=name not in fixed_d)
    if name in fixed_d:
        if cfg.d is not None and cfg.d != fixed_d[name]:
            raise ValidationError(f"{name} runs in d={fixed_d[name]} only")
        cfg.d = fixed_d[name]
    gates = _gates(cfg)
    grid = cfg.n_grid or ([cfg.n] if cfg.n else [])
    if not grid and name != "clt":
        raise ValidationError("n or n_grid is required")
    if not cfg.replicas:
        raise ValidationError("replicas: a positive count is required")
    kw = dict(seed=cfg.seed, workers=cfg.workers, gates=gates)

    if name == "lln":
        rep = exp_mod.run_lln(cfg.d, grid, cfg.replicas,
                              backend=cfg.backend, **kw)
    elif name == "variance":
        rep = exp_mod.run_variance(cfg.d, grid, cfg.replicas,
                                   backend=cfg.backend, **kw)
    elif name == "clt":
        if not cfg.n:
            raise ValidationError("clt needs a single --n")
        diag = exp_mod.run_clt(cfg.d, cfg.n, cfg.replicas,
                               backend=cfg.backend, **kw)
        diag.config_hash = cfg.hash()
        outdir = cfg.output_dir
        os.makedirs(outdir, exist_ok=True)
        stem = f"clt_d{cfg.d}_n{cfg.n}"
        atomic_write(os.path.join(outdir, f"{stem}.json"),
                     json.dumps(exp_mod._jsonable(diag.summary()),
                                indent=2, sort_keys=True) + "\n")
        atomic_write(os.path.join(outdir, f"{stem}.samples.dat"),
                     "\n".join(repr(v) for v in diag.standardized) + "\n")
        click.echo(f"ks_pvalue={diag.ks_pvalue!r} -> {outdir}/{stem}.json")
        return
    elif name == "d4":
        rep = exp_mod.run_d4(grid, cfg.replicas, **kw)
    elif name == "d3":
        rep = exp_mod.run_d3(grid, cfg.replicas, **kw)
    elif name == "nonintersection":
        rep = exp_mod.run_nonintersection(grid, cfg.replicas, seed=cfg.seed,
                                          workers=cfg.workers, gates=gates)
    else:
        rep = exp_mod.run_conjectures(cfg.d, grid, cfg.replicas, **kw)

    stem = f"{name}_d{rep.d}"
    paths = exp_mod.write_campaign(rep, cfg.output_dir, stem, config=cfg)
    click.echo(f"fits={json.dumps(exp_mod._jsonable(rep.fits), sort_keys=True)}")
    click.echo("wrote " + " ".join(paths))


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except ValidationError as exc:
        for v in exc.violations:
            click.echo(f"error: {v}", err=True)
        return 1
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    except (OutputError, OSError) as exc:
        click.echo(f"output failure: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
