"""Command line interface.

Exit codes: 0 success (for checks and probes: every criterion passed),
1 usage error, 2 validation error, 3 numerical failure, 4 a check or probe
ran but some criterion failed.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, _backend
from .checks import CHECKS
from .decomposition import cone_sector_cutoff, cone_shell_sampler, spherical_partition
from .errors import NumericalError, ValidationError
from .group import BUILTINS, builtin_group, classify_pfaffian_form, group_to_json, resolve_group
from .harness import config_hash, mh_ratio_probe, ratio_spread, scaling_probe_cone, scaling_probe_p
from .kernel import TruncationSpec, synthesize_kernel, write_nkg1
from .multipliers import multiplier_from_spec
from .spectral import decompose

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_FAILED = 0, 1, 2, 3, 4

log = logging.getLogger("sublap")


# -- config handling -------------------------------------------------------------

def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    return cfg


def _parse_multiplier(text):
    """JSON object, a kind name (``heat``), ``bump:a,b``, ``heat:t`` or a CSV path."""
    if text is None:
        return None
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad multiplier JSON: {exc}") from exc
    if text.endswith(".csv"):
        return {"kind": "table", "path": text}
    kind, _, args = text.partition(":")
    try:
        vals = [float(v) for v in args.split(",")] if args else []
    except ValueError as exc:
        raise ValidationError(f"bad multiplier {text!r}") from exc
    if kind == "bump" and len(vals) == 2:
        return {"kind": "bump", "a": vals[0], "b": vals[1]}
    if kind == "heat" and vals:
        return {"kind": "heat", "t": vals[0]}
    return {"kind": kind}


def _parse_grid(text, G):
    """JSON ``{"x": [[n, dx], ...], "u": [...]}`` or ``N:DX/M:DU`` (same count and spacing on every axis of a layer)."""
    if text is None:
        return None
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad grid JSON: {exc}") from exc
    try:
        xs, us = text.split("/")
        nx, dx = xs.split(":")
        nu, du = us.split(":")
        return {"x": [[int(nx), float(dx)]] * G.d1, "u": [[int(nu), float(du)]] * G.d2}
    except ValueError as exc:
        raise ValidationError(f"bad grid {text!r}; expected N:DX/M:DU") from exc


def _parse_eta(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ValidationError(f"bad eta {text!r}") from exc


def _grid_pairs(grid, key):
    try:
        return [(int(n), float(d)) for n, d in grid[key]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"grid needs a list of [count, spacing] under {key!r}") from exc


def _dump(obj, out: Path | None):
    text = json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _runtime(seconds: float):
    click.echo(f"runtime_seconds={seconds:.3f}", err=True)


# -- commands --------------------------------------------------------------------

@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Joint functional calculus of sub-Laplacians on 2-step groups."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.group()
def groups():
    """Builtin groups."""


@groups.command("list")
def groups_list():
    """Print the builtin groups with d1, d2, Q, d and class."""
    click.echo(f"{'name':8s} {'d1':>3s} {'d2':>3s} {'Q':>3s} {'d':>3s}  class")
    for name in BUILTINS:
        G = builtin_group(name)
        cls = classify_pfaffian_form(G) if (G.d1, G.d2) == (4, 3) else "n/a"
        click.echo(f"{name:8s} {G.d1:3d} {G.d2:3d} {G.Q:3d} {G.dim:3d}  {cls}")


@cli.command()
@click.option("--group", "group", required=True, help="Builtin name or group JSON file.")
def classify(group):
    """Class of a group with d1=4, d2=3 from its Pfaffian form."""
    G = resolve_group(group)
    if (G.d1, G.d2) != (4, 3):
        raise ValidationError("classification needs d1=4, d2=3")
    click.echo(classify_pfaffian_form(G))


@cli.command()
@click.option("--group", "group", required=True)
@click.option("--eta", required=True, help="Comma separated, e.g. 1,0,1.")
@click.option("--out", type=click.Path(path_type=Path))
def spectrum(group, eta, out):
    """Spectral data of J_eta as JSON."""
    G = resolve_group(group)
    _dump({"group": G.name, "eta": _parse_eta(eta).tolist(), **decompose(G, _parse_eta(eta)).to_json()}, out)


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path))
@click.option("--group", "group")
@click.option("--multiplier")
@click.option("--grid")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="NKG1 output file.")
@click.option("--threads", type=int, default=None, help="Worker threads (default: all cores).")
@click.option("--dry-run", is_flag=True)
def kernel(config_path, group, multiplier, grid, out, threads, dry_run):
    """Synthesize a kernel grid and write it in NKG1 format (plus a JSON sidecar)."""
    cfg = _load_config(config_path)
    G = resolve_group(group or cfg.get("group", "H1"))
    H = multiplier_from_spec(_parse_multiplier(multiplier) or cfg.get("multiplier", {"kind": "heat", "t": 1.0}))
    g = _parse_grid(grid, G) or cfg.get("grid")
    if g is None:
        raise ValidationError("a grid is required (--grid or config 'grid')")
    xg, ug = _grid_pairs(g, "x"), _grid_pairs(g, "u")
    trunc = TruncationSpec(**cfg.get("truncation", {}))
    run = {"group": group_to_json(G), "multiplier": H.to_spec(), "grid": {"x": xg, "u": ug},
           "truncation": trunc.to_spec(), "backend": _backend.NAME}
    if dry_run:
        from .kernel import _validate_axes, nyquist_check

        _validate_axes(xg, G.d1, "x")
        _validate_axes(ug, G.d2, "u")
        if not H.is_zero:
            nyquist_check(H, G, xg, ug)
        click.echo(f"config ok ({config_hash(run)[:12]})")
        return
    t0 = time.perf_counter()
    K = synthesize_kernel(H, G, xg, ug, trunc, threads=threads or os.cpu_count() or 1)
    write_nkg1(out, K)
    run["provenance"] = K.provenance
    run["config_hash"] = config_hash({k: v for k, v in run.items() if k != "provenance"})
    _dump(run, out.with_suffix(out.suffix + ".json"))
    _runtime(time.perf_counter() - t0)


@cli.command()
@click.argument("which", type=click.Choice(sorted(CHECKS)))
@click.option("--group", "group", default=None, help="Group for the plancherel check (default H1).")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path))
def check(which, group, seed, out):
    """Run a numerical self-check; exit 0 iff it passes."""
    t0 = time.perf_counter()
    kwargs = {}
    if which == "plancherel":
        kwargs["group"] = group or "H1"
        if kwargs["group"] == "G37D":
            kwargs["xi_quadrature"] = {"kind": "mc", "samples": 10_000_000, "margin": 10}
    if which != "laguerre":
        kwargs["seed"] = seed
    res = CHECKS[which](**kwargs)
    _dump(res, out)
    _runtime(time.perf_counter() - t0)
    if not res["passed"]:
        sys.exit(EXIT_FAILED)


PROBE_DEFAULTS = {
    "scaling-cone": {"group": "G37D", "multiplier": {"kind": "bump", "a": 1.0, "b": 2.0}, "alpha": [0, 0, 0],
                     "theta": 0.0, "rho_list": [2.0**-k for k in range(2, 7)], "delta_list": [2.0**-k for k in range(3, 7)],
                     "n_eta": 8192, "n_x": 256},
    "scaling-p": {"group": "G37D", "multiplier": {"kind": "bump", "a": 1.0, "b": 2.0}, "alpha": [0, 0, 0],
                  "theta": 0.0, "rho_list": [2.0**-k for k in range(2, 7)],
                  "delta_lists": [[2.0**-k for k in range(2, 6)], [1.0], [0.5]], "n_eta": 8192, "n_x": 256},
    "mh": {"group": "H1", "multiplier": {"kind": "bump", "a": 1.0, "b": 2.0}, "s": 2.0,
           "t_list": [2.0**k for k in range(-6, 7)], "grid": {"x": [[64, 0.3], [64, 0.3]], "u": [[128, 0.15]]},
           "spread_limit": 4.0},
}


def _probe_config(which, cfg, group, multiplier, grid, seed):
    merged = dict(PROBE_DEFAULTS[which])
    merged.update(cfg.get("probe", {}))
    for key in ("group", "multiplier", "grid"):
        if key in cfg:
            merged[key] = cfg[key]
    if group:
        merged["group"] = group
    if multiplier:
        merged["multiplier"] = _parse_multiplier(multiplier)
    if grid:
        merged["grid"] = _parse_grid(grid, resolve_group(merged["group"]))
    if which != "mh":
        merged["seed"] = seed if seed is not None else cfg.get("seed", 0)
    return merged


def _write_table(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(r[h])) for h in header])


@cli.command()
@click.argument("which", type=click.Choice(sorted(PROBE_DEFAULTS)))
@click.option("--config", "config_path", type=click.Path(path_type=Path))
@click.option("--group", "group")
@click.option("--multiplier")
@click.option("--grid")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(path_type=Path), help="Report JSON; a CSV table is written next to it.")
@click.option("--threads", type=int, default=None, help="Accepted for symmetry; probes run in one thread.")
@click.option("--dry-run", is_flag=True)
def probe(which, config_path, group, multiplier, grid, seed, out, threads, dry_run):
    """Run an empirical probe and emit a report; exit 0 iff all criteria pass."""
    c = _probe_config(which, _load_config(config_path), group, multiplier, grid, seed)
    G = resolve_group(c["group"])
    F = multiplier_from_spec(c["multiplier"])
    if dry_run:
        click.echo(f"config ok ({config_hash(c)[:12]})")
        return
    if which == "scaling-cone":
        rep = scaling_probe_cone(G, F, c["alpha"], c["theta"], c["rho_list"], c["delta_list"],
                                 n_eta=c["n_eta"], n_x=c["n_x"], seed=c["seed"])
        header = ["rho", "delta", "norm2"]
    elif which == "scaling-p":
        rep = scaling_probe_p(G, F, c["alpha"], c["theta"], c["rho_list"], c["delta_lists"],
                              n_eta=c["n_eta"], n_x=c["n_x"], seed=c["seed"])
        header = ["rho", "delta1", "delta2", "delta3", "norm2"]
    else:
        xg, ug = _grid_pairs(c["grid"], "x"), _grid_pairs(c["grid"], "u")
        rep = mh_ratio_probe(G, F, c["s"], c["t_list"], xg, ug)
        spread = ratio_spread(rep.rows)
        rep.criteria = {"spread": bool(spread <= c["spread_limit"])}
        rep.fit = {"spread": spread}
        header = ["t", "l1", "mhnorm", "ratio"]
    doc = rep.to_json()
    doc["config"] = c
    _dump(doc, out)
    if out is not None:
        _write_table(out.with_suffix(".csv"), header, rep.rows)
    _runtime(rep.runtime)
    if not rep.passed:
        sys.exit(EXIT_FAILED)


@cli.group()
def partition():
    """Spherical partitions of unity."""


@partition.command("dump")
@click.option("--eps", type=float, required=True)
@click.option("--dim", "n", type=int, default=2)
@click.option("--out", type=click.Path(path_type=Path))
def partition_dump(eps, n, out):
    """Centers of the eps-separated set and partition metadata as JSON."""
    part = spherical_partition(n, eps)
    _dump({"n": n, "eps": eps, "count": len(part.centers), "count_times_eps_pow": part.constant,
           "phi": {"plateau": [0.5, 2.5], "support": [0.25, 4.0]}, "centers": part.centers.tolist()}, out)


@partition.command("eval")
@click.option("--rho", type=float, default=1.0)
@click.option("--delta", type=float, default=2**-4)
@click.option("--index", type=int, default=0, help="Sector index in the delta-partition of S^1.")
@click.option("--sign", type=click.Choice(["1", "-1"]), default="1")
@click.option("--samples", type=int, default=10_000)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path))
def partition_eval(rho, delta, index, sign, samples, seed, out):
    """Evaluate a cone sector cutoff of G37D at seeded points of its shell as CSV (eta1,eta2,eta3,value)."""
    G = builtin_group("G37D")
    piece = cone_sector_cutoff(G, rho, delta, index, int(sign))
    eta = cone_shell_sampler(rho, delta)(np.random.default_rng(seed), samples)
    vals = piece(eta)
    fh = out.open("w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["eta1", "eta2", "eta3", "value"])
        for e, v in zip(eta, vals):
            w.writerow([repr(float(e[0])), repr(float(e[1])), repr(float(e[2])), repr(float(v))])
    finally:
        if out:
            fh.close()


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="sublap", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERICAL
    except SystemExit as exc:
        return int(exc.code or 0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
