"""``ttmag`` command-line interface.

Each command turns a resolved configuration into a set of output texts
(:func:`execute`), which keeps runs reproducible from their manifest alone.
Exit codes: 0 success, 1 replay mismatch, 2 configuration, 3 numerical,
4 protocol (no transition inside the bracket).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import click
import numpy as np

from . import __version__, config, dynamics, machine, protocol, report
from .errors import (
    BracketError,
    ClassificationError,
    ConfigError,
    DomainError,
    NumericalError,
    ProtocolError,
)
from .figures import FIGURES

EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PROTOCOL = 4


@dataclass
class Outcome:
    report: dict[str, Any]
    files: dict[str, str] = field(default_factory=dict)
    seed: int | None = None


def suggest_bracket(cfg: machine.MachineConfig, lo: float, hi: float) -> tuple[float, float] | None:
    """Coarse sweep around ``[lo, hi]`` looking for a sign change of ``Q_h``.

    The sign of ``Q_h`` does not depend on the mixing angle, so the swap
    closed form is used whatever the configured coupling.
    """
    grid = np.geomspace(lo / 10.0, hi * 10.0, 61)
    try:
        q = [machine.analytic_swap_heats(cfg.with_omega_k(float(w)).spec_k, cfg.spec_u).q_h for w in grid]
    except (DomainError, NumericalError, ClassificationError):
        return None
    for i in range(len(grid) - 1):
        if q[i] == 0.0 or q[i] * q[i + 1] < 0:
            return float(grid[i]), float(grid[i + 1])
    return None


def _cycle(conf, args) -> Outcome:
    cfg = config.machine_config(conf)
    res = machine.analytic_cycle(cfg) if args.get("analytic") else machine.run_cycle(cfg)
    out = report.jsonable(res)
    out["tau_th"] = report.jsonable(dynamics.thermalization_timescale(cfg.spec_k, cfg.spec_u))
    out["kind"] = cfg.inter.kind.value
    out["omega_k"] = cfg.spec_k.omega
    return Outcome(out, {"cycle.json": report.json_text(out)})


def _fig(conf, args) -> Outcome:
    name = args["name"]
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    header, rows = FIGURES[name](config.machine_config(conf))
    return Outcome({"figure": name, "columns": header, "rows": len(rows)}, {f"{name}.csv": report.csv_text(header, rows)})


def _estimate(conf, args) -> Outcome:
    cfg = config.machine_config(conf)
    e = conf["estimate"]
    try:
        res = protocol.find_transition(
            cfg, (e["lo"], e["hi"]), tol=e["tol"], analytic=e["analytic"], budget=config.error_budget(conf)
        )
    except BracketError as exc:
        hint = suggest_bracket(cfg, *sorted((e["lo"], e["hi"])))
        if hint is not None:
            msg = f"{exc}. A coarse sweep finds a sign change in [{hint[0]:.6g}, {hint[1]:.6g}]; try --lo {hint[0]:.6g} --hi {hint[1]:.6g}"
        else:
            msg = f"{exc}. A coarse sweep over [{e['lo'] / 10:.6g}, {e['hi'] * 10:.6g}] found no sign change"
        raise BracketError(msg) from exc
    out = report.jsonable(res)
    out["method"] = "analytic" if e["analytic"] else "master"
    return Outcome(out, {"estimate.json": report.json_text(out)})


def _montecarlo(conf, args) -> Outcome:
    mc = config.monte_carlo_config(conf)
    res = protocol.monte_carlo_scaling(config.machine_config(conf), mc)
    out = report.jsonable(res)
    out["d_omega_prime"] = mc.d_omega_prime
    files = {"montecarlo.json": report.json_text(out)}
    if args.get("dump_trials"):
        rows = [[i, k, u] for i, (k, u) in enumerate(zip(res.omega_k_star, res.omega_un_hat))]
        files["trials.csv"] = report.csv_text(["trial", "omega_k_star", "omega_un_hat"], rows)
    return Outcome(out, files, seed=mc.seed)


def _unimodality(conf, args) -> Outcome:
    kw = config.unimodality_inputs(conf)
    res = protocol.unimodality_check(**kw)
    out = report.jsonable(res)
    out.update(samples=kw["samples"], bins=kw["bins"], seed=kw["seed"])
    files = {
        "unimodality.json": report.json_text(out),
        "histogram.csv": report.csv_text(["bin_center", "count"], zip(res.bin_centers, res.counts)),
    }
    return Outcome(out, files, seed=kw["seed"])


COMMANDS = {
    "cycle": _cycle,
    "fig": _fig,
    "estimate": _estimate,
    "montecarlo": _montecarlo,
    "unimodality": _unimodality,
}


def execute(command: str, conf: dict, args: dict) -> Outcome:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    return COMMANDS[command](conf, args)


def make_manifest(command: str, conf: dict, args: dict, outcome: Outcome) -> report.RunManifest:
    return report.RunManifest(
        command=command,
        args=dict(args),
        config=report.jsonable(conf),
        seed=outcome.seed,
        version=__version__,
        outputs={name: report.sha256(text.encode("utf-8")) for name, text in sorted(outcome.files.items())},
    )


def _fail(code: int, msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guarded(fn):
    try:
        return fn()
    except (ConfigError, DomainError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except (NumericalError, ClassificationError) as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    except ProtocolError as exc:
        _fail(EXIT_PROTOCOL, str(exc))


def _emit(command: str, conf: dict, args: dict, outcome: Outcome, out_dir: str | None) -> None:
    manifest = make_manifest(command, conf, args, outcome)
    shown = dict(outcome.report)
    if out_dir is None:
        shown["manifest"] = report.jsonable(manifest)
    else:
        d = Path(out_dir)
        try:
            d.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create {out_dir!r}: {exc.strerror or exc}") from exc
        for name, text in outcome.files.items():
            report.write_text(d / name, text)
        report.write_text(d / "manifest.json", manifest.to_json())
    click.echo(report.json_text(shown), nl=False)


def _run(command: str, config_path, sets, overrides: dict, args: dict, out_dir) -> None:
    def go():
        conf = config.load(config_path, list(sets))
        for key, value in overrides.items():
            if value is not None:
                config.apply(conf, key, value)
        outcome = execute(command, conf, args)
        _emit(command, conf, args, outcome, out_dir)

    _guarded(go)


def common(fn):
    fn = click.option("--out-dir", type=click.Path(file_okay=False), default=None,
                      help="Write outputs and manifest.json into this directory.")(fn)
    fn = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                      help="Override one configuration key, e.g. machine.kind=swap.")(fn)
    fn = click.option("-c", "--config", "config_path", type=click.Path(dir_okay=False), default=None,
                      help="Configuration file (key = value lines, or JSON).")(fn)
    return fn


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="ttmag")
def cli():
    """Two-qubit thermal machine used as a magnetometer."""


@cli.command()
@common
@click.option("--analytic", is_flag=True, help="Use closed-form heats instead of the master equation.")
def cycle(config_path, sets, out_dir, analytic):
    """Run one machine cycle and print heats, work and regime."""
    _run("cycle", config_path, sets, {}, {"analytic": analytic}, out_dir)


@cli.command()
@click.argument("name", type=click.Choice(sorted(FIGURES)))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="CSV file to write.")
@click.option("-c", "--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE")
def fig(name, out_path, config_path, sets):
    """Write the data table of a figure as CSV (manifest alongside)."""

    def go():
        conf = config.load(config_path, list(sets))
        args = {"name": name}
        outcome = execute("fig", conf, args)
        manifest = make_manifest("fig", conf, args, outcome)
        out = Path(out_path)
        report.write_text(out, outcome.files[f"{name}.csv"])
        report.write_text(out.with_name(out.name + ".manifest.json"), manifest.to_json())
        click.echo(report.json_text(outcome.report), nl=False)

    _guarded(go)


@cli.command()
@common
@click.option("--lo", type=float, default=None, help="Lower end of the omega_k bracket.")
@click.option("--hi", type=float, default=None, help="Upper end of the omega_k bracket.")
@click.option("--tol", type=float, default=None, help="Bracket width at which bisection stops.")
@click.option("--analytic", is_flag=True, default=None, help="Bisect on closed-form heats.")
def estimate(config_path, sets, out_dir, lo, hi, tol, analytic):
    """Locate the transition by bisection on Q_h and infer omega_un."""
    overrides = {"estimate.lo": lo, "estimate.hi": hi, "estimate.tol": tol,
                 "estimate.analytic": True if analytic else None}
    _run("estimate", config_path, sets, overrides, {}, out_dir)


@cli.command()
@common
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--dump-trials", is_flag=True, help="Also write trials.csv (needs --out-dir).")
def montecarlo(config_path, sets, out_dir, trials, seed, dump_trials):
    """Monte Carlo error-scaling experiment."""
    if dump_trials and out_dir is None:
        _fail(EXIT_CONFIG, "--dump-trials needs --out-dir")
    _run("montecarlo", config_path, sets, {"mc.trials": trials, "mc.seed": seed},
         {"dump_trials": dump_trials}, out_dir)


@cli.command()
@common
@click.option("--samples", type=int, default=None)
@click.option("--bins", type=int, default=None)
@click.option("--seed", type=int, default=None)
def unimodality(config_path, sets, out_dir, samples, bins, seed):
    """Check that the estimator distribution has a single peak."""
    overrides = {"unimodality.samples": samples, "unimodality.bins": bins, "unimodality.seed": seed}
    _run("unimodality", config_path, sets, overrides, {}, out_dir)


@cli.command()
@click.argument("manifest_path", metavar="MANIFEST", type=click.Path(dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Also write the regenerated outputs here.")
def replay(manifest_path, out_dir):
    """Re-run a manifest and compare output checksums."""

    def go():
        m = report.RunManifest.from_file(manifest_path)
        conf = config.from_mapping(m.config)
        outcome = execute(m.command, conf, m.args)
        fresh = make_manifest(m.command, conf, m.args, outcome)
        mismatched = sorted(k for k in m.outputs if fresh.outputs.get(k) != m.outputs[k])
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            for name, text in outcome.files.items():
                report.write_text(Path(out_dir) / name, text)
        click.echo(report.json_text({"command": m.command, "identical": not mismatched, "mismatched": mismatched}), nl=False)
        if m.version != __version__:
            click.echo(f"warning: manifest written by version {m.version}, running {__version__}", err=True)
        if mismatched:
            sys.exit(EXIT_MISMATCH)

    _guarded(go)


def main(argv: list[str] | None = None) -> None:
    cli.main(args=argv, prog_name="ttmag")


if __name__ == "__main__":
    main()
