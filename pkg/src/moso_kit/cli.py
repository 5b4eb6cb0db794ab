"""Command line interface: run problems, recompute metrics, benchmark scaling.

A run is described by a JSON config document::

    {
      "seed": 0,
      "budget": 1000,
      "search": {"q0": 200},
      "penalty": {"initial": 1.0, "growth": 2.0, "cap": 1e8},
      "variables": [
        {"name": "x", "kind": "continuous", "lower": 0.0, "upper": 1.0, "count": 10},
        {"name": "solvent", "kind": "categorical", "levels": ["S1", "S2"]},
        {"name": "stages", "kind": "integer", "lower": 1, "upper": 5}
      ],
      "simulations": [
        {"name": "sim", "testbed": "dtlz2", "options": {"n_objectives": 3},
         "delay": [1.0, 3.0], "local": false}
      ],
      "objectives": [
        {"name": "f1", "form": "identity", "index": 0, "scale": 1.0},
        {"name": "loss", "form": "sum_of_squares", "indices": [0, 1]},
        {"name": "time", "form": "variable", "variable": "reaction_time"},
        {"name": "mix", "form": "linear", "coeffs": [1, -1], "const": 0.0}
      ],
      "constraints": [
        {"name": "cap", "form": "sum_of_squares", "indices": [0, 1], "cap": 160.0},
        {"name": "lim", "form": "identity", "index": 0, "cap": 1.0}
      ],
      "acquisitions": [
        {"kind": "fixed_weight", "weights": [0.34, 0.33, 0.33]},
        {"kind": "random_epsilon_constraint", "count": 15}
      ],
      "metrics": {"ref": [1.0, 1.0, 1.0]}
    }

``count`` expands a variable entry into name1..nameN.  Simulation
evaluators come from the built-in testbed registry; ``delay`` wraps them
in a uniform random sleep.  ``metrics.ref`` fixes the hypervolume
reference point; without it the feasible nadir of the finished run is
used.  Exit codes: 0 on success, 2 for config problems, 3 for runtime
failures.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, testbed
from .metrics import hypervolume, nondominated_filter, pct_hv_improvement
from .orchestrator import MoopSolver
from .problem import (
    AcquisitionSpec,
    DesignVariable,
    MoopDefinition,
    MosoError,
    PenaltyConfig,
    SearchConfig,
    SimulationSpec,
    SurrogateConfig,
    ValidationError,
    identity_constraint,
    identity_objective,
    linear_objective,
    sum_of_squares_constraint,
    sum_of_squares_objective,
    validate,
    variable_objective,
)


class ConfigError(MosoError):
    """The config document cannot be turned into a problem."""


TESTBED_REGISTRY = {
    "dtlz2": None,  # special-cased: needs the variable list and options
    "synthetic_residuals": testbed.synthetic_residuals,
    "residual_class_sums": testbed.residual_class_sums,
    "cfr_analog": testbed.cfr_analog,
    "cfr_analog_with_time": testbed.cfr_analog_with_time,
}

TESTBED_OUTPUT_DIMS = {
    "synthetic_residuals": testbed.N_RESIDUALS,
    "residual_class_sums": 3,
    "cfr_analog": 2,
    "cfr_analog_with_time": 3,
}


def _require(cfg, key, where):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return cfg[key]


def _build_variables(entries):
    out = []
    for entry in entries:
        name = _require(entry, "name", "variable")
        kind = _require(entry, "kind", f"variable {name!r}")
        count = entry.get("count")
        names = [name] if count is None else [f"{name}{i + 1}" for i in range(count)]
        for nm in names:
            if kind == "categorical":
                out.append(DesignVariable(nm, kind, levels=tuple(_require(entry, "levels", nm))))
            else:
                out.append(DesignVariable(nm, kind,
                                          lower=_require(entry, "lower", nm),
                                          upper=_require(entry, "upper", nm)))
    return out


def _build_simulations(entries, variables, seed):
    sims = []
    var_names = [v.name for v in variables]
    for i, entry in enumerate(entries):
        name = _require(entry, "name", f"simulation {i}")
        key = _require(entry, "testbed", f"simulation {name!r}")
        if key not in TESTBED_REGISTRY:
            raise ConfigError(f"simulation {name!r}: unknown testbed entry {key!r}")
        options = entry.get("options", {})
        if key == "dtlz2":
            o = options.get("n_objectives", 3)
            evaluator = _dtlz2_evaluator(var_names, o)
            output_dim = o
        else:
            evaluator = TESTBED_REGISTRY[key]
            output_dim = TESTBED_OUTPUT_DIMS[key]
        delay = entry.get("delay")
        if delay is not None:
            evaluator = testbed.delay_wrapper(
                evaluator, delay[0], delay[1],
                np.random.default_rng(np.random.SeedSequence([seed, 1000 + i])))
        sims.append(SimulationSpec(name, output_dim, evaluator,
                                   search=SearchConfig(q0=entry.get("q0", 100)),
                                   surrogate=SurrogateConfig(local=entry.get("local", True))))
    return sims


def _dtlz2_evaluator(var_names, n_objectives):
    def evaluator(design):
        return testbed.dtlz2(np.array([design[k] for k in var_names]), n_objectives)
    return evaluator


def _build_terms(entries, constraint: bool):
    out = []
    for i, entry in enumerate(entries):
        name = _require(entry, "name", f"term {i}")
        form = _require(entry, "form", name)
        if form == "identity":
            index = _require(entry, "index", name)
            if constraint:
                out.append(identity_constraint(name, index, _require(entry, "cap", name),
                                               scale=entry.get("scale", 1.0)))
            else:
                out.append(identity_objective(name, index, scale=entry.get("scale", 1.0)))
        elif form == "sum_of_squares":
            indices = _require(entry, "indices", name)
            if constraint:
                out.append(sum_of_squares_constraint(name, indices, _require(entry, "cap", name)))
            else:
                out.append(sum_of_squares_objective(name, indices))
        elif form == "variable" and not constraint:
            out.append(variable_objective(name, _require(entry, "variable", name),
                                          scale=entry.get("scale", 1.0)))
        elif form == "linear" and not constraint:
            out.append(linear_objective(name, _require(entry, "coeffs", name),
                                        const=entry.get("const", 0.0)))
        else:
            kind = "constraint" if constraint else "objective"
            raise ConfigError(f"{kind} {name!r}: unknown form {form!r}")
    return out


def _build_acquisitions(entries):
    out = []
    for i, entry in enumerate(entries):
        kind = _require(entry, "kind", f"acquisition {i}")
        count = entry.get("count", 1)
        for _ in range(count):
            weights = entry.get("weights")
            out.append(AcquisitionSpec(kind, weights=tuple(weights) if weights else None))
    return out


def load_config(path, seed_override=None):
    """Parse and validate a JSON config; returns (Moop, config dict)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
        cfg = json.loads(text)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")

    seed = seed_override if seed_override is not None else cfg.get("seed", 0)
    try:
        variables = _build_variables(_require(cfg, "variables", "config"))
        q0 = cfg.get("search", {}).get("q0")
        sims = _build_simulations(_require(cfg, "simulations", "config"), variables, seed)
        if q0 is not None:
            sims = [SimulationSpec(s.name, s.output_dim, s.evaluator,
                                   search=SearchConfig(q0=q0), surrogate=s.surrogate)
                    for s in sims]
        pen = cfg.get("penalty", {})
        defn = MoopDefinition(
            variables=variables,
            simulations=sims,
            objectives=_build_terms(_require(cfg, "objectives", "config"), constraint=False),
            constraints=_build_terms(cfg.get("constraints", []), constraint=True),
            acquisitions=_build_acquisitions(_require(cfg, "acquisitions", "config")),
            penalty=PenaltyConfig(initial=pen.get("initial", 1.0),
                                  growth=pen.get("growth", 2.0),
                                  cap=pen.get("cap", 1e8)),
            rng_seed=seed,
        )
        moop = validate(defn)
    except (ValidationError, ConfigError):
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"malformed config: {err}") from err
    return moop, cfg


# ---------------------------------------------------------------------------
# Output files

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_database_csv(path, moop, records) -> None:
    header = (["iteration"]
              + [f"var_{v.name}" for v in moop.variables]
              + [f"sim_{s.name}_{j}" for s in moop.simulations for j in range(s.output_dim)]
              + [f"obj_{f.name}" for f in moop.objectives]
              + [f"con_{g.name}" for g in moop.constraints]
              + ["feasible"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            row = [rec.iteration]
            row += [_fmt(rec.design[v.name]) for v in moop.variables]
            for out in rec.sim_outputs:
                row += [_fmt(v) for v in out]
            row += [_fmt(v) for v in rec.objectives]
            row += [_fmt(v) for v in rec.constraints]
            row.append(int(rec.feasible))
            writer.writerow(row)


def write_pareto_csv(path, moop, archive) -> None:
    header = ([f"var_{v.name}" for v in moop.variables]
              + [f"obj_{f.name}" for f in moop.objectives])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for design, objs in zip(archive.designs, archive.objectives):
            writer.writerow([_fmt(design[v.name]) for v in moop.variables]
                            + [_fmt(v) for v in objs])


def hv_trajectory(objectives, feasible, iterations, ref):
    """Per-iteration hypervolume of the feasible nondominated prefix."""
    rows = []
    for k in sorted(set(iterations)):
        prefix = [i for i, it in enumerate(iterations) if it <= k]
        mask = [i for i in prefix if feasible[i]]
        hv = hypervolume(objectives[mask], ref) if mask else 0.0
        rows.append((k, len(prefix), hv))
    return rows


def _reference_point(cfg, objectives, feasible):
    ref_cfg = cfg.get("metrics", {}).get("ref")
    if ref_cfg is not None:
        return np.asarray(ref_cfg, dtype=float)
    feas = objectives[np.asarray(feasible, dtype=bool)]
    if len(feas) == 0:
        return None
    return feas.max(axis=0)


def write_metrics_csv(path, moop, records, ref) -> None:
    objectives = np.vstack([r.objectives for r in records]) if records else np.empty((0, 0))
    feasible = [r.feasible for r in records]
    iterations = [r.iteration for r in records]
    fixed = [(i, np.asarray(a.weights, dtype=float))
             for i, a in enumerate(moop.acquisitions) if a.kind == "fixed_weight"]
    header = ["iteration", "evaluations", "hypervolume"]
    header += [f"best_fixed_{i}" for i, _ in fixed]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        if not records:
            return
        traj = (hv_trajectory(objectives, feasible, iterations, ref)
                if ref is not None else
                [(k, sum(1 for it in iterations if it <= k), float("nan"))
                 for k in sorted(set(iterations))])
        for k, evals, hv in traj:
            row = [k, evals, _fmt(hv)]
            for _, w in fixed:
                scores = [float(w @ r.objectives) for r in records
                          if r.iteration <= k and r.feasible]
                row.append(_fmt(min(scores)) if scores else _fmt(float("nan")))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Commands

@click.group()
@click.version_option(__version__)
def main() -> None:
    """Multiobjective simulation optimization toolkit."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="JSON problem config.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--budget", type=int, default=None, help="Total evaluation budget.")
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel simulation workers.")
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), default=None,
              help="Checkpoint file; resumes from it when it already exists.")
@click.option("--out", "out_dir", type=click.Path(), default=".", show_default=True,
              help="Directory for database.csv, pareto.csv, metrics.csv, run_meta.json.")
def run(config_path, seed, budget, workers, checkpoint_path, out_dir) -> None:
    """Run one optimization described by a config document."""
    try:
        moop, cfg = load_config(config_path, seed_override=seed)
        if budget is None:
            budget = cfg.get("budget")
        if budget is None:
            raise ConfigError("budget must be given via --budget or the config")
        if workers < 1:
            raise ConfigError("workers must be >= 1")
    except (ConfigError, ValidationError) as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(2)

    started = time.perf_counter()
    try:
        if checkpoint_path and Path(checkpoint_path).exists():
            solver = MoopSolver.checkpoint_load(checkpoint_path, moop, workers=workers)
        else:
            solver = MoopSolver(moop, workers=workers, checkpoint_path=checkpoint_path)
        result = solver.solve(budget)

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        records = result.database.records
        objectives = (np.vstack([r.objectives for r in records])
                      if records else np.empty((0, moop.o)))
        ref = _reference_point(cfg, objectives, [r.feasible for r in records])
        write_database_csv(out / "database.csv", moop, records)
        write_pareto_csv(out / "pareto.csv", moop, result.archive)
        write_metrics_csv(out / "metrics.csv", moop, records, ref)
        meta = {
            "budget": budget,
            "config_sha256": hashlib.sha256(Path(config_path).read_bytes()).hexdigest(),
            "evaluations": result.evaluations,
            "iterations": result.iterations,
            "reference_point": None if ref is None else [float(v) for v in ref],
            "seed": moop.rng_seed,
            "version": __version__,
            "walltime_s": time.perf_counter() - started,
            "workers": workers,
        }
        (out / "run_meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1),
                                           encoding="utf-8")
    except Exception as err:  # noqa: BLE001 - boundary: map everything to exit 3
        click.echo(f"runtime error: {err}", err=True)
        sys.exit(3)
    click.echo(f"done: {result.evaluations} evaluations, "
               f"{len(result.archive)} nondominated points")


@main.command()
@click.option("--db", "db_path", required=True, type=click.Path(), help="database.csv from a run.")
@click.option("--ref", "ref_text", default=None, help="Reference point, e.g. '1,1,1'.")
@click.option("--mode", type=click.Choice(["raw", "relative_to_initial", "relative_to_gap"]),
              default="raw", show_default=True)
@click.option("--hv-max", type=float, default=None, help="Ceiling for relative_to_gap.")
def metrics(db_path, ref_text, mode, hv_max) -> None:
    """Recompute the hypervolume trajectory from a run database."""
    try:
        objectives, feasible, iterations = _read_database(db_path)
        if ref_text is not None:
            ref = np.array([float(v) for v in ref_text.split(",")])
            if ref.size != objectives.shape[1]:
                raise ConfigError(f"--ref has {ref.size} entries, expected {objectives.shape[1]}")
        else:
            feas = objectives[np.asarray(feasible, dtype=bool)]
            if len(feas) == 0:
                raise ConfigError("no feasible rows and no --ref given")
            ref = feas.max(axis=0)
        if mode == "relative_to_gap" and hv_max is None:
            raise ConfigError("relative_to_gap needs --hv-max")
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(2)
    except Exception as err:  # noqa: BLE001
        click.echo(f"config error: {err}", err=True)
        sys.exit(2)

    try:
        traj = hv_trajectory(objectives, feasible, iterations, ref)
        out = io.StringIO()
        writer = csv.writer(out)
        header = ["iteration", "evaluations", "hypervolume"]
        if mode != "raw":
            header.append("pct_improvement")
        writer.writerow(header)
        hv0 = traj[0][2] if traj else 0.0
        for k, evals, hv in traj:
            row = [k, evals, _fmt(hv)]
            if mode != "raw":
                row.append(_fmt(pct_hv_improvement(hv, hv0, mode=mode, hv_max=hv_max)))
            writer.writerow(row)
        click.echo(out.getvalue(), nl=False)
    except Exception as err:  # noqa: BLE001
        click.echo(f"runtime error: {err}", err=True)
        sys.exit(3)


def _read_database(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
    except (OSError, StopIteration) as err:
        raise ConfigError(f"cannot read database: {err}") from err
    try:
        obj_cols = [i for i, h in enumerate(header) if h.startswith("obj_")]
        it_col = header.index("iteration")
        feas_col = header.index("feasible")
        if not obj_cols:
            raise ConfigError("no obj_* columns in database")
        objectives = np.array([[float(r[i]) for i in obj_cols] for r in rows])
        feasible = [r[feas_col] in ("1", "true", "True") for r in rows]
        iterations = [int(r[it_col]) for r in rows]
    except (ValueError, IndexError) as err:
        raise ConfigError(f"malformed database: {err}") from err
    return objectives, feasible, iterations


@main.command("bench-scaling")
@click.option("--workers-list", default="1,2,4,8", show_default=True,
              help="Comma-separated worker counts.")
@click.option("--sim-delay", default="0.05,0.15", show_default=True,
              help="Uniform sleep range per simulation, seconds.")
@click.option("--budget", type=int, default=160, show_default=True)
def bench_scaling(workers_list, sim_delay, budget) -> None:
    """Walltime of one fixed delayed problem across worker counts."""
    try:
        counts = [int(v) for v in workers_list.split(",")]
        t_min, t_max = (float(v) for v in sim_delay.split(","))
        if not counts or any(c < 1 for c in counts) or t_min < 0 or t_max < t_min:
            raise ValueError("bad workers or delay range")
    except ValueError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(2)

    try:
        click.echo("workers,walltime_s,evaluations")
        for w in counts:
            defn = testbed.dtlz2_moop(q0=16, batch=8, delay=(t_min, t_max))
            solver = MoopSolver(defn, workers=w)
            started = time.perf_counter()
            result = solver.solve(budget)
            elapsed = time.perf_counter() - started
            click.echo(f"{w},{elapsed:.3f},{result.evaluations}")
    except Exception as err:  # noqa: BLE001
        click.echo(f"runtime error: {err}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
