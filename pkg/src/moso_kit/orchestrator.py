"""Batch iteration loop: search, fit, solve, evaluate, merge, repeat.

Iteration 0 evaluates a space-filling design over the latent cube.
Every later iteration refits the surrogates, refreshes each acquisition,
solves its penalized subproblem inside a trust region around its chosen
start record, swaps duplicates for model-improvement points, and sends
the resulting batch to a worker pool.  Results merge in batch order so
runs are reproducible for any worker count, and the whole solver state
(database, penalty, RNG streams) round-trips through JSON checkpoints.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import acquisition as acq
from . import embedding, optimizer
from .metrics import ParetoArchive
from .problem import (
    EvaluationDatabase,
    DuplicatePointError,
    EvaluationError,
    Moop,
    MosoError,
    ValidationError,
    eval_constraints,
    eval_objectives,
    latent_key,
    validate,
)
from .search import lhs_search
from .surrogate import RbfSurrogate, TrustRegion, trust_region

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
IMPROVE_RETRIES = 100


class CheckpointError(MosoError):
    """A checkpoint file is unreadable or does not match the problem."""


@dataclass
class PenaltyState:
    """Exponentially escalating constraint penalty multiplier."""

    value: float
    growth: float
    cap: float

    def escalate(self) -> None:
        self.value = min(self.value * self.growth, self.cap)


@dataclass(frozen=True)
class BatchPoint:
    design: dict
    latent: np.ndarray
    origin: str  # "search", "acquisition:<i>", or "improve:<i>"

    @property
    def optimizer_proposed(self) -> bool:
        return self.origin.startswith("acquisition:")


@dataclass
class CandidateBatch:
    iteration: int
    points: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class SolveResult:
    database: EvaluationDatabase
    archive: ParetoArchive
    iterations: int
    evaluations: int


def problem_fingerprint(moop: Moop) -> str:
    """Stable digest of the problem structure, for checkpoint matching."""
    desc = {
        "variables": [[v.name, v.kind, v.lower, v.upper, list(v.levels or [])]
                      for v in moop.variables],
        "simulations": [[s.name, s.output_dim, s.search.q0, s.surrogate.local]
                        for s in moop.simulations],
        "objectives": [f.name for f in moop.objectives],
        "constraints": [g.name for g in moop.constraints],
        "acquisitions": [[a.kind, list(a.weights or [])] for a in moop.acquisitions],
        "penalty": [moop.penalty.initial, moop.penalty.growth, moop.penalty.cap],
        "seed": moop.rng_seed,
    }
    blob = json.dumps(desc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


class MoopSolver:
    """Drives one problem from initial design to exhausted budget."""

    def __init__(self, moop, workers: int = 1, checkpoint_path=None,
                 optimizer_config: optimizer.OptimizerConfig | None = None):
        self.moop = validate(moop)
        if workers < 1:
            raise ValidationError("workers must be >= 1")
        self.workers = workers
        self.checkpoint_path = checkpoint_path
        self.opt_config = optimizer_config or optimizer.OptimizerConfig()
        self.database = EvaluationDatabase(self.moop.plan)
        self.penalty = PenaltyState(self.moop.penalty.initial,
                                    self.moop.penalty.growth,
                                    self.moop.penalty.cap)
        self.iteration = 0
        self.evaluations = 0  # attempts, including skipped points
        seq = np.random.SeedSequence(self.moop.rng_seed)
        children = seq.spawn(1 + self.moop.q)
        self._search_rng = np.random.default_rng(children[0])
        self._acq_rngs = [np.random.default_rng(c) for c in children[1:]]

    # -- iteration ---------------------------------------------------------

    def iterate(self, k: int) -> CandidateBatch:
        """Propose the next batch of design points (does not evaluate)."""
        if k == 0:
            sample = lhs_search(self.moop.q0, self.moop.latent_dim, self._search_rng)
            batch = CandidateBatch(iteration=k)
            for z in sample:
                design = embedding.extract(self.moop.plan, z)
                batch.points.append(BatchPoint(
                    design=design,
                    latent=embedding.embed(self.moop.plan, design),
                    origin="search"))
            return batch

        if len(self.database) == 0:
            raise MosoError("no evaluations available to build surrogates from")

        plan = self.moop.plan
        latents = self.database.latent_matrix()
        models = [RbfSurrogate.fit(latents, self.database.outputs_matrix(i))
                  for i in range(len(self.moop.simulations))]
        archive = ParetoArchive.from_records(self.database.records)

        batch = CandidateBatch(iteration=k)
        # Insertion-ordered so iteration order never depends on hash seeds;
        # the order feeds covariance sums inside the improvement search.
        batch_keys: dict[bytes, None] = {}

        for i, spec in enumerate(self.moop.acquisitions):
            rng = self._acq_rngs[i]
            state = acq.refresh(spec, archive, rng, self.moop.o, self.opt_config.kappa)
            start = acq.select_start(state, self.database, self.penalty.value)
            center = self.database.records[start].latent
            region = trust_region(center, latents, self.moop.n)
            local_models = []
            for sim, model in zip(self.moop.simulations, models):
                localized, region = model.set_center(
                    center, latents, model.values, self.moop.n,
                    local=sim.surrogate.local)
                local_models.append(localized)

            outcome = optimizer.solve(self.moop, state, local_models, center,
                                      region, self.penalty.value, self.opt_config)
            point = None
            duplicate = False
            if outcome.candidate is not None:
                design = embedding.extract(plan, outcome.candidate)
                z = embedding.embed(plan, design)
                key = latent_key(z)
                if not self.database.has_key(key) and key not in batch_keys:
                    point = BatchPoint(design, z, f"acquisition:{i}")
                else:
                    duplicate = True

            if point is None:
                # A solve that converged onto an already-known point has
                # exhausted its region; refine the model globally instead.
                # A solve that could not make sufficient decrease still
                # needs better local data, so it refines within its region.
                improve_region = region
                if duplicate:
                    improve_region = TrustRegion(
                        center=np.full(self.moop.latent_dim, 0.5), radius=0.5)
                point = self._improvement_point(i, local_models[0] if local_models else None,
                                                improve_region, latents, batch_keys, rng)
            if point is not None:
                batch_keys[latent_key(point.latent)] = None
                batch.points.append(point)
        return batch

    def _improvement_point(self, i, model, region, latents, batch_keys, rng):
        """Model-improvement replacement whose canonical key is unused."""
        if model is None:
            return None
        existing = latents
        if batch_keys:
            extra = np.array([np.frombuffer(k, dtype=float) for k in batch_keys])
            existing = np.vstack([latents, extra])
        for _ in range(IMPROVE_RETRIES):
            z_raw = model.improve(region, existing, rng)
            design = embedding.extract(self.moop.plan, z_raw)
            z = embedding.embed(self.moop.plan, design)
            key = latent_key(z)
            if not self.database.has_key(key) and key not in batch_keys:
                return BatchPoint(design, z, f"improve:{i}")
        logger.warning("acquisition %d: could not find an unevaluated point; dropped", i)
        return None

    # -- evaluation --------------------------------------------------------

    def _run_simulations(self, design):
        return [np.atleast_1d(np.asarray(s.evaluator(design), dtype=float))
                for s in self.moop.simulations]

    def evaluate_batch(self, batch: CandidateBatch) -> list:
        """Evaluate a batch through the worker pool and merge the results.

        Returns one record (or None for a skipped point) per batch entry,
        in batch order regardless of completion order.  Failed or
        non-finite evaluations are skipped with a warning; every point
        still counts against the budget.
        """
        designs = [p.design for p in batch.points]
        if self.workers == 1 or len(designs) <= 1:
            raw = []
            for d in designs:
                try:
                    raw.append(self._run_simulations(d))
                except Exception as err:  # noqa: BLE001 - user code may raise anything
                    raw.append(err)
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                futures = [pool.submit(self._run_simulations, d) for d in designs]
                raw = []
                for fut in futures:
                    try:
                        raw.append(fut.result())
                    except Exception as err:  # noqa: BLE001
                        raw.append(err)

        results = []
        for point, outputs in zip(batch.points, raw):
            self.evaluations += 1
            results.append(self._merge_one(point, outputs, batch.iteration))
        return results

    def _merge_one(self, point, outputs, iteration):
        if isinstance(outputs, Exception):
            logger.warning("simulation failed at %s: %s; point skipped", point.design, outputs)
            return None
        for sim, out in zip(self.moop.simulations, outputs):
            if out.shape != (sim.output_dim,):
                logger.warning("simulation %r returned shape %s, expected (%d,); point skipped",
                               sim.name, out.shape, sim.output_dim)
                return None
            if not np.isfinite(out).all():
                logger.warning("simulation %r returned non-finite values; point skipped", sim.name)
                return None
        s = np.concatenate(outputs) if outputs else np.empty(0)
        try:
            f = eval_objectives(self.moop, point.design, s)
            g = eval_constraints(self.moop, point.design, s)
        except EvaluationError as err:
            logger.warning("%s; point skipped", err)
            return None
        try:
            return self.database.add(point.design, outputs, f, g, iteration)
        except DuplicatePointError:
            logger.warning("duplicate design point skipped at iteration %d", iteration)
            return None

    # -- penalty -----------------------------------------------------------

    def update_penalty(self, batch: CandidateBatch, results) -> float:
        """Escalate the penalty when every proposed point came back infeasible."""
        proposed = [r for p, r in zip(batch.points, results)
                    if p.optimizer_proposed and r is not None]
        if proposed and all(not r.feasible for r in proposed):
            self.penalty.escalate()
        return self.penalty.value

    # -- outer loop --------------------------------------------------------

    def _next_batch_size(self) -> int:
        return self.moop.q0 if self.iteration == 0 else self.moop.q

    def solve(self, budget: int) -> SolveResult:
        """Run iterations until the next batch would exceed ``budget``.

        The budget counts evaluation attempts: q0 for the initial design
        plus q per completed iteration.
        """
        if budget < self.moop.q0:
            raise ValidationError(f"budget {budget} cannot cover the initial design "
                                  f"of {self.moop.q0} points")
        while self.evaluations + self._next_batch_size() <= budget:
            batch = self.iterate(self.iteration)
            results = self.evaluate_batch(batch)
            if self.iteration > 0:
                self.update_penalty(batch, results)
            self.iteration += 1
            if self.checkpoint_path:
                self.checkpoint_save(self.checkpoint_path)
        return SolveResult(
            database=self.database,
            archive=ParetoArchive.from_records(self.database.records),
            iterations=self.iteration,
            evaluations=self.evaluations,
        )

    # -- checkpoints ---------------------------------------------------------

    def checkpoint_save(self, path) -> None:
        """Write the full mutable state as canonical JSON (atomic rename)."""
        state = {
            "version": CHECKPOINT_VERSION,
            "problem": problem_fingerprint(self.moop),
            "iteration": self.iteration,
            "evaluations": self.evaluations,
            "penalty": self.penalty.value,
            "rng": {
                "search": self._search_rng.bit_generator.state,
                "acquisitions": [r.bit_generator.state for r in self._acq_rngs],
            },
            "records": [
                {
                    "design": rec.design,
                    "outputs": [o.tolist() for o in rec.sim_outputs],
                    "objectives": rec.objectives.tolist(),
                    "constraints": rec.constraints.tolist(),
                    "iteration": rec.iteration,
                }
                for rec in self.database.records
            ],
        }
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh, sort_keys=True, indent=1)
        os.replace(tmp, path)

    @classmethod
    def checkpoint_load(cls, path, moop, workers: int = 1,
                        optimizer_config: optimizer.OptimizerConfig | None = None,
                        checkpoint_path=None) -> "MoopSolver":
        """Rebuild a solver mid-run from a checkpoint of the same problem."""
        try:
            with open(path, "r", encoding="utf-8") as fh:
                state = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise CheckpointError(f"unreadable checkpoint {path}: {err}") from err
        try:
            version = state["version"]
            if version != CHECKPOINT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {version}")
            solver = cls(moop, workers=workers,
                         checkpoint_path=checkpoint_path or path,
                         optimizer_config=optimizer_config)
            if state["problem"] != problem_fingerprint(solver.moop):
                raise CheckpointError("checkpoint was written for a different problem")
            solver.iteration = state["iteration"]
            solver.evaluations = state["evaluations"]
            solver.penalty.value = state["penalty"]
            solver._search_rng.bit_generator.state = state["rng"]["search"]
            for rng, st in zip(solver._acq_rngs, state["rng"]["acquisitions"]):
                rng.bit_generator.state = st
            for rec in state["records"]:
                s = [np.asarray(o, dtype=float) for o in rec["outputs"]]
                solver.database.add(rec["design"], s,
                                    np.asarray(rec["objectives"], dtype=float),
                                    np.asarray(rec["constraints"], dtype=float),
                                    rec["iteration"])
        except (KeyError, TypeError, IndexError) as err:
            raise CheckpointError(f"corrupt checkpoint {path}: {err}") from err
        return solver
