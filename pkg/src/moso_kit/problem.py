"""Problem definitions for multiobjective simulation optimization.

A problem couples a box-bounded mixed design space with one or more
expensive simulations and cheap algebraic objectives/constraints that
read both the design point and the simulation outputs.  Objectives and
constraints are minimized / satisfied-when-nonpositive.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from . import embedding

logger = logging.getLogger(__name__)

#: A named point in the user's design space, e.g. {"T": 80.0, "solvent": "S1"}.
DesignPoint = dict

#: Constraint values at or below this count as satisfied; the penalty
#: escalation trigger uses the same slack.
FEASIBILITY_TOL = 1e-8

VARIABLE_KINDS = ("continuous", "integer", "categorical", "custom")
ACQUISITION_KINDS = ("fixed_weight", "random_weight", "random_epsilon_constraint")


class MosoError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(MosoError):
    """A problem definition is malformed."""


class EvaluationError(MosoError):
    """An objective, constraint, or simulation produced an unusable value."""


class DuplicatePointError(MosoError):
    """A record with the same latent coordinates is already stored."""


@dataclass(frozen=True)
class CustomEmbedder:
    """User-supplied latent encoding for one variable.

    ``to_latent`` must map every legal value into [0,1]**width and
    ``from_latent`` must invert it; the framework checks the range at
    embed time and leaves the round trip to the supplier.
    """

    width: int
    to_latent: Callable[[Any], np.ndarray]
    from_latent: Callable[[np.ndarray], Any]


@dataclass(frozen=True)
class DesignVariable:
    """One design dimension: continuous, integer, categorical, or custom."""

    name: str
    kind: str
    lower: float | None = None
    upper: float | None = None
    levels: tuple[str, ...] | None = None
    embedder: CustomEmbedder | None = None


@dataclass(frozen=True)
class SearchConfig:
    """Initial space-filling design settings for one simulation."""

    q0: int = 100


@dataclass(frozen=True)
class SurrogateConfig:
    """Surrogate settings for one simulation.

    ``local`` refits the model on the data near each trust-region center;
    a global model is used as-is inside the region otherwise.
    """

    local: bool = True


@dataclass(frozen=True)
class SimulationSpec:
    """An expensive vector-valued black box evaluated at design points."""

    name: str
    output_dim: int
    evaluator: Callable[[DesignPoint], np.ndarray]
    search: SearchConfig = SearchConfig()
    surrogate: SurrogateConfig = SurrogateConfig()


@dataclass(frozen=True)
class ObjectiveSpec:
    """A scalar objective of (design point, concatenated sim outputs).

    ``grad``, when given, returns ``(dx, ds)`` where ``dx`` maps
    continuous-variable names to partials and ``ds`` is the partial with
    respect to the simulation output vector.  Missing grads fall back to
    forward finite differences on the latent cube inside the optimizer.
    """

    name: str
    func: Callable[[DesignPoint, np.ndarray], float]
    grad: Callable[[DesignPoint, np.ndarray], tuple[dict, np.ndarray]] | None = None


@dataclass(frozen=True)
class ConstraintSpec:
    """Like ObjectiveSpec; values <= 0 are satisfied."""

    name: str
    func: Callable[[DesignPoint, np.ndarray], float]
    grad: Callable[[DesignPoint, np.ndarray], tuple[dict, np.ndarray]] | None = None


@dataclass(frozen=True)
class AcquisitionSpec:
    """One scalarization slot in the per-iteration batch."""

    kind: str
    weights: tuple[float, ...] | None = None


@dataclass(frozen=True)
class PenaltyConfig:
    """Exponential schedule for the constraint penalty multiplier."""

    initial: float = 1.0
    growth: float = 2.0
    cap: float = 1e8


@dataclass
class MoopDefinition:
    """Mutable builder for a multiobjective simulation-optimization problem."""

    variables: list = field(default_factory=list)
    simulations: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    acquisitions: list = field(default_factory=list)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    rng_seed: int = 0


@dataclass(frozen=True)
class Moop:
    """A validated, immutable problem with cached dimensions."""

    variables: tuple
    simulations: tuple
    objectives: tuple
    constraints: tuple
    acquisitions: tuple
    penalty: PenaltyConfig
    rng_seed: int
    plan: embedding.EmbeddingPlan

    @property
    def n(self) -> int:
        """Number of design variables."""
        return len(self.variables)

    @property
    def m(self) -> int:
        """Total simulation output dimension."""
        return sum(s.output_dim for s in self.simulations)

    @property
    def o(self) -> int:
        return len(self.objectives)

    @property
    def p(self) -> int:
        return len(self.constraints)

    @property
    def q(self) -> int:
        """Per-iteration batch size (number of acquisitions)."""
        return len(self.acquisitions)

    @property
    def latent_dim(self) -> int:
        return self.plan.latent_dim

    @property
    def q0(self) -> int:
        """Size of the joint initial design (max over simulations)."""
        if not self.simulations:
            return 0
        return max(s.search.q0 for s in self.simulations)


def _check_unique(names, what):
    seen = set()
    for n in names:
        if n in seen:
            raise ValidationError(f"duplicate {what} name: {n!r}")
        seen.add(n)


def _check_variable(v: DesignVariable) -> None:
    if v.kind not in VARIABLE_KINDS:
        raise ValidationError(f"variable {v.name!r}: unknown kind {v.kind!r}")
    if v.kind in ("continuous", "integer"):
        if v.lower is None or v.upper is None:
            raise ValidationError(f"variable {v.name!r}: bounds are required")
        if not (np.isfinite(v.lower) and np.isfinite(v.upper)):
            raise ValidationError(f"variable {v.name!r}: bounds must be finite")
        if not v.lower < v.upper:
            raise ValidationError(f"variable {v.name!r}: lower must be < upper")
        if v.kind == "integer" and (v.lower != int(v.lower) or v.upper != int(v.upper)):
            raise ValidationError(f"variable {v.name!r}: integer bounds must be integral")
    elif v.kind == "categorical":
        if not v.levels or len(v.levels) < 2:
            raise ValidationError(f"variable {v.name!r}: needs at least two levels")
        if len(set(v.levels)) != len(v.levels):
            raise ValidationError(f"variable {v.name!r}: duplicate category levels")
    elif v.kind == "custom":
        if v.embedder is None or v.embedder.width < 1:
            raise ValidationError(f"variable {v.name!r}: custom kind needs an embedder")


def validate(defn) -> Moop:
    """Check a definition and return an immutable problem with cached dims.

    Idempotent: validated problems pass through unchanged.
    """
    if isinstance(defn, Moop):
        return defn

    if not defn.objectives:
        raise ValidationError("at least one objective is required")
    if not defn.variables:
        raise ValidationError("at least one design variable is required")
    if not defn.acquisitions:
        raise ValidationError("at least one acquisition is required")

    _check_unique([v.name for v in defn.variables], "variable")
    _check_unique([s.name for s in defn.simulations], "simulation")
    _check_unique([f.name for f in defn.objectives], "objective")
    _check_unique([g.name for g in defn.constraints], "constraint")

    for v in defn.variables:
        _check_variable(v)

    for s in defn.simulations:
        if not callable(s.evaluator):
            raise ValidationError(f"simulation {s.name!r}: evaluator is not callable")
        if s.output_dim < 1:
            raise ValidationError(f"simulation {s.name!r}: output_dim must be >= 1")
        if s.search.q0 < 1:
            raise ValidationError(f"simulation {s.name!r}: q0 must be >= 1")
    if not defn.simulations:
        warnings.warn("no simulations declared; objectives are treated as purely algebraic")

    for f in list(defn.objectives) + list(defn.constraints):
        if not callable(f.func):
            raise ValidationError(f"{f.name!r}: func is not callable")
        if f.grad is not None and not callable(f.grad):
            raise ValidationError(f"{f.name!r}: grad is not callable")

    o = len(defn.objectives)
    for i, a in enumerate(defn.acquisitions):
        if a.kind not in ACQUISITION_KINDS:
            raise ValidationError(f"acquisition {i}: unknown kind {a.kind!r}")
        if a.kind == "fixed_weight":
            if a.weights is None or len(a.weights) != o:
                raise ValidationError(f"acquisition {i}: needs {o} weights")
            w = np.asarray(a.weights, dtype=float)
            if (w < 0).any() or w.sum() <= 0:
                raise ValidationError(f"acquisition {i}: weights must be nonnegative and not all zero")

    if defn.penalty.initial <= 0 or defn.penalty.growth < 1 or defn.penalty.cap < defn.penalty.initial:
        raise ValidationError("penalty schedule must have initial > 0, growth >= 1, cap >= initial")

    plan = embedding.build_plan(tuple(defn.variables))
    return Moop(
        variables=tuple(defn.variables),
        simulations=tuple(defn.simulations),
        objectives=tuple(defn.objectives),
        constraints=tuple(defn.constraints),
        acquisitions=tuple(defn.acquisitions),
        penalty=defn.penalty,
        rng_seed=defn.rng_seed,
        plan=plan,
    )


def eval_objectives(moop: Moop, x: DesignPoint, s: np.ndarray) -> np.ndarray:
    """Evaluate all objectives at a design point and sim-output vector."""
    out = np.empty(moop.o)
    for j, spec in enumerate(moop.objectives):
        out[j] = spec.func(x, s)
        if not np.isfinite(out[j]):
            raise EvaluationError(f"objective {j} ({spec.name!r}) returned a non-finite value")
    return out


def eval_constraints(moop: Moop, x: DesignPoint, s: np.ndarray) -> np.ndarray:
    """Evaluate all constraints; values <= 0 are satisfied."""
    out = np.empty(moop.p)
    for j, spec in enumerate(moop.constraints):
        out[j] = spec.func(x, s)
        if not np.isfinite(out[j]):
            raise EvaluationError(f"constraint {j} ({spec.name!r}) returned a non-finite value")
    return out


def constraint_violation(g: np.ndarray) -> float:
    """Total positive part of a constraint vector."""
    if g.size == 0:
        return 0.0
    return float(np.maximum(g, 0.0).sum())


@dataclass
class EvalRecord:
    """One completed evaluation: design, per-sim outputs, objective data."""

    design: DesignPoint
    latent: np.ndarray
    sim_outputs: tuple
    objectives: np.ndarray
    constraints: np.ndarray
    iteration: int
    feasible: bool

    def concat_outputs(self) -> np.ndarray:
        if not self.sim_outputs:
            return np.empty(0)
        return np.concatenate(self.sim_outputs)


def latent_key(z: np.ndarray) -> bytes:
    """Uniqueness key for latent coordinates (quantized at 1e-12)."""
    return np.round(np.asarray(z, dtype=float), 12).tobytes()


class EvaluationDatabase:
    """Append-only store of evaluations with a latent-coordinate unique index.

    Mutations must happen on the control thread; reads are safe anywhere.
    """

    def __init__(self, plan: embedding.EmbeddingPlan):
        self.plan = plan
        self.records: list[EvalRecord] = []
        self._index: dict[bytes, int] = {}

    def __len__(self) -> int:
        return len(self.records)

    def key_of(self, design: DesignPoint) -> bytes:
        return latent_key(embedding.embed(self.plan, design))

    def has_key(self, key: bytes) -> bool:
        return key in self._index

    def add(self, design: DesignPoint, sim_outputs, objectives, constraints, iteration: int) -> EvalRecord:
        z = embedding.embed(self.plan, design)
        key = latent_key(z)
        if key in self._index:
            raise DuplicatePointError(f"latent coordinates already stored (record {self._index[key]})")
        g = np.asarray(constraints, dtype=float)
        rec = EvalRecord(
            design=dict(design),
            latent=z,
            sim_outputs=tuple(np.asarray(s, dtype=float) for s in sim_outputs),
            objectives=np.asarray(objectives, dtype=float),
            constraints=g,
            iteration=iteration,
            feasible=bool(g.size == 0 or g.max() <= FEASIBILITY_TOL),
        )
        self._index[key] = len(self.records)
        self.records.append(rec)
        return rec

    def latent_matrix(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, self.plan.latent_dim))
        return np.vstack([r.latent for r in self.records])

    def outputs_matrix(self, sim_index: int) -> np.ndarray:
        return np.vstack([r.sim_outputs[sim_index] for r in self.records])

    def objective_matrix(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, 0))
        return np.vstack([r.objectives for r in self.records])

    def feasible_mask(self) -> np.ndarray:
        return np.array([r.feasible for r in self.records], dtype=bool)


# ---------------------------------------------------------------------------
# Built-in objective/constraint forms.  These give the CLI its vocabulary and
# carry analytic gradients so structured problems get exact chain rules.

def identity_objective(name: str, index: int, scale: float = 1.0) -> ObjectiveSpec:
    """F = scale * s[index]."""

    def func(x, s):
        return scale * s[index]

    def grad(x, s):
        ds = np.zeros(len(s))
        ds[index] = scale
        return {}, ds

    return ObjectiveSpec(name, func, grad)


def sum_of_squares_objective(name: str, indices) -> ObjectiveSpec:
    """F = sum(s[i]**2 for i in indices)."""
    idx = np.asarray(indices, dtype=int)

    def func(x, s):
        v = s[idx]
        return float(v @ v)

    def grad(x, s):
        ds = np.zeros(len(s))
        ds[idx] = 2.0 * s[idx]
        return {}, ds

    return ObjectiveSpec(name, func, grad)


def variable_objective(name: str, variable: str, scale: float = 1.0) -> ObjectiveSpec:
    """F = scale * x[variable] (design-value passthrough, no simulation)."""

    def func(x, s):
        return scale * x[variable]

    def grad(x, s):
        return {variable: scale}, np.zeros(len(s))

    return ObjectiveSpec(name, func, grad)


def linear_objective(name: str, coeffs, const: float = 0.0) -> ObjectiveSpec:
    """F = coeffs . s + const."""
    c = np.asarray(coeffs, dtype=float)

    def func(x, s):
        return float(c @ s) + const

    def grad(x, s):
        return {}, c.copy()

    return ObjectiveSpec(name, func, grad)


def sum_of_squares_constraint(name: str, indices, cap: float) -> ConstraintSpec:
    """G = sum(s[i]**2 for i in indices) - cap, satisfied when <= 0."""
    idx = np.asarray(indices, dtype=int)

    def func(x, s):
        v = s[idx]
        return float(v @ v) - cap

    def grad(x, s):
        ds = np.zeros(len(s))
        ds[idx] = 2.0 * s[idx]
        return {}, ds

    return ConstraintSpec(name, func, grad)


def identity_constraint(name: str, index: int, cap: float, scale: float = 1.0) -> ConstraintSpec:
    """G = scale * s[index] - cap, satisfied when <= 0."""

    def func(x, s):
        return scale * s[index] - cap

    def grad(x, s):
        ds = np.zeros(len(s))
        ds[index] = scale
        return {}, ds

    return ConstraintSpec(name, func, grad)
