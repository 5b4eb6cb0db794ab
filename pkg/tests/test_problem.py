"""Problem definitions, validation, evaluation, and the record store."""

import numpy as np
import pytest

from moso_kit.embedding import build_plan
from moso_kit.orchestrator import problem_fingerprint
from moso_kit.problem import (
    AcquisitionSpec,
    DesignVariable,
    DuplicatePointError,
    EvaluationDatabase,
    EvaluationError,
    MoopDefinition,
    SimulationSpec,
    ValidationError,
    constraint_violation,
    eval_constraints,
    eval_objectives,
    identity_constraint,
    identity_objective,
    linear_objective,
    sum_of_squares_constraint,
    sum_of_squares_objective,
    validate,
    variable_objective,
)

BOUNDS_13 = [
    (0.146, 0.167), (-16.21, -15.50), (137.2, 234.4), (19.5, 37.0),
    (2.20, 69.6), (0.0, 100.0), (0.418, 0.706), (0.0, 0.516),
    (0.076, 0.216), (-0.892, 0.982), (-4.62, -4.38), (3.94, 4.27),
    (-0.96, 3.66),
]


def calibration_definition():
    idx = [np.arange(0, 66), np.arange(66, 132), np.arange(132, 198)]
    return MoopDefinition(
        variables=[DesignVariable(f"x{i + 1}", "continuous", lo, hi)
                   for i, (lo, hi) in enumerate(BOUNDS_13)],
        simulations=[SimulationSpec("residuals", 198, lambda d: np.zeros(198))],
        objectives=[sum_of_squares_objective(f"class{j + 1}", idx[j]) for j in range(3)],
        constraints=[sum_of_squares_constraint(f"cap{j + 1}", idx[j], 100.0)
                     for j in range(3)],
        acquisitions=[AcquisitionSpec("random_weight")],
    )


def small_moop(objectives, constraints=(), sim_dim=3):
    return validate(MoopDefinition(
        variables=[DesignVariable("x1", "continuous", 0.0, 1.0),
                   DesignVariable("RT", "continuous", 60.0, 300.0)],
        simulations=[SimulationSpec("sim", sim_dim, lambda d: np.zeros(sim_dim))],
        objectives=list(objectives),
        constraints=list(constraints),
        acquisitions=[AcquisitionSpec("random_weight")],
    ))


def test_validate_caches_dimensions():
    moop = validate(calibration_definition())
    assert (moop.n, moop.m, moop.o, moop.p, moop.q) == (13, 198, 3, 3, 1)
    assert moop.latent_dim == 13


def test_validate_is_idempotent():
    moop = validate(calibration_definition())
    assert validate(moop) is moop


def test_validate_requires_objectives():
    defn = calibration_definition()
    defn.objectives = []
    with pytest.raises(ValidationError, match="objective"):
        validate(defn)


def test_validate_rejects_degenerate_bounds():
    defn = calibration_definition()
    defn.variables[0] = DesignVariable("x1", "continuous", 1.0, 1.0)
    with pytest.raises(ValidationError, match="lower"):
        validate(defn)


def test_validate_rejects_duplicate_names():
    defn = calibration_definition()
    defn.variables[1] = DesignVariable("x1", "continuous", 0.0, 1.0)
    with pytest.raises(ValidationError, match="duplicate"):
        validate(defn)


def test_validate_rejects_single_level_categorical():
    defn = calibration_definition()
    defn.variables.append(DesignVariable("solvent", "categorical", levels=("S1",)))
    with pytest.raises(ValidationError, match="two levels"):
        validate(defn)


def test_sum_of_squares_objective_value():
    moop = small_moop([sum_of_squares_objective("chi", [0, 1])], sim_dim=2)
    out = eval_objectives(moop, {"x1": 0.5, "RT": 100.0}, np.array([1.0, 2.0]))
    assert out == pytest.approx([5.0])


def test_identity_objectives_pass_outputs_through():
    moop = small_moop([identity_objective(f"f{j}", j) for j in range(3)])
    s = np.array([0.3, 0.7, 0.1])
    assert np.array_equal(eval_objectives(moop, {"x1": 0.0, "RT": 60.0}, s), s)


def test_variable_objective_reads_the_design_point():
    moop = small_moop([variable_objective("time", "RT")])
    out = eval_objectives(moop, {"x1": 0.2, "RT": 60.0}, np.zeros(3))
    assert out == pytest.approx([60.0])


def test_eval_constraints_empty_is_feasible():
    moop = small_moop([identity_objective("f", 0)])
    g = eval_constraints(moop, {"x1": 0.1, "RT": 70.0}, np.zeros(3))
    assert g.shape == (0,)
    assert constraint_violation(g) == 0.0


def test_identity_constraint_feasible_example():
    moop = small_moop([identity_objective("f", 0)],
                      constraints=[identity_constraint("g1", 0, 10.0)])
    g = eval_constraints(moop, {"x1": 0.1, "RT": 70.0}, np.array([4.0, 0.0, 0.0]))
    assert g == pytest.approx([-6.0])


def test_sum_of_squares_cap_infeasible_example():
    moop = small_moop([identity_objective("f", 0)],
                      constraints=[sum_of_squares_constraint("cap", [0, 1, 2], 20.0)],
                      sim_dim=3)
    g = eval_constraints(moop, {"x1": 0.1, "RT": 70.0}, np.array([3.0, 4.0, 0.0]))
    assert g == pytest.approx([5.0])
    assert constraint_violation(g) == pytest.approx(5.0)


def test_eval_objectives_flags_non_finite_with_index():
    bad = linear_objective("bad", [np.inf, 0.0, 0.0])
    moop = small_moop([identity_objective("ok", 0), bad])
    with pytest.raises(EvaluationError, match="objective 1"):
        eval_objectives(moop, {"x1": 0.0, "RT": 60.0}, np.ones(3))


def test_builder_gradients_match_finite_differences():
    rng = np.random.default_rng(21)
    specs = [
        sum_of_squares_objective("sos", [0, 2, 5]),
        linear_objective("lin", rng.normal(size=6), const=1.5),
        identity_objective("ident", 3, scale=-2.0),
        sum_of_squares_constraint("cap", [1, 4], 3.0),
        identity_constraint("icap", 2, 1.0, scale=0.7),
    ]
    h = 1e-6
    for spec in specs:
        for _ in range(20):
            s = rng.normal(0.0, 1.0, 6)
            _, ds = spec.grad({}, s)
            for i in range(6):
                e = np.zeros(6)
                e[i] = h
                fd = (spec.func({}, s + e) - spec.func({}, s - e)) / (2 * h)
                assert ds[i] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_variable_objective_gradient_names_the_variable():
    spec = variable_objective("time", "RT", scale=2.0)
    dx, ds = spec.grad({"RT": 80.0}, np.zeros(3))
    assert dx == {"RT": 2.0}
    assert np.array_equal(ds, np.zeros(3))


def make_database():
    plan = build_plan([DesignVariable("x1", "continuous", 0.0, 1.0),
                       DesignVariable("RT", "continuous", 60.0, 300.0)])
    return EvaluationDatabase(plan)


def test_database_rejects_duplicate_latent_points():
    db = make_database()
    db.add({"x1": 0.5, "RT": 100.0}, [np.array([1.0])], np.array([1.0]),
           np.empty(0), 0)
    with pytest.raises(DuplicatePointError):
        db.add({"x1": 0.5, "RT": 100.0}, [np.array([2.0])], np.array([2.0]),
               np.empty(0), 1)
    assert len(db) == 1


def test_database_matrices_round_trip():
    db = make_database()
    rows = [(0.25, 80.0, 1.0), (0.5, 120.0, -0.5), (0.75, 240.0, 2.0)]
    for x1, rt, v in rows:
        db.add({"x1": x1, "RT": rt}, [np.array([v, 2 * v])],
               np.array([v]), np.array([v - 1.0]), 0)
    assert db.latent_matrix().shape == (3, 2)
    assert np.array_equal(db.outputs_matrix(0)[:, 1], [2.0, -1.0, 4.0])
    assert np.array_equal(db.objective_matrix()[:, 0], [1.0, -0.5, 2.0])
    assert np.array_equal(db.feasible_mask(), [True, True, False])


def test_stored_objectives_recompute_bitwise():
    moop = validate(calibration_definition())
    db = EvaluationDatabase(moop.plan)
    rng = np.random.default_rng(22)
    for k in range(10):
        x = {v.name: float(rng.uniform(v.lower, v.upper)) for v in moop.variables}
        s = rng.normal(0.0, 1.0, 198)
        f = eval_objectives(moop, x, s)
        g = eval_constraints(moop, x, s)
        rec = db.add(x, [s], f, g, k)
        assert np.array_equal(eval_objectives(moop, rec.design, rec.sim_outputs[0]),
                              rec.objectives)
        assert np.array_equal(eval_constraints(moop, rec.design, rec.sim_outputs[0]),
                              rec.constraints)


def test_fingerprint_distinguishes_problems():
    a = validate(calibration_definition())
    defn = calibration_definition()
    defn.variables[0] = DesignVariable("x1", "continuous", 0.146, 0.2)
    b = validate(defn)
    assert problem_fingerprint(a) == problem_fingerprint(a)
    assert problem_fingerprint(a) != problem_fingerprint(b)


def test_purely_algebraic_problem_warns_but_validates():
    defn = MoopDefinition(
        variables=[DesignVariable("x1", "continuous", 0.0, 1.0)],
        objectives=[variable_objective("f", "x1")],
        acquisitions=[AcquisitionSpec("random_weight")],
    )
    with pytest.warns(UserWarning, match="algebraic"):
        moop = validate(defn)
    assert moop.m == 0
