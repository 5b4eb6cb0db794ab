"""Inner solver for the penalized scalarized surrogate subproblem.

Each acquisition minimizes, over a trust-region box inside the latent
cube,

    scalarize(F(extract(z), S_hat(z)) + lam * total_violation(z))

where S_hat stacks the per-simulation surrogate predictions and the
total constraint violation is added to every objective.  Gradients flow
through the surrogate Jacobians and the objective/constraint gradients,
with a forward finite-difference fallback on the latent cube for
anything that does not supply one.  The solve itself is a projected
BFGS with Armijo backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import embedding
from .acquisition import ScalarizationState, scalarize, scalarize_gradient
from .problem import Moop
from .surrogate import TrustRegion


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 100
    armijo_c: float = 1e-4
    grad_tol: float = 1e-8
    #: relative decrease needed to return a candidate instead of
    #: requesting a model-improvement step
    decrease_factor: float = 1e-8
    fd_step: float = 1e-6
    kappa: float = 0.0


@dataclass
class SolveOutcome:
    candidate: np.ndarray | None
    improve_requested: bool
    value: float
    start_value: float
    iterations: int


class SubproblemEvaluator:
    """Penalized scalarized surrogate landscape over the latent box."""

    def __init__(self, moop: Moop, state: ScalarizationState, surrogates,
                 lam: float, config: OptimizerConfig = OptimizerConfig()):
        self.moop = moop
        self.plan = moop.plan
        self.state = state
        self.surrogates = tuple(surrogates)
        self.lam = lam
        self.config = config
        # Latent coordinates that extract differentiably: continuous slots.
        self._chain = [
            (self.plan.variables[vi].name, offset,
             self.plan.variables[vi].upper - self.plan.variables[vi].lower,
             self.plan.variables[vi].lower)
            for vi, offset, width in self.plan.numeric_slots
            if self.plan.variables[vi].kind == "continuous"
        ]

    def _predict(self, z):
        if not self.surrogates:
            return np.empty(0)
        return np.concatenate([s.evaluate(z) for s in self.surrogates])

    def _predict_jacobian(self, z):
        if not self.surrogates:
            return np.empty((0, len(z)))
        return np.vstack([s.gradient(z) for s in self.surrogates])

    def _smooth_design(self, z, base):
        """Extraction with only the continuous coordinates live.

        Integer, categorical, and custom values stay frozen at ``base``
        so finite differences never step across a snapping boundary;
        their relaxed derivative is zero anyway.
        """
        x = dict(base)
        for name, offset, span, lower in self._chain:
            x[name] = float(lower + np.clip(z[offset], 0.0, 1.0) * span)
        return x

    def _penalized_objectives(self, x, s):
        f = np.array([spec.func(x, s) for spec in self.moop.objectives], dtype=float)
        if self.moop.p:
            g = np.array([spec.func(x, s) for spec in self.moop.constraints], dtype=float)
            f = f + self.lam * np.maximum(g, 0.0).sum()
        return f

    def value(self, z: np.ndarray) -> float:
        x = embedding.extract(self.plan, z)
        s = self._predict(z)
        f = self._penalized_objectives(x, s)
        sigma = self._sigma(z) if self.state.kappa != 0.0 else None
        return scalarize(self.state, f, sigma)

    def _sigma(self, z):
        if not self.surrogates:
            return np.empty(0)
        u = np.concatenate([s.uncertainty(z) for s in self.surrogates])
        # Uncertainty enters the scalarization per objective; objectives
        # see the sim-output uncertainties only through their own reads,
        # so expose a conservative uniform proxy: the max output spread.
        return np.full(self.moop.o, float(u.max()) if u.size else 0.0)

    def _sigma_jacobian(self, z):
        if not self.surrogates:
            return np.zeros((self.moop.o, len(z)))
        us = np.concatenate([s.uncertainty(z) for s in self.surrogates])
        if us.size == 0:
            return np.zeros((self.moop.o, len(z)))
        grads = np.vstack([s.uncertainty_gradient(z) for s in self.surrogates])
        row = grads[int(np.argmax(us))]
        return np.tile(row, (self.moop.o, 1))

    def value_and_grad(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        dim = len(z)
        x = embedding.extract(self.plan, z)
        s = self._predict(z)
        js = self._predict_jacobian(z)

        def term_grad(spec):
            dx, ds = spec.grad(x, s)
            out = np.asarray(ds, dtype=float) @ js
            for name, offset, span, lower in self._chain:
                partial = dx.get(name)
                if partial:
                    out[offset] += partial * span
            return out

        f = np.empty(self.moop.o)
        df = np.zeros((self.moop.o, dim))
        fd_objs = []
        for j, spec in enumerate(self.moop.objectives):
            f[j] = spec.func(x, s)
            if spec.grad is not None:
                df[j] = term_grad(spec)
            else:
                fd_objs.append(j)

        viol = 0.0
        dviol = np.zeros(dim)
        fd_cons = []
        gvals = np.empty(self.moop.p)
        for j, spec in enumerate(self.moop.constraints):
            gvals[j] = spec.func(x, s)
            if gvals[j] > 0.0:
                viol += gvals[j]
                if spec.grad is not None:
                    dviol += term_grad(spec)
                else:
                    fd_cons.append(j)

        if fd_objs or fd_cons:
            self._fd_fill(z, x, s, f, gvals, df, dviol, fd_objs, fd_cons)

        f_pen = f + self.lam * viol
        df_pen = df + self.lam * dviol[None, :]
        dq = scalarize_gradient(self.state, f_pen)
        grad = dq @ df_pen
        sigma = None
        if self.state.kappa != 0.0 and self.state.weights is not None:
            sigma = self._sigma(z)
            grad -= self.state.kappa * (self.state.weights @ self._sigma_jacobian(z))
        return scalarize(self.state, f_pen, sigma), grad

    def _fd_fill(self, z, x, s, f, gvals, df, dviol, fd_objs, fd_cons):
        """Forward differences on the latent cube for gradless terms."""
        h = self.config.fd_step
        for i in range(len(z)):
            step = h if z[i] + h <= 1.0 else -h
            z2 = z.copy()
            z2[i] += step
            x2 = self._smooth_design(z2, x)
            s2 = self._predict(z2)
            for j in fd_objs:
                df[j, i] = (self.moop.objectives[j].func(x2, s2) - f[j]) / step
            for j in fd_cons:
                dviol[i] += (self.moop.constraints[j].func(x2, s2) - gvals[j]) / step


def penalized_value(moop: Moop, state: ScalarizationState, z, surrogates,
                    lam: float, config: OptimizerConfig = OptimizerConfig()):
    """Value and gradient of the penalized scalarized subproblem at ``z``."""
    ev = SubproblemEvaluator(moop, state, surrogates, lam, config)
    return ev.value_and_grad(np.asarray(z, dtype=float))


def solve(moop: Moop, state: ScalarizationState, surrogates, z_start, region: TrustRegion,
          lam: float, config: OptimizerConfig = OptimizerConfig()) -> SolveOutcome:
    """Projected BFGS over the trust-region box.

    Returns a candidate when the final value improves on the start by at
    least ``decrease_factor * max(1, |start|)``; otherwise flags that a
    model-improvement point should be generated instead.
    """
    ev = SubproblemEvaluator(moop, state, surrogates, lam, config)
    lo, hi = region.bounds()
    z = np.clip(np.asarray(z_start, dtype=float), lo, hi)
    f, g = ev.value_and_grad(z)
    f_start = f
    h_inv = np.eye(len(z))
    iterations = 0

    for _ in range(config.max_iterations):
        pg = z - np.clip(z - g, lo, hi)
        if np.linalg.norm(pg) <= config.grad_tol:
            break
        iterations += 1
        d = -(h_inv @ g)
        if d @ g >= 0.0:
            h_inv = np.eye(len(z))
            d = -g

        alpha = 1.0
        accepted = None
        for _ in range(40):
            z_new = np.clip(z + alpha * d, lo, hi)
            step = z_new - z
            if np.abs(step).max() == 0.0:
                break
            f_new = ev.value(z_new)
            if f_new <= f + config.armijo_c * (g @ step):
                accepted = (z_new, f_new)
                break
            alpha *= 0.5
        if accepted is None:
            break

        z_new, f_new = accepted
        g_new = ev.value_and_grad(z_new)[1]
        step = z_new - z
        y = g_new - g
        sy = step @ y
        if sy > 1e-12:
            rho = 1.0 / sy
            outer = np.outer(step, y)
            h_inv = ((np.eye(len(z)) - rho * outer) @ h_inv @ (np.eye(len(z)) - rho * outer.T)
                     + rho * np.outer(step, step))
        z, f, g = z_new, f_new, g_new

    improved = f <= f_start - config.decrease_factor * max(1.0, abs(f_start))
    return SolveOutcome(
        candidate=z if improved else None,
        improve_requested=not improved,
        value=f,
        start_value=f_start,
        iterations=iterations,
    )
