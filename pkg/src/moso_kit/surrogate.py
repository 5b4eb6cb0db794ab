"""Gaussian radial basis function surrogates over the latent cube.

One model per simulation: shared kernel matrix, one coefficient column
per output.  The kernel is phi(r) = exp(-(eps*r)**2) with the shape
parameter tied to the data spacing, plus a small trace-scaled nugget so
the system stays positive definite.  Models are immutable once fitted;
trust-region localization returns a new model fitted on nearby data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .problem import MosoError, latent_key

NUGGET_SCALE = 1e-8
IMPROVE_TRIES = 100


class SurrogateError(MosoError):
    """Fitting or evaluation failed."""


@dataclass(frozen=True)
class TrustRegion:
    """A max-norm box around a latent center, clipped to the unit cube."""

    center: np.ndarray
    radius: float

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.clip(self.center - self.radius, 0.0, 1.0)
        hi = np.clip(self.center + self.radius, 0.0, 1.0)
        return lo, hi

    def contains(self, z: np.ndarray) -> bool:
        lo, hi = self.bounds()
        return bool((z >= lo).all() and (z <= hi).all())


def trust_region(center: np.ndarray, points: np.ndarray, n_design: int) -> TrustRegion:
    """Region radius = latent distance to the (n_design+1)-th nearest neighbor.

    The center's own entry (distance zero) does not count as a neighbor.
    With fewer than n_design+1 neighbors the region falls back to the
    whole cube (radius 1).
    """
    center = np.asarray(center, dtype=float)
    d = np.linalg.norm(points - center, axis=1)
    d = np.sort(d[d > 0.0])
    if len(d) < n_design + 1:
        return TrustRegion(center=center, radius=1.0)
    return TrustRegion(center=center, radius=float(d[n_design]))


class RbfSurrogate:
    """Interpolating Gaussian RBF model for one vector-valued simulation."""

    def __init__(self, centers, coef, eps, nugget, cho, out_std, values):
        self.centers = centers          # (N, latent_dim)
        self.coef = coef                # (N, m)
        self.eps = eps
        self.nugget = nugget
        self._cho = cho
        self.out_std = out_std          # (m,)
        self.values = values            # (N, m), kept for refits

    @property
    def n_points(self) -> int:
        return len(self.centers)

    @property
    def output_dim(self) -> int:
        return self.coef.shape[1]

    @classmethod
    def fit(cls, points, values, nugget_scale: float = NUGGET_SCALE) -> "RbfSurrogate":
        """Fit to latent points (N, l) and outputs (N, m).

        The shape parameter is 1/(sqrt(2) * mean pairwise distance);
        the nugget is ``nugget_scale * trace(K)/N``.  The pairwise mean
        tracks the overall extent of the data, so the kernel keeps a
        useful lengthscale even after an optimizer has clustered many
        evaluations into small neighborhoods (a nearest-neighbor
        statistic collapses there, degrading the model into a lookup
        table of the data with spurious zeros between clusters).
        """
        pts = np.asarray(points, dtype=float)
        val = np.asarray(values, dtype=float)
        if val.ndim == 1:
            val = val[:, None]
        if pts.ndim != 2 or len(pts) != len(val):
            raise SurrogateError("points and values disagree on length")
        if len(pts) == 0:
            raise SurrogateError("cannot fit to an empty data set")
        if len({p.tobytes() for p in pts}) != len(pts):
            raise SurrogateError("duplicate centers")

        if len(pts) == 1:
            eps = 1.0
            dist2 = np.zeros((1, 1))
        else:
            d = cdist(pts, pts)
            mean_pair = d.sum() / (len(pts) * (len(pts) - 1))
            eps = 1.0 / (np.sqrt(2.0) * mean_pair) if mean_pair > 0 else 1.0
            dist2 = d ** 2
        kernel = np.exp(-(eps ** 2) * dist2)
        nugget = nugget_scale * np.trace(kernel) / len(pts)
        system = kernel + nugget * np.eye(len(pts))
        try:
            cho = cho_factor(system, lower=True)
        except np.linalg.LinAlgError as err:
            raise SurrogateError(
                f"singular kernel system (cond ~ {np.linalg.cond(system):.3g})"
            ) from err
        coef = cho_solve(cho, val)
        return cls(pts, coef, eps, nugget, cho, val.std(axis=0), val)

    def _kvec(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        diffs = np.asarray(z, dtype=float) - self.centers
        k = np.exp(-(self.eps ** 2) * np.einsum("ij,ij->i", diffs, diffs))
        return k, diffs

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Predicted outputs at a latent point."""
        k, _ = self._kvec(z)
        return k @ self.coef

    def gradient(self, z: np.ndarray) -> np.ndarray:
        """Jacobian (output_dim, latent_dim) of the prediction."""
        k, diffs = self._kvec(z)
        dk = (-2.0 * self.eps ** 2) * (k[:, None] * diffs)
        return self.coef.T @ dk

    def uncertainty(self, z: np.ndarray) -> np.ndarray:
        """Per-output model uncertainty at a latent point.

        The kernel power function 1 - k(z)' (K + nugget I)^-1 k(z),
        clipped at zero and scaled by each output's data spread: zero at
        the centers, approaching the data spread far from all of them.
        """
        k, _ = self._kvec(z)
        power = max(0.0, 1.0 - float(k @ cho_solve(self._cho, k)))
        return power * self.out_std

    def uncertainty_gradient(self, z: np.ndarray) -> np.ndarray:
        """Jacobian (output_dim, latent_dim) of ``uncertainty``."""
        k, diffs = self._kvec(z)
        power = 1.0 - float(k @ cho_solve(self._cho, k))
        if power <= 0.0:
            return np.zeros((self.output_dim, len(z)))
        dk = (-2.0 * self.eps ** 2) * (k[:, None] * diffs)
        dpower = -2.0 * (dk.T @ cho_solve(self._cho, k))
        return self.out_std[:, None] * dpower[None, :]

    def set_center(self, center, points, values, n_design: int,
                   local: bool = True) -> tuple["RbfSurrogate", TrustRegion]:
        """Build the trust region at ``center`` and the model to use in it.

        When ``local`` the returned model is refitted on the data within
        twice the region radius of the center (its shape parameter
        recalibrates to the local spacing); otherwise self is reused.
        """
        region = trust_region(center, np.asarray(points, dtype=float), n_design)
        if not local or region.radius >= 1.0:
            return self, region
        pts = np.asarray(points, dtype=float)
        val = np.asarray(values, dtype=float)
        nearby = np.linalg.norm(pts - region.center, axis=1) <= 2.0 * region.radius
        if nearby.sum() < 2:
            return self, region
        return RbfSurrogate.fit(pts[nearby], val[nearby]), region

    def improve(self, region: TrustRegion, points, rng: np.random.Generator) -> np.ndarray:
        """Pick a latent point that refines the model inside the region.

        Samples are displaced from the region center along the local
        data's principal axes with magnitudes inversely proportional to
        the data variance, so poorly covered directions are favored.
        Duplicates of existing points are rejected and resampled, ending
        with uniform draws (region first, then the whole cube).
        """
        pts = np.asarray(points, dtype=float)
        dim = len(region.center)
        lo, hi = region.bounds()
        taken = {latent_key(p) for p in pts}

        inside = np.abs(pts - region.center).max(axis=1) <= region.radius
        local = pts[inside] if inside.sum() >= dim + 1 else pts
        if len(local) >= 2:
            evals, evecs = np.linalg.eigh(np.cov(local.T).reshape(dim, dim))
            evals = np.maximum(evals, 0.0)
        else:
            evals, evecs = np.ones(dim), np.eye(dim)
        sigma = 1.0 / (evals + 1e-8)
        sigma /= sigma.max()

        for _ in range(IMPROVE_TRIES):
            g = rng.standard_normal(dim) * sigma
            z = np.clip(region.center + region.radius * (evecs @ g), lo, hi)
            if latent_key(z) not in taken:
                return z
        for _ in range(IMPROVE_TRIES):
            z = lo + rng.random(dim) * (hi - lo)
            if latent_key(z) not in taken:
                return z
        for _ in range(10 * IMPROVE_TRIES):
            z = rng.random(dim)
            if latent_key(z) not in taken:
                return z
        return rng.random(dim)
