"""Kernelized movement-primitive regression over a reference trajectory.

A kernel ridge regression in time reproduces the probabilistic reference
and adapts it to new objects: desired via/end-points are written into the
reference with small covariance (high confidence) and the model is refit.
Three stationary kernels are provided; all act per output dimension through
an identity block structure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import ReferenceTrajectory
from .errors import (
    DimensionMismatchError,
    SingularCovarianceError,
    SingularSystemError,
)

__all__ = [
    "KernelSpec",
    "KmpModel",
    "ViaPoint",
    "kernel_eval",
    "build_kernel_matrix",
    "kmp_fit",
    "kmp_predict_mean",
    "kmp_predict_cov",
    "insert_via_point",
    "fuse_priorities",
]

KERNEL_KINDS = ("exponential", "gaussian", "cauchy")
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class KernelSpec:
    """Stationary kernel family with its hyper-parameters.

    ``l`` is the length scale, ``sigma2`` the scale factor (kernel value at
    zero lag). ``alpha`` is the Cauchy mixing coefficient controlling tail
    weight and must be given exactly for the Cauchy kind.
    """

    kind: str
    l: float = 0.05
    sigma2: float = 1.0
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; choose from {KERNEL_KINDS}")
        if self.l <= 0.0 or self.sigma2 <= 0.0:
            raise ValueError("kernel parameters l and sigma2 must be positive")
        if self.kind == "cauchy":
            if self.alpha is None or self.alpha <= 0.0:
                raise ValueError("cauchy kernel requires alpha > 0")
        elif self.alpha is not None:
            raise ValueError(f"alpha is only meaningful for the cauchy kernel, not {self.kind!r}")

    def to_dict(self):
        d = {"kind": self.kind, "l": self.l, "sigma2": self.sigma2}
        if self.alpha is not None:
            d["alpha"] = self.alpha
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], l=float(d["l"]), sigma2=float(d["sigma2"]),
                   alpha=float(d["alpha"]) if d.get("alpha") is not None else None)


def kernel_eval(spec: KernelSpec, t1, t2):
    """Evaluate the kernel at a pair of times (vectorized over arrays).

    exponential: sigma2 * exp(-|dt| / l)
    gaussian:    sigma2 * exp(-|dt|^2 / (2 l^2))
    cauchy:      sigma2 * (1 + |dt|^2 / (2 alpha l^2))^(-alpha)
    """
    dt = np.abs(np.asarray(t1, dtype=float) - np.asarray(t2, dtype=float))
    if spec.kind == "exponential":
        return spec.sigma2 * np.exp(-dt / spec.l)
    if spec.kind == "gaussian":
        return spec.sigma2 * np.exp(-(dt**2) / (2.0 * spec.l**2))
    return spec.sigma2 * (1.0 + dt**2 / (2.0 * spec.alpha * spec.l**2)) ** (-spec.alpha)


def build_kernel_matrix(spec: KernelSpec, times, dim: int = 1) -> np.ndarray:
    """Assemble the (N*dim) x (N*dim) block kernel matrix.

    Block (i, j) is ``k(t_i, t_j) * I_dim``: one shared scalar kernel acting
    identically on every output dimension.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DimensionMismatchError("times must be a nonempty 1-D array")
    k = kernel_eval(spec, times[:, None], times[None, :])
    return np.kron(k, np.eye(dim))


def _kernel_row(spec, t_star, times, dim):
    """The dim x (N*dim) cross-kernel block row for a query time."""
    k = kernel_eval(spec, float(t_star), times)
    return np.kron(k[None, :], np.eye(dim))


@dataclass(frozen=True)
class ViaPoint:
    """Desired (time, value, confidence) constraint for adaptation.

    A small ``desired_cov`` means high confidence: the refit trajectory is
    pulled through ``desired_e`` at ``t_star``.
    """

    t_star: float
    desired_e: np.ndarray
    desired_cov: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.desired_e, dtype=float)
        cov = np.asarray(self.desired_cov, dtype=float)
        if e.ndim != 1 or cov.shape != (e.shape[0], e.shape[0]):
            raise DimensionMismatchError("desired_cov must be S x S matching desired_e")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("desired_cov must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0.0:
            raise ValueError("desired_cov must be positive definite")
        object.__setattr__(self, "desired_e", e.copy())
        object.__setattr__(self, "desired_cov", cov.copy())


@dataclass(frozen=True)
class KmpModel:
    """Fitted kernel regression factors over a reference trajectory.

    ``mean_factor`` is (K + lambda I)^-1 mu for the stacked reference means;
    ``cov_factor`` is (K + lambda Sigma)^-1 with Sigma the block diagonal of
    reference covariances. Both are precomputed so prediction is a pure
    read-only product, safe to call concurrently.
    """

    kernel: KernelSpec
    lam: float
    reference: ReferenceTrajectory
    mean_factor: np.ndarray
    cov_factor: np.ndarray

    @property
    def n_reference(self):
        return len(self.reference)

    @property
    def synergy_dim(self):
        return self.reference.synergy_dim


def kmp_fit(reference: ReferenceTrajectory, spec: KernelSpec, lam: float = 1.0) -> KmpModel:
    """Precompute the mean and covariance regression factors.

    Raises SingularSystemError when (K + lambda I) is conditioned beyond
    1e12; systems are solved by factorization, never explicit inversion.
    """
    if lam <= 0.0:
        raise ValueError("lambda must be positive")
    if len(reference) == 0:
        raise DimensionMismatchError("reference trajectory is empty")
    s = reference.synergy_dim
    n = len(reference)
    kmat = build_kernel_matrix(spec, reference.times, s)
    mu = reference.means.reshape(n * s)

    a_mean = kmat + lam * np.eye(n * s)
    if np.linalg.cond(a_mean) > _COND_LIMIT:
        raise SingularSystemError("(K + lambda I) condition estimate exceeds 1e12")
    mean_factor = np.linalg.solve(a_mean, mu)

    sigma = np.zeros((n * s, n * s))
    for i in range(n):
        sigma[i * s:(i + 1) * s, i * s:(i + 1) * s] = reference.covariances[i]
    a_cov = kmat + lam * sigma
    if np.linalg.cond(a_cov) > _COND_LIMIT:
        raise SingularSystemError("(K + lambda Sigma) condition estimate exceeds 1e12")
    cov_factor = np.linalg.solve(a_cov, np.eye(n * s))
    cov_factor = 0.5 * (cov_factor + cov_factor.T)

    return KmpModel(kernel=spec, lam=lam, reference=reference,
                    mean_factor=mean_factor, cov_factor=cov_factor)


def kmp_predict_mean(model: KmpModel, t_star: float) -> np.ndarray:
    """Expected synergy coordinates at a query time."""
    row = _kernel_row(model.kernel, t_star, model.reference.times, model.synergy_dim)
    return row @ model.mean_factor


def kmp_predict_cov(model: KmpModel, t_star: float) -> np.ndarray:
    """Predicted covariance at a query time (symmetric PSD)."""
    s = model.synergy_dim
    row = _kernel_row(model.kernel, t_star, model.reference.times, s)
    k_self = kernel_eval(model.kernel, t_star, t_star) * np.eye(s)
    cov = (model.n_reference / model.lam) * (k_self - row @ model.cov_factor @ row.T)
    return 0.5 * (cov + cov.T)


def kmp_predict(model: KmpModel, times):
    """Means and covariances over a grid of query times."""
    times = np.asarray(times, dtype=float)
    s = model.synergy_dim
    means = np.empty((times.shape[0], s))
    covs = np.empty((times.shape[0], s, s))
    for i, t in enumerate(times):
        means[i] = kmp_predict_mean(model, float(t))
        covs[i] = kmp_predict_cov(model, float(t))
    return means, covs


def default_via_radius(reference: ReferenceTrajectory) -> float:
    """Half the reference grid spacing (0 for a single-point reference)."""
    if len(reference) < 2:
        return 0.0
    return 0.5 * float(np.median(np.diff(reference.times)))


def insert_via_point(reference: ReferenceTrajectory, via: ViaPoint,
                     radius: float | None = None) -> ReferenceTrajectory:
    """Write a via-point into the reference trajectory.

    An existing point within ``radius`` of the via time is replaced;
    otherwise the via-point is appended and the sequence re-sorted.
    """
    if via.desired_e.shape[0] != reference.synergy_dim:
        raise DimensionMismatchError("via-point dimension does not match reference")
    if radius is None:
        radius = default_via_radius(reference)
    times = np.array(reference.times)
    means = np.array(reference.means)
    covs = np.array(reference.covariances)
    gaps = np.abs(times - via.t_star)
    nearest = int(np.argmin(gaps))
    if gaps[nearest] <= radius:
        times[nearest] = via.t_star
        means[nearest] = via.desired_e
        covs[nearest] = via.desired_cov
    else:
        times = np.append(times, via.t_star)
        means = np.vstack([means, via.desired_e[None, :]])
        covs = np.concatenate([covs, via.desired_cov[None, :, :]], axis=0)
    order = np.argsort(times, kind="stable")
    return ReferenceTrajectory(times=times[order], means=means[order],
                               covariances=covs[order])


def apply_via_points(reference: ReferenceTrajectory, via_points,
                     radius: float | None = None) -> ReferenceTrajectory:
    """Insert several via-points in sequence."""
    out = reference
    for via in via_points:
        out = insert_via_point(out, via, radius=radius)
    return out


def fuse_priorities(trajectories, priorities) -> ReferenceTrajectory:
    """Fuse trajectories on a shared grid by a weighted product of Gaussians.

    At each grid point the fused precision is ``sum_d w_d * Sigma_d^-1`` and
    the fused mean is the precision-weighted average; a larger priority
    weight w_d tightens that trajectory's covariance and dominates the fusion.

    ``priorities`` holds one weight spec per trajectory, each either a scalar
    or a per-point sequence; all weights must be positive.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise DimensionMismatchError("need at least one trajectory to fuse")
    base = trajectories[0]
    t = base.times
    s = base.synergy_dim
    weights = []
    for traj, w in zip(trajectories, priorities, strict=True):
        if traj.synergy_dim != s or not np.allclose(traj.times, t, atol=1e-12):
            raise DimensionMismatchError("trajectories must share grid and dimension")
        w = np.broadcast_to(np.asarray(w, dtype=float), t.shape).copy()
        if np.any(w <= 0.0):
            raise ValueError("priority weights must be positive")
        weights.append(w)

    means = np.empty((t.shape[0], s))
    covs = np.empty((t.shape[0], s, s))
    for i in range(t.shape[0]):
        precision = np.zeros((s, s))
        moment = np.zeros(s)
        for traj, w in zip(trajectories, weights):
            cov = traj.covariances[i]
            if np.linalg.cond(cov) > _COND_LIMIT:
                raise SingularCovarianceError(f"covariance at grid point {i} is singular")
            prec = np.linalg.solve(cov, np.eye(s))
            precision += w[i] * prec
            moment += w[i] * (prec @ traj.means[i])
        covs[i] = np.linalg.solve(precision, np.eye(s))
        covs[i] = 0.5 * (covs[i] + covs[i].T)
        means[i] = covs[i] @ moment
    return ReferenceTrajectory(times=t, means=means, covariances=covs)


def save_kmp_predictions(path, times, means, covs):
    """CSV dump of predictions: t, mean components, diagonal variances."""
    s = means.shape[1]
    header = ["t"] + [f"mu{i + 1}" for i in range(s)] + [f"var{i + 1}" for i in range(s)]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(times.shape[0]):
            cells = [times[i], *means[i], *np.diag(covs[i])]
            fh.write(",".join(repr(float(c)) for c in cells) + "\n")
