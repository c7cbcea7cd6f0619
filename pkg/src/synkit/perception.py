"""Desk-scale visual pipeline over 3-D point clouds.

A scene cloud is split into a dominant plane (background) and object
candidates by RANSAC, candidates are grouped by Euclidean clustering,
classified with a linear SVM on simple geometric features, reduced to
centroid poses, and finally mapped into synergy-space via-point targets.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateCloudError,
    DimensionMismatchError,
    RankDeficientError,
    SingleClassError,
)
from .kmp import ViaPoint
from .synergy import SynergyBasis

__all__ = [
    "PlaneModel",
    "Cluster",
    "ObjectPose",
    "SvmModel",
    "SynergyMappingParams",
    "load_cloud",
    "save_cloud",
    "ransac_plane",
    "euclidean_cluster",
    "extract_features",
    "svm_train",
    "svm_classify",
    "OneVsRestSvm",
    "estimate_pose",
    "pose_to_synergy",
]

_COND_LIMIT = 1e12
BRUTE_FORCE_LIMIT = 2000  # below this many points, pairwise distances directly


@dataclass(frozen=True)
class PlaneModel:
    """Plane a x + b y + c z + d = 0 with unit normal (a, b, c)."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float)
        if normal.shape != (3,):
            raise DimensionMismatchError("plane normal must be a 3-vector")
        if abs(np.linalg.norm(normal) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "normal", normal.copy())

    def distances(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.abs(points @ self.normal + self.offset)


@dataclass(frozen=True)
class Cluster:
    """Indices of one connected object candidate within a source cloud."""

    indices: np.ndarray
    cloud: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=int))
        object.__setattr__(self, "cloud", np.asarray(self.cloud, dtype=float))

    @property
    def points(self) -> np.ndarray:
        return self.cloud[self.indices]

    def __len__(self):
        return self.indices.shape[0]


@dataclass(frozen=True)
class ObjectPose:
    """Centroid pose of a detected object: position, box extents, label."""

    centroid: np.ndarray
    extents: np.ndarray
    label: str = ""
    score: float = 0.0

    def __post_init__(self):
        centroid = np.asarray(self.centroid, dtype=float)
        extents = np.asarray(self.extents, dtype=float)
        if centroid.shape != (3,) or extents.shape != (3,):
            raise DimensionMismatchError("centroid and extents must be 3-vectors")
        if np.any(extents < 0.0):
            raise ValueError("extents must be nonnegative")
        object.__setattr__(self, "centroid", centroid.copy())
        object.__setattr__(self, "extents", extents.copy())


def load_cloud(path) -> np.ndarray:
    """Read an ASCII cloud: one "x y z" triple per line, '#' comments."""
    points = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            cells = body.split()
            if len(cells) != 3:
                raise DimensionMismatchError(f"{path}:{lineno}: expected 3 coordinates")
            points.append([float(c) for c in cells])
    cloud = np.asarray(points, dtype=float).reshape(-1, 3)
    if cloud.size and not np.isfinite(cloud).all():
        raise ValueError(f"{path}: cloud contains NaN or Inf coordinates")
    return cloud


def save_cloud(path, points) -> None:
    points = np.asarray(points, dtype=float)
    with open(path, "w") as fh:
        for p in points:
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")


def ransac_plane(cloud, iterations: int = 200, inlier_threshold: float = 0.005,
                 seed: int = 0):
    """Fit the dominant plane by random triple sampling.

    Returns ``(plane, inlier_indices, outlier_indices)`` for the sampled
    plane with the most inliers (points within the threshold distance).
    Deterministic given the seed: one 3-sample draw per iteration.
    """
    points = np.asarray(cloud, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] < 3:
        raise DegenerateCloudError("need at least 3 points of dimension 3")
    scale = max(float(np.max(np.abs(points))), 1.0)
    rng = np.random.default_rng(seed)
    best_count = -1
    best_plane = None
    for _ in range(iterations):
        idx = rng.choice(points.shape[0], size=3, replace=False)
        p1, p2, p3 = points[idx]
        cross = np.cross(p2 - p1, p3 - p1)
        norm = np.linalg.norm(cross)
        if norm <= 1e-12 * scale * scale:
            continue  # collinear triple
        normal = cross / norm
        offset = -float(normal @ p1)
        count = int(np.count_nonzero(np.abs(points @ normal + offset) <= inlier_threshold))
        if count > best_count:
            best_count = count
            best_plane = (normal, offset)
    if best_plane is None:
        raise DegenerateCloudError("no non-collinear triple found")
    normal, offset = best_plane
    pivot = int(np.argmax(np.abs(normal)))
    if normal[pivot] < 0.0:
        normal, offset = -normal, -offset
    plane = PlaneModel(normal=normal, offset=offset)
    mask = plane.distances(points) <= inlier_threshold
    inliers = np.flatnonzero(mask)
    outliers = np.flatnonzero(~mask)
    return plane, inliers, outliers


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _link_pairs_brute(points, epsilon, uf):
    n = points.shape[0]
    eps2 = epsilon * epsilon
    for i in range(n - 1):
        d2 = np.sum((points[i + 1:] - points[i]) ** 2, axis=1)
        for j in np.flatnonzero(d2 <= eps2):
            uf.union(i, i + 1 + int(j))


def _link_pairs_grid(points, epsilon, uf):
    cells = {}
    keys = np.floor(points / epsilon).astype(np.int64)
    for i, key in enumerate(map(tuple, keys)):
        cells.setdefault(key, []).append(i)
    eps2 = epsilon * epsilon
    offsets = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)]
    for key, members in cells.items():
        for off in offsets:
            other = (key[0] + off[0], key[1] + off[1], key[2] + off[2])
            if other not in cells or other < key:
                continue
            candidates = cells[other]
            for i in members:
                d2 = np.sum((points[candidates] - points[i]) ** 2, axis=1)
                for j in np.flatnonzero(d2 <= eps2):
                    cand = candidates[int(j)]
                    if other != key or cand > i:
                        uf.union(i, cand)


def euclidean_cluster(cloud, epsilon: float, min_points: int = 1) -> list[Cluster]:
    """Group points into connected components of the <= epsilon graph.

    Components with fewer than ``min_points`` members are discarded; the
    surviving clusters come back ordered by descending size, ties broken by
    smallest member index. Uses grid hashing with cell size epsilon above
    BRUTE_FORCE_LIMIT points, direct pairwise distances below.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if min_points < 1:
        raise ValueError("min_points must be >= 1")
    points = np.asarray(cloud, dtype=float).reshape(-1, 3)
    n = points.shape[0]
    if n == 0:
        return []
    uf = _UnionFind(n)
    if n <= BRUTE_FORCE_LIMIT:
        _link_pairs_brute(points, epsilon, uf)
    else:
        _link_pairs_grid(points, epsilon, uf)
    components = {}
    for i in range(n):
        components.setdefault(uf.find(i), []).append(i)
    kept = [np.asarray(sorted(m), dtype=int) for m in components.values() if len(m) >= min_points]
    kept.sort(key=lambda idx: (-idx.shape[0], int(idx[0])))
    return [Cluster(indices=idx, cloud=points) for idx in kept]


def extract_features(cluster: Cluster) -> np.ndarray:
    """7-vector of cluster geometry: extents, covariance spectrum, size.

    Bounding-box extents (3), sample-covariance eigenvalues sorted
    descending (3), and the point count (1).
    """
    pts = cluster.points
    if pts.shape[0] == 0:
        raise DimensionMismatchError("cannot featurize an empty cluster")
    extents = pts.max(axis=0) - pts.min(axis=0)
    if pts.shape[0] > 1:
        centered = pts - pts.mean(axis=0)
        cov = centered.T @ centered / (pts.shape[0] - 1)
        eigvals = np.sort(np.linalg.eigvalsh(cov))[::-1]
    else:
        eigvals = np.zeros(3)
    return np.concatenate([extents, eigvals, [float(pts.shape[0])]])


@dataclass(frozen=True)
class SvmModel:
    """Linear soft-margin classifier with internal feature standardization.

    ``classes`` is the (negative, positive) label pair; the decision value is
    ``w . (x - mean) / scale + b`` and its sign picks the class (ties go to
    the positive class). ``objective_history`` records the primal objective
    at accepted descent steps, non-increasing by construction.
    """

    weights: np.ndarray
    bias: float
    classes: tuple
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    objective_history: np.ndarray

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "classes": list(self.classes),
            "feature_mean": self.feature_mean.tolist(),
            "feature_scale": self.feature_scale.tolist(),
            "objective_history": self.objective_history.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            bias=float(d["bias"]),
            classes=tuple(d["classes"]),
            feature_mean=np.asarray(d["feature_mean"], dtype=float),
            feature_scale=np.asarray(d["feature_scale"], dtype=float),
            objective_history=np.asarray(d["objective_history"], dtype=float),
        )

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _svm_objective(w, b, x, y, c):
    margins = y * (x @ w + b)
    return 0.5 * float(w @ w) + c * float(np.mean(np.maximum(0.0, 1.0 - margins)))


def svm_train(features, labels, c: float = 10.0, epochs: int = 200, seed: int = 0) -> SvmModel:
    """Train a linear soft-margin SVM by monotone subgradient descent.

    Full-batch subgradient steps on the primal hinge objective with a
    backtracking step size: a step is only accepted when it lowers the
    objective, so the recorded objective history never increases. Features
    are standardized internally. Raises SingleClassError unless both classes
    are present.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatchError("features must form a 2-D array")
    labels = list(labels)
    if len(labels) != x.shape[0]:
        raise DimensionMismatchError("one label per feature row")
    classes = tuple(sorted(set(labels), key=str))
    if len(classes) != 2:
        raise SingleClassError(f"need exactly 2 classes, got {len(classes)}")
    y = np.where(np.asarray([lab == classes[1] for lab in labels]), 1.0, -1.0)

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    xs = (x - mean) / scale

    rng = np.random.default_rng(seed)
    w = 1e-6 * rng.standard_normal(x.shape[1])
    b = 0.0
    obj = _svm_objective(w, b, xs, y, c)
    history = [obj]
    step = 1.0
    for _ in range(epochs):
        margins = y * (xs @ w + b)
        violating = margins < 1.0
        grad_w = w - c * (y[violating] @ xs[violating]) / x.shape[0]
        grad_b = -c * float(np.sum(y[violating])) / x.shape[0]
        accepted = False
        trial = step
        while trial > 1e-14:
            w_new = w - trial * grad_w
            b_new = b - trial * grad_b
            obj_new = _svm_objective(w_new, b_new, xs, y, c)
            if obj_new < obj:
                w, b, obj = w_new, b_new, obj_new
                step = trial * 1.5
                accepted = True
                break
            trial *= 0.5
        history.append(obj)
        if not accepted:
            break

    return SvmModel(weights=w, bias=b, classes=classes, feature_mean=mean,
                    feature_scale=scale, objective_history=np.asarray(history))


def svm_decision(model: SvmModel, feature) -> float:
    feature = np.asarray(feature, dtype=float)
    if feature.shape != model.weights.shape:
        raise DimensionMismatchError(
            f"feature length {feature.shape} != model dim {model.weights.shape}"
        )
    xs = (feature - model.feature_mean) / model.feature_scale
    return float(model.weights @ xs + model.bias)


def svm_classify(model: SvmModel, feature):
    """Label a feature vector; returns ``(label, signed_score)``."""
    score = svm_decision(model, feature)
    label = model.classes[1] if score >= 0.0 else model.classes[0]
    return label, score


class OneVsRestSvm:
    """Multi-class composition of binary SVMs, one per label.

    Each member model separates its label from the rest; classification
    picks the largest decision value. Reduces to a single binary model for
    two classes.
    """

    def __init__(self, models):
        self.models = dict(models)

    @classmethod
    def train(cls, features, labels, c=10.0, epochs=200, seed=0):
        labels = list(labels)
        classes = sorted(set(labels), key=str)
        if len(classes) < 2:
            raise SingleClassError("need at least 2 classes")
        models = {}
        for label in classes:
            rest = [lab if lab == label else f"not-{label}" for lab in labels]
            models[label] = svm_train(features, rest, c=c, epochs=epochs, seed=seed)
        return cls(models)

    def classify(self, feature):
        scores = {}
        for label, model in self.models.items():
            value = svm_decision(model, feature)
            scores[label] = value if model.classes[1] == label else -value
        best = max(sorted(scores), key=lambda lab: scores[lab])
        return best, scores[best]


def estimate_pose(cluster: Cluster, label: str = "", score: float = 0.0) -> ObjectPose:
    """Centroid and axis-aligned bounding-box extents of a cluster."""
    pts = cluster.points
    if pts.shape[0] == 0:
        raise DimensionMismatchError("cannot estimate the pose of an empty cluster")
    return ObjectPose(
        centroid=pts.mean(axis=0),
        extents=pts.max(axis=0) - pts.min(axis=0),
        label=label,
        score=score,
    )


@dataclass(frozen=True)
class SynergyMappingParams:
    """Matrices mapping a Cartesian pose into synergy coordinates.

    ``compliance`` is the square joint compliance matrix, ``motion_transfer``
    the square motion transfer matrix whose pseudo-inverse carries the pose
    vector into joint space.
    """

    compliance: np.ndarray
    motion_transfer: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.compliance, dtype=float)
        a = np.asarray(self.motion_transfer, dtype=float)
        for name, m in (("compliance", c), ("motion_transfer", a)):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DimensionMismatchError(f"{name} matrix must be square")
            if not np.isfinite(m).all():
                raise ValueError(f"{name} matrix contains non-finite entries")
        if c.shape != a.shape:
            raise DimensionMismatchError("compliance and motion_transfer must agree on size")
        object.__setattr__(self, "compliance", c.copy())
        object.__setattr__(self, "motion_transfer", a.copy())

    @property
    def joint_dim(self):
        return self.compliance.shape[0]


def pose_vector(pose: ObjectPose) -> np.ndarray:
    """The 6-vector (centroid, extents) fed to the synergy mapping."""
    return np.concatenate([pose.centroid, pose.extents])


def pose_to_synergy(pose: ObjectPose, params: SynergyMappingParams, basis: SynergyBasis,
                    t_star: float = 1.0, confidence: float = 1e-6) -> ViaPoint:
    """Map an object pose into a synergy-space via-point.

    The pose 6-vector is carried into joint space by the pseudo-inverse of
    the motion transfer matrix, passed through the joint compliance, and
    projected onto the synergy basis; the result is packaged as a via-point
    at ``t_star`` with isotropic covariance ``confidence * I``.
    """
    j = basis.joint_dim
    if params.joint_dim != j:
        raise DimensionMismatchError("mapping matrices do not match the basis joint dim")
    op = pose_vector(pose)
    if j < op.shape[0]:
        raise DimensionMismatchError(f"cannot embed a 6-D pose into {j} joints")
    op_embedded = np.zeros(j)
    op_embedded[: op.shape[0]] = op
    if np.linalg.cond(params.motion_transfer) > _COND_LIMIT:
        raise RankDeficientError("motion transfer matrix pseudo-inverse is unstable")
    joint_displacement = np.linalg.pinv(params.motion_transfer) @ op_embedded
    e_o = basis.e_hat.T @ (params.compliance @ joint_displacement)
    return ViaPoint(t_star=t_star, desired_e=e_o,
                    desired_cov=confidence * np.eye(basis.synergy_dim))


def segmentation_to_json(plane: PlaneModel, poses, cluster_sizes) -> str:
    """Serialize segmentation results as the documented JSON payload."""
    payload = {
        "plane": {"normal": plane.normal.tolist(), "offset": plane.offset},
        "clusters": [
            {
                "label": pose.label,
                "score": pose.score,
                "centroid": pose.centroid.tolist(),
                "extents": pose.extents.tolist(),
                "size": int(size),
            }
            for pose, size in zip(poses, cluster_sizes)
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
