"""End-to-end task orchestration: learn, perceive, adapt, squeeze.

Runs the full stage graph on synthetic data: synergy extraction from
demonstrations, probabilistic encoding, kernelized regression, scene
segmentation and classification, pose-driven via-point adaptation, joint
reconstruction, and the tactile force loop with friction-cone checks.
Every stage appends a JSON-serializable record to the task log, and all
randomness flows through seeds carried by the configuration.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import encoding, force, kmp, perception, synergy, synthetic
from .errors import ConfigInvalidError, StageError, SynkitError

__all__ = ["PipelineConfig", "TaskLog", "default_config", "run_task", "build_reference"]


@dataclass
class PipelineConfig:
    """Every knob of the pipeline, JSON round-trippable.

    Optional ``demos_path`` (directory of demo_*.csv trajectories) and
    ``scene_path`` (ASCII cloud) switch those stages from synthetic
    generation to file ingestion; ``models_dir`` reuses a persisted
    ``basis.json`` / ``svm.json`` when present. Force band and friction
    defaults come from the task scenario when left None.
    """

    task: str = "egg"
    seed: int = 7
    out_dir: str | None = None
    demos_path: str | None = None
    scene_path: str | None = None
    models_dir: str | None = None
    synergy_threshold: float = 0.85
    demo_count: int = 8
    demo_noise: float = 0.004
    gmm_components: int = 5
    gmm_seed: int = 7
    gmm_max_iter: int = 200
    gmm_tol: float = 1e-6
    kernel_kind: str = "cauchy"
    kernel_l: float = 0.05
    kernel_sigma2: float = 1.0
    kernel_alpha: float = 1.0
    lam: float = 1e-6
    reference_points: int = 25
    dense_points: int = 201
    ransac_iterations: int = 300
    ransac_threshold: float = 0.005
    ransac_seed: int = 11
    cluster_epsilon: float = 0.02
    cluster_min_points: int = 30
    svm_c: float = 10.0
    svm_epochs: int = 200
    svm_seed: int = 13
    force_mu: float | None = None
    force_gain: float = 0.5
    force_target_low: float | None = None
    force_target_high: float | None = None
    force_steps: int = 80
    force_dt: float = 0.05
    force_lag: float = 0.15
    via_confidence: float = 1e-6

    def validate(self):
        if self.task not in synthetic.TASKS:
            raise ConfigInvalidError(f"unknown task {self.task!r}")
        positive = {
            "synergy_threshold": self.synergy_threshold,
            "gmm_components": self.gmm_components,
            "gmm_tol": self.gmm_tol,
            "kernel_l": self.kernel_l,
            "kernel_sigma2": self.kernel_sigma2,
            "kernel_alpha": self.kernel_alpha,
            "lam": self.lam,
            "reference_points": self.reference_points,
            "dense_points": self.dense_points,
            "ransac_iterations": self.ransac_iterations,
            "ransac_threshold": self.ransac_threshold,
            "cluster_epsilon": self.cluster_epsilon,
            "cluster_min_points": self.cluster_min_points,
            "svm_c": self.svm_c,
            "svm_epochs": self.svm_epochs,
            "force_gain": self.force_gain,
            "force_steps": self.force_steps,
            "force_dt": self.force_dt,
            "force_lag": self.force_lag,
            "via_confidence": self.via_confidence,
            "demo_noise": self.demo_noise + 1.0,  # zero noise allowed
        }
        for name, value in positive.items():
            if value <= 0.0:
                raise ConfigInvalidError(f"{name} must be positive, got {value}")
        if self.synergy_threshold > 1.0:
            raise ConfigInvalidError("synergy_threshold must lie in (0, 1]")
        if self.demo_count < 2:
            raise ConfigInvalidError("demo_count must be at least 2")
        if self.kernel_kind not in kmp.KERNEL_KINDS:
            raise ConfigInvalidError(f"unknown kernel kind {self.kernel_kind!r}")
        if self.force_mu is not None and self.force_mu <= 0.0:
            raise ConfigInvalidError("force_mu must be positive")
        band = (self.force_target_low, self.force_target_high)
        if None not in band and band[0] >= band[1]:
            raise ConfigInvalidError("force target band must satisfy low < high")
        for path_name in ("demos_path", "scene_path", "models_dir"):
            path = getattr(self, path_name)
            if path is not None and not Path(path).exists():
                raise ConfigInvalidError(f"{path_name} does not exist: {path}")
        return self

    def kernel_spec(self) -> kmp.KernelSpec:
        alpha = self.kernel_alpha if self.kernel_kind == "cauchy" else None
        return kmp.KernelSpec(kind=self.kernel_kind, l=self.kernel_l,
                              sigma2=self.kernel_sigma2, alpha=alpha)

    def scenario(self):
        return synthetic.task_scenario(self.task)

    def force_band(self):
        lo, hi = self.scenario()["force_band"]
        return (
            self.force_target_low if self.force_target_low is not None else lo,
            self.force_target_high if self.force_target_high is not None else hi,
        )

    def mu(self) -> float:
        return self.force_mu if self.force_mu is not None else self.scenario()["mu"]

    def to_json(self, path=None) -> str:
        text = json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        payload = json.loads(Path(path).read_text())
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigInvalidError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload).validate()


def default_config(task: str = "egg", seed: int = 7) -> PipelineConfig:
    scenario = synthetic.task_scenario(task)
    lo, hi = scenario["force_band"]
    return PipelineConfig(task=task, seed=seed, force_mu=scenario["mu"],
                          force_target_low=lo, force_target_high=hi)


@dataclass
class TaskLog:
    """Ordered stage records of one pipeline run."""

    task: str
    config: dict
    stages: list = field(default_factory=list)

    def add(self, name: str, data: dict):
        self.stages.append({"name": name, "data": data})

    def stage_names(self):
        return [s["name"] for s in self.stages]

    def stage(self, name: str) -> dict:
        for s in self.stages:
            if s["name"] == name:
                return s["data"]
        raise KeyError(name)

    def to_json(self, path=None) -> str:
        payload = {"task": self.task, "config": self.config, "stages": self.stages}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


# Stage names in execution order; the learning stages precede the perception
# stages, which precede the force loop.
STAGE_ORDER = (
    "synergy",
    "encoding",
    "kmp",
    "perception",
    "adaptation",
    "reconstruction",
    "force",
    "metrics",
)


def _stage(log, name):
    class _Ctx:
        def __enter__(self):
            return None

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False

    return _Ctx()


def load_demo_dir(path):
    """Read timed demonstrations from a directory of ``demo_*.csv`` files.

    Each file holds rows of ``t, q1..qJ`` with one header line, the format
    the ``generate demos`` command emits.
    """
    files = sorted(Path(path).glob("demo_*.csv"))
    if not files:
        raise ConfigInvalidError(f"no demo_*.csv files under {path}")
    demos = []
    for f in files:
        rows = np.loadtxt(f, delimiter=",", skiprows=1, ndmin=2)
        demos.append((rows[:, 0], rows[:, 1:]))
    return demos


def build_reference(config: PipelineConfig):
    """Learning-phase artifacts: demos, fitted basis, GMM, GMR reference."""
    if config.demos_path is not None:
        demos = load_demo_dir(config.demos_path)
        truth = None
    else:
        demos, truth = synthetic.generate_synthetic_demos(
            config.task, count=config.demo_count, noise=config.demo_noise,
            seed=config.seed,
        )
    models_dir = Path(config.models_dir) if config.models_dir is not None else None
    basis_file = models_dir / "basis.json" if models_dir is not None else None
    if basis_file is not None and basis_file.exists():
        basis = synergy.load_basis(basis_file)
    else:
        postures = np.vstack([angles for _, angles in demos])
        configs = synergy.ConfigurationMatrix.from_postures(
            postures, theta0=synthetic.nominal_posture())
        basis = synergy.fit_synergy_basis(configs, config.synergy_threshold)
    grid = np.linspace(0.0, 1.0, config.reference_points)
    trajectories = encoding.interpolate_coefficients(demos, basis, grid)
    model = encoding.fit_gmm(trajectories, n_components=config.gmm_components,
                             seed=config.gmm_seed, max_iter=config.gmm_max_iter,
                             tol=config.gmm_tol)
    reference = encoding.generate_reference(model, grid)
    return demos, truth, basis, model, reference


def _contact_frames(n_contacts, radius):
    """Contact points and frames around a horizontal circle, z inward."""
    frames = []
    for i in range(n_contacts):
        theta = 2.0 * np.pi * i / n_contacts
        outward = np.array([np.cos(theta), np.sin(theta), 0.0])
        p = radius * outward
        n = -outward
        t1 = np.cross([0.0, 0.0, 1.0], n)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        frames.append((p, np.column_stack([t1, t2, n])))
    return frames


def _skew(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def build_grasp_model(basis, contact_radius: float, n_contacts: int = 3,
                      closing_stiffness: float = 40.0,
                      motor_gain: float = 0.5) -> force.GraspModel:
    """Tripod grasp mechanics around a detected object.

    Closing is driven by the first synergy direction through a rank-one
    stiffness onto the contact normals; the hand Jacobian is an orthonormal
    column basis whose first column is the shared normal direction, so the
    grip magnitude survives the force-current round trip exactly.
    """
    frames = _contact_frames(n_contacts, contact_radius)
    top = np.hstack([rot for _, rot in frames])
    bottom = np.hstack([_skew(p) @ rot for p, rot in frames])
    grasp_matrix = np.vstack([top, bottom])

    pattern = force.normal_pattern(n_contacts)
    stiffness = closing_stiffness * np.outer(pattern, basis.e_hat[:, 0])

    j = basis.joint_dim
    seed_cols = np.column_stack(
        [pattern]
        + [np.cos((k + 1) * np.arange(1, 3 * n_contacts + 1, dtype=float)) for k in range(j - 1)]
    )
    q, _ = np.linalg.qr(seed_cols)
    if q[:, 0] @ pattern < 0.0:
        q = -q
    hand_jacobian = q
    motor_constant = motor_gain * np.eye(j)
    return force.GraspModel(grasp_matrix=grasp_matrix, stiffness=stiffness,
                            hand_jacobian=hand_jacobian, motor_constant=motor_constant)


def _run_force_loop(config: PipelineConfig, basis, grasp_model):
    """First-order grip plant tracking a ramped force target.

    The measured grip lags the commanded grip with time constant
    ``force_lag``; each step applies a synergy correction from the target
    minus measured error and logs the per-contact friction-cone flags.
    """
    lo, hi = config.force_band()
    target_final = 0.5 * (lo + hi)
    mu = config.mu()
    scenario = config.scenario()
    weight = scenario["object_mass"] * 9.81
    omega = np.array([0.0, 0.0, weight, 0.0, 0.0, 0.0])

    dt = config.force_dt
    steps = config.force_steps
    ramp_time = 0.5 * steps * dt
    ramp_rate = (target_final - lo) / ramp_time

    coupling = grasp_model.stiffness @ basis.e_hat
    pattern = force.normal_pattern(grasp_model.n_contacts)
    delta_e = np.linalg.pinv(coupling) @ (lo * pattern)

    times, targets, measures = [], [], []
    measured = lo
    records = []
    for k in range(steps):
        t = k * dt
        target_k = lo + min(t / ramp_time, 1.0) * (target_final - lo)
        times.append(t)
        targets.append(target_k)
        measures.append(measured)
        target_profile = force.ForceProfile(np.asarray(times), np.asarray(targets),
                                            ramp_rate=ramp_rate)
        measured_profile = force.ForceProfile(np.asarray(times), np.asarray(measures))
        correction = force.adapt_force(target_profile, measured_profile, grasp_model,
                                       basis, gain=config.force_gain)
        delta_e = delta_e + correction
        contacts = force.contact_forces(grasp_model, omega, basis, delta_e)
        currents = force.motor_currents(grasp_model, contacts)
        realized = force.realized_forces(grasp_model, currents)
        command = force.grip_force(realized)
        flags = [force.friction_cone_check(f, mu) for f in realized]
        measured = measured + (dt / config.force_lag) * (command - measured)
        records.append({
            "t": t,
            "target": float(target_k),
            "measured": float(measures[-1]),
            "command": float(command),
            "stable": flags,
            "delta_e": [float(v) for v in delta_e],
        })
    final_grip = float(measured)
    return {
        "mu": mu,
        "band": [lo, hi],
        "target": target_final,
        "ramp_rate": ramp_rate,
        "records": records,
        "final_grip": final_grip,
        "settled": bool(lo <= final_grip <= hi),
        "all_stable": bool(all(all(r["stable"]) for r in records)),
    }


def run_task(config: PipelineConfig) -> TaskLog:
    """Execute the full pipeline for one task and write its artifacts.

    Stage errors are re-raised as StageError carrying the stage name. The
    log (and every artifact, when ``out_dir`` is set) is reproducible from
    the configuration alone.
    """
    config.validate()
    scenario = config.scenario()
    out_dir = Path(config.out_dir) if config.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    log = TaskLog(task=config.task, config=json.loads(config.to_json()))

    with _stage(log, "synergy"):
        demos, truth, basis, gmm_model, reference = build_reference(config)
        log.add("synergy", {
            "joint_dim": basis.joint_dim,
            "retained": basis.synergy_dim,
            "variance_fractions": basis.variance_fractions.tolist(),
            "theta0": basis.theta0.tolist(),
            "demo_count": len(demos),
        })

    with _stage(log, "encoding"):
        log.add("encoding", {
            "components": gmm_model.n_components,
            "em_iterations": int(gmm_model.ll_history.shape[0]),
            "log_likelihood": float(gmm_model.ll_history[-1]),
            "grid_points": len(reference),
        })

    with _stage(log, "kmp"):
        spec = config.kernel_spec()
        baseline = kmp.kmp_fit(reference, spec, config.lam)
        log.add("kmp", {
            "kernel": spec.to_dict(),
            "lambda": config.lam,
            "reference_points": baseline.n_reference,
        })

    with _stage(log, "perception"):
        if config.scene_path is not None:
            cloud = perception.load_cloud(config.scene_path)
        else:
            cloud, _scene_meta = synthetic.generate_synthetic_scene(
                config.task, seed=config.ransac_seed)
        plane, inliers, outliers = perception.ransac_plane(
            cloud, iterations=config.ransac_iterations,
            inlier_threshold=config.ransac_threshold, seed=config.ransac_seed)
        objects_cloud = cloud[outliers]
        clusters = perception.euclidean_cluster(
            objects_cloud, epsilon=config.cluster_epsilon,
            min_points=config.cluster_min_points)
        svm_file = (Path(config.models_dir) / "svm.json"
                    if config.models_dir is not None else None)
        if svm_file is not None and svm_file.exists():
            svm = perception.SvmModel.from_json(svm_file)
        else:
            features, labels = synthetic.svm_training_fixture(config.task,
                                                              seed=config.svm_seed)
            svm = perception.svm_train(features, labels, c=config.svm_c,
                                       epochs=config.svm_epochs, seed=config.svm_seed)
        poses = []
        for cluster in clusters:
            label, score = perception.svm_classify(svm, perception.extract_features(cluster))
            poses.append(perception.estimate_pose(cluster, label=label, score=score))
        log.add("perception", {
            "plane": {"normal": plane.normal.tolist(), "offset": plane.offset},
            "inlier_count": int(inliers.shape[0]),
            "outlier_count": int(outliers.shape[0]),
            "clusters": [
                {
                    "label": pose.label,
                    "score": pose.score,
                    "centroid": pose.centroid.tolist(),
                    "extents": pose.extents.tolist(),
                    "size": int(len(cluster)),
                }
                for pose, cluster in zip(poses, clusters)
            ],
        })
        if out_dir is not None:
            (out_dir / "segmentation.json").write_text(
                perception.segmentation_to_json(plane, poses, [len(c) for c in clusters]))
            svm.to_json(out_dir / "svm.json")

    with _stage(log, "adaptation"):
        target_label = scenario["target_label"]
        detected = [p for p in poses if p.label == target_label]
        if not detected:
            raise SynkitError(f"no cluster classified as {target_label!r}")
        target_pose = detected[0]

        params = perception.SynergyMappingParams(
            compliance=np.eye(basis.joint_dim),
            motion_transfer=np.eye(basis.joint_dim),
        )
        nominal_pose = _nominal_object_pose(config.task, target_label)
        via_detected = perception.pose_to_synergy(
            target_pose, params, basis,
            t_star=scenario["grasp_time"], confidence=config.via_confidence)
        via_nominal = perception.pose_to_synergy(
            nominal_pose, params, basis,
            t_star=scenario["grasp_time"], confidence=config.via_confidence)
        pose_delta = via_detected.desired_e - via_nominal.desired_e

        via_points = _task_via_points(config, scenario, basis, reference, pose_delta)
        adapted_reference = kmp.apply_via_points(reference, via_points)
        adapted = kmp.kmp_fit(adapted_reference, spec, config.lam)
        # executed steps follow the adapted reference grid; the dense
        # prediction is dumped for plotting only
        steps = np.asarray(adapted_reference.times)
        means, covs = kmp.kmp_predict(adapted, steps)
        log.add("adaptation", {
            "pose_delta": pose_delta.tolist(),
            "via_points": [
                {"t": vp.t_star, "e": vp.desired_e.tolist(),
                 "confidence": config.via_confidence}
                for vp in via_points
            ],
            "times": steps.tolist(),
            "means": means.tolist(),
        })
        if out_dir is not None:
            dense = np.linspace(0.0, 1.0, config.dense_points)
            dense_means, dense_covs = kmp.kmp_predict(adapted, dense)
            kmp.save_kmp_predictions(out_dir / "predictions.csv", dense,
                                     dense_means, dense_covs)

    with _stage(log, "reconstruction"):
        joints = np.vstack([synergy.reconstruct(basis, e) for e in means])
        log.add("reconstruction", {"joint_angles": joints.tolist()})

    with _stage(log, "force"):
        contact_radius = 0.5 * float(np.mean(target_pose.extents[:2]))
        grasp_model = build_grasp_model(basis, contact_radius)
        force_log = _run_force_loop(config, basis, grasp_model)
        log.add("force", force_log)
        if out_dir is not None:
            profile = force.ForceProfile(
                times=np.asarray([r["t"] for r in force_log["records"]]),
                forces=np.asarray([r["measured"] for r in force_log["records"]]),
                ramp_rate=force_log["ramp_rate"])
            profile.to_csv(out_dir / "grip_force.csv")

    with _stage(log, "metrics"):
        from .evaluation import pearson_r, rmse

        baseline_means, _ = kmp.kmp_predict(baseline, steps)
        per_r = [pearson_r(baseline_means[:, j], means[:, j]) for j in range(means.shape[1])]
        per_e = [rmse(baseline_means[:, j], means[:, j]) for j in range(means.shape[1])]
        log.add("metrics", {
            "R": float(np.mean(per_r)),
            "rmse": float(np.mean(per_e)),
            "per_component_R": [float(v) for v in per_r],
            "per_component_rmse": [float(v) for v in per_e],
        })

    if out_dir is not None:
        synergy.save_basis(basis, out_dir / "basis.json")
        gmm_model.to_json(out_dir / "gmm.json")
        reference.to_json(out_dir / "reference.json")
        reference.to_csv(out_dir / "reference.csv")
        log.to_json(out_dir / "tasklog.json")
    return log


def _nominal_object_pose(task, label):
    """Pose of the ideal (noiseless) scenario object, for adaptation deltas."""
    spec = synthetic.task_scenario(task)["objects"][label]
    pts = synthetic.object_points(spec)
    return perception.ObjectPose(
        centroid=pts.mean(axis=0),
        extents=pts.max(axis=0) - pts.min(axis=0),
        label=label,
    )


def _smoothstep(u):
    return u * u * (3.0 - 2.0 * u)


def _task_via_points(config, scenario, basis, reference, pose_delta):
    """Grasp via-point plus the manipulation steering sequence.

    The grasp descriptor is the configured grasp coordinate shifted by the
    detected-minus-nominal pose delta; the manipulation phase is steered
    through via-points at every reference step, following the configured
    traversal from the manipulation start to the end coordinates.
    """
    s = basis.synergy_dim
    cov = config.via_confidence * np.eye(s)
    vias = [kmp.ViaPoint(
        t_star=scenario["grasp_time"],
        desired_e=scenario["grasp_e"] + pose_delta,
        desired_cov=cov,
    )]
    t0 = scenario["manip_start_time"]
    span = 1.0 - t0
    steering = sorted(
        {float(t) for t in reference.times if t >= t0 - 1e-12} | {float(t0), 1.0})
    for t in steering:
        u = _smoothstep(np.clip((t - t0) / span, 0.0, 1.0))
        desired = scenario["manip_start_e"] + u * (
            scenario["manip_end_e"] - scenario["manip_start_e"])
        vias.append(kmp.ViaPoint(t_star=t, desired_e=desired, desired_cov=cov))
    return vias
