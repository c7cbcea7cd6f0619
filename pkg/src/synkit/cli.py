"""Batch command line: fit, encode, predict, segment, classify, benchmark, simulate.

Exit codes: 0 on success, 1 on usage errors, 2 when a pipeline stage fails.
"""
from __future__ import annotations

import argparse
import difflib
import json
import sys
from pathlib import Path

import numpy as np

from . import encoding, evaluation, kmp, perception, pipeline, synergy, synthetic
from .errors import SynkitError, UsageError

COMMANDS = (
    "fit-synergies",
    "encode",
    "kmp-predict",
    "segment",
    "classify",
    "benchmark-kernels",
    "simulate",
    "generate",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    parser = _Parser(prog="synkit", description=__doc__)
    parser.add_argument("--print-config", action="store_true",
                        help="print the full default config template and exit")
    parser.add_argument("--task", default="egg", choices=synthetic.TASKS,
                        help="task used by --print-config")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("fit-synergies", parents=[_common()], add_help=True,
                       help="fit a synergy basis from a postures CSV")
    p.add_argument("--input", required=True, help="CSV of postures, one per row")
    p.add_argument("--threshold", type=float, default=0.85)

    p = sub.add_parser("encode", parents=[_common()], add_help=True,
                       help="encode generated demos into a GMR reference")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.004)
    p.add_argument("--components", type=int, default=5)
    p.add_argument("--grid-points", type=int, default=25)

    p = sub.add_parser("kmp-predict", parents=[_common()], add_help=True,
                       help="fit a KMP on a reference JSON and predict on a grid")
    p.add_argument("--reference", required=True)
    p.add_argument("--kernel", default="gaussian", choices=kmp.KERNEL_KINDS)
    p.add_argument("--length-scale", type=float, default=0.05)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--points", type=int, default=201)

    p = sub.add_parser("segment", parents=[_common()], add_help=True,
                       help="plane removal plus clustering on an ASCII cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--threshold", type=float, default=0.005)
    p.add_argument("--epsilon", type=float, default=0.02)
    p.add_argument("--min-points", type=int, default=30)

    p = sub.add_parser("classify", parents=[_common()], add_help=True,
                       help="segment a cloud and label clusters with a trained SVM")
    p.add_argument("--cloud", required=True)
    p.add_argument("--svm", required=True, help="SvmModel JSON")
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--threshold", type=float, default=0.005)
    p.add_argument("--epsilon", type=float, default=0.02)
    p.add_argument("--min-points", type=int, default=30)

    p = sub.add_parser("benchmark-kernels", parents=[_common()], add_help=True,
                       help="compare the three kernels on the synthetic benchmark")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--length-scale", type=float, default=0.02)
    p.add_argument("--alpha", type=float, default=1.0)

    p = sub.add_parser("simulate", parents=[_common()], add_help=True,
                       help="run a full task simulation")

    p = sub.add_parser("generate", parents=[_common()], add_help=True,
                       help="emit synthetic demos or a synthetic scene")
    p.add_argument("what", choices=("demos", "scene"))
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.004)

    return parser


def _common():
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="pipeline config JSON")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--task", default=None, choices=synthetic.TASKS)
    return common


def _load_config(args, default_task="egg"):
    if args.config is not None:
        config = pipeline.PipelineConfig.from_json(args.config)
    else:
        config = pipeline.default_config(task=args.task or default_task)
    if args.task is not None:
        config.task = args.task
    if args.seed is not None:
        config.seed = args.seed
        config.gmm_seed = args.seed
        config.ransac_seed = args.seed + 1
        config.svm_seed = args.seed + 2
    config.out_dir = args.out
    return config.validate()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_fit_synergies(args):
    out = _out_dir(args)
    postures = synergy.load_postures_csv(args.input)
    configs = synergy.ConfigurationMatrix.from_postures(postures)
    basis = synergy.fit_synergy_basis(configs, args.threshold)
    synergy.save_basis(basis, out / "basis.json")
    print(f"retained {basis.synergy_dim} synergies "
          f"(fractions {np.round(basis.variance_fractions, 4).tolist()}) -> {out / 'basis.json'}")
    return 0


def _cmd_encode(args):
    out = _out_dir(args)
    config = _load_config(args)
    config.demo_count = args.count
    config.demo_noise = args.noise
    config.gmm_components = args.components
    config.reference_points = args.grid_points
    _, _, basis, model, reference = pipeline.build_reference(config)
    synergy.save_basis(basis, out / "basis.json")
    model.to_json(out / "gmm.json")
    reference.to_json(out / "reference.json")
    reference.to_csv(out / "reference.csv")
    print(f"encoded {config.demo_count} demos into {len(reference)} reference points "
          f"-> {out / 'reference.json'}")
    return 0


def _cmd_kmp_predict(args):
    out = _out_dir(args)
    reference = encoding.ReferenceTrajectory.from_json(args.reference)
    alpha = args.alpha if args.kernel == "cauchy" else None
    spec = kmp.KernelSpec(kind=args.kernel, l=args.length_scale,
                          sigma2=args.sigma2, alpha=alpha)
    model = kmp.kmp_fit(reference, spec, args.lam)
    grid = np.linspace(float(reference.times[0]), float(reference.times[-1]), args.points)
    means, covs = kmp.kmp_predict(model, grid)
    kmp.save_kmp_predictions(out / "predictions.csv", grid, means, covs)
    print(f"predicted {args.points} points with {args.kernel} kernel "
          f"-> {out / 'predictions.csv'}")
    return 0


def _segment_cloud(args):
    cloud = perception.load_cloud(args.cloud)
    plane, inliers, outliers = perception.ransac_plane(
        cloud, iterations=args.iterations, inlier_threshold=args.threshold,
        seed=args.seed if args.seed is not None else 11)
    clusters = perception.euclidean_cluster(cloud[outliers], epsilon=args.epsilon,
                                            min_points=args.min_points)
    return cloud, plane, inliers, outliers, clusters


def _cmd_segment(args):
    out = _out_dir(args)
    _, plane, inliers, outliers, clusters = _segment_cloud(args)
    poses = [perception.estimate_pose(c) for c in clusters]
    (out / "segmentation.json").write_text(
        perception.segmentation_to_json(plane, poses, [len(c) for c in clusters]))
    print(f"plane inliers {inliers.shape[0]}, outliers {outliers.shape[0]}, "
          f"{len(clusters)} clusters -> {out / 'segmentation.json'}")
    return 0


def _cmd_classify(args):
    out = _out_dir(args)
    svm = perception.SvmModel.from_json(args.svm)
    _, plane, _, _, clusters = _segment_cloud(args)
    poses = []
    for cluster in clusters:
        label, score = perception.svm_classify(svm, perception.extract_features(cluster))
        poses.append(perception.estimate_pose(cluster, label=label, score=score))
    (out / "segmentation.json").write_text(
        perception.segmentation_to_json(plane, poses, [len(c) for c in clusters]))
    for pose in poses:
        print(f"{pose.label}: score {pose.score:.3f}, centroid "
              f"{np.round(pose.centroid, 4).tolist()}")
    return 0


def benchmark_dataset(config: pipeline.PipelineConfig):
    """Reference, dense actual, and three object-instance adaptations."""
    _, _, basis, model, reference = pipeline.build_reference(config)
    dense = np.linspace(0.0, 1.0, config.dense_points)
    actual = encoding.generate_reference(model, dense)
    scenario = config.scenario()
    s = basis.synergy_dim
    adaptations = []
    for scale in (0.85, 1.0, 1.15):  # cubical, spherical, cylindrical instances
        adaptations.append([
            kmp.ViaPoint(t_star=scenario["grasp_time"],
                         desired_e=scale * scenario["grasp_e"],
                         desired_cov=1e-6 * np.eye(s)),
            kmp.ViaPoint(t_star=1.0,
                         desired_e=scale * scenario["manip_end_e"],
                         desired_cov=1e-6 * np.eye(s)),
        ])
    return reference, dense, actual, adaptations


def _cmd_benchmark(args):
    out = _out_dir(args)
    config = _load_config(args)
    reference, dense, actual, adaptations = benchmark_dataset(config)
    specs = [
        kmp.KernelSpec(kind="exponential", l=args.length_scale, sigma2=config.kernel_sigma2),
        kmp.KernelSpec(kind="gaussian", l=args.length_scale, sigma2=config.kernel_sigma2),
        kmp.KernelSpec(kind="cauchy", l=args.length_scale, sigma2=config.kernel_sigma2,
                       alpha=args.alpha),
    ]
    report = evaluation.benchmark_kernels(
        reference, adaptations, specs, lam=args.lam, seed=config.seed,
        grid=dense, actual=actual, dataset_id=f"{config.task}-synthetic",
        dump_dir=out)
    (out / "report.json").write_text(report.to_json())
    (out / "report.txt").write_text(report.to_text())
    print(report.to_text(), end="")
    return 0


def _cmd_simulate(args):
    config = _load_config(args)
    log = pipeline.run_task(config)
    force_stage = log.stage("force")
    print(f"task {config.task}: final grip {force_stage['final_grip']:.3f} N "
          f"in band {force_stage['band']}, stable={force_stage['all_stable']} "
          f"-> {Path(config.out_dir) / 'tasklog.json'}")
    return 0


def _cmd_generate(args):
    out = _out_dir(args)
    task = args.task or "egg"
    seed = args.seed if args.seed is not None else 7
    if args.what == "demos":
        demos, truth = synthetic.generate_synthetic_demos(
            task, count=args.count, noise=args.noise, seed=seed)
        for k, (times, angles) in enumerate(demos):
            with open(out / f"demo_{k:02d}.csv", "w") as fh:
                fh.write("t," + ",".join(f"q{j + 1}" for j in range(angles.shape[1])) + "\n")
                for t, q in zip(times, angles):
                    fh.write(",".join(repr(float(v)) for v in (t, *q)) + "\n")
        postures = np.vstack([angles for _, angles in demos])
        with open(out / "postures.csv", "w") as fh:
            fh.write(",".join(f"q{j + 1}" for j in range(postures.shape[1])) + "\n")
            for q in postures:
                fh.write(",".join(repr(float(v)) for v in q) + "\n")
        payload = {
            "task": task, "seed": seed, "count": args.count, "noise": args.noise,
            "directions": truth["directions"].tolist(),
            "theta0": truth["theta0"].tolist(),
        }
        (out / "demos_truth.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n")
        print(f"wrote {len(demos)} demos -> {out}")
    else:
        cloud, meta = synthetic.generate_synthetic_scene(task, seed=seed)
        perception.save_cloud(out / "scene.xyz", cloud)
        (out / "scene_truth.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n")
        features, labels = synthetic.svm_training_fixture(task, seed=seed + 2)
        svm = perception.svm_train(features, labels, seed=seed + 2)
        svm.to_json(out / "svm.json")
        print(f"wrote scene with {cloud.shape[0]} points -> {out}")
    return 0


_DISPATCH = {
    "fit-synergies": _cmd_fit_synergies,
    "encode": _cmd_encode,
    "kmp-predict": _cmd_kmp_predict,
    "segment": _cmd_segment,
    "classify": _cmd_classify,
    "benchmark-kernels": _cmd_benchmark,
    "simulate": _cmd_simulate,
    "generate": _cmd_generate,
}


def cli_dispatch(argv) -> int:
    argv = list(argv)
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 1
    head = argv[0]
    if head not in COMMANDS and not head.startswith("-"):
        nearest = difflib.get_close_matches(head, COMMANDS, n=1)
        hint = f"; did you mean {nearest[0]!r}?" if nearest else ""
        print(f"error: unknown subcommand {head!r}{hint}", file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.print_config:
        print(pipeline.default_config(task=args.task).to_json(), end="")
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 1
    try:
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SynkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
