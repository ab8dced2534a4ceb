"""Single command-line entry point: data generation, training, evaluation,
gradient checking, annotation simulation, cost studies, and serving.

Exit codes: 0 success, 1 assertion/check failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import annotation, gradcheck, synth, trainer
from .geometry import project
from .network import load_checkpoint, save_checkpoint
from .reconstruction import NoiseConfig, ReconHyper, train_reconstruction
from .synth import SimulatedAnnotator


def _print(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _validate_poses_file(path) -> int:
    """Re-read a written pose file and check every record against the schema."""
    poses = synth.load_poses_jsonl(path)
    for pose in poses:
        if pose.ndim != 2 or pose.shape[1] != 3 or not np.all(np.isfinite(pose)):
            raise ValueError(f"invalid pose record in {path}")
    return len(poses)


def _validate_checkpoint(path):
    """Re-read a written checkpoint and check the weights match the header."""
    params, _ = load_checkpoint(path)
    from .network import flatten_params

    flat = flatten_params(params.layers)
    if not np.all(np.isfinite(flat)):
        raise ValueError(f"checkpoint {path} holds non-finite weights")


def cmd_gen_data(args) -> int:
    dist = synth.default_distribution()
    poses = synth.generate_dataset(dist, args.count, seed=args.seed)
    synth.save_poses_jsonl(args.out, poses)
    summary = {"command": "gen-data", "seed": args.seed, "count": args.count, "out": args.out}
    if args.registry:
        cam = synth.default_camera()
        skeleton = dist.skeleton
        items = {}
        for k, pose in enumerate(poses[: args.registry_items]):
            items[f"item-{k:04d}"] = {
                "pose2d": project(pose, cam).tolist(),
                "pose3d": pose.tolist(),
            }
        registry = {
            "skeleton": {"names": skeleton.joint_names, "edges": skeleton.edges()},
            "items": items,
        }
        with open(args.registry, "w", encoding="utf-8") as f:
            json.dump(registry, f)
        summary["registry"] = args.registry
        summary["registry_items"] = len(items)
    if args.validate:
        summary["validated_records"] = _validate_poses_file(args.out)
    _print(summary)
    return 0


def cmd_train(args) -> int:
    if args.task == "reconstruction":
        dist = synth.default_distribution()
        if args.poses:
            poses = synth.load_poses_jsonl(args.poses)
        else:
            poses = synth.generate_dataset(dist, args.n_poses, seed=args.seed)
        hyper = ReconHyper(iterations=args.iterations, seed=args.seed,
                           learning_rate=args.learning_rate, hidden=args.hidden)
        params, losses = train_reconstruction(poses, synth.default_camera(), NoiseConfig(), hyper)
        save_checkpoint(args.out, params, extra={"task": "reconstruction", "seed": args.seed})
        if args.validate:
            _validate_checkpoint(args.out)
        _print({"command": "train", "task": "reconstruction", "seed": args.seed,
                "out": args.out, "initial_loss": losses[0], "final_loss": losses[-1]})
        return 0

    cfg = trainer.ExperimentConfig(
        task=args.task, n_poses=args.n_poses, iterations=args.iterations,
        learning_rate=args.learning_rate, hidden=args.hidden, seed=args.seed,
    )
    report = trainer.run_experiment(cfg)
    save_checkpoint(args.out, report.params,
                    extra={"task": args.task, "config": report.provenance["config"]})
    if args.validate:
        _validate_checkpoint(args.out)
    if args.report:
        trainer.save_report(args.report, report)
    _print(report.to_json())
    return 0


def cmd_eval(args) -> int:
    params, extra = load_checkpoint(args.checkpoint)
    cfg_dict = dict(extra["config"])
    cfg_dict["volume_grid"] = tuple(cfg_dict.get("volume_grid", (6, 6, 6)))
    cfg = trainer.ExperimentConfig(**cfg_dict)
    report = trainer.evaluate_params(cfg, params)
    if args.report:
        trainer.save_report(args.report, report)
    _print(report.to_json())
    return 0


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_suites(scope=args.scope, trials=args.trials, seed=args.seed)
    failed = False
    for name, res in results.items():
        status = "PASS" if res["passed"] else "FAIL"
        print(f"{status} {name}: worst relative error {res['worst_relative_error']:.3e} "
              f"(tolerance {res['tolerance']:.0e})")
        failed |= not res["passed"]
    print(f"seed: {args.seed}")
    return 1 if failed else 0


def cmd_annotate_sim(args) -> int:
    dist = synth.default_distribution()
    pose = synth.sample_pose(dist, seed=args.seed + args.pose_index)
    annotator = SimulatedAnnotator(error_rate=args.error_rate, ambiguous_rate=args.ambiguous_rate)
    session = annotation.run_simulated_session(pose, annotator, seed=args.seed)
    _print({
        "command": "annotate-sim",
        "seed": args.seed,
        "question_count": session.question_count,
        "answer_log": [list(e) for e in session.answer_log],
        "ordering": annotation.final_ordering(session),
        "relations": annotation.session_relations(session).to_json(),
    })
    return 0


def cmd_annotate_cost(args) -> int:
    dist = synth.default_distribution()
    annotator = SimulatedAnnotator(error_rate=args.error_rate, ambiguous_rate=args.ambiguous_rate)
    n = dist.skeleton.joint_count
    exhaustive = n * (n - 1) // 2
    rows = []
    for k in range(args.poses):
        pose = synth.sample_pose(dist, seed=args.seed * 1_000_003 + k)
        session = annotation.run_simulated_session(pose, annotator, seed=args.seed)
        rels = annotation.session_relations(session)
        # accuracy over strictly ordered ground-truth pairs
        correct = total = 0
        rank = {}
        for pos, cls in enumerate(annotation.final_ordering(session)):
            for joint in cls:
                rank[joint] = pos
        for i in range(n):
            for j in range(i + 1, n):
                gap = pose[i, 2] - pose[j, 2]
                if abs(gap) < annotator.tie_threshold_mm:
                    continue
                total += 1
                want = 1 if gap < 0 else -1
                got = 0 if rank[i] == rank[j] else (1 if rank[i] < rank[j] else -1)
                correct += got == want
        accuracy = correct / total if total else 1.0
        rows.append((f"pose-{k:05d}", session.question_count, accuracy))
        del rels

    counts = np.array([r[1] for r in rows])
    accs = np.array([r[2] for r in rows])
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["pose_id", "question_count", "accuracy"])
            writer.writerows(rows)
    _print({
        "command": "annotate-cost",
        "seed": args.seed,
        "poses": args.poses,
        "mean_questions": float(counts.mean()),
        "median_questions": float(np.median(counts)),
        "max_questions": int(counts.max()),
        "exhaustive_bound": exhaustive,
        "reference_mean_reported_by_protocol_authors": 17,
        "mean_accuracy": float(accs.mean()),
    })
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionStore, create_app, load_registry

    data_dir = os.environ.get("ORDPOSE_DATA_DIR")
    registry_path = args.registry or (os.path.join(data_dir, "registry.json") if data_dir else None)
    if not registry_path or not os.path.exists(registry_path):
        print("error: no registry file (use --registry or ORDPOSE_DATA_DIR)", file=sys.stderr)
        return 2
    store = SessionStore(load_registry(registry_path), log_path=args.log)
    app = create_app(store, static_dir=args.static)
    port = int(os.environ.get("ORDPOSE_PORT", args.port))
    uvicorn.run(app, host=args.host, port=port)
    return 0


def cmd_export_relations(args) -> int:
    from .service import SessionStore, load_registry

    store = SessionStore(load_registry(args.registry), log_path=args.log)
    try:
        session = store.get(args.session_id)
    except KeyError:
        print(f"error: unknown session {args.session_id}", file=sys.stderr)
        return 1
    if session.status != "complete":
        print(f"error: session {args.session_id} not complete", file=sys.stderr)
        return 1
    _print(annotation.session_relations(session).to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordpose", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic pose datasets")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--registry", help="also write an item registry for the service")
    p.add_argument("--registry-items", type=int, default=20)
    p.add_argument("--validate", action="store_true",
                   help="re-read written files and check them against their schema")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a task network or the reconstruction net")
    p.add_argument("--task", required=True, choices=list(trainer.TASKS) + ["reconstruction"])
    p.add_argument("--n-poses", type=int, default=2000)
    p.add_argument("--iterations", type=int, default=4000)
    p.add_argument("--learning-rate", type=float, default=2.5e-4)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--poses", help="JSON-lines pose file (reconstruction task)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--report", help="write the EvalReport JSON here")
    p.add_argument("--validate", action="store_true",
                   help="re-read the written checkpoint and check it against its schema")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="re-evaluate a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference verification of all gradients")
    p.add_argument("--scope", default="all", choices=list(gradcheck.SCOPES))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("annotate-sim", help="run one simulated annotation session")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pose-index", type=int, default=0)
    p.add_argument("--error-rate", type=float, default=0.0)
    p.add_argument("--ambiguous-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_annotate_sim)

    p = sub.add_parser("annotate-cost", help="question-count study over simulated sessions")
    p.add_argument("--poses", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--error-rate", type=float, default=0.0)
    p.add_argument("--ambiguous-rate", type=float, default=0.0)
    p.add_argument("--csv", help="per-pose CSV output path")
    p.set_defaults(func=cmd_annotate_cost)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--registry")
    p.add_argument("--log", help="append-only event log for crash-safe persistence")
    p.add_argument("--static", help="directory with the built web UI")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8777)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-relations", help="export a completed session's relations")
    p.add_argument("--registry", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--session-id", required=True)
    p.set_defaults(func=cmd_export_relations)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
