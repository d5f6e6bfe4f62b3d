"""Command-line interface: ``maskreg {synth,register,icp,eval,loop-close}``.

Exit codes: 0 success, 2 invalid input, 3 every sampled transform rejected.
Outputs depend only on the inputs, config and seed; wall time goes to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import evaluation, posegraph, synth
from . import icp as icp_mod
from . import io as mio
from . import runconfig
from .depthimage import object_cloud_cartesian
from .priors import Planar, to_dict
from .registrar import NoPosteriorError, RegistrationConfig, register

EXIT_OK, EXIT_INPUT, EXIT_REJECTED = 0, 2, 3


class InputError(Exception):
    pass


def _registration_config(cfg) -> RegistrationConfig:
    return RegistrationConfig(
        n_samples=cfg["n_samples"],
        n_points=cfg["n_points"],
        seed=cfg["seed"],
        eps_reject=float(cfg["eps_reject"]),
        threads=cfg["threads"],
    )


def _icp_config(cfg):
    spec = dict(cfg.get("icp", {}))
    init = mio.vector_to_pose(spec.pop("init", [0.0] * 6))
    try:
        return init, icp_mod.IcpConfig(**{k: float(v) if k != "max_iter" else int(v) for k, v in spec.items()})
    except TypeError as exc:
        raise InputError(f"bad icp spec: {exc}") from exc


def _image_pair(args, cfg):
    if args.images:
        paths = [Path(p) for p in args.images]
    else:
        paths = [p if p.is_absolute() else cfg.base / p for p in map(Path, cfg.get("images", []))]
    if len(paths) != 2:
        raise InputError("need exactly two images (positional or config 'images')")
    return [mio.read_mrd(p) for p in paths]


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_json(obj, out):
    _emit(json.dumps(obj, indent=2, sort_keys=True) + "\n", out)


def _timed(label, t0):
    print(f"{label}: {time.perf_counter() - t0:.3f} s", file=sys.stderr)


# -- commands -------------------------------------------------------------

def cmd_synth(args, cfg):
    if args.out is None:
        raise InputError("synth needs --out <directory>")
    scene, camera, motions, sigma = runconfig.build_scene(cfg)
    frames = synth.make_sequence(scene, motions, camera, sigma=sigma, seed=cfg["seed"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, (img, _) in enumerate(frames):
        mio.write_mrd(out / f"frame_{k:03d}.mrd", img)
    poses = [p for _, p in frames]
    rel = synth.relative_transforms(poses)
    mio.write_transforms_csv(out / "gt.csv", [(k, k + 1, T) for k, T in enumerate(rel)])
    run = {k: cfg[k] for k in ("n_samples", "n_points", "seed", "eps_reject")}
    run.update(sequence=".", ground_truth="gt.csv")
    if scene.table is not None:
        run["prior"] = to_dict(Planar(scene.table.point, scene.table.normal))
    mio.dump_json(out / "run.json", run)
    return EXIT_OK


def cmd_register(args, cfg):
    img_A, img_B = _image_pair(args, cfg)
    prior = runconfig.build_prior(cfg)
    t0 = time.perf_counter()
    post = register(img_A, img_B, prior, _registration_config(cfg))
    _timed("register", t0)
    _write_json(mio.posterior_report(post), args.out)
    samples = args.samples_csv or cfg.path("samples_csv")
    if samples:
        mio.write_samples_csv(samples, post)
    return EXIT_OK


def cmd_icp(args, cfg):
    img_A, img_B = _image_pair(args, cfg)
    init, icfg = _icp_config(cfg)
    t0 = time.perf_counter()
    res = icp_mod.icp(object_cloud_cartesian(img_A), object_cloud_cartesian(img_B), init, icfg)
    _timed("icp", t0)
    _write_json(
        {
            "transform": [float(v) for v in mio.pose_to_vector(res.transform)],
            "rms": res.rms,
            "iterations": res.iterations,
            "converged": res.converged,
        },
        args.out,
    )
    return EXIT_OK


def cmd_eval(args, cfg):
    if args.out is None:
        raise InputError("eval needs --out <directory>")
    seq = cfg.path("sequence")
    gt_path = cfg.path("ground_truth")
    if seq is None or gt_path is None:
        raise InputError("eval needs 'sequence' and 'ground_truth' in the config")
    images = evaluation.load_sequence(seq)
    gt = mio.read_transforms_csv(gt_path)
    if len(gt) != len(images) - 1:
        raise InputError(f"{len(images)} frames need {len(images) - 1} ground-truth rows, found {len(gt)}")
    pairs = [(a, b) for a, b, _ in gt]
    if any(not (0 <= a < len(images) and 0 <= b < len(images)) for a, b in pairs):
        raise InputError("ground-truth row refers to a missing frame")
    truths = [T for _, _, T in gt]
    backends = cfg.get("backends", list(evaluation.BACKENDS))
    unknown = set(backends) - set(evaluation.BACKENDS)
    if unknown:
        raise InputError(f"unknown backend(s) {sorted(unknown)}")

    estimates = {}
    t0 = time.perf_counter()
    if "maskreg" in backends:
        posts = evaluation.register_pairs(images, pairs, runconfig.build_prior(cfg), _registration_config(cfg))
        estimates["maskreg"] = [p.mean for p in posts]
    if "icp" in backends:
        init, icfg = _icp_config(cfg)
        estimates["icp"] = [r.transform for r in evaluation.icp_pairs(images, pairs, init, icfg)]
    _timed("eval", t0)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "errors.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["backend", "source", "target", "rotation_deg", "translation_mm"])
        for name in backends:
            for (a, b), (deg, mm) in zip(pairs, evaluation.pair_errors(estimates[name], truths)):
                w.writerow([name, a, b, repr(float(deg)), repr(float(mm))])
    summary = {name: evaluation.summarize(evaluation.pair_errors(estimates[name], truths)) for name in backends}
    with open(out / "summary.csv", "w", newline="") as f:
        keys = list(next(iter(summary.values())).keys()) if summary else []
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["backend"] + keys)
        for name, row in summary.items():
            w.writerow([name] + [repr(row[k]) for k in keys])
    return EXIT_OK


def cmd_loop_close(args, cfg):
    if args.out is None:
        raise InputError("loop-close needs --out <directory>")
    graph_path = Path(args.graph) if args.graph else cfg.path("graph")
    images = None
    loop_edge = None
    t0 = time.perf_counter()
    if graph_path is not None:
        graph = mio.read_graph(graph_path)
    else:
        seq = cfg.path("sequence")
        if seq is None:
            raise InputError("loop-close needs a graph file or a 'sequence' in the config")
        images = evaluation.load_sequence(seq)
        n = len(images)
        pairs = [(k, k + 1) for k in range(n - 1)]
        if n >= 3 and cfg.get("close_loop", True):
            pairs.append((n - 1, 0))
        posts = evaluation.register_pairs(images, pairs, runconfig.build_prior(cfg), _registration_config(cfg))
        graph = evaluation.sequence_graph(images, posts, pairs)
        if len(pairs) == n:
            loop_edge = graph.edges[-1]
    before = dict(graph.nodes)
    result = posegraph.optimize(graph)
    _timed("loop-close", t0)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mio.write_graph(out / "poses.txt", graph, result.poses)
    report = {"chi2_trace": result.chi2_trace, "chi2": result.chi2, "iterations": result.iterations}
    if loop_edge is not None:
        report["loop_error_before"] = list(posegraph.loop_error(loop_edge, before))
        report["loop_error_after"] = list(posegraph.loop_error(loop_edge, result.poses))
    mio.dump_json(out / "report.json", report)
    if images is not None:
        mio.write_cloud(out / "cloud.xyz", evaluation.fused_cloud(images, result.poses))
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "register": cmd_register,
    "icp": cmd_icp,
    "eval": cmd_eval,
    "loop-close": cmd_loop_close,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--samples", type=int, help="number of sampled transforms")
    common.add_argument("--points", type=int, help="points subsampled per cloud")
    common.add_argument("--threads", type=int, help="worker threads for likelihood evaluation")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="maskreg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="render a synthetic tabletop sequence")
    for name in ("register", "icp"):
        sp = sub.add_parser(name, parents=[common], help=f"{name} two MRD images")
        sp.add_argument("images", nargs="*", help="image A and image B")
        if name == "register":
            sp.add_argument("--samples-csv", help="write every weighted sample here")
    sub.add_parser("eval", parents=[common], help="per-pair errors for both backends")
    sp = sub.add_parser("loop-close", parents=[common], help="optimize a pose graph")
    sp.add_argument("graph", nargs="?", help="graph file; otherwise the config's sequence is registered")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    if getattr(args, "images", None) == []:
        args.images = None
    overrides = {"seed": args.seed, "n_samples": args.samples, "n_points": args.points, "threads": args.threads}
    try:
        cfg = runconfig.load(args.config, overrides)
        return COMMANDS[args.command](args, cfg)
    except NoPosteriorError as exc:
        print(f"maskreg: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except (InputError, runconfig.ConfigError, mio.FormatError, posegraph.DisconnectedGraphError) as exc:
        print(f"maskreg: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"maskreg: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
