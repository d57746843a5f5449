"""Command-line entry point: ``terramesh <command> --config run.json [options]``."""
import argparse
import csv
import logging
import sys
from pathlib import Path

from . import io
from .evaluate import assemble_global, run_benchmark, write_report
from .geometry import pseudo_gt_mesh
from .pipeline import METHOD_VARIANT, ConfigError, RunConfig, initialized, load_models, refine_input, train_variant
from .render import render_depth
from .synth import SPLITS, build_dataset, keyframes, load_manifest, load_scene, variant_dir

log = logging.getLogger("terramesh")


def _scenes(cfg, scene):
    """Keyframe ids selected by ``--scene`` (a keyframe or a sequence id), or every keyframe."""
    manifest = load_manifest(cfg.dataset)
    every = [kf for split in SPLITS for kf in keyframes(manifest, split)]
    if scene is None:
        return every
    chosen = [kf for kf in every if kf == scene or kf.split("/")[0] == scene]
    if not chosen:
        raise ConfigError(f"scene {scene!r} is not in the dataset")
    return chosen


def _scene_out(cfg, stage, kf):
    d = Path(cfg.output) / stage / kf / variant_dir(cfg.sparsity, cfg.noise)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_generate(cfg, args):
    manifest = build_dataset(cfg.dataset, cfg.dataset_config())
    n = sum(len(s["keyframes"]) for s in manifest["sequences"])
    print(f"wrote {len(manifest['sequences'])} sequences ({n} keyframes) to {cfg.dataset}")


def cmd_init(cfg, args):
    cfg.require("dataset")
    for kf in _scenes(cfg, args.scene):
        scene = load_scene(cfg.dataset, kf, cfg.sparsity, cfg.noise)
        result = initialized(scene, cfg)
        out = _scene_out(cfg, "init", kf)
        io.write_obj(out / "mesh.obj", result.mesh)
        with open(out / "trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "loss"])
            for i, v in enumerate([result.initial_loss] + result.trace):
                w.writerow([i, repr(v)])
        print(f"{scene.scene_id}: loss {result.initial_loss:.4f} -> {result.trace[-1]:.4f}")


def cmd_train(cfg, args):
    for variant in cfg.variants:
        _, history, _ = train_variant(cfg, variant, log_dir=cfg.output)
        last = [r for r in history if r[1] == "val"][-1:] or history[-1:]
        tail = f"; last {last[0][1]} l2={last[0][2]:.4f} l3={last[0][3]:.4f}" if last else ""
        print(f"saved {cfg.checkpoint_path(variant)}{tail}")


def _refined(cfg, kf):
    """(scene, init mesh, {method: [stage meshes]}) for one keyframe."""
    scene = load_scene(cfg.dataset, kf, cfg.sparsity, cfg.noise)
    init_mesh = initialized(scene, cfg).mesh
    models, notes = load_models(cfg)
    for n in notes:
        log.warning(n)
    return scene, init_mesh, {m: model.refine(refine_input(scene, init_mesh)) for m, model in models.items()}


def cmd_refine(cfg, args):
    cfg.require("dataset", "checkpoints")
    for kf in _scenes(cfg, args.scene):
        scene, _, refined = _refined(cfg, kf)
        if not refined:
            raise ConfigError(f"no checkpoints found under {cfg.checkpoints}")
        out = _scene_out(cfg, "refine", kf)
        for method, stages in refined.items():
            for s, mesh in enumerate(stages, start=1):
                io.write_obj(out / f"{METHOD_VARIANT[method]}_stage{s}.obj", mesh)
        print(f"{scene.scene_id}: refined with {', '.join(refined)}")


def cmd_eval(cfg, args):
    report = run_benchmark(cfg)
    paths = write_report(report, cfg.output)
    print((Path(paths[1])).read_text(), end="")


def cmd_assemble(cfg, args):
    cfg.require("dataset")
    kfs = _scenes(cfg, args.scene)
    meshes, cameras, label = [], [], "Initialized"
    for kf in kfs:
        scene, init_mesh, refined = _refined(cfg, kf)
        best = next((m for m in ("RGB+RD+EDT", "RGB+RD", "RGB") if m in refined), None)
        label = best or "Initialized"
        meshes.append(refined[best][-1] if best else init_mesh)
        cameras.append(scene.camera)
    mesh = assemble_global(meshes, cameras)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    name = (args.scene or "all").replace("/", "_")
    io.write_obj(out / f"assembled_{name}.obj", mesh)
    print(f"assembled {len(kfs)} {label} meshes: {mesh.n_vertices} vertices, {len(mesh.faces)} faces")


def cmd_export(cfg, args):
    cfg.require("dataset")
    for kf in _scenes(cfg, args.scene):
        scene, init_mesh, refined = _refined(cfg, kf)
        out = _scene_out(cfg, "export", kf)
        io.write_pfm(out / "gt_depth.pfm", scene.gt.depth)
        io.write_pfm(out / "sparse_depth.pfm", scene.sparse.depth)
        io.write_obj(out / "pseudo_gt.obj", pseudo_gt_mesh(scene.gt, scene.camera, cfg.pgt_stride))
        meshes = {"initialized": init_mesh, **{METHOD_VARIANT[m]: st[-1] for m, st in refined.items()}}
        for name, mesh in meshes.items():
            io.write_obj(out / f"{name}.obj", mesh)
            io.write_pfm(out / f"{name}_depth.pfm", render_depth(mesh, scene.camera).depth)
        print(f"{scene.scene_id}: exported {', '.join(meshes)}")


COMMANDS = {"generate": cmd_generate, "init": cmd_init, "train": cmd_train, "refine": cmd_refine,
            "eval": cmd_eval, "assemble": cmd_assemble, "export": cmd_export}


def build_parser():
    parser = argparse.ArgumentParser(prog="terramesh", description="Mesh-based depth completion pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--scene", help="keyframe id (seqNN/kfNN) or sequence id (seqNN)")
        p.add_argument("--sparsity", type=int, choices=(500, 1000, 2000))
        p.add_argument("--noise", choices=("on", "off"))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config).with_overrides(
            sparsity=args.sparsity, seed=args.seed, output=args.out,
            noise=None if args.noise is None else args.noise == "on")
        COMMANDS[args.command](cfg, args)
    except (ConfigError, ValueError, FileNotFoundError, FloatingPointError) as e:
        print(f"terramesh {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
