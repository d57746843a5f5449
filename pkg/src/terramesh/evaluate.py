"""Benchmark over the test split and assembly of keyframe meshes in the world frame."""
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .delaunay import sd_tri_baseline
from .geometry import TriangleMesh, pseudo_gt_mesh, to_world
from .metrics import eval_l2_metric, eval_l3_metric, eval_sampler
from .pipeline import METHODS, initialized, load_models, refine_input
from .synth import keyframes, load_manifest, load_scene

REPORT_VERSION = 1


def assemble_global(meshes, cameras):
    """Concatenate keyframe meshes after moving each into the world frame; nothing is merged."""
    if len(meshes) == 0 or len(meshes) != len(cameras):
        raise ValueError("need one camera per mesh and at least one mesh")
    verts, faces, base = [], [], 0
    for mesh, cam in zip(meshes, cameras):
        verts.append(to_world(mesh, cam).vertices)
        faces.append(mesh.faces + base)
        base += mesh.n_vertices
    return TriangleMesh(np.concatenate(verts), np.concatenate(faces))


def _evaluate_scene(args):
    cfg, kf, level, noise, models = args
    scene = load_scene(cfg.dataset, kf, level, noise)
    sampler = eval_sampler(cfg.eval_samples)
    pgt = pseudo_gt_mesh(scene.gt, scene.camera, cfg.pgt_stride)
    meshes = {}
    if "SD-tri" in cfg.methods:
        meshes["SD-tri"] = sd_tri_baseline(scene.sparse, scene.camera)
    init_mesh = initialized(scene, cfg).mesh
    if "Initialized" in cfg.methods:
        meshes["Initialized"] = init_mesh
    for method, model in models.items():
        meshes[method] = model.refine(refine_input(scene, init_mesh))[-1]
    return {m: (eval_l2_metric(mesh, scene.gt, scene.camera),
                eval_l3_metric(mesh, scene.gt, scene.camera, sampler, gt_mesh=pgt))
            for m, mesh in meshes.items()}


def _cell(report, method, level, noise):
    for c in report["cells"]:
        if (c["method"], c["sparsity"], c["noise"]) == (method, level, noise):
            return c
    return None


def ordering_checks(report):
    """Qualitative orderings expected of the table; each entry carries pass/fail and the numbers."""
    levels = report["sparsity_levels"]
    present = [m for m in METHODS if any(c["method"] == m for c in report["cells"])]
    learned = [m for m in present if m not in ("SD-tri", "Initialized")]
    checks = []

    def add(name, pairs, strict=True):
        ok = all(a < b if strict else a <= b for a, b in pairs)
        checks.append({"name": name, "passed": bool(ok), "pairs": [[a, b] for a, b in pairs]})

    if "Initialized" in present:
        for m in learned:
            add(f"{m} l2 < Initialized l2 in every cell",
                [(_cell(report, m, lv, nz)["l2"], _cell(report, "Initialized", lv, nz)["l2"])
                 for lv in levels for nz in (False, True)])
    for m in present:
        for metric in ("l2", "l3"):
            add(f"{m} noiseless {metric} <= noisy {metric}",
                [(_cell(report, m, lv, False)[metric], _cell(report, m, lv, True)[metric]) for lv in levels],
                strict=False)
    if "SD-tri" in present:
        for nz in (False, True):
            ordered = sorted(levels)
            add(f"SD-tri l2 decreases with sparsity ({'noisy' if nz else 'noiseless'})",
                [(_cell(report, "SD-tri", b, nz)["l2"], _cell(report, "SD-tri", a, nz)["l2"])
                 for a, b in zip(ordered, ordered[1:])])
        if 1000 in levels:
            for m in learned:
                add(f"{m} l3 < SD-tri l3 at 1000 noisy",
                    [(_cell(report, m, 1000, True)["l3"], _cell(report, "SD-tri", 1000, True)["l3"])])
    return checks


def run_benchmark(cfg):
    """Evaluate every configured method on the test split over all sparsity and noise settings.

    One checkpoint per learned method is used for every sparsity level.
    """
    cfg.require("dataset")
    manifest = load_manifest(cfg.dataset)
    test = keyframes(manifest, "test")
    if not test:
        raise ValueError("test split is empty")
    models, notes = load_models(cfg)
    jobs = [(cfg, kf, lv, nz, models) for lv in cfg.sparsity_levels for nz in (False, True) for kf in test]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_evaluate_scene, jobs))
    else:
        results = [_evaluate_scene(j) for j in jobs]

    cells = []
    methods = [m for m in METHODS if m in cfg.methods and (m in models or m in ("SD-tri", "Initialized"))]
    for method in methods:
        for lv in cfg.sparsity_levels:
            for nz in (False, True):
                per = {f"{kf}": list(r[method]) for (_, kf, l, n, _), r in zip(jobs, results)
                       if l == lv and n == nz}
                cells.append({"method": method, "sparsity": lv, "noise": nz,
                              "l2": float(np.mean([v[0] for v in per.values()])),
                              "l3": float(np.mean([v[1] for v in per.values()])), "per_scene": per})
    config = cfg.to_json()
    for key in ("dataset", "checkpoints", "output"):  # relative to the report, so runs compare by content
        config[key] = os.path.relpath(config[key], cfg.output)
    report = {"version": REPORT_VERSION, "config": config, "scenes": test,
              "sparsity_levels": list(cfg.sparsity_levels), "notes": notes, "cells": cells}
    report["orderings"] = ordering_checks(report)
    return report


def format_table(report):
    levels = report["sparsity_levels"]
    cols = [(lv, nz) for nz in (False, True) for lv in levels]
    labels = [f"{lv} {'noisy' if nz else 'clean'}" for lv, nz in cols]
    head = f"{'method':<13}" + "".join(f"{label:>18}" for label in labels)
    sub = f"{'':<13}" + "".join(f"{'l2':>9}{'l3':>9}" for _ in cols)
    lines = [head, sub, "-" * len(sub)]
    for method in dict.fromkeys(c["method"] for c in report["cells"]):
        row = f"{method:<13}"
        for lv, nz in cols:
            c = _cell(report, method, lv, nz)
            row += f"{c['l2']:>9.3f}{c['l3']:>9.3f}"
        lines.append(row)
    lines.append("")
    lines += [f"[{'PASS' if o['passed'] else 'FAIL'}] {o['name']}" for o in report["orderings"]]
    lines += [f"note: {n}" for n in report["notes"]]
    return "\n".join(lines) + "\n"


def write_report(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    (out / "table.txt").write_text(format_table(report))
    return out / "report.json", out / "table.txt"
