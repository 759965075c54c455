"""Command-line front end.

Exit codes: 0 on success, 1 on a verdict failure (semicontinuity violated,
order relation not holding, classification failing), 2 on usage or manifest
errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from .families import FAMILY_NAMES
from .geometry import levi_civita
from .harness import ManifestError, load_manifest, render_report, render_text, run_semicontinuity
from .holonomy import classify, estimate_algebra, orthonormal_frame, small_loop_generators
from .matrices import so_residual
from .subgroups import ConjugacyClass, catalog, catalog_entry, leq
from .transport import loop_catalog, parallel_transport

from .harness import ExperimentManifest
from .holonomy import HolonomySample


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holonomylab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a semicontinuity experiment from a manifest")
    run.add_argument("manifest")
    run.add_argument("--steps", type=int, help="override integrator steps")
    run.add_argument("--seed", type=int, help="override the loop/search seed")
    run.add_argument("--restarts", type=int, help="override classification restarts")
    run.add_argument("--outdir", help="override the output directory")

    transport = sub.add_parser("transport", help="transport one catalog loop for one member")
    transport.add_argument("manifest")
    transport.add_argument("--k", required=True, help="member index, or 'limit'")
    transport.add_argument("--loop", required=True, help="loop label from the catalog")
    transport.add_argument("--steps", type=int)

    cls = sub.add_parser("classify", help="classify one member's holonomy algebra")
    cls.add_argument("manifest")
    cls.add_argument("--k", required=True, help="member index, or 'limit'")

    order = sub.add_parser("order", help="order relation between two catalog subgroups")
    order.add_argument("spec_a")
    order.add_argument("spec_b")
    order.add_argument("--dim", type=int, required=True)
    order.add_argument("--restarts", type=int, default=32)
    order.add_argument("--tol", type=float, default=1e-6)
    order.add_argument("--seed", type=int, default=0)

    sub.add_parser("families", help="list the built-in metric families")
    return parser


def _apply_overrides(manifest: ExperimentManifest, args) -> ExperimentManifest:
    updates = {}
    if getattr(args, "steps", None) is not None:
        updates["steps"] = args.steps
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "restarts", None) is not None:
        updates["restarts"] = args.restarts
    if getattr(args, "outdir", None) is not None:
        updates["outputs"] = args.outdir
    return dataclasses.replace(manifest, **updates) if updates else manifest


def _pick_metric(manifest: ExperimentManifest, which: str):
    family = manifest.build_family()
    if which == "limit":
        return family, family.limit
    try:
        k = int(which)
    except ValueError:
        raise SystemExit(2)
    return family, family.member(k)


def _cmd_run(args) -> int:
    manifest = _apply_overrides(load_manifest(args.manifest), args)
    report = run_semicontinuity(manifest)
    paths = render_report(report, manifest.output_dir())
    sys.stdout.write(render_text(report))
    print(f"report files: {', '.join(str(p) for p in paths.values())}")
    return 0 if report.summary.ok else 1


def _cmd_transport(args) -> int:
    manifest = _apply_overrides(load_manifest(args.manifest), args)
    family, metric = _pick_metric(manifest, args.k)
    loops = loop_catalog(family.basepoint, manifest.loop_spec(), family.chart)
    match = [loop for loop in loops if loop.label == args.loop]
    if not match:
        known = ", ".join(loop.label for loop in loops)
        print(f"no loop {args.loop!r} in the catalog; known labels: {known}", file=sys.stderr)
        return 2
    conn = levi_civita(metric, family.chart)
    result = parallel_transport(conn, match[0], steps=manifest.steps)
    print(np.array2string(result.matrix, precision=12, suppress_small=False))
    print(f"error_estimate {result.error_estimate:.6e}")
    print(f"so_defect {result.so_defect:.6e}")
    print(f"steps_used {result.steps_used}")
    return 0


def _cmd_classify(args) -> int:
    manifest = _apply_overrides(load_manifest(args.manifest), args)
    family, metric = _pick_metric(manifest, args.k)
    chart = family.chart
    conn = levi_civita(metric, chart)
    frame = orthonormal_frame(metric(family.basepoint))
    frame_inv = np.linalg.inv(frame)
    loops = loop_catalog(family.basepoint, manifest.loop_spec(), chart)
    transports = []
    for loop in loops:
        raw = parallel_transport(conn, loop, steps=manifest.steps)
        moved = frame_inv @ raw.matrix @ frame
        transports.append(dataclasses.replace(raw, matrix=moved, so_defect=so_residual(moved)))
    sample = HolonomySample(
        transports=tuple(transports),
        loop_labels=tuple(loop.label for loop in loops),
        basepoint=family.basepoint,
        frame=frame,
    )
    generators = small_loop_generators(conn, family.basepoint, frame, side=manifest.generator_side, steps=manifest.steps)
    estimate = estimate_algebra(sample, generators, gap_threshold=manifest.gap_threshold, noise_floor=manifest.noise_floor)
    result = classify(estimate, catalog(chart.dim), restarts=manifest.restarts, tol=manifest.tol, seed=manifest.seed)
    print(f"algebra dimension {estimate.dim} (spectral gap {estimate.spectral_gap:.3e})")
    print(f"class {result.subgroup_id} (residual {result.residual:.6e})")
    return 0 if result.classified else 1


def _cmd_order(args) -> int:
    spec_a = catalog_entry(args.dim, args.spec_a)
    spec_b = catalog_entry(args.dim, args.spec_b)
    verdict = leq(
        ConjugacyClass(spec_a),
        ConjugacyClass(spec_b),
        restarts=args.restarts,
        tol=args.tol,
        seed=args.seed,
    )
    if verdict.holds:
        print(f"holds (residual {verdict.residual:.6e}, restarts used {verdict.restarts_used})")
        return 0
    print(f"does not hold (best residual {verdict.residual:.6e})")
    return 1


def _cmd_families(_args) -> int:
    for name in FAMILY_NAMES:
        print(name)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "transport": _cmd_transport,
    "classify": _cmd_classify,
    "order": _cmd_order,
    "families": _cmd_families,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ManifestError as exc:
        for line in exc.errors:
            print(f"manifest error: {line}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    raise SystemExit(main())
