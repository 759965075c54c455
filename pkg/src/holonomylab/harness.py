"""Manifest-driven semicontinuity experiments over the built-in families.

A manifest is a single JSON document with the top-level keys

    family          {"name": ..., "params": {...}}
    chart           optional overrides {"lower", "upper", "margin", "grid"}
    basepoint       optional coordinate list
    ks              increasing list of positive member indices
    loops           {"square_scales", "circle_radii", "random_count",
                     "random_amplitude", "random_modes", "seed"}
    integrator      {"steps"}
    estimation      {"gap_threshold", "noise_floor", "generator_side"}
    classification  {"target", "restarts", "tol"}
    outputs         output directory (else HOLONOMYLAB_OUTDIR, else
                    "holonomylab_out")

Unknown keys anywhere are hard errors; validation reports every problem at
once before any computation starts.  The CSV report has the fixed header

    k,c0_conn_dist,c1_metric_dist,max_transport_dist,class_id,class_residual,leq_limit_member,leq_residual

with k = -1 encoding the limit row; numeric fields are printed with full
round-trip precision so identical runs produce bitwise-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .families import FAMILY_NAMES, builtin_family
from .geometry import (
    ChartDomain,
    MetricFamily,
    c0_connection_distance,
    c1_metric_distance,
    compatibility_residual,
    levi_civita,
)
from .holonomy import (
    AlgebraEstimate,
    ClassificationResult,
    HolonomySample,
    classify,
    estimate_algebra,
    orthonormal_frame,
    sample_holonomy,
    small_loop_generators,
)
from .matrices import DomainError, frobenius, so_residual
from .subgroups import ConjugacyClass, catalog, catalog_entry, conjugacy_search, leq
from .transport import LoopSpec, loop_catalog, parallel_transport

__all__ = [
    "CSV_HEADER",
    "ExperimentManifest",
    "ManifestError",
    "ReportRow",
    "SemicontinuityReport",
    "Tolerances",
    "load_manifest",
    "render_report",
    "run_semicontinuity",
]

CSV_HEADER = "k,c0_conn_dist,c1_metric_dist,max_transport_dist,class_id,class_residual,leq_limit_member,leq_residual"

OUTDIR_ENV = "HOLONOMYLAB_OUTDIR"
DEFAULT_OUTDIR = "holonomylab_out"


@dataclass(frozen=True)
class Tolerances:
    """Central defaults, calibrated for the built-ins at steps = 2048.

    compat gates the metric-compatibility defect of each Levi-Civita stage at
    the basepoint (finite-difference derivatives stay around 1e-8 there);
    transport_so is the expected group-membership defect of transports;
    gap_threshold and noise_floor separate genuine algebra directions from
    integrator noise and must be recalibrated if steps is lowered a lot.
    """

    compat: float = 1e-5
    transport_so: float = 1e-9
    class_tol: float = 1e-6
    gap_threshold: float = 1e-4
    noise_floor: float = 1e-7
    generator_side: float = 0.02


TOLERANCES = Tolerances()


class ManifestError(ValueError):
    """Manifest failed validation; .errors lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid manifest:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class ExperimentManifest:
    family_name: str
    family_params: dict
    ks: tuple
    target: str
    chart_lower: Optional[tuple] = None
    chart_upper: Optional[tuple] = None
    chart_margin: Optional[float] = None
    grid: int = 21
    basepoint: Optional[tuple] = None
    square_scales: tuple = (0.04, 0.02)
    circle_radii: tuple = (0.1,)
    random_count: int = 4
    random_amplitude: float = 0.05
    random_modes: int = 3
    seed: int = 0
    steps: int = 2048
    gap_threshold: float = TOLERANCES.gap_threshold
    noise_floor: float = TOLERANCES.noise_floor
    generator_side: float = TOLERANCES.generator_side
    restarts: int = 32
    tol: float = TOLERANCES.class_tol
    outputs: Optional[str] = None

    def output_dir(self) -> Path:
        if self.outputs:
            return Path(self.outputs)
        return Path(os.environ.get(OUTDIR_ENV, DEFAULT_OUTDIR))

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentManifest":
        errors: list[str] = []
        known_top = {
            "family",
            "chart",
            "basepoint",
            "ks",
            "loops",
            "integrator",
            "estimation",
            "classification",
            "outputs",
        }
        if not isinstance(raw, dict):
            raise ManifestError(["manifest must be a JSON object"])
        for key in raw:
            if key not in known_top:
                errors.append(f"unknown top-level key {key!r}")

        def section(name: str, known: set[str]) -> dict:
            value = raw.get(name, {})
            if not isinstance(value, dict):
                errors.append(f"section {name!r} must be an object")
                return {}
            for key in value:
                if key not in known:
                    errors.append(f"unknown key {name}.{key}")
            return value

        family = section("family", {"name", "params"})
        name = family.get("name")
        if not isinstance(name, str):
            errors.append("family.name must be a string")
            name = ""
        elif name not in FAMILY_NAMES:
            errors.append(f"family.name {name!r} is not a built-in ({', '.join(FAMILY_NAMES)})")
        params = family.get("params", {})
        if not isinstance(params, dict):
            errors.append("family.params must be an object")
            params = {}

        chart = section("chart", {"lower", "upper", "margin", "grid"})
        grid = chart.get("grid", 21)
        if not isinstance(grid, int) or grid < 2:
            errors.append("chart.grid must be an integer >= 2")
            grid = 21

        ks_raw = raw.get("ks")
        ks: tuple = ()
        if not isinstance(ks_raw, list) or not ks_raw:
            errors.append("ks must be a nonempty list of integers")
        else:
            if not all(isinstance(k, int) and k >= 1 for k in ks_raw):
                errors.append("ks entries must be integers >= 1")
            elif any(b <= a for a, b in zip(ks_raw, ks_raw[1:])):
                errors.append("ks must be strictly increasing")
            else:
                ks = tuple(ks_raw)

        loops = section(
            "loops",
            {"square_scales", "circle_radii", "random_count", "random_amplitude", "random_modes", "seed"},
        )
        integrator = section("integrator", {"steps"})
        steps = integrator.get("steps", 2048)
        if not isinstance(steps, int) or steps < 16:
            errors.append("integrator.steps must be an integer >= 16")
            steps = 2048

        estimation = section("estimation", {"gap_threshold", "noise_floor", "generator_side"})
        classification = section("classification", {"target", "restarts", "tol"})
        target = classification.get("target")
        if not isinstance(target, str) or not target:
            errors.append("classification.target must name a catalog subgroup")
            target = ""

        outputs = raw.get("outputs")
        if outputs is not None and not isinstance(outputs, str):
            errors.append("outputs must be a string path")
            outputs = None

        if errors:
            raise ManifestError(errors)

        manifest = ExperimentManifest(
            family_name=name,
            family_params=dict(params),
            ks=ks,
            target=target,
            chart_lower=tuple(chart["lower"]) if "lower" in chart else None,
            chart_upper=tuple(chart["upper"]) if "upper" in chart else None,
            chart_margin=float(chart["margin"]) if "margin" in chart else None,
            grid=grid,
            basepoint=tuple(raw["basepoint"]) if "basepoint" in raw else None,
            square_scales=tuple(loops.get("square_scales", (0.04, 0.02))),
            circle_radii=tuple(loops.get("circle_radii", (0.1,))),
            random_count=int(loops.get("random_count", 4)),
            random_amplitude=float(loops.get("random_amplitude", 0.05)),
            random_modes=int(loops.get("random_modes", 3)),
            seed=int(loops.get("seed", 0)),
            steps=steps,
            gap_threshold=float(estimation.get("gap_threshold", TOLERANCES.gap_threshold)),
            noise_floor=float(estimation.get("noise_floor", TOLERANCES.noise_floor)),
            generator_side=float(estimation.get("generator_side", TOLERANCES.generator_side)),
            restarts=int(classification.get("restarts", 32)),
            tol=float(classification.get("tol", TOLERANCES.class_tol)),
            outputs=outputs,
        )
        manifest.build_family()  # late validation: chart, basepoint, target
        return manifest

    def build_family(self) -> MetricFamily:
        errors = []
        try:
            family = builtin_family(self.family_name, **self.family_params)
        except (TypeError, ValueError) as exc:
            raise ManifestError([f"family cannot be built: {exc}"]) from exc
        chart = family.chart
        if self.chart_lower is not None or self.chart_upper is not None or self.chart_margin is not None:
            lower = np.asarray(self.chart_lower if self.chart_lower is not None else chart.lower, dtype=float)
            upper = np.asarray(self.chart_upper if self.chart_upper is not None else chart.upper, dtype=float)
            margin = self.chart_margin if self.chart_margin is not None else chart.margin
            try:
                chart = ChartDomain(lower=lower, upper=upper, margin=margin)
            except ValueError as exc:
                raise ManifestError([f"chart override invalid: {exc}"]) from exc
        basepoint = np.asarray(self.basepoint, dtype=float) if self.basepoint is not None else family.basepoint
        if basepoint.shape != (chart.dim,):
            errors.append(f"basepoint must have {chart.dim} coordinates")
        elif not chart.contains(basepoint).all():
            errors.append(f"basepoint {basepoint.tolist()} is outside the chart interior band")
        try:
            catalog_entry(chart.dim, self.target)
        except (KeyError, ValueError) as exc:
            errors.append(str(exc))
        if errors:
            raise ManifestError(errors)
        return dataclasses.replace(family, chart=chart, basepoint=basepoint)

    def loop_spec(self) -> LoopSpec:
        return LoopSpec(
            square_scales=self.square_scales,
            circle_radii=self.circle_radii,
            random_count=self.random_count,
            random_amplitude=self.random_amplitude,
            random_modes=self.random_modes,
            seed=self.seed,
        )


def load_manifest(path) -> ExperimentManifest:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ManifestError([f"manifest file {path} not found"]) from None
    except json.JSONDecodeError as exc:
        raise ManifestError([f"manifest is not valid JSON: {exc}"]) from None
    return ExperimentManifest.from_dict(raw)


# -- the experiment -------------------------------------------------------------


@dataclass(frozen=True)
class StageResult:
    """One metric run through the transport/estimation/classification pipeline."""

    raw_transports: tuple
    sample: HolonomySample
    estimate: AlgebraEstimate
    classification: ClassificationResult
    in_target: bool
    in_target_residual: float
    compat_residual: float
    note: str = ""


def _run_stage(metric, chart, basepoint, loops, manifest: ExperimentManifest, target_spec) -> StageResult:
    conn = levi_civita(metric, chart)
    compat = compatibility_residual(conn, metric, basepoint, step=chart.fd_step())
    frame = orthonormal_frame(metric(basepoint))
    frame_inv = np.linalg.inv(frame)
    raw = tuple(parallel_transport(conn, loop, steps=manifest.steps) for loop in loops)
    framed = tuple(
        dataclasses.replace(
            r,
            matrix=frame_inv @ r.matrix @ frame,
            so_defect=so_residual(frame_inv @ r.matrix @ frame),
        )
        for r in raw
    )
    sample = HolonomySample(
        transports=framed,
        loop_labels=tuple(loop.label for loop in loops),
        basepoint=np.asarray(basepoint, dtype=float),
        frame=frame,
    )
    note = ""
    try:
        generators = small_loop_generators(
            conn, basepoint, frame, side=manifest.generator_side, steps=manifest.steps
        )
        estimate = estimate_algebra(
            sample,
            generators,
            gap_threshold=manifest.gap_threshold,
            noise_floor=manifest.noise_floor,
        )
        if compat > TOLERANCES.compat:
            note = f"compatibility defect {compat:.3e} above gate {TOLERANCES.compat:.1e}"
            classification = ClassificationResult("unclassified", np.eye(chart.dim), float("nan"), ())
            in_target = False
            in_residual = float("nan")
        else:
            classification = classify(
                estimate,
                catalog(chart.dim),
                restarts=manifest.restarts,
                tol=manifest.tol,
                seed=manifest.seed,
            )
            verdict = conjugacy_search(
                list(estimate.basis),
                target_spec,
                restarts=manifest.restarts,
                tol=manifest.tol,
                seed=manifest.seed,
            )
            in_target = verdict.holds
            in_residual = verdict.residual
    except (DomainError, ArithmeticError) as exc:
        note = f"estimation failed: {exc}"
        estimate = AlgebraEstimate(
            basis=(), dim=0, spectral_gap=float("inf"), residual=float("nan"),
            ambient_dim=chart.dim, empty_sample=True,
        )
        classification = ClassificationResult("unclassified", np.eye(chart.dim), float("nan"), ())
        in_target = False
        in_residual = float("nan")
    return StageResult(
        raw_transports=raw,
        sample=sample,
        estimate=estimate,
        classification=classification,
        in_target=in_target,
        in_target_residual=in_residual,
        compat_residual=compat,
        note=note,
    )


@dataclass(frozen=True)
class ReportRow:
    k: int
    c0_conn_dist: float
    c1_metric_dist: float
    max_transport_dist: float
    class_id: str
    class_residual: float
    leq_limit_member: bool
    leq_residual: float
    witness: np.ndarray
    estimate_dim: int
    note: str = ""


@dataclass(frozen=True)
class Summary:
    all_members_in_target: bool
    limit_in_target: bool
    order_holds_all: bool
    strict: bool

    @property
    def ok(self) -> bool:
        return self.all_members_in_target and self.limit_in_target and self.order_holds_all


@dataclass(frozen=True)
class SemicontinuityReport:
    family: str
    target: str
    member_rows: tuple
    limit_row: ReportRow
    summary: Summary


def run_semicontinuity(manifest: ExperimentManifest, max_workers: Optional[int] = None) -> SemicontinuityReport:
    """Run the full per-member pipeline against the limit metric.

    Member stages run concurrently (they are independent pure computations);
    the report rows are assembled in manifest order so identical manifests
    produce identical reports.
    """
    family = manifest.build_family()
    chart = family.chart
    basepoint = family.basepoint
    target_spec = catalog_entry(chart.dim, manifest.target)
    loops = loop_catalog(basepoint, manifest.loop_spec(), chart)
    if not loops:
        raise ManifestError(["loop catalog is empty; loosen the loop spec or enlarge the chart"])

    limit_conn_metric = family.limit
    limit_stage = _run_stage(limit_conn_metric, chart, basepoint, loops, manifest, target_spec)
    limit_conn = levi_civita(limit_conn_metric, chart)

    def member_row(k: int) -> tuple[ReportRow, bool]:
        metric = family.member(k)
        stage = _run_stage(metric, chart, basepoint, loops, manifest, target_spec)
        conn = levi_civita(metric, chart)
        c0 = c0_connection_distance(conn, limit_conn, chart, grid=manifest.grid)
        c1 = c1_metric_distance(metric, limit_conn_metric, chart, grid=manifest.grid)
        transport_dist = max(
            frobenius(a.matrix - b.matrix)
            for a, b in zip(stage.raw_transports, limit_stage.raw_transports)
        )
        order = leq(
            ConjugacyClass(limit_stage.estimate),
            ConjugacyClass(stage.estimate),
            restarts=manifest.restarts,
            tol=manifest.tol,
            seed=manifest.seed,
        )
        return ReportRow(
            k=k,
            c0_conn_dist=c0,
            c1_metric_dist=c1,
            max_transport_dist=transport_dist,
            class_id=stage.classification.subgroup_id,
            class_residual=stage.classification.residual,
            leq_limit_member=order.holds,
            leq_residual=order.residual,
            witness=stage.classification.witness,
            estimate_dim=stage.estimate.dim,
            note=stage.note,
        ), stage.in_target

    workers = max_workers or min(8, len(manifest.ks), os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(member_row, manifest.ks))
    else:
        outcomes = [member_row(k) for k in manifest.ks]
    member_rows = tuple(row for row, _ in outcomes)
    members_in_target = all(flag for _, flag in outcomes)

    self_order = leq(
        ConjugacyClass(limit_stage.estimate),
        ConjugacyClass(limit_stage.estimate),
        restarts=manifest.restarts,
        tol=manifest.tol,
        seed=manifest.seed,
    )
    limit_row = ReportRow(
        k=-1,
        c0_conn_dist=0.0,
        c1_metric_dist=0.0,
        max_transport_dist=0.0,
        class_id=limit_stage.classification.subgroup_id,
        class_residual=limit_stage.classification.residual,
        leq_limit_member=self_order.holds,
        leq_residual=self_order.residual,
        witness=limit_stage.classification.witness,
        estimate_dim=limit_stage.estimate.dim,
        note=limit_stage.note,
    )

    summary = Summary(
        all_members_in_target=members_in_target,
        limit_in_target=limit_stage.in_target,
        order_holds_all=all(row.leq_limit_member for row in member_rows),
        strict=all(row.estimate_dim > limit_row.estimate_dim for row in member_rows),
    )
    return SemicontinuityReport(
        family=manifest.family_name,
        target=manifest.target,
        member_rows=member_rows,
        limit_row=limit_row,
        summary=summary,
    )


# -- rendering -------------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def _csv_line(row: ReportRow) -> str:
    return ",".join(
        [
            str(row.k),
            _fmt(row.c0_conn_dist),
            _fmt(row.c1_metric_dist),
            _fmt(row.max_transport_dist),
            row.class_id,
            _fmt(row.class_residual),
            "true" if row.leq_limit_member else "false",
            _fmt(row.leq_residual),
        ]
    )


def render_report(report: SemicontinuityReport, out_dir=None, formats=("csv", "text")) -> dict:
    """Write the report artifacts and return their paths by format."""
    directory = Path(out_dir) if out_dir is not None else Path(DEFAULT_OUTDIR)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc}") from exc
    paths = {}
    if "csv" in formats:
        lines = [CSV_HEADER]
        lines.extend(_csv_line(row) for row in report.member_rows)
        lines.append(_csv_line(report.limit_row))
        path = directory / "report.csv"
        path.write_text("\n".join(lines) + "\n")
        paths["csv"] = path
    if "text" in formats:
        path = directory / "report.txt"
        path.write_text(render_text(report))
        paths["text"] = path
    return paths


def render_text(report: SemicontinuityReport) -> str:
    lines = [
        f"family {report.family}, target subgroup {report.target}",
        f"limit: class {report.limit_row.class_id} (residual {report.limit_row.class_residual:.3e}, algebra dim {report.limit_row.estimate_dim})",
        "",
    ]
    limit_id = report.limit_row.class_id
    for row in report.member_rows:
        relation = "holds" if row.leq_limit_member else "FAILS"
        lines.append(
            f"k={row.k}: class {row.class_id} (residual {row.class_residual:.3e}); "
            f"[{limit_id}] ≤ [{row.class_id}] {relation} (residual {row.leq_residual:.3e}); "
            f"c0 {row.c0_conn_dist:.3e}, c1 {row.c1_metric_dist:.3e}, transport {row.max_transport_dist:.3e}"
            + (f"; note: {row.note}" if row.note else "")
        )
    s = report.summary
    lines += [
        "",
        f"all members inside target: {s.all_members_in_target}",
        f"limit inside target: {s.limit_in_target}",
        f"order [limit] ≤ [member] for every k: {s.order_holds_all}",
        f"limit class strictly more special: {s.strict}",
        f"semicontinuity verdict: {'OK' if s.ok else 'VIOLATED'}",
    ]
    return "\n".join(lines) + "\n"
