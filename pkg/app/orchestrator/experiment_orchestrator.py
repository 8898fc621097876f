from __future__ import annotations

import json
import logging
import time
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Type

import numpy as np
import scipy
from pydantic import BaseModel, ValidationError

import app
from app.domain.errors import GroupClosureError, LawsonToolkitError, TopologyError
from app.geometry import symmetry, tiling
from app.lawson import surface as lawson
from app.logs.run_logger import LocalRunLogger
from app.mesh import io as mesh_io
from app.models.cli_requests import (
    BuildLawsonRequest,
    ExperimentConfig,
    ExportRequest,
    FlowConfig,
    GroupsRequest,
    OrbifoldRequest,
    PlateauRequest,
    TilingRequest,
)
from app.models.cli_responses import GroupOrderDTO, LatticeEdgeDTO, RunManifest, RunPayload, StageTimingDTO
from app.orbifold import patterns
from app.solvers import flow, plateau

logger = logging.getLogger(__name__)


def json_default(obj: Any) -> Any:
    """numpy scalars and arrays to builtins; anything else as text."""
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj, key=str)
    return str(obj)


def dumps(data: Any) -> str:
    return json.dumps(data, default=json_default, indent=2)


@dataclass
class ExperimentContext:
    """
    State carried through one run. The orchestrator creates it once and
    every stage adds its outputs.
    """
    run_id: str
    command: str
    params: Dict[str, Any]
    config: Optional[BaseModel] = None
    seed: int = 0
    run_dir: Optional[Path] = None
    stage: str = "validation"
    stage_timings: List[Dict[str, Any]] = field(default_factory=list)
    outputs: Dict[str, str] = field(default_factory=dict)
    data: Dict[str, Any] = field(default_factory=dict)


class ExperimentOrchestrator:
    """
    One subcommand per run:
    - validation of the request model
    - computation stages, each timed
    - outputs and manifest under <output_dir>/<run_id>/
    - every failure becomes a payload, never an exception
    """

    def __init__(self, run_logger: Optional[LocalRunLogger] = None) -> None:
        self._run_logger = run_logger
        self._handlers: Dict[str, Tuple[Type[BaseModel], Callable[[ExperimentContext], str]]] = {
            "groups": (GroupsRequest, self._groups),
            "tiling": (TilingRequest, self._tiling),
            "plateau": (PlateauRequest, self._plateau),
            "build-lawson": (BuildLawsonRequest, self._build_lawson),
            "flow": (FlowConfig, self._flow),
            "orbifold": (OrbifoldRequest, self._orbifold),
            "export": (ExportRequest, self._export),
        }

    @property
    def commands(self) -> List[str]:
        return list(self._handlers)

    # ==============================================================
    # PUBLIC ENTRY POINT
    # ==============================================================

    def run(self, command: str, params: Dict[str, Any], run_id: Optional[str] = None) -> Dict[str, Any]:
        run_id = run_id or f"{command}-{uuid.uuid4().hex[:12]}"
        ctx = ExperimentContext(run_id=run_id, command=command, params=dict(params))
        logger.info("[%s] Starting %s", run_id, command)

        try:
            if command not in self._handlers:
                return self._fail(ctx, [{"error": "UnknownCommand", "message": f"unknown command {command!r}"}])
            model, handler = self._handlers[command]

            try:
                ctx.config = self._run_with_sla(ctx, "validation", lambda c: model.model_validate(c.params))
            except ValidationError as e:
                return self._fail(ctx, self._validation_issues(e))

            ctx.seed = getattr(ctx.config, "seed", 0)
            ctx.run_dir = Path(getattr(ctx.config, "output_dir")) / run_id
            ctx.run_dir.mkdir(parents=True, exist_ok=True)

            summary = handler(ctx)
            payload = RunPayload(
                run_id=run_id, status="success", stage=ctx.stage, summary=summary, data=ctx.data
            ).model_dump()
            self._write_manifest(ctx, "success")
            logger.info("[%s] %s finished: %s", run_id, command, summary)
            return payload

        except LawsonToolkitError as e:
            logger.exception("[%s] %s failed in stage %s", run_id, command, ctx.stage)
            return self._fail(ctx, [e.to_issue()])
        except Exception as e:
            logger.exception("[%s] %s failed in stage %s", run_id, command, ctx.stage)
            return self._fail(ctx, [{"error": type(e).__name__, "message": str(e)}])

    # ==============================================================
    # CORE UTILITIES
    # ==============================================================

    def _run_with_sla(self, ctx: ExperimentContext, stage: str, fn: Callable[[ExperimentContext], Any]) -> Any:
        ctx.stage = stage
        start_ts = time.perf_counter()
        start_iso = datetime.now(timezone.utc).isoformat()
        status = "success"

        try:
            return fn(ctx)
        except Exception:
            status = "failed"
            raise
        finally:
            elapsed = time.perf_counter() - start_ts
            ctx.stage_timings.append(
                StageTimingDTO(
                    stage=stage,
                    start_time=start_iso,
                    end_time=datetime.now(timezone.utc).isoformat(),
                    duration_ms=int(elapsed * 1000),
                    duration_sec=round(elapsed, 2),
                    status=status,
                ).model_dump()
            )

    def _fail(self, ctx: ExperimentContext, issues: List[Dict[str, Any]]) -> Dict[str, Any]:
        payload = RunPayload(
            run_id=ctx.run_id,
            status="failure",
            stage=ctx.stage,
            summary=f"{ctx.command} failed during {ctx.stage}",
            issues=issues,
            data=ctx.data,
        ).model_dump()
        if ctx.run_dir is not None:
            self._write_manifest(ctx, "failure")
        return payload

    @staticmethod
    def _validation_issues(e: ValidationError) -> List[Dict[str, Any]]:
        return [
            {
                "error": "ValidationError",
                "message": err["msg"],
                "diagnostics": {"loc": [str(part) for part in err["loc"]], "type": err["type"]},
            }
            for err in e.errors(include_url=False)
        ]

    def _output(self, ctx: ExperimentContext, key: str, path: Path) -> Path:
        ctx.outputs[key] = str(path)
        return path

    def _write_json(self, ctx: ExperimentContext, key: str, name: str, data: Any) -> Path:
        path = ctx.run_dir / name
        path.write_text(dumps(data), encoding="utf-8")
        return self._output(ctx, key, path)

    def _write_manifest(self, ctx: ExperimentContext, status: str) -> None:
        config = ctx.config.model_dump(mode="json") if ctx.config is not None else ctx.params
        manifest = RunManifest(
            run_id=ctx.run_id,
            command=ctx.command,
            config=config,
            seed=ctx.seed,
            code_version=app.__version__,
            numpy_version=np.__version__,
            scipy_version=scipy.__version__,
            stage_timings=ctx.stage_timings,
            outputs=ctx.outputs,
            status=status,
        )
        record = ExperimentConfig(command=ctx.command, params=config, seed=ctx.seed, output_dir=ctx.run_dir.parent)
        try:
            (ctx.run_dir / "manifest.json").write_text(dumps(manifest.model_dump()), encoding="utf-8")
        except OSError:
            logger.exception("[%s] Manifest could not be written", ctx.run_id)
        self._log(ctx, {"manifest": manifest.model_dump(), "experiment": record.model_dump(), "data": ctx.data})

    def _log(self, ctx: ExperimentContext, data: Dict[str, Any]) -> None:
        run_logger = self._run_logger or LocalRunLogger(ctx.run_dir.parent)
        try:
            run_logger.log(ctx.run_id, json.loads(dumps(data)))
        except Exception:
            logger.exception("[%s] Run logging failed", ctx.run_id)

    # ==============================================================
    # COMMANDS
    # ==============================================================

    def _groups(self, ctx: ExperimentContext) -> str:
        req: GroupsRequest = ctx.config
        m, k = req.m, req.k

        groups = self._run_with_sla(ctx, "generate_groups", lambda c: symmetry.catalog(m, k))

        def orders(c: ExperimentContext) -> List[Dict[str, Any]]:
            rows = []
            for name, G in groups.items():
                predicted = symmetry.predicted_order(name, m, k)
                rows.append(
                    GroupOrderDTO(
                        name=name,
                        order=G.order,
                        predicted=predicted,
                        ok=symmetry.verify_order(G),
                        max_element_order=symmetry.max_element_order(G),
                    ).model_dump()
                )
            return rows

        ctx.data["groups"] = self._run_with_sla(ctx, "orders", orders)

        def lattice(c: ExperimentContext) -> List[Dict[str, Any]]:
            return [
                LatticeEdgeDTO(**asdict(edge), ok=edge.ok).model_dump()
                for edge in symmetry.verify_lattice(m, k, groups)
            ]

        ctx.data["lattice"] = self._run_with_sla(ctx, "lattice", lattice)

        def quotients(c: ExperimentContext) -> Dict[str, Any]:
            R = groups[symmetry.GroupName.R.value]
            result = {}
            for name in (symmetry.GroupName.G_TILDE, symmetry.GroupName.G_HAT):
                table = symmetry.quotient_group(groups[name.value], R)
                result[f"{name.value}/R"] = {
                    "order": table.order,
                    "labels": list(table.labels),
                    "elementary_abelian_2": table.is_elementary_abelian_2(),
                }
            return result

        ctx.data["quotients"] = self._run_with_sla(ctx, "quotients", quotients)
        ctx.data["full_order_element"] = patterns.has_full_order_element(m, k)
        self._write_json(ctx, "groups", "groups.json", ctx.data)

        bad = [g["name"] for g in ctx.data["groups"] if not g["ok"]]
        bad += [f"{e['subgroup']}<{e['supergroup']}" for e in ctx.data["lattice"] if not e["ok"]]
        if bad:
            raise GroupClosureError("group checks failed", {"failed": bad, "m": m, "k": k})
        return f"{len(groups)} groups and {len(ctx.data['lattice'])} lattice edges verified for m={m}, k={k}"

    def _tiling(self, ctx: ExperimentContext) -> str:
        req: TilingRequest = ctx.config
        m, k = req.m, req.k
        rng = np.random.default_rng(ctx.seed)

        cover = self._run_with_sla(ctx, "cover", lambda c: tiling.tiles_cover_check(m, k, req.samples, rng))
        domain = self._run_with_sla(
            ctx, "fundamental_domain", lambda c: tiling.fundamental_domain_check(m, k, req.samples, rng)
        )

        def parity(c: ExperimentContext) -> Dict[str, Any]:
            result = {}
            for name in ("gamma_0,0", "gamma*_0,0", "Sigma_P0", "R_P", "R_Q"):
                perm = tiling.tile_permutation(symmetry.isometry_from_name(name, m, k), m, k)
                result[name] = {
                    "bijective": perm.bijective,
                    "parity_preserving": perm.parity_preserving,
                    "parity_reversing": perm.parity_reversing,
                }
            return result

        ctx.data.update(
            tiles=tiling.tile_count(m, k),
            cover={**asdict(cover), "ok": cover.ok},
            fundamental_domain={**asdict(domain), "ok": domain.ok},
            permutations=self._run_with_sla(ctx, "permutations", parity),
        )
        self._write_json(ctx, "tiling", "tiling.json", ctx.data)
        return (
            f"{tiling.tile_count(m, k)} tiles, {cover.covered}/{cover.samples} samples covered, "
            f"max multiplicity {cover.max_multiplicity}"
        )

    def _plateau(self, ctx: ExperimentContext) -> str:
        req: PlateauRequest = ctx.config
        problem = plateau.plateau_problem(
            req.j, req.l, req.m, req.k, req.n,
            dual=req.dual, tolerance=req.tol, max_iters=req.max_iters, metric=req.metric,
        )
        solution = self._run_with_sla(ctx, "solve", lambda c: plateau.solve(problem))

        def diagnostics(c: ExperimentContext) -> Dict[str, Any]:
            data = {
                "quad": problem.quad.label,
                "area": solution.area,
                "init_area": solution.init_area,
                "iterations": solution.iterations,
                "converged": solution.converged,
                "gradient_norm": solution.gradient_norm,
                "residual": plateau.residual(solution.mesh),
            }
            if problem.tile is not None:
                data["tile_containment"] = plateau.tile_containment(solution.mesh, problem.tile)
            return data

        ctx.data.update(self._run_with_sla(ctx, "diagnostics", diagnostics))
        self._output(ctx, "disk", mesh_io.save_mesh4(ctx.run_dir / "disk.npz", solution.mesh))
        self._write_json(ctx, "report", "plateau.json", ctx.data)
        return f"{problem.quad.label}: area {solution.area:.10f} after {solution.iterations} iterations"

    def _lawson(self, ctx: ExperimentContext, req: BuildLawsonRequest):
        options = {"tolerance": req.tol, "max_iters": req.max_iters}
        if req.ladder:
            ladder = self._run_with_sla(
                ctx, "ladder", lambda c: lawson.build_ladder(req.m, req.k, req.ladder, req.variant, **options)
            )
            ctx.data["ladder"] = ladder.to_dict()
            return ladder.finest, ladder.richardson.estimate
        built = self._run_with_sla(ctx, "build", lambda c: lawson.build(req.m, req.k, req.n, req.variant, **options))
        return built, None

    def _build_lawson(self, ctx: ExperimentContext) -> str:
        req: BuildLawsonRequest = ctx.config
        built, estimate = self._lawson(ctx, req)

        report = self._run_with_sla(ctx, "verify", lambda c: lawson.verify(built, estimate))
        intersections = self._run_with_sla(ctx, "intersections", lambda c: lawson.intersection_diagnostics(built))
        centers = self._run_with_sla(ctx, "centers", lambda c: lawson.plateau_centers(built))
        ctx.data.update(
            surface=built.mesh.name,
            vertices=built.mesh.n_vertices,
            faces=built.mesh.n_faces,
            verification=report.to_dict(),
            intersections=intersections.to_dict(),
            centers=centers.to_dict(),
        )

        mesh_path = req.out if req.out is not None else ctx.run_dir / "surface.npz"
        self._output(ctx, "mesh", mesh_io.save_mesh(mesh_path, built.mesh))
        if req.report is not None:
            req.report.parent.mkdir(parents=True, exist_ok=True)
            req.report.write_text(dumps(ctx.data), encoding="utf-8")
            self._output(ctx, "report", req.report)
        else:
            self._write_json(ctx, "report", "report.json", ctx.data)

        if not report.genus_ok:
            raise TopologyError(
                "assembled surface has the wrong genus",
                {"surface": built.mesh.name, "genus": report.genus, "expected": report.expected_genus},
            )
        return f"{built.mesh.name}: genus {report.genus}, area {report.area_for_bounds:.8f}"

    def _flow(self, ctx: ExperimentContext) -> str:
        config: FlowConfig = ctx.config
        if config.source == "neck_probe":
            probe = self._run_with_sla(ctx, "probe", lambda c: flow.degeneration_probe(config))
            trace, final = probe.trace, probe.mesh
            ctx.data["probe"] = probe.to_dict()
            summary = f"neck probe {probe.outcome} ({probe.status}) after {len(trace)} records"
        else:
            result = self._run_with_sla(ctx, "descent", lambda c: flow.descend(config))
            trace, final = result.trace, result.mesh
            ctx.data.update(
                status=result.status,
                iterations=result.iterations,
                group=result.group.name,
                group_order=result.group.order,
                initial_willmore=float(trace.records[0].W),
                final_willmore=result.final_willmore,
                monotone=trace.is_monotone(),
            )
            summary = f"flow {result.status}: W {trace.records[0].W:.8f} -> {result.final_willmore:.8f}"

        self._output(ctx, "trace", trace.write_csv(ctx.run_dir / "trace.csv"))
        if final is not None:
            self._output(ctx, "mesh", mesh_io.save_mesh4(ctx.run_dir / "final.npz", final))
        self._write_json(ctx, "report", "flow.json", ctx.data)
        return summary

    def _orbifold(self, ctx: ExperimentContext) -> str:
        req: OrbifoldRequest = ctx.config
        if req.action == "classify":
            found = self._run_with_sla(ctx, "classify", lambda c: patterns.classify(req.m, req.k, req.g))
            ordered = sorted(found, key=lambda p: (p.boundary, p.triple))
            ctx.data["patterns"] = [
                {"g_hat": p.g_hat, "v1": p.v1, "v2": p.v2, "boundary": p.boundary,
                 "chi_orbifold": str(patterns.chi_orbifold(p))}
                for p in ordered
            ]
            self._write_json(ctx, "report", "classify.json", ctx.data)
            return f"{len(ordered)} patterns for m={req.m}, k={req.k}, g={req.g}"

        rows = self._run_with_sla(ctx, "table", lambda c: patterns.orbifold_table(req.max_m, req.max_k))
        render = patterns.render_markdown if req.format == "markdown" else patterns.render_csv
        text = render(rows)
        suffix = "md" if req.format == "markdown" else "csv"
        path = ctx.run_dir / f"orbifold_table.{suffix}"
        path.write_text(text, encoding="utf-8")
        self._output(ctx, "table", path)
        ctx.data["rows"] = [row.as_strings() for row in rows]
        ctx.data["table"] = text
        return f"orbifold table for m <= {req.max_m}, k <= {req.max_k}"

    def _export(self, ctx: ExperimentContext) -> str:
        req: ExportRequest = ctx.config
        built, _ = self._lawson(ctx, req)
        out_dir = req.out_dir if req.out_dir is not None else ctx.run_dir
        stem = f"xi_{req.m}_{req.k}_{built.variant.value}"

        def write(c: ExperimentContext) -> None:
            self._output(c, "off", mesh_io.write_off(out_dir / f"{stem}.off", built.mesh, req.pole))
            self._output(c, "obj", mesh_io.write_obj(out_dir / f"{stem}.obj", built.mesh, req.pole))
            self._output(c, "csv", mesh_io.write_csv4(out_dir / f"{stem}.csv", built.mesh))

        self._run_with_sla(ctx, "export", write)
        ctx.data.update(surface=built.mesh.name, area=built.area, outputs=dict(ctx.outputs))
        return f"exported {built.mesh.name} to {out_dir}"
