"""Command stages with plain-file handoff between them."""

import functools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from attriqa.attributes.extract import (
    ATTR_FORMAT,
    ATTR_NAME,
    DIST_NAME,
    extract_attribute_probs,
    write_extraction,
)
from attriqa.attributes.registry import (
    build_registry_from_files,
    read_registry,
    write_registry,
)
from attriqa.attributes.training import (
    DistTrainConfig,
    load_distortion_model,
    save_distortion_model,
    train_distortion_model,
)
from attriqa.datagen.generator import MANIFEST_NAME, GeneratorConfig, generate
from attriqa.datagen.manifest import Manifest, ground_truth_matrix, read_manifest, score_vector
from attriqa.datagen.sources import synthesize_sources
from attriqa.datagen.splits import select_split
from attriqa.errors import ConfigError, DataError, SchemaError
from attriqa.imaging.image import load_png
from attriqa.metrics.report import MetricReport, score_metrics, strength_metrics
from attriqa.pipeline.config import RunConfig, build_config, write_resolved
from attriqa.regressor.model import predict_score
from attriqa.regressor.scores import read_scores
from attriqa.regressor.training import (
    RegTrainConfig,
    align_scores,
    check_schema,
    feature_matrix,
    load_regressor,
    save_regressor,
    train_regressor,
)
from attriqa.render.builder import ReportBuilder
from attriqa.saliency.maps import saliency_map
from attriqa.saliency.overlay import render_heatmap, render_overlay, write_map_csv
from attriqa.util.artifacts import ArtifactHeader, creator_command, require_binding
from attriqa.util.digests import sha256_file
from attriqa.util.tables import read_matrix

logger = logging.getLogger(__name__)

REGISTRY_NAME = "registry.json"
MODEL_NAME = "distortion_model.atq"
REGRESSOR_NAME = "regressor.atq"
REPORT_JSON = "report.json"
SALIENCY_INDEX = "saliency.jsonl"


@dataclass(frozen=True)
class RunLayout:
    """Where each stage writes inside the run directory."""

    out: Path

    @property
    def generate_dir(self) -> Path:
        return self.out / "generate"

    @property
    def manifest(self) -> Path:
        return self.generate_dir / MANIFEST_NAME

    @property
    def registry_dir(self) -> Path:
        return self.out / "registry"

    @property
    def registry(self) -> Path:
        return self.registry_dir / REGISTRY_NAME

    @property
    def train_dist_dir(self) -> Path:
        return self.out / "train_dist"

    @property
    def checkpoint(self) -> Path:
        return self.train_dist_dir / MODEL_NAME

    @property
    def extract_dir(self) -> Path:
        return self.out / "extract"

    @property
    def features(self) -> Path:
        return self.extract_dir / ATTR_NAME

    @property
    def dist_probs(self) -> Path:
        return self.extract_dir / DIST_NAME

    @property
    def train_reg_dir(self) -> Path:
        return self.out / "train_reg"

    @property
    def regressor(self) -> Path:
        return self.train_reg_dir / REGRESSOR_NAME

    @property
    def eval_dir(self) -> Path:
        return self.out / "eval"

    @property
    def saliency_dir(self) -> Path:
        return self.out / "saliency"


def _existing(path: Optional[Path], default: Path, what: str) -> Path:
    path = Path(path) if path else default
    if not path.exists():
        raise DataError(f"{what} {path} not found; run the producing command first")
    return path


def stage(command: str):
    """Run a PipelineRunner method as `attriqa <command>`: artifacts it writes name that creator."""

    def wrap(method):
        @functools.wraps(method)
        def run(self, *args, **kwargs):
            with creator_command(command):
                return method(self, *args, **kwargs)

        return run

    return wrap


class PipelineRunner:
    def __init__(self, config: RunConfig):
        self.config = config
        self.layout = RunLayout(Path(config.out))
        self.workers = config.resolved_workers()

    # --- helpers ---

    def _manifest(self, override: Optional[Path]) -> tuple[Manifest, Path, str]:
        path = _existing(override, self.layout.manifest, "manifest")
        return read_manifest(path), path, sha256_file(path)

    def _split(self, manifest: Manifest, split: str):
        records = select_split(
            manifest.records, split, self.config.split_fractions, self.config.seed
        )
        if not records:
            raise DataError(f"split {split!r} of the manifest is empty")
        return records

    def _model(self, registry_path: Optional[Path], checkpoint_path: Optional[Path]):
        registry = read_registry(_existing(registry_path, self.layout.registry, "registry"))
        ckpt = _existing(checkpoint_path, self.layout.checkpoint, "checkpoint")
        model, header = load_distortion_model(ckpt, registry)
        return registry, model, header, sha256_file(ckpt)

    def _registry_columns(
        self, header: ArtifactHeader, registry_path: Optional[Path]
    ) -> tuple[list[str], list[str]]:
        """Attribute and distortion columns of the registry a matrix was extracted with."""
        registry = read_registry(_existing(registry_path, self.layout.registry, "registry"))
        require_binding("registry", header.inputs.get("registry"), registry.digest)
        return registry.column_names(), list(registry.distortions)

    # --- stages ---

    @stage("generate")
    def generate(self):
        sec = self.config.generate
        out = self.layout.generate_dir
        write_resolved(self.config, out, "generate")
        gen_config = build_config(
            GeneratorConfig,
            "generate",
            master_seed=self.config.seed,
            repeats=sec.repeats,
            distortions=sec.distortions,
            levels=sec.levels,
            single_distortion=sec.single_distortion,
            synthetic_scores=sec.synthetic_scores,
        )
        sources = list(sec.sources)
        if sec.synthetic_sources:
            sources += synthesize_sources(
                sec.synthetic_sources, out / "sources", self.config.seed, sec.source_size
            )
        if not sources:
            raise ConfigError("generate needs [generate].sources or synthetic_sources > 0")
        gen_config = gen_config.model_copy(update={"sources": sources})
        result = generate(gen_config, out, self.workers)
        ReportBuilder(out).build_schedules(sec.levels)
        print(f"Generated {len(result.records)} records -> {result.manifest_path}")
        return result

    @stage("build-registry")
    def build_registry(self):
        sec = self.config.build_registry
        out = self.layout.registry_dir
        write_resolved(self.config, out, "build_registry")
        distortions = sec.distortions
        if distortions is None:
            manifest_path = Path(sec.manifest) if sec.manifest else self.layout.manifest
            if manifest_path.exists():
                distortions = read_manifest(manifest_path).distortions
            else:
                distortions = self.config.generate.distortions
        registry = build_registry_from_files(sec.source, distortions, sec.embeddings, sec.dim)
        digest = write_registry(registry, self.layout.registry)
        print(
            f"Registry: {len(registry.attributes)} attributes "
            f"({registry.anchor_provenance.value}) digest {digest[:12]} -> {self.layout.registry}"
        )
        return registry

    @stage("train-dist")
    def train_dist(self):
        sec = self.config.train_dist
        out = self.layout.train_dist_dir
        write_resolved(self.config, out, "train_dist")
        train_config = build_config(
            DistTrainConfig,
            "train_dist",
            mode=sec.mode,
            vit=sec.vit,
            schedule=sec.schedule,
            normalize=sec.normalize,
            temperature=sec.temperature,
            augment=sec.augment,
            precision=sec.precision,
            seed=self.config.seed,
        )
        manifest, manifest_path, manifest_digest = self._manifest(sec.manifest)
        registry = read_registry(_existing(sec.registry, self.layout.registry, "registry"))
        records = self._split(manifest, sec.split)
        result = train_distortion_model(
            records, manifest_path.parent, registry, train_config, self.workers
        )
        save_distortion_model(result, self.layout.checkpoint, train_config, manifest_digest)
        final = result.history[-1] if result.history else result.initial_loss
        print(
            f"Distortion model ({sec.mode.value}): loss {result.initial_loss:.4f} -> {final:.4f} "
            f"-> {self.layout.checkpoint}"
        )
        return result

    @stage("extract")
    def extract(self):
        sec = self.config.extract
        out = self.layout.extract_dir
        write_resolved(self.config, out, "extract")
        manifest, manifest_path, manifest_digest = self._manifest(sec.manifest)
        registry, model, _, ckpt_digest = self._model(sec.registry, sec.checkpoint)
        records = self._split(manifest, sec.split)
        extraction = extract_attribute_probs(
            records, manifest_path.parent, model, registry, sec.batch_size, self.workers
        )
        digests = write_extraction(
            extraction,
            registry,
            out,
            {"manifest": manifest_digest, "registry": registry.digest, "checkpoint": ckpt_digest},
        )
        print(f"Attribute probabilities: {ATTR_NAME} digest {digests[ATTR_NAME][:12]} -> {out}")
        return extraction

    def _scores(self, scores_path: Optional[Path], records) -> dict[str, float]:
        if scores_path:
            return read_scores(scores_path)
        values = score_vector(records)
        return {r.record_id: float(s) for r, s in zip(records, values)}

    @stage("train-reg")
    def train_reg(self):
        sec = self.config.train_reg
        out = self.layout.train_reg_dir
        write_resolved(self.config, out, "train_reg")
        reg_config = build_config(
            RegTrainConfig,
            "train_reg",
            hidden=sec.hidden,
            dropout=sec.dropout,
            schedule=sec.schedule,
            seed=self.config.seed,
        )
        manifest, _, manifest_digest = self._manifest(sec.manifest)
        features_path = _existing(sec.features, self.layout.features, "attribute matrix")
        header, df = read_matrix(features_path)
        header.require(ATTR_FORMAT, 1, features_path)
        require_binding("manifest", header.inputs.get("manifest"), manifest_digest)
        # only the registry's attribute probabilities may reach the regressor
        columns, _ = self._registry_columns(header, sec.registry)
        check_schema(df, columns)

        def rows(split):
            ids = {r.record_id for r in self._split(manifest, split)}
            part = df[df["record_id"].isin(ids)].reset_index(drop=True)
            if part.empty:
                raise DataError(f"no attribute rows for split {split!r}; extract with split 'all'")
            return part

        scores = self._scores(sec.scores, manifest.records)
        train = rows(sec.split)
        x_train = feature_matrix(train, columns)
        y_train = align_scores(train, scores)
        x_val = y_val = None
        if sec.val_split:
            val = rows(sec.val_split)
            x_val, y_val = feature_matrix(val, columns), align_scores(val, scores)
        result = train_regressor(x_train, y_train, columns, reg_config, x_val, y_val)
        save_regressor(
            result,
            self.layout.regressor,
            reg_config,
            {"features": sha256_file(features_path), "manifest": manifest_digest},
        )
        print(f"Regressor: best epoch {result.best_epoch} -> {self.layout.regressor}")
        return result

    @stage("eval")
    def evaluate(self) -> MetricReport:
        sec = self.config.eval
        out = self.layout.eval_dir
        write_resolved(self.config, out, "eval")
        manifest, manifest_path, manifest_digest = self._manifest(sec.manifest)
        records = self._split(manifest, sec.split)
        ids = [r.record_id for r in records]
        report = MetricReport(
            split=sec.split, dataset_digest=manifest_digest, counts={"records": len(records)}
        )

        cross_pool = sec.manifest is not None and Path(sec.manifest).resolve() != self.layout.manifest.resolve()
        dist_df = attr_df = None
        attr_columns = None
        if cross_pool:
            registry, model, header, ckpt_digest = self._model(sec.registry, sec.checkpoint)
            report.checkpoint_digest = ckpt_digest
            report.train_dataset_digest = header.inputs.get("manifest")
            extraction = extract_attribute_probs(
                records, manifest_path.parent, model, registry, workers=self.workers
            )
            dist_df, attr_df = extraction.distortions, extraction.attributes
            attr_columns = registry.column_names()
            logger.info("Cross-pool evaluation: features extracted from the evaluation manifest")

        if sec.strengths:
            if sec.dist_predictions:
                _, dist_df = read_matrix(sec.dist_predictions, require_header=False)
            elif dist_df is None:
                header, dist_df = read_matrix(_existing(None, self.layout.dist_probs, "distortion matrix"))
                require_binding("manifest", header.inputs.get("manifest"), manifest_digest)
                _, expected = self._registry_columns(header, sec.registry)
                check_schema(dist_df, expected, "distortion matrix")
                report.checkpoint_digest = header.inputs.get("checkpoint")
            distortions = [c for c in dist_df.columns if c != "record_id"]
            unknown = sorted(set(distortions) - set(manifest.distortions))
            if unknown or not distortions:
                raise SchemaError(f"distortion matrix columns must be manifest distortions, got {distortions}")
            pred = self._rows(dist_df, ids)[distortions].to_numpy(dtype=np.float64)
            target = ground_truth_matrix(records, distortions)
            report.accuracy, report.rmse, report.per_distortion = strength_metrics(
                pred, target, distortions, manifest.levels
            )

        regressor_path = Path(sec.regressor) if sec.regressor else self.layout.regressor
        if sec.quality and regressor_path.exists():
            if attr_df is None:
                features = _existing(sec.features, self.layout.features, "attribute matrix")
                header, attr_df = read_matrix(features)
                require_binding("manifest", header.inputs.get("manifest"), manifest_digest)
                attr_columns, _ = self._registry_columns(header, sec.registry)
            model, _ = load_regressor(regressor_path, attr_columns)
            rows = self._rows(attr_df, ids)
            _, raw = predict_score(feature_matrix(rows, attr_columns), model)
            scores = self._scores(sec.scores, records)
            report.plcc, report.srcc = score_metrics(raw.numpy(), align_scores(rows, scores))
        elif sec.quality:
            logger.info(f"No regressor at {regressor_path}; skipping score metrics")

        out.mkdir(parents=True, exist_ok=True)
        (out / REPORT_JSON).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        ReportBuilder(out).build_report(report)
        print(report.summary())
        return report

    @staticmethod
    def _rows(df, ids):
        indexed = df.set_index("record_id")
        missing = [i for i in ids if i not in indexed.index]
        if missing:
            raise DataError(f"{len(missing)} records missing from the matrix (first: {missing[0]})")
        return indexed.loc[ids].reset_index()

    @stage("saliency")
    def saliency(self):
        sec = self.config.saliency
        out = self.layout.saliency_dir
        write_resolved(self.config, out, "saliency")
        manifest, manifest_path, _ = self._manifest(sec.manifest)
        registry, model, _, _ = self._model(sec.registry, sec.checkpoint)
        records = self._split(manifest, sec.split)[: sec.limit]
        index = []
        for r in records:
            img = load_png(manifest_path.parent / r.output_path)
            targets = sec.distortions or [a.distortion for a in r.applied]
            for d in targets:
                smap = saliency_map(img, d, model, sec.sigma, r.record_id)
                if smap.shape != (img.height, img.width):
                    raise DataError(f"saliency map for {r.record_id} has shape {smap.shape}")
                peak = float(smap.values.max())
                if peak not in (0.0, 1.0):
                    raise DataError(f"saliency map for {r.record_id} is not max-normalized")
                stem = f"{r.source_id}_v{r.variant_index:02d}_{d}"
                render_heatmap(smap, out / f"{stem}_map.png")
                render_overlay(img, smap, out / f"{stem}_overlay.png", sec.alpha)
                if sec.csv:
                    write_map_csv(smap, out / f"{stem}_map.csv")
                index.append(
                    {
                        "record_id": r.record_id,
                        "distortion": d,
                        "height": smap.shape[0],
                        "width": smap.shape[1],
                        "max": peak,
                        "zero_gradient": smap.zero_gradient,
                    }
                )
        with open(out / SALIENCY_INDEX, "w", encoding="utf-8", newline="\n") as f:
            for row in index:
                f.write(json.dumps(row) + "\n")
        print(f"Saliency: {len(index)} maps -> {out}")
        return index

    def run_all(self):
        self.generate()
        self.build_registry()
        self.train_dist()
        self.extract()
        self.train_reg()
        report = self.evaluate()
        self.saliency()
        return report
