"""Resumable pipeline stages writing artifacts under one output directory.

Layout::

    split/ub_train.tsv, ub_valid.tsv, ub_test.tsv     (pretrain)
    pretrain/selection.tsv, pretrain/log.csv          (pretrain)
    views/view_<i>.tsv                                (augment)
    train/checkpoint.tsv, config.toml, log.csv        (train)
    eval/metrics.csv, eval/summary.json               (eval)
    export/embeddings.tsv                             (export-emb)
    theory/sample_complexity.json                     (sample-complexity)
    manifest.json                                     (every stage)

Stage seeds are ``derive_seed(master, stage)``; see :mod:`clbr.seeding`.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from contextlib import nullcontext
from pathlib import Path

from . import __version__
from .augment import CounterfactualView, generate_view_set
from .config import PipelineConfig, config_to_dict
from .encoder import EmbeddingTable, PropagatedEmbeddings, propagate
from .errors import ConfigError, StageDependencyError
from .evaluation import DEFAULT_KS, evaluate, split
from .graph import RelationKind, apply_delta, build_graph
from .io import (
    infer_space, read_edge_list, read_embeddings, read_view_delta, sha256_file, write_csv,
    write_edge_list, write_embeddings, write_json, write_toml, write_view_delta,
)
from .seeding import derive_seed
from .theory import SampleComplexityQuery, sample_complexity, sample_complexity_bound
from .trainer import LOG_FIELDS, TrainedModel, pretrain_selection_model, train

log = logging.getLogger(__name__)

STAGES = ("pretrain", "augment", "train", "eval", "export-emb", "sample-complexity")

SPLIT_FILES = {"train": "split/ub_train.tsv", "valid": "split/ub_valid.tsv", "test": "split/ub_test.tsv"}
SELECTION = "pretrain/selection.tsv"
CHECKPOINT = "train/checkpoint.tsv"


class Run:
    """One output directory plus its manifest."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.out / "manifest.json"

    def path(self, rel: str) -> Path:
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def require(self, rel: str, stage: str, needed_by: str) -> Path:
        p = self.out / rel
        if not p.exists():
            raise StageDependencyError(f"{needed_by} requires {stage} stage output ({rel} missing in {self.out})")
        return p

    def seed(self, stage: str) -> int:
        return derive_seed(self.cfg.seed, stage)

    # data -------------------------------------------------------------

    def data_paths(self) -> dict:
        d = self.cfg.data
        paths = {"ub": d.ub, "ui": d.ui, "bi": d.bi}
        for name, p in paths.items():
            if p is None:
                raise ConfigError(f"data.{name} is required for this stage")
        return paths

    def _raw(self):
        paths = self.data_paths()
        ub, ui, bi = (read_edge_list(paths[k]) for k in ("ub", "ui", "bi"))
        d = self.cfg.data
        space = infer_space(ub, ui, bi, d.num_users, d.num_items, d.num_bundles)
        return space, ub, ui, bi

    def factual_graph(self):
        space, ub, ui, bi = self._raw()
        return build_graph(space, ub, ui, bi)

    def train_graph(self, needed_by: str):
        space, _, ui, bi = self._raw()
        ub = read_edge_list(self.require(SPLIT_FILES["train"], "pretrain", needed_by))
        return build_graph(space, ub, ui, bi)

    def views(self, graph, needed_by: str) -> list[CounterfactualView]:
        files = sorted((self.out / "views").glob("view_*.tsv"), key=lambda p: int(p.stem.split("_")[1]))
        if not files:
            raise StageDependencyError(f"{needed_by} requires augment stage output (views/ missing in {self.out})")
        views = []
        for f in files:
            delta, header = read_view_delta(f)
            views.append(CounterfactualView(delta, apply_delta(graph, delta), int(header.get("seed", 0)),
                                            header.get("sampler", "")))
        return views

    def trained_model(self, needed_by: str) -> TrainedModel:
        ckpt = self.require(CHECKPOINT, "train", needed_by)
        graph = self.train_graph(needed_by)
        weights = read_embeddings(ckpt, graph.space)
        return TrainedModel(EmbeddingTable(graph.space, weights), graph, self.cfg.train.layers, self.cfg.train)

    # manifest ---------------------------------------------------------

    def record(self, stage: str, inputs, outputs, seed: int | None) -> None:
        manifest = {}
        if self.manifest_path.exists():
            manifest = json.loads(self.manifest_path.read_text())
        manifest["tool"] = "clbr"
        manifest["version"] = __version__
        manifest["master_seed"] = self.cfg.seed
        manifest["config"] = config_to_dict(self.cfg)
        stages = manifest.setdefault("stages", {})
        stages[stage] = {
            "seed": seed,
            "inputs": {str(p): sha256_file(p) for p in inputs},
            "outputs": {str(Path(p).relative_to(self.out)): sha256_file(p) for p in outputs},
        }
        write_json(self.manifest_path, manifest)


def stage_pretrain(run: Run) -> list[Path]:
    factual = run.factual_graph()
    train_graph, valid, test = split(factual, dataclasses.replace(run.cfg.split, seed=run.seed("split")))
    outs = []
    for name, pairs in (("train", train_graph.edges[RelationKind.UB].pairs), ("valid", valid), ("test", test)):
        p = run.path(SPLIT_FILES[name])
        write_edge_list(p, pairs, header=f"user-bundle {name} split")
        outs.append(p)
    seed = run.seed("pretrain")
    tcfg = dataclasses.replace(run.cfg.train, seed=seed)
    selection = pretrain_selection_model(train_graph, tcfg)
    p = run.path(SELECTION)
    write_embeddings(p, selection.space, selection.table)
    outs.append(p)
    run.record("pretrain", list(run.data_paths().values()), outs, seed)
    return outs


def stage_augment(run: Run) -> list[Path]:
    graph = run.train_graph("augment")
    sel_path = run.require(SELECTION, "pretrain", "augment")
    selection = PropagatedEmbeddings(graph.space, read_embeddings(sel_path, graph.space), run.cfg.train.layers)
    seed = run.seed("augment")
    acfg = run.cfg.augment
    views = generate_view_set(graph, selection, acfg, seed)
    view_dir = run.out / "views"
    view_dir.mkdir(exist_ok=True)
    for stale in view_dir.glob("view_*.tsv"):
        stale.unlink()
    outs = []
    for i, view in enumerate(views):
        p = view_dir / f"view_{i}.tsv"
        write_view_delta(p, view.delta, {
            "seed": view.seed, "sampler": view.sampler, "view": i,
            "r_ub": acfg.r_ub, "r_ui": acfg.r_ui, "r_bi": acfg.r_bi,
        })
        outs.append(p)
    run.record("augment", [run.out / SPLIT_FILES["train"], sel_path], outs, seed)
    return outs


def stage_train(run: Run) -> list[Path]:
    graph = run.train_graph("train")
    views = run.views(graph, "train")
    valid_path = run.out / SPLIT_FILES["valid"]
    valid = read_edge_list(valid_path) if valid_path.exists() else None
    seed = run.seed("train")
    model = train(graph, views, dataclasses.replace(run.cfg.train, seed=seed), valid_pairs=valid)
    ckpt = run.path(CHECKPOINT)
    write_embeddings(ckpt, graph.space, model.params.weights)
    cfg_path = run.path("train/config.toml")
    write_toml(cfg_path, config_to_dict(run.cfg))
    log_path = run.path("train/log.csv")
    write_csv(log_path, LOG_FIELDS, model.history)
    inputs = [run.out / SPLIT_FILES["train"]] + sorted((run.out / "views").glob("view_*.tsv"))
    run.record("train", inputs, [ckpt, cfg_path, log_path], seed)
    return [ckpt, cfg_path, log_path]


def stage_eval(run: Run):
    model = run.trained_model("eval")
    test_path = run.require(SPLIT_FILES["test"], "pretrain", "eval")
    report = evaluate(model, read_edge_list(test_path), ks=DEFAULT_KS, seed=run.cfg.seed)
    csv_path = run.path("eval/metrics.csv")
    write_csv(csv_path, ("metric", "k", "value", "n_users", "seed"), report.rows())
    summary = run.path("eval/summary.json")
    write_json(summary, report.summary())
    run.record("eval", [run.out / CHECKPOINT, test_path], [csv_path, summary], None)
    return [csv_path, summary], report


def stage_export(run: Run) -> list[Path]:
    model = run.trained_model("export-emb")
    p = run.path("export/embeddings.tsv")
    write_embeddings(p, model.space, model.propagated().table)
    run.record("export-emb", [run.out / CHECKPOINT], [p], None)
    return [p]


def stage_sample_complexity(run: Run):
    th = run.cfg.theory
    try:
        q = SampleComplexityQuery(th.epsilon, th.delta, th.eta, th.hypothesis_count)
    except ValueError as exc:
        raise ConfigError(f"theory: {exc}") from exc
    result = {"epsilon": q.epsilon, "delta": q.delta, "eta": q.eta, "hypothesis_count": q.hypothesis_count,
              "bound": sample_complexity_bound(q), "samples": sample_complexity(q)}
    p = run.path("theory/sample_complexity.json")
    write_json(p, result)
    run.record("sample-complexity", [], [p], None)
    return [p], result


def run_stage(stage: str, cfg: PipelineConfig):
    """Run one stage (or ``all`` in order) under the configured thread limit."""
    if stage not in STAGES and stage != "all":
        raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES + ('all',)}")
    try:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(limits=cfg.threads)
    except ImportError:  # pragma: no cover
        limiter = nullcontext()
    run = Run(cfg)
    handlers = {
        "pretrain": stage_pretrain,
        "augment": stage_augment,
        "train": stage_train,
        "eval": stage_eval,
        "export-emb": stage_export,
        "sample-complexity": stage_sample_complexity,
    }
    order = ("pretrain", "augment", "train", "eval") if stage == "all" else (stage,)
    result = None
    with limiter:
        for name in order:
            log.info("running stage %s", name)
            result = handlers[name](run)
    return result
