"""Command-line surface: train, predict, eval, cv, gradcheck, graph-stats.

Configuration precedence is defaults < --config JSON file < flags; every
model-config key is mirrored as a kebab-case flag. Exit codes: 0 success,
1 validation error, 2 runtime failure. CES_LOG controls verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager

import numpy as np

from . import __version__, corpus, depgraph, eval_harness, model, pipeline, synth, viterbi
from .blas import pin_blas_single_thread, single_thread_blas
from .errors import CespanError, ValidationError
from .ioutil import sha256_file, write_atomic_json, write_atomic_text
from .model import ModelConfig
from .ndcore import Tensor, cross_entropy, finite_diff_check
from .rng import substream

log = logging.getLogger("cespan")

DEFAULT_SEED = 123  # the final-run training seed


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _str2bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _add_config_flags(parser):
    """One kebab-case flag per ModelConfig field, defaulting to unset."""
    for f in dataclasses.fields(ModelConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool" or isinstance(f.default, bool):
            parser.add_argument(flag, dest=f"cfg_{f.name}", type=_str2bool,
                                default=None, metavar="BOOL")
        elif isinstance(f.default, int):
            parser.add_argument(flag, dest=f"cfg_{f.name}", type=int, default=None)
        elif isinstance(f.default, float):
            parser.add_argument(flag, dest=f"cfg_{f.name}", type=float, default=None)
        else:
            parser.add_argument(flag, dest=f"cfg_{f.name}", type=str, default=None)
    parser.add_argument("--config", help="JSON file of model-config overrides")
    parser.add_argument("--variant", choices=sorted(model.VARIANTS),
                        help="named ablation preset, applied before other overrides")


def _resolve_config(args) -> ModelConfig:
    values = ModelConfig().to_dict()
    if getattr(args, "variant", None):
        values.update(model.VARIANTS[args.variant])
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise ValidationError(f"config file not found: {args.config}")
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(values)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        values.update(overrides)
    explicit_flags = False
    for key in list(values):
        flag_value = getattr(args, f"cfg_{key}", None)
        if flag_value is not None:
            values[key] = flag_value
            explicit_flags = True
    args._config_overridden = explicit_flags or bool(
        getattr(args, "config", None)
    ) or bool(getattr(args, "variant", None))
    try:
        return ModelConfig.from_dict(values)
    except CespanError as e:
        raise ValidationError(str(e)) from e


def _validate_inputs(pairs):
    """pairs: (label, path or None, required). Collects every problem."""
    problems = []
    for label, path, required in pairs:
        if path is None:
            if required:
                problems.append(f"missing required input: {label}")
        elif not os.path.exists(path):
            problems.append(f"{label} not found: {path}")
    if problems:
        raise ValidationError("; ".join(problems))


def _load_side_files(args):
    parses = depgraph.parse_conllu(args.conllu) if getattr(args, "conllu", None) else None
    tok = (
        corpus.read_tokenization(args.tokenization)
        if getattr(args, "tokenization", None)
        else None
    )
    return parses, tok


def _make_provider(args, config: ModelConfig):
    if getattr(args, "embeddings", None):
        provider = model.FileEmbeddings.load(args.embeddings)
        if provider.dim != config.d_bert:
            raise ValidationError(
                f"embedding file dim {provider.dim} != config d_bert "
                f"{config.d_bert} (set --d-bert {provider.dim})"
            )
        return provider
    if getattr(args, "hashed", False):
        return model.HashedEmbeddings(config.d_bert)
    raise ValidationError("choose an embedding source: --embeddings FILE or --hashed")


def _manifest(args, command, config, inputs, outputs, extra=None):
    entry = {
        "command": command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "variant": getattr(args, "variant", None),
        "config": config.to_dict() if config is not None else None,
        "inputs": {
            label: {"path": path, "sha256": sha256_file(path)}
            for label, path in inputs.items()
            if path
        },
        "outputs": outputs,
    }
    if extra:
        entry.update(extra)
    return entry


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    config = _resolve_config(args)
    _validate_inputs([
        ("--dataset", args.dataset, True),
        ("--conllu", args.conllu, False),
        ("--tokenization", args.tokenization, False),
        ("--embeddings", args.embeddings, False),
    ])
    os.makedirs(args.out_dir, exist_ok=True)

    raw = corpus.parse_dataset(args.dataset)
    parses, tok = _load_side_files(args)
    docs = pipeline.assemble(raw, parses, tok, config.max_seq_len)
    pos_vocab = (
        pipeline.build_pos_vocab(docs, capacity=config.d_pos) if config.use_pos else None
    )
    provider = _make_provider(args, config)
    prepared = pipeline.prepare(docs, provider, config, pos_vocab)
    if not prepared:
        raise ValidationError("training dataset is empty")

    log.info("training on %d examples, %d epochs", len(prepared), config.epochs)
    params, trace = model.train(
        prepared, config, args.seed,
        log=lambda epoch, loss: log.info("epoch %d loss %.6f", epoch, loss),
    )
    tm = viterbi.estimate_transitions(
        [pipeline.gold_word_tags(d.labeled) for d in docs]
    )

    ckpt = os.path.join(args.out_dir, "checkpoint.cemd")
    trans_path = os.path.join(args.out_dir, "transitions.json")
    trace_path = os.path.join(args.out_dir, "loss_trace.json")
    model.save_checkpoint(params, config, ckpt, pos_vocab)
    write_atomic_text(trans_path, tm.to_json())
    write_atomic_json(trace_path, {"epoch_loss": trace})
    manifest = _manifest(
        args, "train", config,
        {"dataset": args.dataset, "conllu": args.conllu,
         "tokenization": args.tokenization, "embeddings": args.embeddings},
        [ckpt, trans_path, trace_path],
        extra={"hashed_embeddings": bool(args.hashed)},
    )
    write_atomic_json(os.path.join(args.out_dir, "manifest.json"), manifest)
    print(f"checkpoint: {ckpt}")
    if trace:
        print(f"final epoch loss: {trace[-1]:.6f}")
    return 0


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def cmd_predict(args) -> int:
    _validate_inputs([
        ("--dataset", args.dataset, True),
        ("--checkpoint", args.checkpoint, True),
        ("--conllu", args.conllu, False),
        ("--tokenization", args.tokenization, False),
        ("--embeddings", args.embeddings, False),
        ("--transitions", args.transitions, False),
    ])
    requested = _resolve_config(args)
    expect = requested if args._config_overridden else None
    params, config, pos_vocab = model.load_checkpoint(args.checkpoint, expect)

    raw = corpus.parse_dataset(args.dataset)
    parses, tok = _load_side_files(args)
    docs = pipeline.assemble(raw, parses, tok, config.max_seq_len)
    provider = _make_provider(args, config)
    prepared = pipeline.prepare(docs, provider, config, pos_vocab)

    tm = None
    if not args.no_viterbi:
        trans_path = args.transitions or os.path.join(
            os.path.dirname(args.checkpoint), "transitions.json"
        )
        if not os.path.exists(trans_path):
            raise ValidationError(
                f"transitions file not found: {trans_path} (or pass --no-viterbi)"
            )
        with open(trans_path, "r", encoding="utf-8") as fh:
            tm = viterbi.TransitionModel.from_json(fh.read())

    predictions = [
        pipeline.predict_example(p, params, config, tm, args.token_level)
        for p in prepared
    ]
    rows = [
        corpus.RawExample(pred.id, doc.labeled.text, pred.cause, pred.effect)
        for pred, doc in zip(predictions, docs)
    ]
    corpus.write_dataset(args.out, rows)
    tags_path = args.tags_out or args.out + ".tags.jsonl"
    lines = [
        json.dumps(
            {"id": p.id, "word_tags": p.word_tags, "token_tags": p.token_tags}
        )
        for p in predictions
    ]
    write_atomic_text(tags_path, "\n".join(lines) + ("\n" if lines else ""))
    print(f"wrote {len(predictions)} predictions to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _word_labels_for_eval(raw_examples, parses, tok, max_seq_len):
    labels = {}
    docs = pipeline.assemble(raw_examples, parses, tok, max_seq_len)
    for doc in docs:
        labels[doc.labeled.id] = list(pipeline.gold_word_tags(doc.labeled))
    return labels


def cmd_eval(args) -> int:
    _validate_inputs([
        ("--gold", args.gold, True),
        ("--pred", args.pred, True),
        ("--conllu", args.conllu, False),
        ("--tokenization", args.tokenization, False),
    ])
    gold_raw = corpus.parse_dataset(args.gold)
    pred_raw = corpus.parse_dataset(args.pred)
    gold_ids = [ex.id for ex in gold_raw]
    pred_by_id = {ex.id: ex for ex in pred_raw}
    missing = [i for i in gold_ids if i not in pred_by_id]
    extra = [i for i in pred_by_id if i not in set(gold_ids)]
    if missing or extra:
        raise ValidationError(
            f"id mismatch between gold and predictions; missing={missing[:10]} "
            f"extra={extra[:10]}"
        )

    parses, tok = _load_side_files(args)
    gold_labels = _word_labels_for_eval(gold_raw, parses, tok, args.max_seq_len or 350)
    # Predicted spans are re-encoded over the same word segmentation.
    pred_rows = [
        corpus.RawExample(ex.id, ex.text, pred_by_id[ex.id].cause,
                          pred_by_id[ex.id].effect)
        for ex in gold_raw
    ]
    pred_labels = _word_labels_for_eval(pred_rows, parses, tok, args.max_seq_len or 350)

    report = eval_harness.evaluate(
        [gold_labels[i] for i in gold_ids], [pred_labels[i] for i in gold_ids]
    )
    print(eval_harness.summary_table([("eval", report)]))
    if args.out:
        write_atomic_json(args.out, report.to_dict())
    return 0


# ---------------------------------------------------------------------------
# cv
# ---------------------------------------------------------------------------

def _cv_train_eval(prepared, config, seed, fold_indices):
    """Train on everything outside the fold, evaluate on the fold."""
    held = set(fold_indices)
    train_set = [prepared[i] for i in range(len(prepared)) if i not in held]
    eval_set = [prepared[i] for i in fold_indices]
    params, _ = model.train(train_set, config, seed)
    tm = viterbi.estimate_transitions(
        [pipeline.gold_word_tags(p.ex) for p in train_set]
    )
    gold = []
    pred = []
    for p in eval_set:
        result = pipeline.predict_example(p, params, config, tm)
        gold.append(pipeline.gold_word_tags(p.ex))
        pred.append(result.word_tags)
    return eval_harness.evaluate(gold, pred)


def _cv_cell_worker(payload):
    prepared, config_dict, seed, fold_indices, variant = payload
    config = ModelConfig.from_dict(config_dict)
    report = _cv_train_eval(prepared, config, seed, fold_indices)
    return variant, seed, fold_indices, report


def cmd_cv(args) -> int:
    base_config = _resolve_config(args)
    _validate_inputs([
        ("--dataset", args.dataset, True),
        ("--conllu", args.conllu, False),
        ("--tokenization", args.tokenization, False),
        ("--embeddings", args.embeddings, False),
    ])
    os.makedirs(args.out_dir, exist_ok=True)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(
        eval_harness.DEFAULT_CV_SEEDS
    )
    variants = args.variants.split(",") if args.variants else ["proposed"]
    for v in variants:
        if v not in model.VARIANTS:
            raise ValidationError(f"unknown variant {v!r}")

    raw = corpus.parse_dataset(args.dataset)
    parses, tok = _load_side_files(args)

    results: dict[str, dict] = {}
    for variant in variants:
        config = model.apply_variant(base_config, variant)
        docs = pipeline.assemble(raw, parses, tok, config.max_seq_len)
        pos_vocab = (
            pipeline.build_pos_vocab(docs, capacity=config.d_pos)
            if config.use_pos
            else None
        )
        provider = _make_provider(args, config)
        prepared = pipeline.prepare(docs, provider, config, pos_vocab)

        cell_specs = []
        for seed in seeds:
            folds = eval_harness.kfold_split(
                list(range(len(prepared))), k=args.folds, seed=seed
            )
            for fold_idx, fold in enumerate(folds):
                cell_specs.append((seed, fold_idx, fold))

        cells = {}
        if args.jobs > 1:
            payloads = [
                (prepared, config.to_dict(), seed, fold, variant)
                for seed, _, fold in cell_specs
            ]
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                reports = list(pool.map(_cv_cell_worker, payloads))
            for (seed, fold_idx, _), (_, _, _, report) in zip(cell_specs, reports):
                cells[(seed, fold_idx)] = report
        else:
            for seed, fold_idx, fold in cell_specs:
                log.info("cv %s seed=%d fold=%d", variant, seed, fold_idx)
                cells[(seed, fold_idx)] = _cv_train_eval(prepared, config, seed, fold)

        ordered = [cells[(seed, f)] for seed in seeds for f in range(args.folds)]
        results[variant] = {
            "reports": [
                {"seed": seed, "fold": f,
                 "metrics": cells[(seed, f)].to_dict()}
                for seed in seeds
                for f in range(args.folds)
            ],
            "mean": {
                metric: float(np.mean([getattr(r, metric) for r in ordered]))
                for metric in ("precision", "recall", "f1", "exact_match")
            },
        }

    ttests = {}
    if len(variants) > 1:
        reference = variants[0]
        for variant in variants[1:]:
            per_metric = {}
            for metric in ("precision", "recall", "f1", "exact_match"):
                a = [r["metrics"][metric] for r in results[variant]["reports"]]
                b = [r["metrics"][metric] for r in results[reference]["reports"]]
                per_metric[metric] = eval_harness.paired_ttest(a, b).to_dict()
            ttests[f"{variant} vs {reference}"] = per_metric

    out_json = os.path.join(args.out_dir, "cv_results.json")
    write_atomic_json(out_json, {"results": results, "ttests": ttests,
                                 "seeds": seeds, "folds": args.folds})
    table = _cv_table(variants, results, ttests)
    write_atomic_text(os.path.join(args.out_dir, "cv_summary.txt"), table + "\n")
    print(table)
    return 0


def _cv_table(variants, results, ttests) -> str:
    header = (
        f"{'Model':24s} {'Precision':>12s} {'Recall':>12s} "
        f"{'F1':>12s} {'ExactMatch':>12s}"
    )
    lines = [header]
    reference = variants[0]
    for variant in variants:
        cells = []
        for metric in ("precision", "recall", "f1", "exact_match"):
            value = results[variant]["mean"][metric]
            mark = ""
            key = f"{variant} vs {reference}"
            if key in ttests:
                mark = ttests[key][metric]["significance"]
            cells.append(f"{value:9.2f}{mark:<3s}")
        lines.append(f"{variant:24s} {' '.join(cells)}")
    lines.append("significance vs first row: *** <0.05, ** <0.10, * <0.15, ^ <0.20")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

def _tiny_instance(rng, config: ModelConfig):
    """Random small example + float64 params for finite differences."""
    n = int(rng.integers(2, 6))
    emb = rng.standard_normal((n, config.d_bert))
    n_edges = int(rng.integers(1, n * 2))
    src = rng.integers(0, n, size=n_edges)
    dst = rng.integers(0, n, size=n_edges)
    keep = src != dst
    src, dst = src[keep], dst[keep]
    indeg = np.bincount(dst, minlength=n).astype(np.int64)
    pos_indices = rng.integers(-1, config.d_pos, size=n)
    targets = rng.integers(0, config.n_classes, size=n)
    words = tuple(
        corpus.Word(f"w{i}", 2 * i, 2 * i + 1, pos=None) for i in range(n)
    )
    labeled = corpus.LabeledExample(
        id="tiny", text=" ".join(w.surface for w in words), words=words,
        tokens=tuple(w.surface for w in words),
        token_to_word=tuple(range(n)),
        token_labels=tuple("O" for _ in range(n)),
    )
    return model.PreparedExample(
        ex=labeled,
        emb=emb,
        pos_indices=pos_indices.astype(np.int64),
        src=src.astype(np.int64),
        dst=dst.astype(np.int64),
        indeg=indeg,
        targets=targets.astype(np.int64),
        word_first_token=np.arange(n, dtype=np.int64),
    )


@contextmanager
def _broken_relu():
    """Negative-control hook: scales the relu chain rule by 1.01 so the
    finite-difference check must flag the end-to-end gradient as wrong."""
    from . import ndcore as ndcore_module

    real = ndcore_module.relu

    def wrong(x):
        out = real(x)
        inner = out._backward
        if inner is not None:
            out._backward = lambda g: inner(g * 1.01)
        return out

    ndcore_module.relu = wrong
    try:
        yield
    finally:
        ndcore_module.relu = real


def run_gradcheck(dims=(8, 6, 4), instances=20, tolerance=1e-4, seed=0,
                  with_dropout=True, corrupt=False):
    """End-to-end finite-difference check at tiny dimensions.

    Returns (max_rel_err, passed). ``corrupt`` deliberately breaks the relu
    gradient as a negative control.
    """
    d_bert, gnn_hidden, d_gnn = dims
    config = ModelConfig(
        d_bert=d_bert, d_pos=4, gnn_hidden=gnn_hidden, d_gnn=d_gnn,
        bilstm_out=d_gnn if d_gnn % 2 == 0 else d_gnn + 1,
        dropout=0.1, use_pos=True, use_gnn=True, use_bilstm=True,
    )
    worst = 0.0
    with single_thread_blas():
        worst = _gradcheck_instances(
            config, instances, seed, with_dropout, corrupt
        )
    return worst, worst < tolerance


def _gradcheck_instances(config, instances, seed, with_dropout, corrupt):
    worst = 0.0
    for k in range(instances):
        rng = substream(seed, f"gradcheck/{k}")
        prepared = _tiny_instance(rng, config)
        params = model.init_params(config, seed=seed + k, dtype=np.float64)
        mode = "train" if (with_dropout and k % 2 == 0) else "eval"
        mask_seed = seed * 1000 + k

        def loss_fn():
            # Recreated per call so every finite-difference evaluation sees
            # the same dropout masks.
            drop_rng = substream(mask_seed, "gradcheck-dropout")
            logits = model.forward(prepared, params, config, mode, drop_rng)
            return cross_entropy(logits, prepared.targets)

        if corrupt:
            with _broken_relu():
                err = finite_diff_check(loss_fn, params, h=1e-5)
        else:
            err = finite_diff_check(loss_fn, params, h=1e-5)
        worst = max(worst, err)
    return worst


def cmd_gradcheck(args) -> int:
    dims = tuple(int(d) for d in args.dims.split(","))
    if len(dims) != 3:
        raise ValidationError("--dims expects three integers, e.g. 8,6,4")
    worst, passed = run_gradcheck(
        dims=dims, instances=args.instances, tolerance=args.tolerance,
        seed=args.seed, corrupt=args.corrupt,
    )
    print(f"max relative error: {worst:.3e} (tolerance {args.tolerance:g})")
    print("PASS" if passed else "FAIL")
    return 0 if passed else 2


# ---------------------------------------------------------------------------
# graph-stats
# ---------------------------------------------------------------------------

def cmd_graph_stats(args) -> int:
    _validate_inputs([
        ("--dataset", args.dataset, True),
        ("--conllu", args.conllu, True),
        ("--tokenization", args.tokenization, False),
    ])
    raw = corpus.parse_dataset(args.dataset)
    parses, tok = _load_side_files(args)
    docs = pipeline.assemble(raw, parses, tok, args.max_seq_len or 350)
    rows = []
    scores = []
    for doc in docs:
        labeled = doc.labeled
        token_labels = [
            corpus.collapse(labeled.words[w].label) for w in labeled.token_to_word
        ]
        entry = {
            "id": labeled.id,
            "n_tokens": len(labeled.tokens),
            "n_edges": doc.graph.n_edges,
            "n_components": doc.graph.n_weak_components(),
            "n_sentences": doc.parse.n_sentences if doc.parse else None,
        }
        if doc.graph.n_edges:
            entry["homophily"] = depgraph.homophily_score(doc.graph, token_labels)
            scores.append(entry["homophily"])
        else:
            entry["homophily"] = None
        rows.append(entry)
    summary = {
        "examples": len(rows),
        "with_edges": len(scores),
        "mean_homophily": float(np.mean(scores)) if scores else None,
        "per_example": rows,
    }
    if args.out:
        write_atomic_json(args.out, summary)
    print(
        f"{len(rows)} examples, mean homophily "
        f"{summary['mean_homophily']:.4f}" if scores else "no edges found"
    )
    return 0


# ---------------------------------------------------------------------------
# demo-data
# ---------------------------------------------------------------------------

def cmd_demo_data(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    docs = synth.make_corpus(args.n, seed=args.seed,
                             multi_sentence_rate=args.multi_sentence_rate)
    dataset = os.path.join(args.out_dir, "dataset.csv")
    conllu = os.path.join(args.out_dir, "parses.conllu")
    write_atomic_text(dataset, synth.corpus_csv(docs))
    write_atomic_text(conllu, synth.corpus_conllu(docs))
    print(f"wrote {args.n} examples to {dataset} and {conllu}")
    return 0


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="cespan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, embeddings=True):
        p.add_argument("--dataset", required=True)
        p.add_argument("--conllu")
        p.add_argument("--tokenization")
        if embeddings:
            p.add_argument("--embeddings")
            p.add_argument("--hashed", action="store_true",
                           help="deterministic hashed token embeddings")

    p_train = sub.add_parser("train", help="train a model, write a checkpoint")
    add_io(p_train)
    p_train.add_argument("--out-dir", required=True)
    p_train.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="decode spans with a checkpoint")
    add_io(p_pred)
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--transitions")
    p_pred.add_argument("--out", required=True)
    p_pred.add_argument("--tags-out")
    p_pred.add_argument("--no-viterbi", action="store_true",
                        help="raw per-token argmax instead of Viterbi")
    p_pred.add_argument("--token-level", action="store_true",
                        help="decode token emissions instead of word-level")
    _add_config_flags(p_pred)
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("eval", help="score predictions against gold")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--conllu")
    p_eval.add_argument("--tokenization")
    p_eval.add_argument("--max-seq-len", type=int, default=None)
    p_eval.add_argument("--out", help="write the JSON report here")
    p_eval.set_defaults(func=cmd_eval)

    p_cv = sub.add_parser("cv", help="cross-validation over seeds and folds")
    add_io(p_cv)
    p_cv.add_argument("--out-dir", required=True)
    p_cv.add_argument("--variants", help="comma-separated variant names")
    p_cv.add_argument("--seeds", help="comma-separated seeds "
                      f"(default {','.join(map(str, eval_harness.DEFAULT_CV_SEEDS))})")
    p_cv.add_argument("--folds", type=int, default=3)
    p_cv.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p_cv)
    p_cv.set_defaults(func=cmd_cv)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p_gc.add_argument("--dims", default="8,6,4",
                      help="d_bert,gnn_hidden,d_gnn (tiny)")
    p_gc.add_argument("--instances", type=int, default=20)
    p_gc.add_argument("--tolerance", type=float, default=1e-4)
    p_gc.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_gc.add_argument("--corrupt", action="store_true",
                      help="negative control: break a gradient on purpose")
    p_gc.set_defaults(func=cmd_gradcheck)

    p_gs = sub.add_parser("graph-stats", help="homophily report over a dataset")
    p_gs.add_argument("--dataset", required=True)
    p_gs.add_argument("--conllu", required=True)
    p_gs.add_argument("--tokenization")
    p_gs.add_argument("--max-seq-len", type=int, default=None)
    p_gs.add_argument("--out")
    p_gs.set_defaults(func=cmd_graph_stats)

    p_demo = sub.add_parser("demo-data", help="generate a synthetic corpus")
    p_demo.add_argument("--out-dir", required=True)
    p_demo.add_argument("--n", type=int, default=50)
    p_demo.add_argument("--seed", type=int, default=0)
    p_demo.add_argument("--multi-sentence-rate", type=float, default=0.2)
    p_demo.set_defaults(func=cmd_demo_data)

    return parser


def main(argv=None) -> int:
    pin_blas_single_thread()
    logging.basicConfig(
        level=os.environ.get("CES_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except CespanError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
