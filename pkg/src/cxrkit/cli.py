"""Command-line surface tying the library into runnable pipelines.

Exit codes: 0 success, 1 usage error, 2 data error. All randomness flows
through ``--seed`` flags, and identical invocations write byte-identical
outputs.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import dataio, dualbranch, ensemble, metrics, synthdata, zeroshot
from .losses import AslParams

USAGE_ERROR = 1
DATA_ERROR = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that signals usage problems instead of exiting with code 2."""

    def error(self, message):
        raise _UsageError(message)


def _say(message: str) -> None:
    if not os.environ.get("CXRKIT_QUIET"):
        print(message)


def _indices(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise dataio.DataFormatError(f"unparseable index list {text!r}") from None


def _aligned_pair(scores_path, labels_path):
    score_ids, score_classes, scores = dataio.read_scores_csv(scores_path)
    label_ids, label_classes, labels = dataio.read_labels_csv(labels_path)
    if score_ids != label_ids:
        raise dataio.DataFormatError(
            f"row ids of {scores_path} and {labels_path} disagree"
        )
    if score_classes != label_classes:
        raise dataio.DataFormatError(
            f"class columns of {scores_path} and {labels_path} disagree"
        )
    return score_ids, score_classes, scores, labels


def _emit_json(doc, out_path) -> None:
    if out_path:
        dataio.dump_json(out_path, doc)
        _say(f"wrote {out_path}")
    else:
        import json

        print(json.dumps(doc, indent=2, sort_keys=True))


# --------------------------------------------------------------------------
# subcommands


def _cmd_metrics(args) -> int:
    _, class_names, scores, labels = _aligned_pair(args.scores, args.labels)
    if args.classes:
        cols = _indices(args.classes)
        bad = [c for c in cols if c < 0 or c >= scores.shape[1]]
        if bad:
            raise dataio.DataFormatError(f"class indices out of range: {bad}")
        scores = scores[:, cols]
        labels = labels[:, cols]
        class_names = [class_names[c] for c in cols]
    report = metrics.evaluate(
        scores,
        labels,
        metrics.EvalConfig(
            n_bins=args.bins,
            f1_threshold=args.threshold,
            scores_are=args.scores_type,
        ),
    )
    doc = report.to_dict()
    doc["classes"] = class_names
    _emit_json(doc, args.out)
    return 0


def _load_members(paths):
    names, mats = [], []
    ids = classes = None
    for path in paths:
        member_ids, member_classes, mat = dataio.read_scores_csv(path)
        if ids is None:
            ids, classes = member_ids, member_classes
        elif member_ids != ids or member_classes != classes:
            raise dataio.DataFormatError(f"member {path} is misaligned with the first member")
        names.append(Path(path).stem)
        mats.append(mat)
    return names, mats, ids, classes


def _cmd_ensemble_search(args) -> int:
    ap_names, ap_members, _, _ = _load_members(args.ap_members)
    lat_names, lat_members, _, _ = _load_members(args.lateral_members)

    def branch_labels(specific, member_path):
        path = specific or args.labels
        if path is None:
            raise _UsageError("provide --labels or per-branch label files")
        _, _, _, labels = _aligned_pair(member_path, path)
        return labels

    ap_labels = branch_labels(args.ap_labels, args.ap_members[0])
    lat_labels = branch_labels(args.lateral_labels, args.lateral_members[0])

    ap_weights, ap_score = ensemble.grid_search_weights(
        ap_members, ap_labels, step=args.step, objective=args.objective
    )
    lat_weights, lat_score = ensemble.grid_search_weights(
        lat_members, lat_labels, step=args.step, objective=args.objective
    )
    weights = ensemble.EnsembleWeights(
        ap_pa=ap_weights,
        lateral=lat_weights,
        members=ap_names if ap_names == lat_names else ap_names + lat_names,
        step=args.step,
        objective=args.objective,
    )
    doc = weights.to_dict()
    doc["ap_pa_score"] = ap_score
    doc["lateral_score"] = lat_score
    _emit_json(doc, args.out)
    return 0


def _cmd_route(args) -> int:
    features = dataio.read_emb1(args.features)
    router = ensemble.LinearRouter.from_dict(dataio.load_json(args.router))
    weights = ensemble.EnsembleWeights.from_dict(dataio.load_json(args.weights))
    _, ap_members, ids, classes = _load_members(args.ap_members)
    _, lat_members, lat_ids, lat_classes = _load_members(args.lateral_members)
    if lat_ids != ids or lat_classes != classes:
        raise dataio.DataFormatError("AP and lateral member files are misaligned")
    if features.shape[0] != len(ids):
        raise dataio.DataFormatError("feature rows and member rows disagree")
    tags, _ = ensemble.predict_projection(features, router)
    fused = ensemble.routed_predict(
        {ensemble.AP_PA: ap_members, ensemble.LATERAL: lat_members}, tags, weights
    )
    dataio.write_scores_csv(args.out, ids, classes, fused)
    _say(f"wrote {args.out}")
    return 0


def _cmd_zeroshot(args) -> int:
    images = dataio.read_emb1(args.images)
    prompt_set = zeroshot.PromptSet.from_dict(dataio.load_json(args.prompts))
    embedder = zeroshot.TextStubEmbedder(dim=args.dim, seed=args.seed)
    view_matrices = [images] + [dataio.read_emb1(p) for p in args.views]
    per_view = [
        zeroshot.hybrid_prompt_scores(
            zeroshot.EmbeddingSet.from_matrix(view),
            prompt_set,
            embedder,
            temperature=args.temperature,
            mode=args.mode,
        )
        for view in view_matrices
    ]
    scores = zeroshot.tta_scores(per_view)
    ids = [f"s{i:06d}" for i in range(scores.shape[0])]
    dataio.write_scores_csv(args.out, ids, prompt_set.classes, scores)
    _say(f"wrote {args.out}")
    return 0


def _load_descriptions(path, class_names) -> list[str]:
    doc = dataio.load_json(path)
    if isinstance(doc, list):
        texts = [str(t) for t in doc]
    elif isinstance(doc, dict) and "descriptions" in doc:
        body = doc["descriptions"]
        if isinstance(body, list):
            texts = [str(t) for t in body]
        else:
            try:
                texts = [str(body[name]) for name in class_names]
            except KeyError as exc:
                raise dataio.DataFormatError(f"missing description for class {exc}") from None
    else:
        raise dataio.DataFormatError(
            "descriptions JSON must be a list or contain a 'descriptions' entry"
        )
    if len(texts) != len(class_names):
        raise dataio.DataFormatError(
            f"{len(texts)} descriptions for {len(class_names)} classes"
        )
    return texts


def _cmd_train_dual(args) -> int:
    features = dataio.read_emb1(args.features)
    _, class_names, labels = dataio.read_labels_csv(args.labels)
    if features.shape[0] != labels.shape[0]:
        raise dataio.DataFormatError("feature rows and label rows disagree")
    descriptions = _load_descriptions(args.descriptions, class_names)
    run = dataio.load_run_config(args.config) if args.config else dataio.RunConfig()

    alpha = run.alpha if args.alpha is None else args.alpha
    seed = run.seed if args.seed is None else args.seed
    cfg = dualbranch.TrainConfig(
        lr_max=run.lr,
        lr_min=run.lr_min,
        weight_decay=run.weight_decay,
        ema_decay=run.ema_decay,
        t_max=run.t_max,
        alpha=alpha,
        asl=AslParams(gamma_pos=run.gamma_pos, gamma_neg=run.gamma_neg),
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=seed,
        betas=run.betas,
        eps=run.eps,
    )
    embedder = zeroshot.TextStubEmbedder(dim=args.text_dim, seed=seed)

    if args.heldout:
        fold = dualbranch.ProxyFoldSpec(
            group_id="cli", heldout_classes=tuple(_indices(args.heldout))
        )
        dataset = dualbranch.proxy_dataset(features, labels, descriptions, fold, embedder)
    else:
        dataset = dualbranch.DualBranchDataset(
            features=features,
            labels=labels,
            class_descriptions=descriptions,
            embedder=embedder,
        )

    model_init = dualbranch.DualBranchModel.initialize(
        features.shape[1], args.text_dim, args.proj_dim, seed=seed
    )
    result = dualbranch.train(model_init, dataset, cfg)

    dataio.save_checkpoint(args.out_checkpoint, result.model.param_dict())
    _say(f"wrote {args.out_checkpoint}")
    if args.out_ema:
        dataio.save_checkpoint(args.out_ema, result.ema_model.param_dict())
        _say(f"wrote {args.out_ema}")
    if args.out_trace:
        dataio.write_trace_csv(args.out_trace, result.trace)
        _say(f"wrote {args.out_trace}")
    if args.out_scores:
        scoring_model = result.best_model if args.heldout else result.model
        class_txt = embedder.embed_many(descriptions)
        scores = dualbranch.zero_shot_scores(scoring_model, features, class_txt)
        ids = [f"s{i:06d}" for i in range(scores.shape[0])]
        dataio.write_scores_csv(args.out_scores, ids, class_names, scores)
        _say(f"wrote {args.out_scores}")
    return 0


def _parse_folds(doc) -> list[dualbranch.ProxyFoldSpec]:
    body = doc["folds"] if isinstance(doc, dict) and "folds" in doc else doc
    if not isinstance(body, list) or not body:
        raise dataio.DataFormatError("fold file must hold a non-empty fold list")
    return [dualbranch.ProxyFoldSpec.from_dict(entry) for entry in body]


def _cmd_proxy_split(args) -> int:
    _, _, labels = dataio.read_labels_csv(args.labels)
    folds = _parse_folds(dataio.load_json(args.folds))
    dualbranch.check_folds_disjoint(folds)
    out_folds = []
    for fold in folds:
        train_idx, eval_idx = dualbranch.build_proxy_split(labels, fold)
        entry = fold.to_dict()
        entry["train_indices"] = train_idx.tolist()
        entry["eval_indices"] = eval_idx.tolist()
        out_folds.append(entry)
    _emit_json({"folds": out_folds}, args.out)
    return 0


def _cmd_synth(args) -> int:
    spec = synthdata.SynthSpec(
        n_samples=args.n,
        n_classes=args.classes,
        zipf_exponent=args.zipf,
        feature_dim=args.dim,
        noise_sigma=args.sigma,
        seed=args.seed,
    )
    descriptions = synthdata.gen_descriptions(args.classes, seed=args.seed)
    prototypes = None
    if args.link_text:
        embedder = zeroshot.TextStubEmbedder(dim=args.text_dim, seed=args.seed)
        class_txt = embedder.embed_many(descriptions)
        prototypes = synthdata.text_linked_prototypes(class_txt, args.dim, seed=args.seed)
    data = synthdata.gen_longtail(spec, prototypes=prototypes)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    class_names = [f"class{k:02d}" for k in range(args.classes)]
    ids = [f"s{i:06d}" for i in range(args.n)]
    dataio.write_emb1(out_dir / "features.emb1", data.features)
    dataio.write_labels_csv(out_dir / "labels.csv", ids, class_names, data.labels)
    dataio.dump_json(
        out_dir / "descriptions.json",
        {"classes": class_names, "descriptions": descriptions},
    )
    prompt_set = zeroshot.PromptSet(
        classes=class_names,
        names={c: [c.replace("class", "finding ")] for c in class_names},
        descriptions={c: [d] for c, d in zip(class_names, descriptions)},
        negatives={c: [f"no {d}"] for c, d in zip(class_names, descriptions)},
    )
    dataio.dump_json(out_dir / "prompts.json", prompt_set.to_dict())
    _say(f"wrote {out_dir}/features.emb1 labels.csv descriptions.json prompts.json")
    return 0


def _cmd_calibrate(args) -> int:
    _, class_names, scores, labels = _aligned_pair(args.scores, args.labels)
    mece_value, per_class = metrics.mece(scores, labels, n_bins=args.bins)
    doc = {
        "mece": mece_value,
        "per_class_ece": per_class.tolist(),
        "n_bins": args.bins,
        "classes": class_names,
    }
    _emit_json(doc, args.out)
    return 0


# --------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="cxrkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="score/label CSVs -> evaluation report JSON")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--scores-type", choices=("probabilities", "logits"),
                   default="probabilities")
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--classes", help="comma-separated class column subset")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_metrics)

    p_ens = sub.add_parser("ensemble", help="ensemble weight tools")
    ens_sub = p_ens.add_subparsers(dest="ensemble_command", required=True)
    p = ens_sub.add_parser("search", help="grid-search member weights per projection")
    p.add_argument("--ap-members", nargs="+", required=True)
    p.add_argument("--lateral-members", nargs="+", required=True)
    p.add_argument("--labels")
    p.add_argument("--ap-labels")
    p.add_argument("--lateral-labels")
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--objective", choices=ensemble.GRID_OBJECTIVES, default="map")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ensemble_search)

    p = sub.add_parser("route", help="router + branch ensembles -> fused scores CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--router", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--ap-members", nargs="+", required=True)
    p.add_argument("--lateral-members", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_route)

    p = sub.add_parser("zeroshot", help="image embeddings + prompt file -> scores CSV")
    p.add_argument("--images", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--views", nargs="*", default=[],
                   help="extra EMB1 views averaged in (TTA)")
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature", type=float, default=0.07)
    p.add_argument("--mode", choices=("prob", "embed"), default="prob")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_zeroshot)

    p = sub.add_parser("train-dual", help="train the dual-branch heads on features")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--descriptions", required=True)
    p.add_argument("--config")
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int, default=7)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--text-dim", type=int, default=16)
    p.add_argument("--proj-dim", type=int, default=16)
    p.add_argument("--heldout", help="comma-separated held-out class indices")
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-ema")
    p.add_argument("--out-trace")
    p.add_argument("--out-scores")
    p.set_defaults(func=_cmd_train_dual)

    p = sub.add_parser("proxy-split", help="labels + fold spec -> leak-free index lists")
    p.add_argument("--labels", required=True)
    p.add_argument("--folds", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_proxy_split)

    p = sub.add_parser("synth", help="generate a synthetic long-tail dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--classes", type=int, default=30)
    p.add_argument("--zipf", type=float, default=1.2)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--text-dim", type=int, default=16)
    p.add_argument("--link-text", action="store_true",
                   help="tie class prototypes to description embeddings")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("calibrate", help="scores + labels -> calibration report")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"data error: missing file: {exc}", file=sys.stderr)
        return DATA_ERROR
    except (dataio.DataFormatError, metrics.UndefinedMetricError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
