"""Command-line front end wiring the modules into reproducible pipelines.

Typical flow:

    repoprompt index    --repo-root path/to/repo --out runs
    repoprompt mine     --repo-root path/to/repo --out runs
    repoprompt label    --repo-root path/to/repo --out runs
    repoprompt train    --variant h --epochs 20 ...
    repoprompt evaluate --method selector-h ...
    repoprompt attempts --ranking selector-h ...

State lives under ``--out``: repo_index.<repo>.json, dataset.jsonl,
labels.jsonl, checkpoint.<variant>.json, predictions.<variant>.jsonl,
eval.<method>.{json,txt,png}, attempts.{json,txt,png},
compose_eval.{json,txt}. Settings come from an optional JSON config file
(--config); explicit flags win over the file, which wins over built-in
defaults. Every command is deterministic under a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import classifier as cl
from . import evaluation as ev
from . import reporting
from .composer import compose_multi, composition_budgets
from .embedding import HashedEmbeddingProvider, RemoteEmbeddingProvider
from .gateway import BackendConfig, MockBackend, RemoteBackend
from .holes import (
    SPLIT_NAMES,
    hole_from_record,
    mine_holes,
    read_dataset,
    write_dataset,
)
from .proposals import DEFAULT_PROPOSAL_ID, PROPOSAL_COUNT, proposal_by_id, proposal_context
from .repograph import build_repo_index, load_repo_index, save_repo_index
from .tokenizers import get_tokenizer

DEFAULTS = {
    "out": "runs",
    "seed": 0,
    "budget": 4072,
    "tokenizer": "bpe",
    "provider": "hashed",
    "backend": "mock",
    "cap": 10000,
    "workers": 1,
    "split": "all",
    "fixed_id": 7,
    "epochs": 20,
    "variant": "h",
    "k": 5,
    "compose_l": 2,
}


class CliError(RuntimeError):
    """Fatal configuration or pipeline-state problem; message is user-facing."""


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with default settings")
    parser.add_argument("--repo-root", action="append", dest="repo_root",
                        help="repository root (repeatable)")
    parser.add_argument("--repo-id", action="append", dest="repo_id",
                        help="identifier for the matching --repo-root (repeatable)")
    parser.add_argument("--splits", help="per-repo split, e.g. repoA=train,repoB=val")
    parser.add_argument("--budget", type=int, help="total prompt token budget")
    parser.add_argument("--backend", choices=["mock", "remote"])
    parser.add_argument("--endpoint", help="completions endpoint for --backend remote")
    parser.add_argument("--model", help="model identifier for --backend remote")
    parser.add_argument("--tokenizer", choices=["bpe", "fallback"])
    parser.add_argument("--provider", choices=["hashed", "remote"])
    parser.add_argument("--provider-url", dest="provider_url",
                        help="embedding service base URL for --provider remote")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="state/output directory")
    parser.add_argument("--workers", type=int, help="parallel labeling workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repoprompt",
        description="Repository-aware prompt construction and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="parse repositories and cache their indexes")
    _add_shared(p)

    p = sub.add_parser("mine", help="mine completion holes into dataset.jsonl")
    _add_shared(p)
    p.add_argument("--cap", type=int, help="maximum holes per repository")

    p = sub.add_parser("label", help="query the backend for every proposal prompt")
    _add_shared(p)
    p.add_argument("--split", choices=list(SPLIT_NAMES) + ["all"])

    p = sub.add_parser("train", help="train a proposal selector")
    _add_shared(p)
    p.add_argument("--variant", choices=["h", "r"])
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("predict", help="write top-k proposals per hole")
    _add_shared(p)
    p.add_argument("--variant", choices=["h", "r"])
    p.add_argument("-k", type=int, dest="k")
    p.add_argument("--split", choices=list(SPLIT_NAMES) + ["all"])

    p = sub.add_parser("evaluate", help="score one method; writes report + figure")
    _add_shared(p)
    p.add_argument("--method", choices=list(ev.METHODS), required=True)
    p.add_argument("--split", choices=list(SPLIT_NAMES) + ["all"])
    p.add_argument("--fixed-id", type=int, dest="fixed_id")

    p = sub.add_parser("attempts", help="success rate versus number of attempts")
    _add_shared(p)
    p.add_argument("--ranking", choices=list(ev.RANKINGS), required=True)
    p.add_argument("--split", choices=list(SPLIT_NAMES) + ["all"])
    p.add_argument("--k-values", dest="k_values",
                   help="comma-separated attempt counts (default 1..63)")

    p = sub.add_parser("compose-eval",
                       help="evaluate prompts composed from the top-l proposals")
    _add_shared(p)
    p.add_argument("--variant", choices=["h", "r"])
    p.add_argument("--compose-l", type=int, dest="compose_l")
    p.add_argument("--split", choices=list(SPLIT_NAMES) + ["all"])
    return parser


def _effective(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    merged = dict(DEFAULTS)
    if args.config:
        try:
            merged.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is not None:
            merged[key] = value
    return merged


def _repos(cfg: dict) -> list[tuple[str, str]]:
    roots = cfg.get("repo_root") or []
    if isinstance(roots, str):
        roots = [roots]
    if not roots:
        raise CliError("no repositories given: pass --repo-root")
    ids = cfg.get("repo_id") or []
    if isinstance(ids, str):
        ids = [ids]
    if ids and len(ids) != len(roots):
        raise CliError("--repo-id count must match --repo-root count")
    return [
        (ids[i] if ids else Path(root).name, root) for i, root in enumerate(roots)
    ]


def _split_map(cfg: dict, repos: list[tuple[str, str]]) -> dict[str, str]:
    raw = cfg.get("splits")
    if not raw:
        return {rid: "train" for rid, _ in repos}
    if isinstance(raw, dict):
        pairs = raw
    else:
        try:
            pairs = dict(item.split("=", 1) for item in raw.split(","))
        except ValueError as exc:
            raise CliError(f"cannot parse --splits {raw!r}") from exc
    for rid, split in pairs.items():
        if split not in SPLIT_NAMES:
            raise CliError(f"unknown split {split!r} for repo {rid!r}")
    out = {}
    for rid, _ in repos:
        if rid not in pairs:
            raise CliError(f"--splits is missing repo {rid!r}")
        out[rid] = pairs[rid]
    return out


def _index_path(out: Path, repo_id: str) -> Path:
    return out / f"repo_index.{repo_id}.json"


def _load_indexes(cfg: dict) -> dict:
    out = Path(cfg["out"])
    indexes = {}
    for rid, root in _repos(cfg):
        path = _index_path(out, rid)
        if not path.exists():
            raise CliError(
                f"missing cached index for repo {rid!r} ({path}): "
                "run `repoprompt index` first"
            )
        index = load_repo_index(path, root)
        if index is None:
            raise CliError(
                f"cached index for repo {rid!r} is stale: run `repoprompt index` again"
            )
        indexes[rid] = index
    return indexes


def _load_dataset(cfg: dict, split: str | None = None) -> list:
    path = Path(cfg["out"]) / "dataset.jsonl"
    if not path.exists():
        raise CliError(f"missing {path}: run `repoprompt mine` first")
    records = read_dataset(path)
    wanted = split or cfg.get("split", "all")
    if wanted != "all":
        records = [r for r in records if r["split"] == wanted]
    return records


def _load_labels(cfg: dict) -> dict:
    path = Path(cfg["out"]) / "labels.jsonl"
    if not path.exists():
        raise CliError(f"missing {path}: run `repoprompt label` first")
    return ev.read_labels(path)


def _load_checkpoint(cfg: dict, variant: str):
    path = Path(cfg["out"]) / f"checkpoint.{variant}.json"
    if not path.exists():
        raise CliError(f"missing {path}: run `repoprompt train --variant {variant}` first")
    return cl.load_checkpoint(path)


def _provider(cfg: dict):
    if cfg["provider"] == "hashed":
        return HashedEmbeddingProvider()
    url = cfg.get("provider_url")
    if not url:
        raise CliError("--provider remote needs --provider-url")
    return RemoteEmbeddingProvider(url)


def _backend(cfg: dict, records: list[dict]):
    if cfg["backend"] == "mock":
        return MockBackend({r["id"]: r["target"] for r in records})
    endpoint = cfg.get("endpoint")
    if not endpoint:
        raise CliError("--backend remote needs --endpoint")
    config = BackendConfig(
        kind="remote",
        endpoint=endpoint,
        model=cfg.get("model") or "",
        cache_dir=str(Path(cfg["out"]) / "cache"),
    )
    return RemoteBackend(config)


# subcommands ----------------------------------------------------------


def _cmd_index(cfg: dict) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    for rid, root in _repos(cfg):
        if not Path(root).is_dir():
            raise CliError(f"repository root {root!r} is not a directory")
        index = build_repo_index(root, rid)
        save_repo_index(index, _index_path(out, rid))
        print(
            f"indexed {rid}: {len(index.files)} files, "
            f"{len(index.class_to_file)} classes, "
            f"{len(index.diagnostics)} diagnostics"
        )
    return 0


def _cmd_mine(cfg: dict) -> int:
    indexes = _load_indexes(cfg)
    split_map = _split_map(cfg, _repos(cfg))
    holes = []
    for rid in sorted(indexes):
        holes.extend(mine_holes(indexes[rid], cap=cfg["cap"], seed=cfg["seed"]))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(holes, indexes, split_map, out / "dataset.jsonl")
    print(f"mined {len(holes)} holes into {out / 'dataset.jsonl'}")
    return 0


def _cmd_label(cfg: dict) -> int:
    indexes = _load_indexes(cfg)
    records = _load_dataset(cfg)
    if not records:
        raise CliError("no holes in the requested split")
    tokenizer = get_tokenizer(cfg["tokenizer"])
    backend = _backend(cfg, records)
    holes = [hole_from_record(r) for r in records]

    def work(hole):
        return ev.label_hole(hole, indexes[hole.repo_id], backend, tokenizer, cfg["budget"])

    workers = max(1, int(cfg["workers"]))
    if workers == 1:
        labels = [work(h) for h in holes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            labels = list(pool.map(work, holes))
    labels.sort(key=lambda rec: rec.hole_id)
    out = Path(cfg["out"])
    ev.write_labels(labels, out / "labels.jsonl")
    incomplete = sum(rec.incomplete for rec in labels)
    print(f"labeled {len(labels)} holes ({incomplete} incomplete) into {out / 'labels.jsonl'}")
    return int(incomplete > 0)


def _cmd_train(cfg: dict) -> int:
    indexes = _load_indexes(cfg)
    labels = _load_labels(cfg)
    all_records = _load_dataset(cfg, split="all")
    variant = cfg["variant"]
    tokenizer = get_tokenizer(cfg["tokenizer"])
    provider = _provider(cfg)

    def rows(split):
        recs = [r for r in all_records if r["split"] == split and r["id"] in labels]
        holes = [hole_from_record(r) for r in recs]
        return ev.build_train_examples(
            holes, labels, indexes, tokenizer, cfg["budget"], variant
        )

    train_rows = rows("train")
    if not train_rows:
        raise CliError("no labeled training holes: run `repoprompt label` on the train split")
    val_rows = rows("val")
    config = cl.TrainConfig(
        variant=variant, epochs=cfg["epochs"], seed=cfg["seed"],
    )
    model, history = cl.train_ppc(train_rows, val_rows, config, provider)
    out = Path(cfg["out"])
    ckpt = out / f"checkpoint.{variant}.json"
    cl.save_checkpoint(model, ckpt)
    last = history[-1] if history else {}
    print(
        f"trained variant {variant} for {cfg['epochs']} epochs on {len(train_rows)} holes "
        f"(val {len(val_rows)}); final train loss {last.get('train_loss', float('nan')):.4f}; "
        f"wrote {ckpt}"
    )
    return 0


def _selector_bundle(cfg: dict, record: dict, indexes: dict, tokenizer, provider, model):
    hole = hole_from_record(record)
    index = indexes[hole.repo_id]
    contexts = ev.materialize_contexts(hole, index, tokenizer, cfg["budget"])
    hole_vec, C, T = ev._selector_inputs(
        hole, index, contexts, tokenizer, cfg["budget"], provider,
        need_context_vecs=model.variant == "r",
    )
    return hole, contexts, hole_vec, C, T


def _cmd_predict(cfg: dict) -> int:
    indexes = _load_indexes(cfg)
    records = _load_dataset(cfg)
    if not records:
        raise CliError("no holes in the requested split")
    variant = cfg["variant"]
    model = _load_checkpoint(cfg, variant)
    tokenizer = get_tokenizer(cfg["tokenizer"])
    provider = _provider(cfg)
    out = Path(cfg["out"]) / f"predictions.{variant}.jsonl"
    k = int(cfg["k"])
    with open(out, "w", encoding="utf-8") as fh:
        for record in records:
            hole, contexts, hole_vec, C, T = _selector_bundle(
                cfg, record, indexes, tokenizer, provider, model
            )
            top = cl.predict_topk(model, hole_vec, C, T, min(k, int(T.sum())))
            fh.write(json.dumps({"hole_id": hole.id, "proposals": top}) + "\n")
    print(f"wrote top-{k} proposals for {len(records)} holes to {out}")
    return 0


def _cmd_evaluate(cfg: dict) -> int:
    indexes = _load_indexes(cfg)
    records = _load_dataset(cfg)
    if not records:
        raise CliError("no holes in the requested split")
    method = cfg["method"]
    tokenizer = get_tokenizer(cfg["tokenizer"])
    provider = _provider(cfg)
    backend = _backend(cfg, records)
    holes = [hole_from_record(r) for r in records]
    labels = _load_labels(cfg) if method == "oracle" else None
    model = None
    if method in ("selector-h", "selector-r"):
        model = _load_checkpoint(cfg, method.rsplit("-", 1)[1])
    report = ev.evaluate_method(
        method, holes, indexes, backend, tokenizer, cfg["budget"],
        labels=labels, model=model, provider=provider,
        fixed_id=int(cfg["fixed_id"]), seed=cfg["seed"],
    )
    paths = reporting.save_method_report(report, cfg["out"])
    sys.stdout.write(reporting.render_method_table(report))
    print(f"wrote {paths['json']}, {paths['txt']}, {paths['png']}")
    return 0


def _cmd_attempts(cfg: dict) -> int:
    indexes = _load_indexes(cfg)
    records = _load_dataset(cfg)
    if not records:
        raise CliError("no holes in the requested split")
    labels = _load_labels(cfg)
    missing = [r["id"] for r in records if r["id"] not in labels]
    if missing:
        raise CliError(
            f"{len(missing)} holes lack labels: run `repoprompt label` first"
        )
    ranking = cfg["ranking"]
    tokenizer = get_tokenizer(cfg["tokenizer"])
    provider = _provider(cfg)
    holes = [hole_from_record(r) for r in records]
    if cfg.get("k_values"):
        k_values = [int(x) for x in str(cfg["k_values"]).split(",")]
    else:
        k_values = list(range(1, PROPOSAL_COUNT + 1))
    model = None
    validation_labels = None
    if ranking == "fixed":
        val_records = _load_dataset(cfg, split="val")
        pool = val_records if val_records else records
        validation_labels = [labels[r["id"]] for r in pool if r["id"] in labels]
    else:
        model = _load_checkpoint(cfg, ranking.rsplit("-", 1)[1])
    curve = ev.attempts_curve(
        ranking, holes, labels, k_values, indexes, tokenizer, cfg["budget"],
        model=model, provider=provider, validation_labels=validation_labels,
    )
    paths = reporting.save_attempts_report(ranking, curve, cfg["out"])
    for k, sr in curve:
        print(f"k={k:2d} sr={sr:.4f}")
    print(f"wrote {paths['json']}, {paths['txt']}, {paths['png']}")
    return 0


def _cmd_compose_eval(cfg: dict) -> int:
    indexes = _load_indexes(cfg)
    records = _load_dataset(cfg)
    if not records:
        raise CliError("no holes in the requested split")
    variant = cfg["variant"]
    model = _load_checkpoint(cfg, variant)
    tokenizer = get_tokenizer(cfg["tokenizer"])
    provider = _provider(cfg)
    backend = _backend(cfg, records)
    l = int(cfg["compose_l"])
    total = cfg["budget"]
    wins = 0
    rows = []
    for record in records:
        hole, contexts, hole_vec, C, T = _selector_bundle(
            cfg, record, indexes, tokenizer, provider, model
        )
        if model.variant == "h":
            probs = cl.forward_h(model, hole_vec)
        else:
            probs = cl.forward_r(model, hole_vec, C, T)
        applicable = {p: float(probs[p]) for p in range(PROPOSAL_COUNT) if T[p]}
        eff_l = min(l, len(applicable))
        budgets = composition_budgets(applicable, eff_l, total)
        parts = []
        for pid, budget in budgets:
            if pid == DEFAULT_PROPOSAL_ID or budget <= 0:
                continue
            ctx = proposal_context(
                proposal_by_id(pid), hole, indexes[hole.repo_id], budget, tokenizer
            )
            if ctx.applicable:
                parts.append((pid, ctx.text))
        prompt = compose_multi(hole, parts, indexes[hole.repo_id], tokenizer, total)
        completion = backend.complete(
            ev.CompletionRequest(prompt.text), hole.id, tokenizer
        )
        em = ev.exact_match(completion, hole.target)
        wins += em
        rows.append({"hole_id": hole.id, "proposals": [p for p, _ in budgets],
                     "exact_match": em})
    sr = wins / len(records)
    out = Path(cfg["out"])
    doc = {"variant": variant, "l": l, "sr": sr, "holes": rows}
    (out / "compose_eval.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "compose_eval.txt").write_text(
        f"variant  l  holes  sr\n{variant}  {l}  {len(records)}  {sr:.4f}\n",
        encoding="utf-8",
    )
    print(f"l={l} sr={sr:.4f} over {len(records)} holes")
    return 0


_COMMANDS = {
    "index": _cmd_index,
    "mine": _cmd_mine,
    "label": _cmd_label,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "attempts": _cmd_attempts,
    "compose-eval": _cmd_compose_eval,
}


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective(args)
        return _COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
