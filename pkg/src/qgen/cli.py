"""Command-line surface: evaluate programs, score EIG, train the question
model, run leave-one-context-out evaluation, and generate novel questions.

Every command is deterministic given the seed recorded in its outputs.
Reports embed a config hash and content digests of the input files.
Exit codes: 0 success, 2 usage, 3 parse error, 4 type error, 5 missing or
unreadable input, 6 inconsistent or invalid data, 7 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, domain, dsl, features, generator, grammar, kernels, model

EXIT_PARSE = 3
EXIT_TYPE = 4
EXIT_IO = 5
EXIT_DATA = 6
EXIT_NUMERIC = 7

ENTROPY_BASE = "bits"  # EIG and entropies use log base 2
COMPLEXITY_LOG = "natural"  # -log q uses the natural log


@dataclass
class ExperimentConfig:
    """Defaults reproduce the source protocol: contexts 1-2 excluded,
    150k-question pool, 100k iterations at learning rate 0.1, 4 variants."""

    include: list[str] | None = None
    exclude: list[str] = field(default_factory=lambda: ["1", "2"])
    pool_size: int = 150_000
    seed: int = 0
    iterations: int = 100_000
    learning_rate: float = 0.1
    variants: tuple[str, ...] = model.VARIANTS
    max_functions: int = grammar.DEFAULT_MAX_FUNCTIONS
    preset: str | None = None
    threads: int | None = None

    def config_hash(self) -> str:
        body = json.dumps(
            {
                "include": self.include,
                "exclude": self.exclude,
                "pool_size": self.pool_size,
                "seed": self.seed,
                "iterations": self.iterations,
                "learning_rate": self.learning_rate,
                "variants": list(self.variants),
                "max_functions": self.max_functions,
                "preset": self.preset,
            },
            sort_keys=True,
        ).encode()
        return hashlib.sha256(body).hexdigest()[:12]


def apply_preset(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.preset == "desk":
        cfg.pool_size = 20_000
        cfg.iterations = 10_000
    elif cfg.preset not in (None, "paper"):
        raise ValueError(f"unknown preset {cfg.preset!r}")
    return cfg


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:12]


def _require_files(paths: list[Path]) -> None:
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        for p in missing:
            print(f"missing input: {p}", file=sys.stderr)
        raise FileNotFoundError(missing[0])


def _load_contexts(contexts_dir: Path, cfg: ExperimentConfig,
                   space) -> list[domain.Context]:
    files = sorted(contexts_dir.glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no context files in {contexts_dir}")
    contexts = [domain.load_context(f, space) for f in files]
    contexts.sort(key=lambda c: (len(c.id), c.id))
    if cfg.include is not None:
        wanted = set(cfg.include)
        contexts = [c for c in contexts if c.id in wanted]
    contexts = [c for c in contexts if c.id not in set(cfg.exclude)]
    if not contexts:
        raise ValueError("no contexts left after include/exclude filters")
    if cfg.preset == "desk" and len(contexts) > 4:
        # desk preset keeps the 4 smallest posterior supports
        base = domain.prior(space)
        sizes = [(len(domain.condition(base, c)), c.id, c) for c in contexts]
        sizes.sort(key=lambda t: (t[0], t[1]))
        contexts = [c for _, _, c in sizes[:4]]
        contexts.sort(key=lambda c: (len(c.id), c.id))
    return contexts


def _run_metadata(cfg: ExperimentConfig, inputs: dict[str, str]) -> dict:
    return {
        "tool_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "pool_size": cfg.pool_size,
        "iterations": cfg.iterations,
        "learning_rate": cfg.learning_rate,
        "max_functions": cfg.max_functions,
        "entropy_base": ENTROPY_BASE,
        "complexity_log": COMPLEXITY_LOG,
        "inputs": inputs,
    }


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _scatter_rows(cd: model.ContextData, weights: model.Weights):
    """Distinct questions of one context: (text, energy, frequency)."""
    seen: dict[str, int] = {}
    rows_by_text: dict[str, np.ndarray] = {}
    for text, row in zip(cd.data_texts, cd.data_F):
        seen[text] = seen.get(text, 0) + 1
        rows_by_text[text] = row
    out = []
    for text, count in seen.items():
        e = model.energy(rows_by_text[text], weights)
        out.append((text, e, count))
    out.sort(key=lambda r: (r[1], r[0]))
    return out


def _write_scatter(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["program", "energy", "frequency"])
        for text, e, n in rows:
            writer.writerow([text, repr(float(e)), n])


# --------------------------------------------------------------------------
# Commands


def cmd_eval(args) -> int:
    board_path = Path(args.board)
    try:
        _require_files([board_path])
        board = domain.Board.from_json(board_path)
    except (OSError, json.JSONDecodeError):
        return EXIT_IO
    except ValueError as exc:
        print(f"bad board: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        program = dsl.parse(args.program)
    except dsl.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except dsl.TypeCheckError as exc:
        print(f"type error: {exc}", file=sys.stderr)
        return EXIT_TYPE
    print(dsl.format_answer(dsl.evaluate(program, board)))
    return 0


def cmd_eig(args) -> int:
    ctx_path = Path(args.context)
    try:
        _require_files([ctx_path])
        context = domain.Context.from_json(ctx_path)
    except (OSError, json.JSONDecodeError):
        return EXIT_IO
    except ValueError as exc:
        print(f"bad context: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        program = dsl.parse(args.program)
    except dsl.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except dsl.TypeCheckError as exc:
        print(f"type error: {exc}", file=sys.stderr)
        return EXIT_TYPE
    space = domain.enumerate_hypotheses()
    try:
        belief = domain.condition(domain.prior(space), context)
    except domain.InconsistentContextError as exc:
        print(f"inconsistent context: {exc}", file=sys.stderr)
        return EXIT_DATA
    if not program.board_referential:
        print("warning: program does not reference the board; EIG is 0",
              file=sys.stderr)
    value = features.eig(program, belief)
    print(f"{value:.6f} {ENTROPY_BASE}")
    return 0


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "preset", None):
        cfg.preset = args.preset
        apply_preset(cfg)
    if args.contexts:
        cfg.include = [c.strip() for c in args.contexts.split(",") if c.strip()]
    if args.exclude is not None:
        cfg.exclude = [c.strip() for c in args.exclude.split(",") if c.strip()]
    if args.pool_size is not None:
        cfg.pool_size = args.pool_size
    if args.seed is not None:
        cfg.seed = args.seed
    if args.iters is not None:
        cfg.iterations = args.iters
    if args.lr is not None:
        cfg.learning_rate = args.lr
    return cfg


def _prepare(args, cfg: ExperimentConfig):
    """Shared setup: inputs checked up front, then dataset, contexts,
    pool and per-context feature bundles."""
    data_path = Path(args.data)
    ctx_dir = Path(args.contexts_dir)
    out_dir = Path(args.out)
    _require_files([data_path, ctx_dir])
    out_dir.mkdir(parents=True, exist_ok=True)
    space = domain.enumerate_hypotheses()
    dataset = model.QuestionDataset.load_jsonl(data_path)
    contexts = _load_contexts(ctx_dir, cfg, space)
    print(dataset.validation_report(), file=sys.stderr)
    pool = model.ProposalPool.sample(cfg.seed, cfg.pool_size, cfg.max_functions)
    cache = features.FeatureCache()
    cdata = model.build_context_data(
        dataset, contexts, space, pool, cache, threads=cfg.threads
    )
    inputs = {"data": _digest(data_path)}
    for f in sorted(ctx_dir.glob("*.json")):
        inputs[f.name] = _digest(f)
    return dataset, contexts, pool, cache, cdata, out_dir, inputs


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    try:
        dataset, contexts, pool, cache, cdata, out_dir, inputs = _prepare(args, cfg)
    except (OSError, json.JSONDecodeError):
        return EXIT_IO
    except (ValueError, model.SchemaError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_DATA
    variants = [args.variant] if args.variant else list(cfg.variants)
    train_cfg = model.TrainConfig(cfg.iterations, cfg.learning_rate)
    meta = _run_metadata(cfg, inputs)
    try:
        for variant in variants:
            result = model.train(cdata, variant, train_cfg)
            _write_json(out_dir / f"weights_{variant}.json",
                        result.weights.to_json_obj(meta))
            with open(out_dir / f"trace_{variant}.csv", "w", newline="",
                      encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["iteration", "approx_loglik"])
                for it, ll in result.trace:
                    writer.writerow([it, repr(ll)])
            for cd in cdata:
                _write_scatter(
                    out_dir / f"scatter_{variant}_{cd.context_id}.csv",
                    _scatter_rows(cd, result.weights),
                )
            print(f"trained {variant}: final LL {result.trace[-1][1]:.2f}")
    except model.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write_json(out_dir / "run_metadata.json", meta)
    return 0


def cmd_loocv(args) -> int:
    cfg = _config_from_args(args)
    try:
        dataset, contexts, pool, cache, cdata, out_dir, inputs = _prepare(args, cfg)
    except (OSError, json.JSONDecodeError):
        return EXIT_IO
    except (ValueError, model.SchemaError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_DATA
    train_cfg = model.TrainConfig(cfg.iterations, cfg.learning_rate)
    try:
        rows = model.loocv(cdata, cfg.variants, train_cfg)
    except model.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    with open(Path(args.out) / "loocv.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "held_out_context", "loglik", "mean_spearman"])
        for r in rows:
            writer.writerow([r.variant, r.held_out_context,
                             repr(r.loglik), repr(r.mean_spearman)])
    # out-of-sample scatter files: energies from the fold that held out ctx
    for r in rows:
        if r.variant != "full":
            continue
        fold = [cd for cd in cdata if cd.context_id != r.held_out_context]
        held = next(cd for cd in cdata if cd.context_id == r.held_out_context)
        weights = model.train(fold, "full", train_cfg).weights
        _write_scatter(Path(args.out) / f"scatter_heldout_{held.context_id}.csv",
                       _scatter_rows(held, weights))
    summary = model.loocv_summary(rows)
    for variant in cfg.variants:
        if variant in summary:
            s = summary[variant]
            print(f"{variant}: mean held-out LL {s['mean_loglik']:.2f}, "
                  f"mean Spearman {s['mean_spearman']:.3f}")
    meta = _run_metadata(cfg, inputs)
    meta["n_fits"] = len(rows)
    _write_json(Path(args.out) / "run_metadata.json", meta)
    return 0


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    weights_path = Path(args.weights)
    try:
        _require_files([weights_path])
        weights = model.Weights.from_json_obj(
            json.loads(weights_path.read_text(encoding="utf-8"))
        )
        dataset, contexts, pool, cache, cdata, out_dir, inputs = _prepare(args, cfg)
    except (OSError, json.JSONDecodeError):
        return EXIT_IO
    except (ValueError, model.SchemaError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_DATA
    space = domain.enumerate_hypotheses()
    base = domain.prior(space)
    known = [p for _, p in dataset.pairs]
    out_rows = []
    for i, ctx in enumerate(contexts):
        belief = domain.condition(base, ctx)
        picks = generator.sample_novel(
            belief, weights, pool, known, k=args.k, seed=cfg.seed + i, cache=cache
        )
        if len(picks) < args.k:
            print(f"context {ctx.id}: only {len(picks)} of {args.k} novel "
                  f"questions before pool exhaustion", file=sys.stderr)
        for prog, e in picks:
            out_rows.append((ctx.id, prog.text, e))
    with open(out_dir / "generated.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["context", "program", "energy"])
        for ctx_id, text, e in out_rows:
            writer.writerow([ctx_id, text, repr(float(e))])
    inputs["weights"] = _digest(weights_path)
    _write_json(out_dir / "run_metadata.json", _run_metadata(cfg, inputs))
    return 0


# --------------------------------------------------------------------------


def _add_experiment_flags(sub):
    sub.add_argument("--data", required=True, help="question corpus (JSON lines)")
    sub.add_argument("--contexts-dir", required=True, help="directory of context JSON files")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--contexts", default=None, help="comma-separated context ids to include")
    sub.add_argument("--exclude", default=None, help="comma-separated context ids to exclude (default: 1,2)")
    sub.add_argument("--pool-size", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--iters", type=int, default=None)
    sub.add_argument("--lr", type=float, default=None)
    sub.add_argument("--preset", choices=["desk", "paper"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgen",
        description="Question programs over Battleship boards",
    )
    parser.add_argument("--version", action="version", version=f"qgen {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_eval = subs.add_parser("eval", help="evaluate a program on a board")
    p_eval.add_argument("program")
    p_eval.add_argument("--board", required=True, help="fully revealed grid JSON")
    p_eval.set_defaults(func=cmd_eval)

    p_eig = subs.add_parser("eig", help="expected information gain in a context")
    p_eig.add_argument("program")
    p_eig.add_argument("--context", required=True, help="context JSON file")
    p_eig.set_defaults(func=cmd_eig)

    p_train = subs.add_parser("train", help="fit the log-linear question model")
    _add_experiment_flags(p_train)
    p_train.add_argument("--variant", choices=model.VARIANTS, default=None,
                         help="train a single variant (default: all four)")
    p_train.set_defaults(func=cmd_train)

    p_loocv = subs.add_parser("loocv", help="leave-one-context-out evaluation")
    _add_experiment_flags(p_loocv)
    p_loocv.set_defaults(func=cmd_loocv)

    p_gen = subs.add_parser("generate", help="sample novel human-like questions")
    _add_experiment_flags(p_gen)
    p_gen.add_argument("--weights", required=True, help="trained weights JSON")
    p_gen.add_argument("--k", type=int, default=5)
    p_gen.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    if os.environ.get("QGEN_THREADS"):
        pass  # honored inside features.feature_matrix
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError:
        return EXIT_IO
    except domain.InconsistentContextError as exc:
        print(f"inconsistent context: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
