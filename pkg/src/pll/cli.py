"""``pll`` command line: generate, train, verify, entropy.

Exit codes: 0 success, 1 usage, 2 data validation, 3 verification failure,
4 numerical failure. Verbosity comes from ``PLL_LOG`` (error, info, debug).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import METHODS, MODELS, PartialDataset, RunConfig
from .dataio import (
    SplitSpec,
    load_idx_images,
    load_partial_csv,
    load_supervised_csv,
    save_partial_csv,
    split,
    standardize,
)
from .errors import NumericalError, PLLError, ValidationError
from .generate import (
    TransitionMatrixModel,
    UniformGenerationModel,
    entropy_of_T,
    expected_candidate_size,
    generate_partial_dataset,
    load_tmatrix,
    uniform_inclusion_probability,
)
from .train import train

log = logging.getLogger("pll")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3, 4
GRID = [10.0 ** -e for e in range(6, 0, -1)]
REPORTED_UNIFORM_ENTROPY = 2.257


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class ExperimentResult:
    method: str
    dataset: str
    trials: list
    mean: float
    std: float
    config: dict
    wall_time: float
    transductive: list = field(default_factory=list)

    @classmethod
    def from_trials(cls, method, dataset, trials, config, wall_time, transductive=()):
        vals = np.asarray(trials, dtype=np.float64)
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        return cls(method, dataset, list(map(float, trials)), float(vals.mean()), std, config,
                   wall_time, [float(t) for t in transductive if t is not None])


# ---------------------------------------------------------------------------
# generate

def _parse_generation_model(spec: str, k: int):
    if spec == "uniform":
        return UniformGenerationModel(k)
    if spec.startswith("tmatrix="):
        model = load_tmatrix(spec.split("=", 1)[1])
        if model.k != k:
            raise ValidationError(f"T matrix has k={model.k} but the data has k={k}")
        return model
    raise UsageError(f"--model must be 'uniform' or 'tmatrix=<file.json>', got {spec!r}")


def cmd_generate(args) -> int:
    if args.labels:
        ds = load_idx_images(args.input, args.labels)
    else:
        ds = load_supervised_csv(args.input, k=args.k)
    model = _parse_generation_model(args.model, ds.k)
    pds = generate_partial_dataset(ds, model, np.random.default_rng(args.seed))
    save_partial_csv(pds, args.out)
    print(f"wrote {pds.n} examples (k={pds.k}) to {args.out}")
    print(f"avg candidate set size: {pds.mean_candidate_size():.4f}")
    if isinstance(model, UniformGenerationModel):
        print(f"expected under the uniform model: {expected_candidate_size(ds.k):.4f}")
    else:
        print(f"entropy: {entropy_of_T(model).entropy:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train

def run_trial(pds: PartialDataset, test, cfg: RunConfig, seed: int, standardize_features=False,
              transductive=False, log_dir=None) -> dict:
    """One trial: split off a test set if none is given, then validation, then train."""
    data = pds
    if test is None:
        if pds.hidden_labels is None:
            raise ValidationError("without --test the data must carry a 'true' column")
        data, held = split(pds, SplitSpec(0.1, seed))
        test = held.true_labeled()
    validation = None
    if cfg.validation_fraction > 0:
        data, validation = split(data, SplitSpec(cfg.validation_fraction, seed))
    if standardize_features:
        others = [test] + ([validation] if validation is not None else [])
        (data, test, *rest), _ = standardize(data, *others)
        validation = rest[0] if rest else None
    trial_cfg = replace(cfg, seed=seed)
    _, train_log = train(data, test, trial_cfg, np.random.default_rng(seed), validation,
                         transductive=transductive)
    if log_dir is not None:
        train_log.write(Path(log_dir) / f"{cfg.method}_lr{cfg.learning_rate:g}_wd{cfg.weight_decay:g}_seed{seed}.jsonl")
    return {
        "type": "trial",
        "method": cfg.method,
        "seed": seed,
        "final_metric": train_log.final_metric("test_accuracy"),
        "transductive": train_log.final_metric("transductive_accuracy") if transductive else None,
        "validation": train_log.final_metric("validation_score"),
        "config": asdict(trial_cfg),
    }


def _run_trials(pds, test, cfg, args, out):
    seeds = [cfg.seed + t for t in range(cfg.trials)]
    kwargs = dict(standardize_features=args.standardize, transductive=args.transductive,
                  log_dir=args.log_dir)
    results = []

    def record(res):
        results.append(res)
        if out is not None:
            with open(out, "a", encoding="utf-8") as f:
                f.write(json.dumps(res) + "\n")
        log.info("trial seed %d: accuracy %.4f", res["seed"], res["final_metric"])

    if args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(run_trial, pds, test, cfg, s, **kwargs) for s in seeds]
            for fut in futures:
                record(fut.result())
    else:
        for s in seeds:
            record(run_trial(pds, test, cfg, s, **kwargs))
    return results


def cmd_train(args) -> int:
    start = time.time()
    pds = load_partial_csv(args.data)
    test = load_supervised_csv(args.test, k=pds.k) if args.test else None
    if test is not None and test.d != pds.d:
        raise ValidationError(f"test set has {test.d} features, training data has {pds.d}")
    if args.method == "supervised" and pds.hidden_labels is None:
        raise ValidationError("--method supervised needs a 'true' column in --data")
    cfg = RunConfig(seed=args.seed, epochs=args.epochs, batch_size=args.batch_size,
                    learning_rate=args.lr, weight_decay=args.wd, model=args.model,
                    method=args.method, trials=args.trials,
                    validation_fraction=args.validation_fraction, hidden=args.hidden)
    if args.log_dir:
        Path(args.log_dir).mkdir(parents=True, exist_ok=True)

    if args.grid:
        best = None
        for lr in GRID:
            for wd in GRID:
                trial_cfg = replace(cfg, learning_rate=lr, weight_decay=wd)
                res = _run_trials(pds, test, trial_cfg, args, args.out)
                score = np.mean([r["validation"] for r in res if r["validation"] is not None] or [np.nan])
                log.info("grid lr=%g wd=%g validation %.4f", lr, wd, score)
                if best is None or score > best[0]:
                    best = (score, trial_cfg, res)
        _, cfg, results = best
    else:
        results = _run_trials(pds, test, cfg, args, args.out)

    summary = ExperimentResult.from_trials(
        cfg.method, str(args.data), [r["final_metric"] for r in results], asdict(cfg),
        time.time() - start, [r["transductive"] for r in results],
    )
    line = {"type": "summary", **asdict(summary)}
    if args.out:
        with open(args.out, "a", encoding="utf-8") as f:
            f.write(json.dumps(line) + "\n")
    msg = f"{cfg.method}: {100 * summary.mean:.2f} +- {100 * summary.std:.2f}% over {len(results)} trial(s)"
    if summary.transductive:
        msg += f"; transductive {100 * np.mean(summary.transductive):.2f}%"
    print(msg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def run_verify_suite(kmax: int, seed: int = 0, toys: int = 20):
    """Run every oracle for k in [2, kmax]; returns a list of (name, k, value, ok)."""
    from .verify import (
        DiscreteToyProblem,
        build_Q,
        check_cc_fixed_point,
        check_lemma1,
        check_rc_equivalence,
        check_theorem1,
        check_theorem2,
        check_theorem3,
    )

    rng = np.random.default_rng(seed)
    rows = []
    for k in range(2, kmax + 1):
        problems = [DiscreteToyProblem.random(int(rng.integers(1, 6)), k, rng) for _ in range(toys)]
        mass = max(abs(check_theorem1(t) - 1.0) for t in problems)
        rows.append(("total mass |sum p~ - 1|", k, mass, mass < 1e-10))
        contain = min(check_theorem2(t) for t in problems)
        rows.append(("containment p(y in Y | x, Y)", k, contain, abs(contain - 1.0) < 1e-12))
        half = abs(check_lemma1(k) - 0.5)
        rows.append(("|p(y in Y | x) - 1/2|", k, half, half <= 1e-15))
        dev = max(check_theorem3(t) for t in problems)
        rows.append(("conditional equivalence max dev", k, dev, dev < 1e-10))
        rank = build_Q(k).rank
        rows.append((f"rank(Q)={rank}", k, float(rank), rank == k))
        gap = 0.0
        for t in problems:
            r, r_rc = check_rc_equivalence(t, rng.normal(size=(t.m, k)))
            gap = max(gap, abs(r - r_rc))
        rows.append(("|R - R_rc|", k, gap, gap < 1e-10))
    toy = DiscreteToyProblem([0.5, 0.5], [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]])
    try:
        dev = check_cc_fixed_point(toy, 3, steps=20000, lr=0.5)
        rows.append(("CC fixed point max |g - p(y|x)|", 3, dev, dev < 1e-3))
    except NumericalError:
        rows.append(("CC fixed point max |g - p(y|x)|", 3, float("nan"), False))
    return rows


def cmd_verify(args) -> int:
    if not 2 <= args.kmax <= 10:
        raise UsageError(f"--kmax must lie in [2, 10], got {args.kmax}")
    rows = run_verify_suite(args.kmax, args.seed)
    width = max(len(r[0]) for r in rows)
    for name, k, value, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'}  k={k:<2d} {name:<{width}}  {value:.3e}")
    failed = sum(not r[3] for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# ---------------------------------------------------------------------------
# entropy

def cmd_entropy(args) -> int:
    if args.tmatrix:
        model = load_tmatrix(args.tmatrix)
    else:
        p = args.p if args.p is not None else uniform_inclusion_probability(args.uniform)
        model = TransitionMatrixModel.uniform(args.uniform, p)
    result = entropy_of_T(model)
    print(f"entropy: {result.entropy:.4f}")
    if args.uniform == 10 and args.p is None:
        print(f"note: reported value for the uniform model at k=10 is {REPORTED_UNIFORM_ENTROPY}; "
              f"the exact marginal gives {result.entropy:.4f}")
    with np.printoptions(precision=4, suppress=True, linewidth=120):
        print("P =")
        print(result.P)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pll", description="Partial-label learning toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="turn a supervised dataset into candidate label sets")
    g.add_argument("--in", dest="input", required=True, help="supervised CSV, or IDX images with --labels")
    g.add_argument("--labels", help="IDX labels file (makes --in an IDX images file)")
    g.add_argument("--k", type=int, help="number of classes (default: max label + 1)")
    g.add_argument("--out", required=True)
    g.add_argument("--model", default="uniform", help="uniform | tmatrix=<file.json>")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train with RC, CC or supervised loss")
    t.add_argument("--data", required=True, help="partial CSV")
    t.add_argument("--test", help="supervised CSV; omitted -> 90/10 resplit of --data per trial")
    t.add_argument("--method", choices=METHODS, default="rc")
    t.add_argument("--model", choices=MODELS, default="linear")
    t.add_argument("--trials", type=int, default=1)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=250)
    t.add_argument("--batch-size", type=int, default=256)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--wd", type=float, default=1e-5)
    t.add_argument("--hidden", type=int, default=500)
    t.add_argument("--validation-fraction", type=float, default=0.1)
    t.add_argument("--standardize", action="store_true", help="z-score features with training statistics")
    t.add_argument("--transductive", action="store_true", help="also report accuracy on the training instances")
    t.add_argument("--grid", action="store_true", help="search lr and wd over 1e-6..1e-1 by validation score")
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--out", help="append trial and summary JSON lines here")
    t.add_argument("--log-dir", help="write one per-epoch JSON-lines log per trial here")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("verify", help="run the exact oracle suite")
    v.add_argument("--kmax", type=int, default=8)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("entropy", help="entropy of a class transition matrix")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--tmatrix", help="JSON file {\"k\": int, \"T\": [[...]]}")
    src.add_argument("--uniform", type=int, metavar="K", help="constant off-diagonal T for K classes")
    e.add_argument("--p", type=float, help="off-diagonal value for --uniform (default: exact marginal)")
    e.set_defaults(func=cmd_entropy)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("PLL_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"pll: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"pll: invalid data: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"pll: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"pll: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except PLLError as e:
        print(f"pll: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
