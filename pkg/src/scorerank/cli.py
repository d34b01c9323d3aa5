"""Command-line entry point: simulate, rank, compare, fit, export, validate.

Every command is deterministic given its flags and seed; rerunning writes
byte-identical outputs (run metadata records the seed and a config hash, never
timestamps). Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import betafit, ingest, rankers, simgen, stats
from .domain import Dataset, Ranking, validate_dataset
from .simgen import load_market_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_METHOD_RUNNERS = {
    "m": lambda dist, dataset, per_year: rankers.rank_by_m(dist),
    "mplus": lambda dist, dataset, per_year: rankers.rank_by_m_plus(dist),
    "tournament": lambda dist, dataset, per_year: rankers.tournament(dataset, per_year).ranking,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> _Parser:
    parser = _Parser(prog="scorerank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic dataset from a market config")
    p.add_argument("--config", required=True, help="market config file (TOML)")
    p.add_argument("--n", required=True, type=_positive_int, help="number of students")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True, help="dataset CSV path; ground truth lands beside it")
    p.add_argument("--test-year", type=int, default=simgen.DEFAULT_TEST_YEAR)

    p = sub.add_parser("rank", help="rank programs from a dataset CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", default="m", help="comma list of m, mplus, tournament")
    p.add_argument("--out", default=".", help="output directory")
    _add_ingest_flags(p)
    p.add_argument("--normalization", choices=["candidate", "report"], default="candidate")
    p.add_argument("--no-per-year", action="store_true", help="pool tournament match-ups across years")

    p = sub.add_parser("tournament", help="shorthand for rank --method tournament")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=".")
    _add_ingest_flags(p)
    p.add_argument("--no-per-year", action="store_true")

    p = sub.add_parser("fit-beta", help="fit the covariate ranker on a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--features", required=True, help="CSV: program_id,<feature>...")
    p.add_argument("--out", default=".")
    _add_ingest_flags(p)
    p.add_argument("--normalization", choices=["candidate", "report"], default="candidate")
    p.add_argument("--box", default="-1:1", help="per-coordinate bounds lo:hi")
    p.add_argument("--iters", type=int, default=betafit.DEFAULT_MAX_ITERS)
    p.add_argument("--step-scale", type=float, default=betafit.DEFAULT_STEP_SCALE)
    p.add_argument("--min-bin-count", type=int, default=0, help="bin scores before fitting")

    p = sub.add_parser("compare", help="pairwise rank correlations between ranking files")
    p.add_argument("rankings", nargs="+", help="ranking CSV/JSON files (need at least 2)")
    p.add_argument("--top", type=int, default=0, help="restrict each ranking to its top K rows")
    p.add_argument("--out", default=None, help="optional JSON output path")

    p = sub.add_parser("export", help="plot-ready score distribution and heatmap TSVs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=".")
    _add_ingest_flags(p)
    p.add_argument("--normalization", choices=["candidate", "report"], default="candidate")
    p.add_argument("--programs", default="", help="comma list for the distribution panels")
    p.add_argument("--heatmap", action="store_true")
    p.add_argument("--heatmap-min-reports", type=int, default=stats.DEFAULT_HEATMAP_MIN_REPORTS)

    p = sub.add_parser("validate", help="report data-quality violations in a dataset CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--selection-cap", type=int, default=5)

    return parser


def _add_ingest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-reports", type=int, default=0, help="drop thinner programs (after other filters)")
    p.add_argument("--best-attempt", action="store_true", help="keep each retaker's best attempt")
    p.add_argument("--subgroup", default=None, help="e.g. citizen=0, major2=BusinessEcon, period=early:2011")
    p.add_argument("--year-range", default=None, help="inclusive label range, e.g. 2006:2010")
    p.add_argument("--strict-cap", action="store_true", help="error on attempts above the selection cap")


def _ingest_config(args) -> ingest.IngestConfig:
    year_range = None
    if args.year_range:
        lo, hi = args.year_range.split(":", 1)
        year_range = (int(lo), int(hi))
    subgroup = ingest.Subgroup.parse(args.subgroup) if args.subgroup else None
    return ingest.IngestConfig(
        min_reports_per_program=args.min_reports,
        best_attempt_only=args.best_attempt,
        year_range=year_range,
        subgroup=subgroup,
        strict_cap=args.strict_cap,
    )


def _load_dataset(args) -> Dataset:
    config = _ingest_config(args)
    dataset = ingest.parse_csv(args.input, config)
    return ingest.apply_filters(dataset, config)


def _write_metadata(out_dir: Path, command: str, args_doc: dict, seed=None, config_path=None) -> None:
    doc = {"command": command, "args": args_doc}
    if seed is not None:
        doc["seed"] = seed
    if config_path is not None:
        digest = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
        doc["config_sha256"] = digest
    (out_dir / "run_metadata.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _cmd_simulate(args) -> int:
    market = load_market_config(args.config)
    dataset = simgen.generate_dataset(market, args.n, args.seed, test_year=args.test_year)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ingest.write_csv(dataset, out)

    truth = market.ground_truth()
    truth_path = out.with_suffix(".truth.csv")
    threshold_of = {pid: float(t) for pid, t in zip(market.program_ids, market.thresholds)}
    lines = ["rank,program_id,threshold"]
    for k, pid in enumerate(truth.order, start=1):
        lines.append(f"{k},{pid},{threshold_of[pid]!r}")
    truth_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    _write_metadata(
        out.parent,
        "simulate",
        {"n": args.n, "test_year": args.test_year, "out": str(out)},
        seed=args.seed,
        config_path=args.config,
    )
    print(f"wrote {out} ({len(dataset)} reports) and {truth_path}")
    return EXIT_OK


def _cmd_rank(args, methods: list[str] | None = None) -> int:
    methods = methods or [m.strip() for m in args.method.split(",") if m.strip()]
    unknown = [m for m in methods if m not in _METHOD_RUNNERS]
    if unknown:
        raise ValueError(f"unknown method(s): {', '.join(unknown)}")
    dataset = _load_dataset(args)
    if not dataset.reports:
        raise ValueError("no reports left after filtering")
    normalization = rankers.Normalization(getattr(args, "normalization", "candidate"))
    dist = rankers.score_distribution(dataset, normalization)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    produced = {}
    for method in methods:
        ranking = _METHOD_RUNNERS[method](dist, dataset, not args.no_per_year)
        rankers.write_ranking_csv(ranking, out_dir / f"ranking_{method}.csv")
        rankers.write_ranking_json(ranking, out_dir / f"ranking_{method}.json")
        produced[method] = ranking
        print(f"ranking_{method}.csv: {len(ranking)} programs")

    if len(produced) > 1:
        matrix = {}
        names = list(produced)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                rho = stats.spearman(produced[a], produced[b])
                matrix[f"{a}~{b}"] = rho
                print(f"spearman {a} ~ {b}: {rho:.4f}")
        (out_dir / "spearman_summary.json").write_text(
            json.dumps(matrix, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    _write_metadata(out_dir, "rank", _public_args(args))
    return EXIT_OK


def _public_args(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in {"command", "func"}}


def _cmd_tournament(args) -> int:
    args.method = "tournament"
    return _cmd_rank(args, methods=["tournament"])


def _cmd_fit_beta(args) -> int:
    dataset = _load_dataset(args)
    if not dataset.reports:
        raise ValueError("no reports left after filtering")
    features = betafit.load_features_csv(args.features)
    normalization = rankers.Normalization(args.normalization)
    dist = rankers.score_distribution(dataset, normalization)
    if args.min_bin_count > 0:
        dist = betafit.bin_scores(dist, args.min_bin_count)

    lo, hi = (float(part) for part in args.box.split(":", 1))
    box = np.array([[lo, hi]] * features.n_features)
    model = betafit.fit(dist, features, box=box, max_iters=args.iters, step_scale=args.step_scale)
    ranking = betafit.rank_by_beta(model, features)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    betafit.write_model_json(model, out_dir / "beta_model.json")
    rankers.write_ranking_csv(ranking, out_dir / "ranking_beta.csv")
    rankers.write_ranking_json(ranking, out_dir / "ranking_beta.json")
    _write_metadata(out_dir, "fit-beta", _public_args(args))
    print(
        f"objective {model.objective_value:.6g} after {model.iterations_run} iterations; "
        f"wrote beta_model.json and ranking_beta.csv"
    )
    return EXIT_OK


def _read_ranking_file(path: str):
    if path.endswith(".json"):
        return rankers.read_ranking_json(path)
    return rankers.read_ranking_csv(path)


def _cmd_compare(args) -> int:
    if len(args.rankings) < 2:
        raise ValueError("compare needs at least two ranking files")
    loaded = []
    for path in args.rankings:
        ranking = _read_ranking_file(path)
        if args.top > 0:
            if args.top > len(ranking):
                print(
                    f"warning: --top {args.top} exceeds {len(ranking)} rows in {path}; using all",
                    file=sys.stderr,
                )
            ranking = Ranking(
                entries=ranking.entries[: args.top],
                method=ranking.method,
                tie_groups=tuple(
                    g for g in ranking.tie_groups if all(r <= args.top for r in g)
                ),
            )
        loaded.append((path, ranking))

    matrix = {}
    for i, (a, rank_a) in enumerate(loaded):
        for b, rank_b in loaded[i + 1 :]:
            rho = stats.spearman(rank_a, rank_b)
            matrix[f"{a}~{b}"] = rho
            print(f"spearman {a} ~ {b}: {rho:.4f}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(matrix, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def _cmd_export(args) -> int:
    dataset = _load_dataset(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    programs = [p for p in args.programs.split(",") if p]
    normalization = rankers.Normalization(args.normalization)
    stats.export_distributions(dataset, programs, out_dir / "distributions.tsv", normalization)
    print(f"wrote distributions.tsv ({len(programs)} program panels)")
    if args.heatmap:
        stats.export_heatmap(dataset, out_dir / "heatmap.tsv", min_reports=args.heatmap_min_reports)
        print("wrote heatmap.tsv")
    _write_metadata(out_dir, "export", _public_args(args))
    return EXIT_OK


def _cmd_validate(args) -> int:
    dataset = ingest.parse_csv(args.input)
    violations = validate_dataset(dataset, selection_cap=args.selection_cap)
    for v in violations:
        print(str(v))
    print(f"{len(violations)} violation(s) in {len(dataset)} reports")
    return EXIT_OK if not violations else EXIT_DATA


_COMMANDS = {
    "simulate": _cmd_simulate,
    "rank": _cmd_rank,
    "tournament": _cmd_tournament,
    "fit-beta": _cmd_fit_beta,
    "compare": _cmd_compare,
    "export": _cmd_export,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ingest.IngestError, ValueError, OSError, KeyError) as exc:
        print(f"scorerank {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
