"""Command-line front end.

Exit codes: 0 success, 1 failed self-check, 2 usage or domain error,
3 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DataError, FSPrivacyError, MalformedLine, PopulationDegenerate, SelfCheckFailed
from .experiments import (
    FIELDS,
    GridSpec,
    example_report,
    percentile_surfaces,
    population_stats,
    solution_record,
    surface,
    user_report,
)
from .movielens import GenreVocabulary, build_profiles, parse_movies, parse_ratings, positivity_filter, read_store, write_store
from .profile import Pmf, canonicalize
from .solver import InteriorPolicy, solve

DEFAULT_GRID = "rho:0:0.3:31,sigma:0:0.3:31"


def read_pmf(path) -> Pmf:
    """A PMF stored as a JSON array or as a single-column CSV (optional header)."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        try:
            return Pmf(json.loads(text))
        except json.JSONDecodeError as exc:
            raise MalformedLine(f"{path}: invalid JSON ({exc})") from None
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        cell = line.split(",")[0].strip()
        if not cell:
            continue
        try:
            values.append(float(cell))
        except ValueError:
            if lineno == 1:
                continue  # header
            raise MalformedLine(f"{path}: not a number: {cell!r}", lineno) from None
    return Pmf(values)


def _percentiles(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad percentile list {text!r}") from None
    if not vals or any(not 0 <= v <= 100 for v in vals):
        raise argparse.ArgumentTypeError("percentiles must lie in [0, 100]")
    return vals


def _rates(text: str) -> list[tuple[float, float]]:
    try:
        pairs = [tuple(float(x) for x in part.split(":")) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rate list {text!r}") from None
    if not pairs or any(len(p) != 2 for p in pairs):
        raise argparse.ArgumentTypeError("rates are given as RHO:SIGMA[,RHO:SIGMA...]")
    return pairs


def _pct_label(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else repr(p)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_example(args) -> int:
    text, ok = example_report()
    sys.stdout.write(text)
    if not ok:
        raise SelfCheckFailed("worked example deviates from the published values")
    return 0


def cmd_solve(args) -> int:
    view = canonicalize(read_pmf(args.q), read_pmf(args.p))
    sol = solve(view, args.rho, args.sigma, args.interior_policy)
    rec = solution_record(view, sol)
    if args.format == "csv":
        lines = ["category,r,s,t,t_over_p"]
        for k in range(view.n):
            lines.append(f"{k},{rec['r'][k]!r},{rec['s'][k]!r},{rec['t'][k]!r},{rec['t_over_p'][k]!r}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(json.dumps(rec, indent=2) + "\n", args.out)
    return 0


def cmd_surface(args) -> int:
    view = canonicalize(read_pmf(args.q), read_pmf(args.p))
    grid = surface(view, GridSpec.parse(args.grid), {"q": str(args.q), "p": str(args.p)})
    if args.format == "json":
        doc = {"rho": grid.rho_axis.tolist(), "sigma": grid.sigma_axis.tolist(), "risk": grid.values.tolist()}
        _emit(json.dumps(doc) + "\n", args.out)
    else:
        _emit(grid.to_csv(), args.out)
    return 0


def cmd_percentiles(args) -> int:
    store = read_store(args.store)
    surfaces = percentile_surfaces(store, GridSpec.parse(args.grid), args.percentiles, args.jobs)
    if args.format == "json":
        doc = {
            _pct_label(p): {"rho": g.rho_axis.tolist(), "sigma": g.sigma_axis.tolist(), "reduction": g.values.tolist()}
            for p, g in surfaces.items()
        }
        _emit(json.dumps(doc) + "\n", args.out)
    elif args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for p, g in surfaces.items():
            (out / f"percentile_{_pct_label(p)}.csv").write_text(g.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write("\n".join(f"# percentile {_pct_label(p)}\n{g.to_csv()}" for p, g in surfaces.items()))
    return 0


def cmd_population_stats(args) -> int:
    stats = population_stats(read_store(args.store))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in FIELDS[1:]:
            (out / f"hist_{name}.csv").write_text(stats.histogram_csv(name, args.bin_width), encoding="utf-8")
        lines = ["user_id," + ",".join(FIELDS)]
        lines += [f"{r.user_id}," + ",".join(repr(getattr(r, f)) for f in FIELDS) for r in stats.records]
        (out / "users.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _emit(json.dumps(stats.summary(), indent=2) + "\n", args.out)
    return 0


def cmd_user_report(args) -> int:
    report = user_report(read_store(args.store), args.user, args.rates, args.interior_policy)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0


def cmd_ingest(args) -> int:
    vocab = GenreVocabulary()
    movies = parse_movies(args.movies, vocab, ignore_unknown=args.ignore_unknown_genres)
    profiles = build_profiles(
        parse_ratings(args.ratings),
        movies,
        vocab,
        min_ratings=args.min_ratings,
        smoothing=args.smoothing,
        genre_weight=args.genre_weight,
        skip_unknown_movies=args.skip_unknown_movies,
    )
    write_store(profiles, args.out)
    try:
        eligible = len(positivity_filter(profiles))
        zero_genres = []
    except PopulationDegenerate:
        eligible = 0
        zero_genres = [g for g, m in zip(profiles.vocab.names, profiles.population.mass) if m <= 0]
    summary = {
        "store": str(args.out),
        "movies": len(movies),
        "unknown_genre_tokens": dict(movies.unknown_tokens),
        "skipped_ratings": profiles.skipped_ratings,
        "profile_users": profiles.total_users,
        "eligible_users": eligible,
        "population_zero_genres": zero_genres,
        "genre_weight": profiles.genre_weight,
        "smoothing": profiles.smoothing,
    }
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fsprivacy", description="Optimal rating forgery and suppression.")
    sub = ap.add_subparsers(dest="command", required=True)

    def policy(p):
        p.add_argument("--interior-policy", choices=[x.value for x in InteriorPolicy], default="exact")

    def fmt(p, default="json"):
        p.add_argument("--format", choices=["json", "csv"], default=default)
        p.add_argument("--out", type=Path, help="write to this file instead of stdout")

    p = sub.add_parser("example", help="run and self-check the three-category worked example")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("solve", help="optimal strategy for one profile pair")
    p.add_argument("q", type=Path, help="user profile (JSON array or one-column CSV)")
    p.add_argument("p", type=Path, help="reference profile")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    policy(p)
    fmt(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("surface", help="minimum risk over a (rho, sigma) grid")
    p.add_argument("q", type=Path)
    p.add_argument("p", type=Path)
    p.add_argument("--grid", default="rho:0:1:141,sigma:0:0.7:141")
    fmt(p, "csv")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("percentiles", help="percentile surfaces of relative risk reduction")
    p.add_argument("store", type=Path, help="profile store written by 'ingest'")
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--percentiles", type=_percentiles, default=[10.0, 50.0, 90.0])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", type=Path, help="write percentile_<P>.csv files here")
    fmt(p, "csv")
    p.set_defaults(func=cmd_percentiles)

    p = sub.add_parser("population-stats", help="decrement factors and critical rates across users")
    p.add_argument("store", type=Path)
    p.add_argument("--bin-width", type=float, default=0.25)
    p.add_argument("--out-dir", type=Path, help="write histogram and per-user CSVs here")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_population_stats)

    p = sub.add_parser("user-report", help="solutions for one user at several rate pairs")
    p.add_argument("store", type=Path)
    p.add_argument("--user", type=int, required=True)
    p.add_argument("--rates", type=_rates, default=[(0.03, 0.04), (0.06, 0.08), (0.11, 0.12), (0.18, 0.15)])
    p.add_argument("--out", type=Path)
    policy(p)
    p.set_defaults(func=cmd_user_report)

    p = sub.add_parser("ingest", help="build a profile store from movies.dat and ratings.dat")
    p.add_argument("--movies", type=Path, required=True)
    p.add_argument("--ratings", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--min-ratings", type=int, default=20)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--genre-weight", choices=["full", "fractional"], default="full")
    p.add_argument("--ignore-unknown-genres", action="store_true")
    p.add_argument("--skip-unknown-movies", action="store_true")
    p.set_defaults(func=cmd_ingest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FSPrivacyError as exc:
        print(f"fsprivacy: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fsprivacy: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
