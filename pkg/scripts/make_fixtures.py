"""Regenerate the synthetic ratings fixture and its hand-checkable expectations.

The expectations are computed with plain dicts and exact fractions, without
touching the package, so the ingestion tests compare against an independent
reference. ``movies.dat`` is written by hand and only read here.
"""
import argparse
import json
import random
from collections import defaultdict
from fractions import Fraction
from pathlib import Path

GENRES = [
    "action", "adventure", "animation", "children's", "comedy", "crime", "documentary", "drama", "fantasy",
    "film-noir", "horror", "IMAX", "musical", "mystery", "romance", "sci-fi", "thriller", "war", "western",
]
ALIAS = {"Children": "children's"}

# user: (number of ratings, movie pool); user 5 falls below the 20-rating minimum
PLAN = {
    1: (60, list(range(1, 21))),
    2: (50, list(range(1, 14))),
    3: (45, list(range(1, 21))),
    4: (30, [3, 4, 6, 10, 12, 15, 19]),
    5: (15, [5, 7, 17]),
}


def write_ratings(path, seed=20240611):
    rng = random.Random(seed)
    lines = []
    t = 838985046
    for u, (k, pool) in PLAN.items():
        # every pool movie once, then random repeats
        movies = list(pool) + [rng.choice(pool) for _ in range(k - len(pool))]
        for m in movies[:k]:
            t += rng.randint(1, 5000)
            lines.append(f"{u}::{m}::{rng.choice([1, 2, 3, 4, 5, 0.5, 1.5, 2.5, 3.5, 4.5])}::{t}")
    rng.shuffle(lines)
    path.write_text("\n".join(lines) + "\n")
    return len(lines)


def reference(movies_path, ratings_path, min_ratings=20):
    movies = {}
    for ln in movies_path.read_text().splitlines():
        mid, _, gs = ln.split("::")
        names = [ALIAS.get(g, g) for g in gs.split("|")]
        movies[int(mid)] = [next(k for k, x in enumerate(GENRES) if x.lower() == nm.lower()) for nm in names]
    counts = defaultdict(lambda: [0] * len(GENRES))
    nrat = defaultdict(int)
    ids = []
    for ln in ratings_path.read_text().splitlines():
        u, m, _, _ = ln.split("::")
        u, m = int(u), int(m)
        nrat[u] += 1
        ids.append((u, m))
        for g in movies[m]:
            counts[u][g] += 1
    kept = sorted(u for u in counts if nrat[u] >= min_ratings)
    q = {u: [Fraction(c, sum(counts[u])) for c in counts[u]] for u in kept}
    pop = [sum(q[u][k] for u in kept) / len(kept) for k in range(len(GENRES))]
    return {
        "n_ratings": len(ids),
        "user_id_sum": sum(u for u, _ in ids),
        "movie_id_sum": sum(m for _, m in ids),
        "ratings_per_user": {str(u): nrat[u] for u in sorted(nrat)},
        "kept_users": kept,
        "counts": {str(u): counts[u] for u in kept},
        "q": {str(u): [float(x) for x in q[u]] for u in kept},
        "population": [float(x) for x in pop],
        "eligible": [u for u in kept if all(x > 0 for x in q[u])],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--movies", type=Path, default=Path(__file__).parent.parent / "tests" / "fixtures" / "movies.dat")
    ap.add_argument("--out-dir", type=Path, default=Path(__file__).parent.parent / "tests" / "fixtures")
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    n = write_ratings(args.out_dir / "ratings.dat")
    out = reference(args.movies, args.out_dir / "ratings.dat")
    with open(args.out_dir / "expected.json", "w") as fh:
        json.dump(out, fh, indent=1)
    print(f"{n} ratings, users {out['ratings_per_user']}, eligible {out['eligible']}")


if __name__ == "__main__":
    main()
