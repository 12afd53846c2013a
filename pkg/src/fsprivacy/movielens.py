"""MovieLens ``::``-delimited files to per-user genre profiles.

A user's profile counts, for every rating, each genre of the rated movie
(``full`` weighting) or ``1/|genres|`` of each (``fractional``). The
population profile is the unweighted mean of the user PMFs.
"""
from __future__ import annotations

import io
import json
import os
from array import array
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np
from scipy import sparse

from .errors import (
    DimensionMismatch,
    EmptyPopulation,
    InvariantViolation,
    MalformedLine,
    PopulationDegenerate,
    UnknownGenre,
    UnknownMovie,
)
from .profile import Pmf

DEFAULT_GENRES = (
    "action",
    "adventure",
    "animation",
    "children's",
    "comedy",
    "crime",
    "documentary",
    "drama",
    "fantasy",
    "film-noir",
    "horror",
    "IMAX",
    "musical",
    "mystery",
    "romance",
    "sci-fi",
    "thriller",
    "war",
    "western",
)

STORE_SCHEMA = "fsprivacy.profiles"
STORE_VERSION = 1


def _key(token: str) -> str:
    return token.strip().lower().replace("'", "")


@dataclass(frozen=True)
class GenreVocabulary:
    """Ordered genre names. Lookups ignore case and apostrophes, and a
    trailing possessive is optional (``Children`` matches ``children's``)."""

    names: tuple[str, ...] = DEFAULT_GENRES
    _lookup: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.names)
        if not names:
            raise DimensionMismatch("a genre vocabulary needs at least one name")
        lookup = {}
        for k, name in enumerate(names):
            keys = {_key(name)}
            if name.endswith("'s"):
                keys.add(_key(name[:-2]))
            for key in keys:
                if key in lookup:
                    raise DimensionMismatch(f"genre {name!r} collides with {names[lookup[key]]!r}")
                lookup[key] = k
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "_lookup", lookup)

    @property
    def n(self) -> int:
        return len(self.names)

    def __len__(self):
        return len(self.names)

    def index(self, token: str) -> int | None:
        return self._lookup.get(_key(token))


@dataclass(frozen=True)
class RatingRecord:
    user_id: int
    movie_id: int
    rating: float
    timestamp: int


@dataclass
class MovieCatalog:
    """Genre indices per movie id, plus the tokens dropped as unknown."""

    genres: dict[int, tuple[int, ...]]
    unknown_tokens: Counter = field(default_factory=Counter)

    def __len__(self):
        return len(self.genres)

    def __getitem__(self, movie_id: int) -> tuple[int, ...]:
        return self.genres[movie_id]

    def __contains__(self, movie_id) -> bool:
        return movie_id in self.genres

    @property
    def skipped(self) -> int:
        return sum(self.unknown_tokens.values())


def _lines(source) -> Iterator[str]:
    """Decoded lines from a path, a binary or text stream, or an iterable of lines."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            yield from _lines(fh)
        return
    for raw in source:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        yield raw.rstrip("\r\n")


def parse_movies(source, vocab: GenreVocabulary | None = None, ignore_unknown: bool = False) -> MovieCatalog:
    vocab = vocab or GenreVocabulary()
    catalog = MovieCatalog({})
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        parts = line.split("::")
        if len(parts) < 3:
            raise MalformedLine(f"expected MovieID::Title::Genres, got {line!r}", lineno)
        try:
            movie_id = int(parts[0])
        except ValueError:
            raise MalformedLine(f"bad movie id {parts[0]!r}", lineno) from None
        if movie_id < 0:
            raise MalformedLine(f"negative movie id {movie_id}", lineno)
        if movie_id in catalog.genres:
            raise MalformedLine(f"duplicate movie id {movie_id}", lineno)
        idx = []
        for token in parts[-1].split("|"):
            k = vocab.index(token)
            if k is None:
                if not ignore_unknown:
                    raise UnknownGenre(f"line {lineno}: unknown genre {token!r} for movie {movie_id}")
                catalog.unknown_tokens[token.strip()] += 1
            elif k not in idx:
                idx.append(k)
        catalog.genres[movie_id] = tuple(sorted(idx))
    return catalog


def parse_ratings(source) -> Iterator[RatingRecord]:
    """Stream ``UserID::MovieID::Rating::Timestamp`` records in file order."""
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        parts = line.split("::")
        if len(parts) != 4:
            raise MalformedLine(f"expected 4 fields, got {len(parts)}", lineno)
        try:
            rec = RatingRecord(int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError:
            raise MalformedLine(f"unparsable rating line {line!r}", lineno) from None
        if rec.user_id < 0 or rec.movie_id < 0:
            raise MalformedLine("ids must be nonnegative", lineno)
        yield rec


@dataclass(frozen=True)
class UserProfileSet:
    """Rows of ``counts`` and ``q`` follow ``user_ids`` (ascending)."""

    vocab: GenreVocabulary
    user_ids: np.ndarray
    counts: np.ndarray
    q: np.ndarray
    population: Pmf
    total_users: int
    min_ratings: int = 20
    smoothing: float = 0.0
    genre_weight: str = "full"
    skipped_ratings: int = 0

    def __len__(self):
        return int(self.user_ids.size)

    def row(self, user_id: int) -> int | None:
        k = int(np.searchsorted(self.user_ids, user_id))
        if k < self.user_ids.size and self.user_ids[k] == user_id:
            return k
        return None

    @property
    def eligible_users(self) -> list[int]:
        return positivity_filter(self)


def _genre_matrix(catalog: MovieCatalog, movie_index: dict, n: int, weight: str):
    rows, cols, vals = [], [], []
    for movie_id, col in movie_index.items():
        gs = catalog.genres[movie_id]
        w = 1.0 if weight == "full" else 1.0 / max(len(gs), 1)
        for g in gs:
            rows.append(col)
            cols.append(g)
            vals.append(w)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(movie_index), n))


def build_profiles(
    ratings: Iterable[RatingRecord],
    movies: MovieCatalog,
    vocab: GenreVocabulary | None = None,
    min_ratings: int = 20,
    smoothing: float = 0.0,
    genre_weight: str = "full",
    skip_unknown_movies: bool = False,
) -> UserProfileSet:
    """Aggregate ratings into genre counts per user.

    Users with fewer than ``min_ratings`` ratings are dropped, as are users
    whose rated movies carry no genre at all (their profile is undefined).
    """
    vocab = vocab or GenreVocabulary()
    if genre_weight not in ("full", "fractional"):
        raise InvariantViolation(f"genre_weight must be 'full' or 'fractional', got {genre_weight!r}")
    if not smoothing >= 0:
        raise InvariantViolation("smoothing must be nonnegative")
    users = array("q")
    items = array("q")
    movie_index: dict[int, int] = {}
    skipped = 0
    for rec in ratings:
        if rec.movie_id not in movies:
            if not skip_unknown_movies:
                raise UnknownMovie(f"rating by user {rec.user_id} references unknown movie {rec.movie_id}")
            skipped += 1
            continue
        users.append(rec.user_id)
        items.append(movie_index.setdefault(rec.movie_id, len(movie_index)))

    uids = np.frombuffer(users, dtype=np.int64) if len(users) else np.zeros(0, dtype=np.int64)
    mids = np.frombuffer(items, dtype=np.int64) if len(items) else np.zeros(0, dtype=np.int64)
    user_ids, user_row = np.unique(uids, return_inverse=True)
    total_users = int(user_ids.size)
    hits = sparse.csr_matrix(
        (np.ones(uids.size), (user_row, mids)), shape=(total_users, len(movie_index))
    )
    counts = np.asarray((hits @ _genre_matrix(movies, movie_index, vocab.n, genre_weight)).todense())
    if genre_weight == "full":
        counts = np.rint(counts)

    n_ratings = np.bincount(user_row, minlength=total_users)
    keep = (n_ratings >= min_ratings) & (counts.sum(axis=1) > 0)
    user_ids, counts = user_ids[keep], counts[keep]
    if user_ids.size == 0:
        raise EmptyPopulation("no user meets the minimum-ratings requirement")
    smoothed = counts + smoothing
    q = smoothed / smoothed.sum(axis=1, keepdims=True)
    return UserProfileSet(
        vocab=vocab,
        user_ids=user_ids,
        counts=counts,
        q=q,
        population=Pmf(q.mean(axis=0)),
        total_users=int(user_ids.size),
        min_ratings=min_ratings,
        smoothing=smoothing,
        genre_weight=genre_weight,
        skipped_ratings=skipped,
    )


def positivity_filter(profiles: UserProfileSet) -> list[int]:
    """Ids of users whose profile is strictly positive in every genre."""
    zero = np.flatnonzero(profiles.population.mass <= 0)
    if zero.size:
        names = [profiles.vocab.names[k] for k in zero]
        raise PopulationDegenerate(f"population profile is zero for {names}")
    ok = np.all(profiles.q > 0, axis=1)
    return [int(u) for u in profiles.user_ids[ok]]


def _num(x: float):
    return int(x) if float(x).is_integer() else float(x)


def write_store(profiles: UserProfileSet, dest) -> None:
    """Write a profile set as JSON lines: header, population, one line per user."""
    own = isinstance(dest, (str, os.PathLike))
    fh: IO[str] = open(dest, "w", encoding="utf-8") if own else dest
    try:
        header = {
            "schema": STORE_SCHEMA,
            "version": STORE_VERSION,
            "genres": list(profiles.vocab.names),
            "total_users": profiles.total_users,
            "min_ratings": profiles.min_ratings,
            "smoothing": profiles.smoothing,
            "genre_weight": profiles.genre_weight,
            "skipped_ratings": profiles.skipped_ratings,
        }
        fh.write(json.dumps(header) + "\n")
        fh.write(json.dumps({"population": profiles.population.tolist()}) + "\n")
        for uid, c, q in zip(profiles.user_ids, profiles.counts, profiles.q):
            rec = {"user_id": int(uid), "counts": [_num(x) for x in c], "q": q.tolist()}
            fh.write(json.dumps(rec) + "\n")
    finally:
        if own:
            fh.close()


def read_store(source) -> UserProfileSet:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return read_store(fh)
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    lines = [ln for ln in source if ln.strip()]
    if len(lines) < 2:
        raise MalformedLine("profile store needs a header and a population line", len(lines) + 1)
    try:
        header = json.loads(lines[0])
        pop = json.loads(lines[1])["population"]
        recs = [json.loads(ln) for ln in lines[2:]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MalformedLine(f"profile store is not valid: {exc}") from None
    if header.get("schema") != STORE_SCHEMA or header.get("version") != STORE_VERSION:
        raise MalformedLine(f"unsupported store schema {header.get('schema')!r} v{header.get('version')}", 1)
    vocab = GenreVocabulary(tuple(header["genres"]))
    n = vocab.n
    ids = np.array([r["user_id"] for r in recs], dtype=np.int64)
    counts = np.array([r["counts"] for r in recs], dtype=float).reshape(len(recs), n)
    q = np.array([r["q"] for r in recs], dtype=float).reshape(len(recs), n)
    if ids.size and np.any(np.diff(ids) <= 0):
        raise MalformedLine("user ids in a profile store must be strictly increasing", 3)
    return UserProfileSet(
        vocab=vocab,
        user_ids=ids,
        counts=counts,
        q=q,
        population=Pmf(pop),
        total_users=int(header["total_users"]),
        min_ratings=int(header["min_ratings"]),
        smoothing=float(header["smoothing"]),
        genre_weight=header["genre_weight"],
        skipped_ratings=int(header.get("skipped_ratings", 0)),
    )
