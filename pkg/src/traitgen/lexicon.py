"""LIWC-style lexicon scoring and three-level trait bucketing.

A lexicon is a list of named word categories (literal entries plus
``prefix*`` wildcards) and a category-by-trait weight matrix. Scoring a
document means counting category hits per token, normalising by document
length, and mapping the frequency vector through the weight matrix. The
resulting linear scores are bucketed into low/medium/high levels via
thresholds calibrated as nearest-rank percentiles over a reference corpus.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InsufficientDataError, ValidationError
from .traits import HIGH, LOW, MEDIUM, TRAITS


@dataclass(frozen=True)
class Category:
    name: str
    literals: frozenset[str]
    prefixes: tuple[str, ...]

    def matches(self, token: str) -> bool:
        # a literal hit takes precedence but contributes the same single count
        if token in self.literals:
            return True
        return any(token.startswith(p) for p in self.prefixes)


class Lexicon:
    """Immutable category list plus a C x 5 trait weight matrix."""

    def __init__(self, categories: Sequence[Category], weights: Sequence[Sequence[float]]):
        names = [c.name for c in categories]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate category names: {dupes}")
        if len(weights) != len(categories):
            raise ValidationError(
                f"weight matrix has {len(weights)} rows for {len(categories)} categories"
            )
        for name, row in zip(names, weights):
            if len(row) != len(TRAITS):
                raise ValidationError(
                    f"weight row for category {name!r} has {len(row)} entries, expected {len(TRAITS)}"
                )
        self.categories = list(categories)
        self.weights = [[float(v) for v in row] for row in weights]

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    def all_entry_tokens(self) -> set[str]:
        """Literal entries plus wildcard stems, for vocabulary-overlap checks."""
        out: set[str] = set()
        for cat in self.categories:
            out |= cat.literals
            out |= set(cat.prefixes)
        return out


def _parse_entries(name: str, entries: Iterable[str]) -> Category:
    literals: set[str] = set()
    prefixes: set[str] = set()
    for entry in entries:
        if not isinstance(entry, str) or not entry:
            raise ValidationError(f"category {name!r} contains an empty entry")
        if entry.endswith("*"):
            stem = entry[:-1]
            if not stem:
                raise ValidationError(f"category {name!r} has a bare wildcard entry")
            prefixes.add(stem)
        else:
            literals.add(entry)
    return Category(name=name, literals=frozenset(literals), prefixes=tuple(sorted(prefixes)))


def lexicon_from_dict(payload: dict) -> Lexicon:
    """Validate and build a lexicon from its JSON document form."""
    if not isinstance(payload, dict):
        raise ValidationError("lexicon document must be a JSON object")
    order = payload.get("trait_order")
    if order != list(TRAITS):
        raise ValidationError(f"trait_order must be {list(TRAITS)}, got {order}")
    raw_categories = payload.get("categories")
    weights = payload.get("weights")
    if not isinstance(raw_categories, list) or not raw_categories:
        raise ValidationError("lexicon needs a non-empty 'categories' list")
    if not isinstance(weights, list):
        raise ValidationError("lexicon needs a 'weights' matrix")
    categories = []
    for item in raw_categories:
        if not isinstance(item, dict) or "name" not in item or "entries" not in item:
            raise ValidationError("each category needs 'name' and 'entries'")
        categories.append(_parse_entries(item["name"], item["entries"]))
    return Lexicon(categories, weights)


def load_lexicon(path: str | Path) -> Lexicon:
    with open(path, encoding="utf-8") as fh:
        return lexicon_from_dict(json.load(fh))


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    payload = {
        "trait_order": list(TRAITS),
        "categories": [
            {"name": c.name, "entries": sorted(c.literals) + [p + "*" for p in c.prefixes]}
            for c in lexicon.categories
        ],
        "weights": lexicon.weights,
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def category_frequencies(tokens: Sequence[str], lexicon: Lexicon) -> list[float]:
    """Per-category hit counts normalised by total token count.

    A token may match several categories and is counted once in each.
    An empty token list yields the zero vector.
    """
    total = len(tokens)
    counts = [0] * lexicon.num_categories
    for token in tokens:
        for ci, cat in enumerate(lexicon.categories):
            if cat.matches(token):
                counts[ci] += 1
    return [c / max(1, total) for c in counts]


@dataclass(frozen=True)
class TraitScores:
    e: float
    a: float
    c: float
    n: float
    o: float

    def as_dict(self) -> dict[str, float]:
        return dict(zip(TRAITS, (self.e, self.a, self.c, self.n, self.o)))

    def __getitem__(self, trait: str) -> float:
        return self.as_dict()[trait]


def trait_scores(freqs: Sequence[float], lexicon: Lexicon) -> TraitScores:
    """Linear map of category frequencies through the weight matrix."""
    if len(freqs) != lexicon.num_categories:
        raise ValidationError(
            f"{len(freqs)} frequencies for {lexicon.num_categories} categories"
        )
    sums = [0.0] * len(TRAITS)
    for f, row in zip(freqs, lexicon.weights):
        for j in range(len(TRAITS)):
            sums[j] += f * row[j]
    if not all(math.isfinite(s) for s in sums):
        raise ValidationError("trait scores are not finite")
    return TraitScores(*sums)


def score_tokens(tokens: Sequence[str], lexicon: Lexicon) -> TraitScores:
    return trait_scores(category_frequencies(tokens, lexicon), lexicon)


def scores_by_trait(
    token_lists: Iterable[Sequence[str]], lexicon: Lexicon
) -> dict[str, list[float]]:
    """Score many documents and group the results per trait (calibration input)."""
    out: dict[str, list[float]] = {t: [] for t in TRAITS}
    for tokens in token_lists:
        scores = score_tokens(tokens, lexicon).as_dict()
        for t in TRAITS:
            out[t].append(scores[t])
    return out


@dataclass(frozen=True)
class LevelThresholds:
    """Per-trait (low_cut, high_cut) pairs with low_cut <= high_cut."""

    cuts: dict[str, tuple[float, float]]

    def __post_init__(self) -> None:
        if set(self.cuts) != set(TRAITS):
            raise ValidationError(f"thresholds must cover exactly the traits {TRAITS}")
        for t, (lo, hi) in self.cuts.items():
            if not (lo <= hi):
                raise ValidationError(f"trait {t}: low_cut {lo} exceeds high_cut {hi}")

    def as_dict(self) -> dict:
        return {
            t: {"low_cut": self.cuts[t][0], "high_cut": self.cuts[t][1]} for t in TRAITS
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LevelThresholds":
        try:
            cuts = {
                t: (float(payload[t]["low_cut"]), float(payload[t]["high_cut"]))
                for t in TRAITS
            }
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed thresholds document: {exc}") from exc
        return cls(cuts)


def save_thresholds(thresholds: LevelThresholds, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(thresholds.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_thresholds(path: str | Path) -> LevelThresholds:
    with open(path, encoding="utf-8") as fh:
        return LevelThresholds.from_dict(json.load(fh))


def _nearest_rank(sorted_scores: list[float], p: float) -> float:
    """The ceil(p * N)-th smallest value (1-indexed nearest-rank percentile)."""
    n = len(sorted_scores)
    rank = max(1, math.ceil(p * n))
    return sorted_scores[min(rank, n) - 1]


def calibrate_thresholds(
    scores_per_trait: dict[str, Sequence[float]],
    p_low: float = 1.0 / 3.0,
    p_high: float = 2.0 / 3.0,
) -> LevelThresholds:
    """Nearest-rank percentile cuts per trait; needs at least 3 scores each."""
    cuts = {}
    for t in TRAITS:
        scores = list(scores_per_trait.get(t, ()))
        if len(scores) < 3:
            raise InsufficientDataError(
                f"trait {t}: need at least 3 scores to calibrate, got {len(scores)}"
            )
        ordered = sorted(scores)
        cuts[t] = (_nearest_rank(ordered, p_low), _nearest_rank(ordered, p_high))
    return LevelThresholds(cuts)


def assign_levels(scores: TraitScores, thresholds: LevelThresholds) -> dict[str, str]:
    """Bucket each trait score; boundary values are Medium."""
    levels = {}
    for t, value in scores.as_dict().items():
        lo, hi = thresholds.cuts[t]
        if value < lo:
            levels[t] = LOW
        elif value > hi:
            levels[t] = HIGH
        else:
            levels[t] = MEDIUM
    return levels
