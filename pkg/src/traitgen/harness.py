"""Synthetic corpora with planted trait signals and the evaluation pipeline.

Corpus construction: every document draws a latent 5-bit polarity vector
uniformly; each token is, with probability pi, a marker for a uniformly
chosen trait (high or low set per the latent bit) and otherwise a neutral
token. Within a marker set, tokens follow a fixed halving-weight profile
(common and rare markers, Zipf-like). Neutral tokens follow a mixture of
a uniform draw and a fixed successor chain. Both give the corpus
learnable structure without touching per-trait marker rates. The matched
lexicon has one category per marker set with weight +1 (high) or -1
(low) on its own trait, which makes lexicon scoring a direct readout of
the planted signal.

Evaluation mirrors the conditional-versus-unconditional protocol: for
each dimension and polarity, generate a batch of texts with that bit
pinned and the other four drawn uniformly per text, score them with the
lexicon, bucket against calibrated tertile thresholds, and tabulate the
level distribution next to a shared unconditional pool.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import (
    ConfigError,
    InsufficientDataError,
    MissingOracleError,
    ValidationError,
)
from .generator import BfpCondition, LstmModel, generate
from .lexicon import (
    Category,
    LevelThresholds,
    Lexicon,
    assign_levels,
    score_tokens,
)
from .numeric import Rng
from .textproc import Document
from .traits import HIGH, LEVELS, LOW, MEDIUM, TRAITS

# Neutral-chain shape: each neutral token has up to this many successors,
# spaced by a fixed stride so small vocabularies still get a spread.
NEUTRAL_CHAIN_FANOUT = 16
_CHAIN_STRIDE = 17

# Decoding temperature used by the evaluation harness. Tertile thresholds
# calibrated on a balanced two-cluster reference cap a distribution-faithful
# generator at 2/3 consistency, so evaluation sharpens the conditional
# distribution slightly to read out the planted signal.
EVAL_TEMPERATURE = 0.7

_UNCONDITIONAL_STREAM_BASE = 10


@dataclass
class SynthSpec:
    """Parameters of the planted-signal corpus generator."""

    neutral_tokens: list[str]
    markers: dict[str, dict[str, list[str]]]  # trait -> {"high": [...], "low": [...]}
    pi: float = 0.3
    len_min: int = 30
    len_max: int = 50
    neutral_bigram_smoothing: float = 0.55  # weight of the uniform mixture component

    def validate(self) -> None:
        if not 0.0 < self.pi <= 1.0:
            raise ValidationError(f"pi must be in (0, 1], got {self.pi}")
        if self.len_min < 4:
            raise ValidationError(f"len_min must be at least 4, got {self.len_min}")
        if self.len_max < self.len_min:
            raise ValidationError("len_max must be at least len_min")
        if not 0.0 <= self.neutral_bigram_smoothing <= 1.0:
            raise ValidationError("neutral_bigram_smoothing must lie in [0, 1]")
        if set(self.markers) != set(TRAITS):
            raise ValidationError(f"markers must cover exactly the traits {TRAITS}")
        sets = [("neutral", self.neutral_tokens)]
        for t in TRAITS:
            per_trait = self.markers[t]
            if set(per_trait) != {"high", "low"}:
                raise ValidationError(f"markers for trait {t} need 'high' and 'low' sets")
            sets.append((f"{t}_high", per_trait["high"]))
            sets.append((f"{t}_low", per_trait["low"]))
        seen: dict[str, str] = {}
        for name, tokens in sets:
            if not tokens:
                raise ValidationError(f"token set {name} is empty")
            for tok in tokens:
                if not tok or tok != tok.strip() or " " in tok:
                    raise ValidationError(f"token set {name} contains invalid token {tok!r}")
                if tok in seen:
                    raise ValidationError(
                        f"token {tok!r} appears in both {seen[tok]} and {name}"
                    )
                seen[tok] = name

    def all_tokens(self) -> list[str]:
        out = list(self.neutral_tokens)
        for t in TRAITS:
            out.extend(self.markers[t]["high"])
            out.extend(self.markers[t]["low"])
        return out

    def as_dict(self) -> dict:
        return {
            "pi": self.pi,
            "len_min": self.len_min,
            "len_max": self.len_max,
            "neutral_bigram_smoothing": self.neutral_bigram_smoothing,
            "neutral_tokens": list(self.neutral_tokens),
            "markers": {t: {k: list(v) for k, v in self.markers[t].items()} for t in TRAITS},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SynthSpec":
        try:
            spec = cls(
                neutral_tokens=list(payload["neutral_tokens"]),
                markers={
                    t: {"high": list(payload["markers"][t]["high"]),
                        "low": list(payload["markers"][t]["low"])}
                    for t in TRAITS
                },
                pi=float(payload.get("pi", 0.3)),
                len_min=int(payload.get("len_min", 30)),
                len_max=int(payload.get("len_max", 50)),
                neutral_bigram_smoothing=float(payload.get("neutral_bigram_smoothing", 0.55)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed corpus spec: {exc}") from exc
        spec.validate()
        return spec

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.as_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_synth_spec() -> SynthSpec:
    """340 neutral tokens plus 6 high and 6 low markers per trait."""
    markers = {
        t: {
            "high": [f"{t.lower()}hi{j}" for j in range(6)],
            "low": [f"{t.lower()}lo{j}" for j in range(6)],
        }
        for t in TRAITS
    }
    spec = SynthSpec(
        neutral_tokens=[f"w{i:03d}" for i in range(340)],
        markers=markers,
    )
    spec.validate()
    return spec


def _chain_successors(idx: int, n: int) -> list[int]:
    """Fixed successor set for neutral token idx; deduplicated, order stable."""
    seen: list[int] = []
    for j in range(NEUTRAL_CHAIN_FANOUT):
        s = (idx + 1 + _CHAIN_STRIDE * j) % n
        if s not in seen:
            seen.append(s)
    return seen


def _skewed_marker_index(rng: Rng, n: int) -> int:
    """Marker draw within a set: token j carries weight 2^(n-1-j).

    Word use is Zipf-like, so each marker set has common and rare members;
    the skew also gives the corpus learnable within-set structure without
    changing per-trait marker rates.
    """
    r = rng.randint((1 << n) - 1)
    acc = 0
    for j in range(n):
        acc += 1 << (n - 1 - j)
        if r < acc:
            return j
    return n - 1


def matched_lexicon(spec: SynthSpec) -> Lexicon:
    """One category per marker set, +1 / -1 weight on its own trait."""
    categories = []
    weights = []
    for ti, t in enumerate(TRAITS):
        for polarity, value in (("high", 1.0), ("low", -1.0)):
            categories.append(
                Category(
                    name=f"{t}_{polarity}",
                    literals=frozenset(spec.markers[t][polarity]),
                    prefixes=(),
                )
            )
            row = [0.0] * len(TRAITS)
            row[ti] = value
            weights.append(row)
    return Lexicon(categories, weights)


def _synth_document(spec: SynthSpec, rng: Rng) -> Document:
    bits = {t: rng.coin() for t in TRAITS}
    length = spec.len_min + rng.randint(spec.len_max - spec.len_min + 1)
    n_neutral = len(spec.neutral_tokens)
    tokens: list[str] = []
    prev_neutral: int | None = None
    for _ in range(length):
        if rng.random() < spec.pi:
            trait = TRAITS[rng.randint(len(TRAITS))]
            pool = spec.markers[trait]["high" if bits[trait] else "low"]
            tokens.append(pool[_skewed_marker_index(rng, len(pool))])
        else:
            if prev_neutral is None or rng.random() < spec.neutral_bigram_smoothing:
                idx = rng.randint(n_neutral)
            else:
                successors = _chain_successors(prev_neutral, n_neutral)
                idx = successors[rng.randint(len(successors))]
            tokens.append(spec.neutral_tokens[idx])
            prev_neutral = idx
    return Document(raw_text=" ".join(tokens), tokens=tokens, labels=bits)


def synth_corpus(spec: SynthSpec, n_docs: int, rng: Rng) -> tuple[list[Document], Lexicon]:
    """Generate a labeled corpus plus its matched lexicon.

    Document i is drawn entirely from ``rng.spawn(i)``, so corpora are
    byte-identical across runs and independent of any parallel schedule.
    """
    spec.validate()
    if n_docs < 0:
        raise ValidationError(f"n_docs must be non-negative, got {n_docs}")
    docs = [_synth_document(spec, rng.spawn(i)) for i in range(n_docs)]
    return docs, matched_lexicon(spec)


def oracle_label(doc: Document, spec: SynthSpec) -> dict[str, int]:
    """Ground-truth latent polarity vector stored at generation time."""
    if doc.labels is None:
        raise MissingOracleError("document carries no planted-label provenance")
    return dict(doc.labels)


def marker_count_label(tokens: Sequence[str], spec: SynthSpec) -> dict[str, int | None]:
    """Independent counting check: sign of (high hits - low hits) per trait.

    Returns None for a trait when the counts tie (including zero markers),
    meaning the check abstains.
    """
    out: dict[str, int | None] = {}
    for t in TRAITS:
        high = sum(tok in set(spec.markers[t]["high"]) for tok in tokens)
        low = sum(tok in set(spec.markers[t]["low"]) for tok in tokens)
        out[t] = None if high == low else int(high > low)
    return out


# ----------------------------------------------------------------- evaluation


@dataclass
class ConditionTally:
    counts: dict[str, int] = field(default_factory=lambda: {lv: 0 for lv in LEVELS})

    def add(self, level: str) -> None:
        self.counts[level] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def fractions(self) -> dict[str, float]:
        n = max(1, self.total)
        return {lv: self.counts[lv] / n for lv in LEVELS}


@dataclass
class DimensionReport:
    low_condition: ConditionTally
    high_condition: ConditionTally
    unconditional: ConditionTally

    @property
    def accuracy(self) -> float:
        total = self.low_condition.total + self.high_condition.total
        hits = self.low_condition.counts[LOW] + self.high_condition.counts[HIGH]
        return hits / max(1, total)


@dataclass
class EvalReport:
    dimensions: dict[str, DimensionReport]
    n_per_condition: int

    @property
    def average_accuracy(self) -> float:
        per_dim, average = generation_accuracy(self)
        return average

    def to_json_dict(self) -> dict:
        per_dim, average = generation_accuracy(self)
        return {
            "dimensions": {
                t: {
                    "low_condition": self.dimensions[t].low_condition.fractions(),
                    "high_condition": self.dimensions[t].high_condition.fractions(),
                    "unconditional": self.dimensions[t].unconditional.fractions(),
                    "accuracy": per_dim[t],
                }
                for t in TRAITS
            },
            "average_accuracy": average,
            "n_per_condition": self.n_per_condition,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def generation_accuracy(report: EvalReport) -> tuple[dict[str, float], float]:
    """Consistency between scored level and input polarity, per dimension.

    accuracy_d = (low-condition texts scoring Low + high-condition texts
    scoring High) / all conditional texts for d; the average is the mean
    over dimensions.
    """
    if not report.dimensions:
        raise InsufficientDataError("report contains no dimensions")
    per_dim = {}
    for t, dim in report.dimensions.items():
        if dim.low_condition.total + dim.high_condition.total == 0:
            raise InsufficientDataError(f"dimension {t} has no conditional texts")
        per_dim[t] = dim.accuracy
    average = sum(per_dim.values()) / len(per_dim)
    return per_dim, average


_TRAIT_NAMES = {
    "E": "Extraversion",
    "A": "Agreeableness",
    "C": "Conscientiousness",
    "N": "Neuroticism",
    "O": "Openness",
}


def render_table(report: EvalReport) -> str:
    """Plain-text table: one block per dimension, three condition rows."""
    per_dim, average = generation_accuracy(report)
    lines = [
        f"{'Dimension':<18}{'Condition':<15}{'Low':>8}{'Medium':>9}{'High':>8}",
        "-" * 58,
    ]
    for t in TRAITS:
        dim = report.dimensions[t]
        rows = [
            ("Low condition", dim.low_condition),
            ("High condition", dim.high_condition),
            ("Unconditional", dim.unconditional),
        ]
        for i, (label, tally) in enumerate(rows):
            name = _TRAIT_NAMES[t] if i == 0 else ""
            f = tally.fractions()
            lines.append(
                f"{name:<18}{label:<15}"
                f"{f[LOW]:>7.2%} {f[MEDIUM]:>8.2%} {f[HIGH]:>7.2%}"
            )
        lines.append(f"{'':<18}accuracy: {per_dim[t]:.2%}")
        lines.append("-" * 58)
    lines.append(f"average generation accuracy: {average:.2%}")
    return "\n".join(lines)


def evaluate_generation(
    model: LstmModel,
    baseline: LstmModel | None,
    lexicon: Lexicon,
    thresholds: LevelThresholds,
    n_per_condition: int,
    seed_pool: list[str],
    rng: Rng,
    *,
    temperature: float = EVAL_TEMPERATURE,
    max_len: int | None = None,
    collect: list | None = None,
) -> EvalReport:
    """Tabulate level distributions for every (dimension, polarity) batch.

    Text j of the batch for dimension d and polarity p uses the derived
    stream ``(d*2 + p) * n + j``; the shared unconditional pool uses
    streams ``10*n + j``. Results are therefore independent of evaluation
    order. The four unconstrained bits are redrawn uniformly per text.
    """
    if model.config.cond_dim != 5:
        raise ConfigError("evaluation needs a conditional model (cond_dim 5)")
    if baseline is None:
        raise ConfigError("unconditional rows requested but no baseline model given")
    if baseline.config.cond_dim != 0:
        raise ConfigError("baseline model must be unconditional (cond_dim 0)")
    if n_per_condition < 1:
        raise ConfigError(f"n_per_condition must be positive, got {n_per_condition}")

    report = EvalReport(
        dimensions={
            t: DimensionReport(ConditionTally(), ConditionTally(), ConditionTally())
            for t in TRAITS
        },
        n_per_condition=n_per_condition,
    )

    def score_levels(tokens: list[str]) -> dict[str, str]:
        return assign_levels(score_tokens(tokens, lexicon), thresholds)

    for di, trait in enumerate(TRAITS):
        for polarity in (0, 1):
            tally = (report.dimensions[trait].high_condition if polarity
                     else report.dimensions[trait].low_condition)
            for j in range(n_per_condition):
                stream = rng.spawn((di * 2 + polarity) * n_per_condition + j)
                bits = [stream.coin() for _ in TRAITS]
                bits[di] = polarity
                condition = BfpCondition(*bits)
                tokens = generate(model, condition, seed_pool, stream,
                                  temperature=temperature, max_len=max_len)
                levels = score_levels(tokens)
                tally.add(levels[trait])
                if collect is not None:
                    collect.append({
                        "dimension": trait,
                        "condition": condition.to_string(),
                        "text": " ".join(tokens),
                        "levels": levels,
                    })

    for j in range(n_per_condition):
        stream = rng.spawn(_UNCONDITIONAL_STREAM_BASE * n_per_condition + j)
        tokens = generate(baseline, None, seed_pool, stream,
                          temperature=temperature, max_len=max_len)
        levels = score_levels(tokens)
        for trait in TRAITS:
            report.dimensions[trait].unconditional.add(levels[trait])
        if collect is not None:
            collect.append({
                "dimension": None,
                "condition": None,
                "text": " ".join(tokens),
                "levels": levels,
            })
    return report
