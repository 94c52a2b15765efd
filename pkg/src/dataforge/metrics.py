"""Evaluation metrics with mergeable partial state.

Each metric accumulates sufficient statistics only; scores appear when
:meth:`Metric.compute` runs. Splitting the pairs across any number of
states and merging them (in any tree shape) reproduces the single-pass
statistics exactly, since merging is a field-wise sum of counters.

BLEU tokenizes with the same rule as the search index (lowercase, keep
alphanumeric runs). That choice is load-bearing: BLEU values are only
comparable under one tokenizer, so it is pinned here and versioned with
the metric.
"""

from __future__ import annotations

import json
from collections import Counter
from math import exp, log
from typing import Any, Sequence as Seq

from .errors import EmptyState, LengthMismatch, MetricMismatch, WrongType
from .index import tokenize

MAX_ORDER = 4  # BLEU n-gram orders 1..4


class Metric:
    """Base: id + version identify the statistic; params refine it."""

    id: str = ""
    version: str = "1"

    def params(self) -> dict:
        return {}

    # -- update ------------------------------------------------------------

    def add(self, prediction, reference) -> None:
        raise NotImplementedError

    def add_batch(self, predictions: Seq, references: Seq) -> None:
        if len(predictions) != len(references):
            raise LengthMismatch(
                f"{len(predictions)} predictions vs {len(references)} references"
            )
        for p, r in zip(predictions, references):
            self.add(p, r)

    # -- merge -------------------------------------------------------------

    def _check_mergeable(self, other: "Metric") -> None:
        if (
            type(other) is not type(self)
            or other.id != self.id
            or other.version != self.version
            or other.params() != self.params()
        ):
            raise MetricMismatch(
                f"cannot merge {other.id} v{other.version} {other.params()} "
                f"into {self.id} v{self.version} {self.params()}"
            )

    def merge(self, other: "Metric") -> None:
        raise NotImplementedError

    # -- finalize ----------------------------------------------------------

    def compute(self) -> dict:
        raise NotImplementedError

    # -- state serialization ------------------------------------------------

    def state_obj(self) -> dict:
        raise NotImplementedError

    def load_state_obj(self, obj: dict) -> None:
        raise NotImplementedError

    def state_json(self) -> str:
        # python float repr is shortest-round-trip, so dumps is bit-stable
        return json.dumps(
            {"id": self.id, "version": self.version, "params": self.params(),
             "state": self.state_obj()},
            sort_keys=True,
        )


def merge(a: Metric, b: Metric) -> Metric:
    """Functional merge: a fresh state holding a's and b's sums."""
    out = type(a)(**a._ctor_params())
    out.merge(a)
    out.merge(b)
    return out


class Accuracy(Metric):
    id = "accuracy"

    def __init__(self):
        self.correct = 0
        self.total = 0

    def _ctor_params(self):
        return {}

    def add(self, prediction, reference) -> None:
        self.correct += int(prediction == reference)
        self.total += 1

    def merge(self, other: "Accuracy") -> None:
        self._check_mergeable(other)
        self.correct += other.correct
        self.total += other.total

    def compute(self) -> dict:
        if self.total == 0:
            raise EmptyState("no pairs added")
        return {"accuracy": self.correct / self.total, "total": self.total}

    def state_obj(self) -> dict:
        return {"correct": self.correct, "total": self.total}

    def load_state_obj(self, obj: dict) -> None:
        self.correct, self.total = obj["correct"], obj["total"]


class ExactMatch(Metric):
    """Strict string equality, no normalization of any kind."""

    id = "exact_match"

    def __init__(self):
        self.matches = 0
        self.total = 0

    def _ctor_params(self):
        return {}

    def add(self, prediction, reference) -> None:
        if not isinstance(prediction, str) or not isinstance(reference, str):
            raise WrongType("exact_match compares strings")
        self.matches += int(prediction == reference)
        self.total += 1

    def merge(self, other: "ExactMatch") -> None:
        self._check_mergeable(other)
        self.matches += other.matches
        self.total += other.total

    def compute(self) -> dict:
        if self.total == 0:
            raise EmptyState("no pairs added")
        return {"exact_match": self.matches / self.total, "total": self.total}

    def state_obj(self) -> dict:
        return {"matches": self.matches, "total": self.total}

    def load_state_obj(self, obj: dict) -> None:
        self.matches, self.total = obj["matches"], obj["total"]


class F1(Metric):
    """Per-class confusion counts; binary F1 for one positive label plus
    macro-F1 over every label seen."""

    id = "f1"

    def __init__(self, positive_label: Any = 1):
        self.positive_label = positive_label
        self.stats: dict[Any, list[int]] = {}  # label -> [tp, fp, fn]

    def _ctor_params(self):
        return {"positive_label": self.positive_label}

    def params(self) -> dict:
        return {"positive_label": self.positive_label}

    def _cell(self, label) -> list[int]:
        return self.stats.setdefault(label, [0, 0, 0])

    def add(self, prediction, reference) -> None:
        if prediction == reference:
            self._cell(reference)[0] += 1
        else:
            self._cell(prediction)[1] += 1
            self._cell(reference)[2] += 1

    def merge(self, other: "F1") -> None:
        self._check_mergeable(other)
        for label, (tp, fp, fn) in other.stats.items():
            cell = self._cell(label)
            cell[0] += tp
            cell[1] += fp
            cell[2] += fn

    @staticmethod
    def _f1(tp: int, fp: int, fn: int) -> float:
        denom = 2 * tp + fp + fn
        return 2 * tp / denom if denom else 0.0

    def compute(self) -> dict:
        if not self.stats:
            raise EmptyState("no pairs added")
        tp, fp, fn = self.stats.get(self.positive_label, [0, 0, 0])
        ordered = sorted(self.stats, key=lambda c: (type(c).__name__, c))
        macro = sum(self._f1(*self.stats[c]) for c in ordered) / len(ordered)
        return {"f1": self._f1(tp, fp, fn), "macro_f1": macro,
                "classes": len(ordered)}

    def state_obj(self) -> dict:
        return {"stats": [[label, *cell] for label, cell in
                          sorted(self.stats.items(), key=lambda kv: repr(kv[0]))]}

    def load_state_obj(self, obj: dict) -> None:
        self.stats = {label: [tp, fp, fn] for label, tp, fp, fn in obj["stats"]}


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


class Bleu(Metric):
    """Corpus BLEU over orders 1..4 with clipped matches and brevity penalty.

    The effective reference length of a segment is the reference length
    closest to the candidate's, ties going to the shorter. With
    ``smooth=True``, any order n >= 2 whose clipped count is zero gets one
    added to numerator and denominator; orders that matched are untouched,
    so smoothing only moves scores where some precision was zero.
    """

    id = "bleu"

    def __init__(self, smooth: bool = False):
        self.smooth = smooth
        self.clipped = [0] * MAX_ORDER
        self.candidate_ngrams = [0] * MAX_ORDER
        self.candidate_length = 0
        self.reference_length = 0
        self.segments = 0

    def _ctor_params(self):
        return {"smooth": self.smooth}

    def params(self) -> dict:
        return {"smooth": self.smooth}

    def add(self, prediction, reference) -> None:
        if isinstance(reference, str):
            refs = [reference]
        elif isinstance(reference, (list, tuple)) and reference and all(
            isinstance(r, str) for r in reference
        ):
            refs = list(reference)
        else:
            raise WrongType("bleu reference must be a string or non-empty list of strings")
        if not isinstance(prediction, str):
            raise WrongType("bleu prediction must be a string")
        cand = tokenize(prediction)
        ref_tokens = [tokenize(r) for r in refs]
        for n in range(1, MAX_ORDER + 1):
            counts = _ngram_counts(cand, n)
            self.candidate_ngrams[n - 1] += max(0, len(cand) - n + 1)
            if not counts:
                continue
            best = Counter()
            for rt in ref_tokens:
                for gram, k in _ngram_counts(rt, n).items():
                    if k > best[gram]:
                        best[gram] = k
            self.clipped[n - 1] += sum(
                min(k, best.get(gram, 0)) for gram, k in counts.items()
            )
        self.candidate_length += len(cand)
        self.reference_length += min(
            (abs(len(rt) - len(cand)), len(rt)) for rt in ref_tokens
        )[1]
        self.segments += 1

    def merge(self, other: "Bleu") -> None:
        self._check_mergeable(other)
        for i in range(MAX_ORDER):
            self.clipped[i] += other.clipped[i]
            self.candidate_ngrams[i] += other.candidate_ngrams[i]
        self.candidate_length += other.candidate_length
        self.reference_length += other.reference_length
        self.segments += other.segments

    def compute(self) -> dict:
        if self.segments == 0 or self.candidate_length == 0:
            raise EmptyState("empty candidate corpus")
        precisions = []
        for n in range(1, MAX_ORDER + 1):
            num, den = self.clipped[n - 1], self.candidate_ngrams[n - 1]
            if self.smooth and n >= 2 and num == 0:
                num, den = num + 1, den + 1
            precisions.append(num / den if den else 0.0)
        c, r = self.candidate_length, self.reference_length
        bp = 1.0 if c > r else exp(1.0 - r / c)
        if min(precisions) == 0.0:
            score = 0.0
        else:
            score = bp * exp(sum(log(p) for p in precisions) / MAX_ORDER)
        return {
            "bleu": score,
            "precisions": precisions,
            "brevity_penalty": bp,
            "candidate_length": c,
            "reference_length": r,
        }

    def state_obj(self) -> dict:
        return {
            "clipped": list(self.clipped),
            "candidate_ngrams": list(self.candidate_ngrams),
            "candidate_length": self.candidate_length,
            "reference_length": self.reference_length,
            "segments": self.segments,
        }

    def load_state_obj(self, obj: dict) -> None:
        self.clipped = list(obj["clipped"])
        self.candidate_ngrams = list(obj["candidate_ngrams"])
        self.candidate_length = obj["candidate_length"]
        self.reference_length = obj["reference_length"]
        self.segments = obj["segments"]


_METRICS = {
    "accuracy": Accuracy,
    "exact_match": ExactMatch,
    "f1": F1,
    "bleu": Bleu,
}

METRIC_NAMES = tuple(sorted(_METRICS))


def get_metric(name: str, **params) -> Metric:
    if name not in _METRICS:
        raise KeyError(f"unknown metric {name!r}; have {', '.join(METRIC_NAMES)}")
    return _METRICS[name](**params)
