"""Quantitative tables over annotations and predictions.

Label distributions, one-vs-rest precision/recall/F1, confusion matrices,
chance-corrected agreement, self-consistency over equivalent claim pairs,
taxonomy frequency tables, and per-summary problem rates. Percentages are
rounded half-up for display; internal math keeps full precision.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable

from .store import TAXONOMY_DIMENSIONS, AnnotationLabel, EquivalencePair, SummaryMeta, TaxonomyCode

LABEL_ORDER = [label.value for label in AnnotationLabel]


class EmptyGroup(ValueError):
    pass


class NoGold(ValueError):
    pass


def round_half_up(value: float | Decimal, places: int = 2) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def _percentage(count: int, total: int, places: int = 2) -> float:
    if total == 0:
        raise EmptyGroup("cannot compute percentages over zero items")
    quantum = Decimal(1).scaleb(-places)
    return float((Decimal(count * 100) / Decimal(total)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass
class LabelDistribution:
    group: str
    counts: dict[str, int]
    percentages: dict[str, float]
    total: int

    def to_json(self) -> dict:
        return {
            "group": self.group,
            "total": self.total,
            "counts": self.counts,
            "percentages": self.percentages,
        }


@dataclass
class BinaryScore:
    label: str
    precision: float
    recall: float
    f1: float
    support: int

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
        }


@dataclass
class AgreementStats:
    n: int
    raw_agreement: float  # percentage
    kappa: float | None  # None when marginals are degenerate (pe = 1)


def _label_value(label) -> str:
    return label.value if isinstance(label, AnnotationLabel) else str(label)


def distribution_from_counts(group: str, counts: dict[str, int]) -> LabelDistribution:
    total = sum(counts.values())
    ordered = {label: counts.get(label, 0) for label in LABEL_ORDER}
    for extra in counts:
        if extra not in ordered:
            ordered[extra] = counts[extra]
    return LabelDistribution(
        group=group,
        counts=ordered,
        percentages={label: _percentage(count, total) for label, count in ordered.items()},
        total=total,
    )


def label_distribution(annotations: Iterable, group_by=None) -> list[LabelDistribution]:
    """Count and percentage each label per group.

    Accepts (group, label) tuples, or records with ``.model`` and
    ``.annotation.label`` (override the group with ``group_by``).
    """
    grouped: dict[str, dict[str, int]] = {}
    for item in annotations:
        if isinstance(item, tuple):
            group, label = item
        else:
            group = group_by(item) if group_by else item.model
            label = item.annotation.label
        counts = grouped.setdefault(str(group), {})
        value = _label_value(label)
        counts[value] = counts.get(value, 0) + 1
    if not grouped:
        raise EmptyGroup("no annotations to distribute")
    return [distribution_from_counts(group, counts) for group, counts in sorted(grouped.items())]


def per_label_prf(predictions: dict[str, object], gold: dict[str, object], label) -> BinaryScore:
    """One-vs-rest precision/recall/F1 treating ``label`` as positive.

    Undefined ratios come out as 0 rather than dropping the row, so
    zero-support cells read 0.000. Items lacking a prediction (ambiguous
    answers excluded upstream) are skipped.
    """
    if not gold:
        raise NoGold("no gold labels")
    positive = _label_value(label)
    tp = fp = fn = support = 0
    for claim_id, gold_label in gold.items():
        if claim_id not in predictions:
            continue
        predicted = _label_value(predictions[claim_id])
        actual = _label_value(gold_label)
        if actual == positive:
            support += 1
            if predicted == positive:
                tp += 1
            else:
                fn += 1
        elif predicted == positive:
            fp += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return BinaryScore(label=positive, precision=precision, recall=recall, f1=f1, support=support)


def confusion_matrix(
    predictions: dict[str, object],
    gold: dict[str, object],
    source_of: dict[str, str] | None = None,
) -> dict[str, dict[tuple[str, str], int]]:
    """(gold, predicted) counts, split by the model that generated each
    claim when ``source_of`` is given."""
    table: dict[str, dict[tuple[str, str], int]] = {}
    for claim_id, gold_label in gold.items():
        if claim_id not in predictions:
            continue
        source = source_of.get(claim_id, "all") if source_of else "all"
        cells = table.setdefault(source, {})
        key = (_label_value(gold_label), _label_value(predictions[claim_id]))
        cells[key] = cells.get(key, 0) + 1
    return table


def prf_from_confusion(cells: dict[tuple[str, str], int], label) -> BinaryScore:
    """Recompute the one-vs-rest score from confusion cells (consistency
    oracle for per_label_prf)."""
    positive = _label_value(label)
    tp = cells.get((positive, positive), 0)
    fp = sum(c for (g, p), c in cells.items() if p == positive and g != positive)
    fn = sum(c for (g, p), c in cells.items() if g == positive and p != positive)
    support = tp + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return BinaryScore(label=positive, precision=precision, recall=recall, f1=f1, support=support)


def cohen_kappa(labels_a: list, labels_b: list) -> AgreementStats:
    """Chance-corrected agreement between two raters over the same items,
    with expected agreement from per-rater marginals."""
    if len(labels_a) != len(labels_b):
        raise ValueError("label vectors must align item for item")
    n = len(labels_a)
    if n < 2:
        raise ValueError("need at least 2 items")
    a = [_label_value(x) for x in labels_a]
    b = [_label_value(x) for x in labels_b]
    matches = sum(1 for x, y in zip(a, b) if x == y)
    po = matches / n
    marginals_a = {label: a.count(label) / n for label in set(a)}
    marginals_b = {label: b.count(label) / n for label in set(b)}
    pe = sum(marginals_a.get(label, 0.0) * marginals_b.get(label, 0.0) for label in set(a) | set(b))
    raw = 100.0 * po
    if pe == 1.0:
        return AgreementStats(n=n, raw_agreement=raw, kappa=None)
    return AgreementStats(n=n, raw_agreement=raw, kappa=(po - pe) / (1.0 - pe))


class MissingAnnotation(KeyError):
    pass


def self_consistency(pairs: list[EquivalencePair], label_of) -> float:
    """Fraction of semantically-equivalent claim pairs that received the
    same label from the annotator who marked them.

    ``label_of(claim_id, annotator_id)`` returns the label or None.
    """
    if not pairs:
        raise ValueError("no pairs to check")
    equal = 0
    for pair in pairs:
        label_a = label_of(pair.claim_id_a, pair.marked_by)
        label_b = label_of(pair.claim_id_b, pair.marked_by)
        if label_a is None or label_b is None:
            raise MissingAnnotation(
                f"annotator {pair.marked_by} has not labeled both {pair.claim_id_a} and {pair.claim_id_b}"
            )
        if _label_value(label_a) == _label_value(label_b):
            equal += 1
    return equal / len(pairs)


def pairwise_agreement(records: Iterable) -> list[dict]:
    """Cohen's kappa per annotator pair over the claims both labeled.
    ``records`` are query records from the store."""
    by_claim: dict[str, dict[str, str]] = {}
    for record in records:
        by_claim.setdefault(record.claim.id, {})[record.annotation.annotator_id] = _label_value(
            record.annotation.label
        )
    overlaps: dict[tuple[str, str], list[tuple[str, str]]] = {}
    for labels in by_claim.values():
        annotators = sorted(labels)
        for i, a in enumerate(annotators):
            for b in annotators[i + 1 :]:
                overlaps.setdefault((a, b), []).append((labels[a], labels[b]))
    out = []
    for (a, b), pairs in sorted(overlaps.items()):
        if len(pairs) < 2:
            continue
        stats = cohen_kappa([x for x, _ in pairs], [y for _, y in pairs])
        out.append(
            {
                "annotator_a": a,
                "annotator_b": b,
                "n": stats.n,
                "raw_agreement": stats.raw_agreement,
                "kappa": stats.kappa,
            }
        )
    return out


def _flag_table(
    codes: list[TaxonomyCode],
    summaries: list[SummaryMeta],
    dimension: str,
    places: int = 2,
) -> dict[str, dict[str, float]]:
    """Percentage of each model's summaries flagged with each value of the
    dimension. Refused summaries are excluded from denominators."""
    values = list(TAXONOMY_DIMENSIONS[dimension])
    eligible: dict[str, list[SummaryMeta]] = {}
    for meta in summaries:
        if not meta.refused:
            eligible.setdefault(meta.model, []).append(meta)
    flagged: dict[tuple[str, str], set[str]] = {}
    summary_models = {meta.id: meta.model for meta in summaries if not meta.refused}
    for code in codes:
        if code.dimension != dimension:
            continue
        model = summary_models.get(code.subject)
        if model is None:
            continue
        flagged.setdefault((model, code.value), set()).add(code.subject)
    table: dict[str, dict[str, float]] = {}
    for model, metas in sorted(eligible.items()):
        denominator = len(metas)
        table[model] = {
            value: _percentage(len(flagged.get((model, value), set())), denominator, places)
            for value in values
        }
    return table


def comment_issue_table(
    codes: list[TaxonomyCode], summaries: list[SummaryMeta], places: int = 2
) -> dict[str, dict[str, float]]:
    return _flag_table(codes, summaries, "CommentIssue", places)


def omission_table(
    codes: list[TaxonomyCode], summaries: list[SummaryMeta], places: int = 2
) -> dict[str, dict[str, float]]:
    return _flag_table(codes, summaries, "OmissionType", places)


def problem_rate_per_summary(records: Iterable) -> list[dict]:
    """Percentage of claims per (book, model) rated Unfaithful or
    PartialSupport. ``records`` are query records from the store."""
    by_summary: dict[str, dict] = {}
    for record in records:
        entry = by_summary.setdefault(
            record.summary_id,
            {"book_id": record.book_id, "model": record.model, "summary_id": record.summary_id,
             "claims": 0, "problematic": 0},
        )
        entry["claims"] += 1
        if record.annotation.label in (AnnotationLabel.UNFAITHFUL, AnnotationLabel.PARTIAL_SUPPORT):
            entry["problematic"] += 1
    rows = []
    for summary_id in sorted(by_summary):
        entry = by_summary[summary_id]
        rows.append(
            {
                "book_id": entry["book_id"],
                "model": entry["model"],
                "summary_id": summary_id,
                "claims": entry["claims"],
                "problem_rate": _percentage(entry["problematic"], entry["claims"]),
            }
        )
    return rows


def compare_with_reference(
    computed: list[LabelDistribution],
    reference: dict[str, dict[str, float]],
    tolerance: float = 0.005,
) -> list[dict]:
    """Flag computed percentages that disagree with published reference
    values. Disagreements are reported, never 'corrected'."""
    discrepancies = []
    for dist in computed:
        expected = reference.get(dist.group)
        if not expected:
            continue
        for label, published in expected.items():
            got = dist.percentages.get(label)
            if got is None or abs(got - published) > tolerance:
                discrepancies.append(
                    {"group": dist.group, "label": label, "computed": got, "published": published}
                )
    return discrepancies


def table_to_csv(headers: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buffer.getvalue()
