"""Pivot-based persistence measures over pairs of evaluation environments.

An evaluation environment (EE) is one test-collection snapshot. To compare
a system's effectiveness between a base EE and a later target EE, its
scores in each EE are related to a pivot run evaluated in the same EE,
factoring out the environment change:

- result_delta: relative change of the system's own mean score between
  EEs, (mean_base - mean_target) / mean_base. Negative means the system
  got more effective; 0 is ideal persistence.
- relative_improvement: (mean_system - mean_pivot) / mean_pivot within a
  single EE.
- delta_ri: relative improvement in the base EE minus the one in the
  target EE; 0 is ideal, positive means the system lost ground relative
  to the pivot.
- effect_ratio: mean per-topic improvement over the pivot in the target
  EE divided by the same mean in the base EE; 1 is ideal, values in (0, 1)
  mean the effect shrank, values above 1 mean it grew. The two means are
  normalized independently, so the topic counts may differ.

Zero denominators never raise: the affected quantity becomes None and a
reason string is recorded, so report cells can render an explicit
"undefined" rather than an infinity.

``persistence_cell`` assembles all of the above for one
(system, measure, EE pair), together with an unpaired t-test between the
system's own per-topic score distributions in the two EEs and, for
significance marking in reports, between system and pivot within each EE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import DataError
from .measures import ARPValue, MeasureId, TopicScoreVector, arp, score_run
from .run_io import Qrels, Run, TopicSet
from .stats import t_test_unpaired


@dataclass(frozen=True)
class EEPair:
    """A (base, target) pair of evaluation environment labels. Equal labels
    are allowed for self-replication checks."""

    base_label: str
    target_label: str

    def __post_init__(self):
        if not self.base_label or not self.target_label:
            raise DataError("evaluation environment labels must be non-empty")

    @property
    def key(self) -> str:
        return f"{self.base_label}-{self.target_label}"


@dataclass(frozen=True)
class TopicDeltaVector:
    """Per-topic score differences (system minus pivot) in one EE."""

    ee_label: str
    deltas: Mapping[str, float]

    @property
    def n(self) -> int:
        return len(self.deltas)

    def mean(self) -> float:
        if not self.deltas:
            raise DataError("cannot average an empty delta vector")
        return math.fsum(self.deltas.values()) / len(self.deltas)


def _value(x: ARPValue | float) -> float:
    return x.value if isinstance(x, ARPValue) else float(x)


def result_delta(mean_base: ARPValue | float, mean_target: ARPValue | float) -> float | None:
    """Relative change between mean scores; None when the base mean is 0."""
    base, target = _value(mean_base), _value(mean_target)
    if base == 0.0:
        return None
    return (base - target) / base


def relative_improvement(mean_system: ARPValue | float, mean_pivot: ARPValue | float) -> float | None:
    """Relative improvement of the system over the pivot within one EE;
    None when the pivot mean is 0."""
    system, pivot = _value(mean_system), _value(mean_pivot)
    if pivot == 0.0:
        return None
    return (system - pivot) / pivot


def delta_ri(ri_base: float | None, ri_target: float | None) -> float | None:
    """Difference of relative improvements across EEs; propagates None."""
    if ri_base is None or ri_target is None:
        return None
    return ri_base - ri_target


def topic_deltas(system: TopicScoreVector, pivot: TopicScoreVector) -> TopicDeltaVector:
    """Per-topic system-minus-pivot differences within one EE. Both vectors
    must come from the same EE and measure and cover the same topics."""
    if system.measure != pivot.measure:
        raise DataError(
            f"measure mismatch: {system.measure.name} vs {pivot.measure.name}"
        )
    if system.ee_label != pivot.ee_label:
        raise DataError(
            f"environment mismatch: {system.ee_label!r} vs {pivot.ee_label!r}"
        )
    only_system = system.topics - pivot.topics
    only_pivot = pivot.topics - system.topics
    if only_system or only_pivot:
        raise DataError(
            "topic sets differ: "
            f"only in system vector {sorted(only_system)}, "
            f"only in pivot vector {sorted(only_pivot)}"
        )
    deltas = {t: system.scores[t] - pivot.scores[t] for t in sorted(system.scores)}
    return TopicDeltaVector(ee_label=system.ee_label, deltas=deltas)


def effect_ratio(
    target_deltas: TopicDeltaVector, base_deltas: TopicDeltaVector
) -> float | None:
    """Ratio of mean per-topic improvements, target EE over base EE.

    The two means are normalized by their own topic counts, which may
    differ. Returns None when the base mean is 0 (the cell is rendered as
    undefined, never as an infinity).
    """
    if base_deltas.n == 0 or target_deltas.n == 0:
        raise DataError("effect_ratio needs non-empty delta vectors on both sides")
    base_mean = base_deltas.mean()
    if base_mean == 0.0:
        return None
    return target_deltas.mean() / base_mean


@dataclass(frozen=True)
class PersistenceCell:
    """Everything measured for one (system, measure, EE pair) against one
    pivot: the four mean scores, the persistence quantities, the cross-EE
    t-test on the system's own topic scores, and the within-EE
    system-vs-pivot p-values used for significance marking."""

    system_tag: str
    pivot_tag: str
    measure: MeasureId
    pair: EEPair
    arp_base: ARPValue
    arp_target: ARPValue
    pivot_arp_base: ARPValue
    pivot_arp_target: ARPValue
    result_delta: float | None
    ri_base: float | None
    ri_target: float | None
    delta_ri: float | None
    effect_ratio: float | None
    t_statistic: float
    p_value: float
    p_vs_pivot_base: float
    p_vs_pivot_target: float
    degenerate_t: bool = False
    undefined_flags: tuple[str, ...] = field(default_factory=tuple)


def persistence_cell(
    system_base: Run,
    system_target: Run,
    pivot_base: Run,
    pivot_target: Run,
    qrels_base: Qrels,
    qrels_target: Qrels,
    measure: MeasureId,
    topics: TopicSet,
    pair: EEPair,
    *,
    topics_target: TopicSet | None = None,
    t_variant: str = "student_pooled",
    allow_self_pivot: bool = False,
) -> PersistenceCell:
    """Compute one persistence cell.

    Both EEs are scored over ``topics`` unless ``topics_target`` supplies a
    separate topic set for the target EE (the non-strict mode, where each
    environment is evaluated on its own available topics).
    """
    if system_base.run_tag != system_target.run_tag:
        raise DataError(
            f"system run tags differ across environments: "
            f"{system_base.run_tag!r} vs {system_target.run_tag!r}"
        )
    if pivot_base.run_tag != pivot_target.run_tag:
        raise DataError(
            f"pivot run tags differ across environments: "
            f"{pivot_base.run_tag!r} vs {pivot_target.run_tag!r}"
        )
    system_tag, pivot_tag = system_base.run_tag, pivot_base.run_tag
    if system_tag == pivot_tag and not allow_self_pivot:
        raise DataError(f"system and pivot share the tag {system_tag!r}")
    base_topics = topics
    target_topics = topics if topics_target is None else topics_target

    sys_base = score_run(system_base, qrels_base, measure, base_topics, pair.base_label)
    sys_target = score_run(system_target, qrels_target, measure, target_topics, pair.target_label)
    piv_base = score_run(pivot_base, qrels_base, measure, base_topics, pair.base_label)
    piv_target = score_run(pivot_target, qrels_target, measure, target_topics, pair.target_label)

    arp_sys_base, arp_sys_target = arp(sys_base), arp(sys_target)
    arp_piv_base, arp_piv_target = arp(piv_base), arp(piv_target)

    undefined: list[str] = []
    rd = result_delta(arp_sys_base, arp_sys_target)
    if rd is None:
        undefined.append("result_delta: base mean is zero")
    ri = relative_improvement(arp_sys_base, arp_piv_base)
    if ri is None:
        undefined.append("ri_base: pivot mean is zero in the base environment")
    ri_prime = relative_improvement(arp_sys_target, arp_piv_target)
    if ri_prime is None:
        undefined.append("ri_target: pivot mean is zero in the target environment")
    dri = delta_ri(ri, ri_prime)

    base_deltas = topic_deltas(sys_base, piv_base)
    target_deltas = topic_deltas(sys_target, piv_target)
    er = effect_ratio(target_deltas, base_deltas)
    if er is None:
        undefined.append("effect_ratio: mean base delta is zero")

    cross = t_test_unpaired(sys_base.values_sorted(), sys_target.values_sorted(), t_variant)
    vs_pivot_base = t_test_unpaired(sys_base.values_sorted(), piv_base.values_sorted(), t_variant)
    vs_pivot_target = t_test_unpaired(
        sys_target.values_sorted(), piv_target.values_sorted(), t_variant
    )

    return PersistenceCell(
        system_tag=system_tag,
        pivot_tag=pivot_tag,
        measure=measure,
        pair=pair,
        arp_base=arp_sys_base,
        arp_target=arp_sys_target,
        pivot_arp_base=arp_piv_base,
        pivot_arp_target=arp_piv_target,
        result_delta=rd,
        ri_base=ri,
        ri_target=ri_prime,
        delta_ri=dri,
        effect_ratio=er,
        t_statistic=cross.t_statistic,
        p_value=cross.p_value,
        p_vs_pivot_base=vs_pivot_base.p_value,
        p_vs_pivot_target=vs_pivot_target.p_value,
        degenerate_t=cross.degenerate,
        undefined_flags=tuple(undefined),
    )


def _finite_or_none(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return x


_NONFINITE_T_FLAG = "t_statistic: non-finite (degenerate variance)"


def cell_to_dict(cell: PersistenceCell) -> dict:
    """JSON-ready form with fixed field names. Undefined or non-finite
    values become null; the reasons live in undefined_flags."""
    flags = list(cell.undefined_flags)
    if not math.isfinite(cell.t_statistic) and _NONFINITE_T_FLAG not in flags:
        flags.append(_NONFINITE_T_FLAG)
    return {
        "system_tag": cell.system_tag,
        "pivot_tag": cell.pivot_tag,
        "measure": cell.measure.name,
        "pair": {"base": cell.pair.base_label, "target": cell.pair.target_label},
        "arp_base": {"value": cell.arp_base.value, "n_topics": cell.arp_base.n_topics},
        "arp_target": {"value": cell.arp_target.value, "n_topics": cell.arp_target.n_topics},
        "pivot_arp_base": {
            "value": cell.pivot_arp_base.value,
            "n_topics": cell.pivot_arp_base.n_topics,
        },
        "pivot_arp_target": {
            "value": cell.pivot_arp_target.value,
            "n_topics": cell.pivot_arp_target.n_topics,
        },
        "result_delta": cell.result_delta,
        "ri_base": cell.ri_base,
        "ri_target": cell.ri_target,
        "delta_ri": cell.delta_ri,
        "effect_ratio": cell.effect_ratio,
        "t_statistic": _finite_or_none(cell.t_statistic),
        "p_value": cell.p_value,
        "p_vs_pivot_base": cell.p_vs_pivot_base,
        "p_vs_pivot_target": cell.p_vs_pivot_target,
        "degenerate_t": cell.degenerate_t,
        "undefined_flags": flags,
    }


def cell_from_dict(data: Mapping) -> PersistenceCell:
    """Rebuild a cell from its JSON form (inverse of cell_to_dict)."""
    from .measures import parse_measure

    def _arp(entry: Mapping) -> ARPValue:
        return ARPValue(value=float(entry["value"]), n_topics=int(entry["n_topics"]))

    def _opt(x) -> float | None:
        return None if x is None else float(x)

    try:
        t_stat = data["t_statistic"]
        return PersistenceCell(
            system_tag=str(data["system_tag"]),
            pivot_tag=str(data["pivot_tag"]),
            measure=parse_measure(data["measure"]),
            pair=EEPair(str(data["pair"]["base"]), str(data["pair"]["target"])),
            arp_base=_arp(data["arp_base"]),
            arp_target=_arp(data["arp_target"]),
            pivot_arp_base=_arp(data["pivot_arp_base"]),
            pivot_arp_target=_arp(data["pivot_arp_target"]),
            result_delta=_opt(data["result_delta"]),
            ri_base=_opt(data["ri_base"]),
            ri_target=_opt(data["ri_target"]),
            delta_ri=_opt(data["delta_ri"]),
            effect_ratio=_opt(data["effect_ratio"]),
            t_statistic=float(t_stat) if t_stat is not None else math.inf,
            p_value=float(data["p_value"]),
            p_vs_pivot_base=float(data["p_vs_pivot_base"]),
            p_vs_pivot_target=float(data["p_vs_pivot_target"]),
            degenerate_t=bool(data.get("degenerate_t", False)),
            undefined_flags=tuple(data.get("undefined_flags", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed persistence cell record: {exc}") from exc
