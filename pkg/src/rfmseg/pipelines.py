"""The three segmentation models, segment refinement, and segment labelling.

Model 1: k-means, then k-means again inside one chosen segment.
Model 2: DBSCAN, then k-means over the noise points.
Model 3: agglomerative clustering cut at a fixed number of groups.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace
from typing import IO, Mapping, Sequence

import numpy as np

from .clustering import (
    DEFAULT_LINKAGE,
    DEFAULT_SIZE_CAP,
    NOISE,
    DbscanParams,
    MergeTree,
    agglomerative_fit,
    as_points,
    dbscan_fit,
    kmeans_best_of,
)
from .clustering.base import PointSet
from .rfm import RfmVector

MAX_RECENCY_SPREAD = "max-recency-spread"
METHODS = ("kmeans", "dbscan", "agglomerative")
ARROW = " -> "
RECENCY_AXIS = 0


# ---------------------------------------------------------------- labels


@dataclass(frozen=True)
class SegmentLabel:
    active: bool
    high_frequency: bool
    high_spend: bool
    extreme: bool

    @property
    def activity(self) -> str:
        return "active" if self.active else "inactive"

    @property
    def frequency_band(self) -> str:
        return "high" if self.high_frequency else "low"

    @property
    def spend_band(self) -> str:
        return "high" if self.high_spend else "normal"

    @property
    def text(self) -> str:
        who = "Active" if self.active else "Inactive"
        freq = "frequent" if self.high_frequency else "few"
        spend = "high" if self.high_spend else "normal"
        text = f"{who} customers with {freq} transactions and {spend} spend"
        if self.extreme:
            text += " [extreme: outlying spend or transaction volume]"
        return text

    def to_dict(self) -> dict:
        return {
            "activity": self.activity,
            "frequency_band": self.frequency_band,
            "spend_band": self.spend_band,
            "extreme": self.extreme,
            "text": self.text,
        }


# ---------------------------------------------------------------- segment sets


@dataclass(frozen=True)
class SegmentSet:
    """A partition of customers into segments ``0..s-1``.

    ``assignment[i]`` is the segment of ``ids[i]``; ``provenance[s]`` records
    the stages that produced segment ``s``.
    """

    ids: tuple
    assignment: np.ndarray
    provenance: tuple
    extreme: tuple
    centroid_raw: np.ndarray | None = None
    labels: tuple | None = None
    tree: MergeTree | None = field(default=None, repr=False)

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.int64)
        s = len(self.provenance)
        if a.shape != (len(self.ids),):
            raise ValueError(f"{a.shape[0]} assignments for {len(self.ids)} customers")
        if len(self.extreme) != s:
            raise ValueError("one extreme flag per segment required")
        counts = np.bincount(a, minlength=s) if a.size else np.zeros(s, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() >= s):
            raise ValueError(f"segment ids must lie in [0, {s})")
        if np.any(counts == 0):
            raise ValueError("every segment must have at least one member")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "provenance", tuple(self.provenance))
        object.__setattr__(self, "extreme", tuple(bool(e) for e in self.extreme))

    @property
    def n_segments(self) -> int:
        return len(self.provenance)

    def member_index(self, segment: int) -> np.ndarray:
        return np.nonzero(self.assignment == segment)[0]

    @property
    def segments(self) -> dict:
        return {s: [self.ids[i] for i in self.member_index(s)] for s in range(self.n_segments)}

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_segments)

    def partition(self) -> frozenset:
        """Memberships as a set of sets, independent of numbering."""
        return frozenset(frozenset(m) for m in self.segments.values())


def from_labels(ids, labels, stage: str, noise_extreme: bool = False) -> SegmentSet:
    """Segments from flat labels; label -1 becomes a trailing ``<stage>:noise`` segment."""
    labels = np.asarray(labels, dtype=np.int64)
    clusters = [int(v) for v in np.unique(labels) if v != NOISE]
    has_noise = bool(np.any(labels == NOISE))
    order = clusters + ([NOISE] if has_noise else [])
    remap = {lab: i for i, lab in enumerate(order)}
    assignment = np.array([remap[int(v)] for v in labels], dtype=np.int64)
    prov = [f"{stage}:{'noise' if lab == NOISE else lab}" for lab in order]
    extreme = [noise_extreme and lab == NOISE for lab in order]
    return SegmentSet(tuple(ids), assignment, tuple(prov), tuple(extreme))


# ---------------------------------------------------------------- refinement


@dataclass(frozen=True)
class RefinementStep:
    target_segment: int
    method: str = "kmeans"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown refinement method {self.method!r}; choose from {', '.join(METHODS)}")


def _sub_labels(points: PointSet, step: RefinementStep, seed):
    p = dict(step.params)
    if step.method == "kmeans":
        model = kmeans_best_of(points, int(p.get("k", 2)), seed=seed, restarts=int(p.get("restarts", 1)))
        return np.asarray(model.assignments)
    if step.method == "dbscan":
        res = dbscan_fit(points, DbscanParams(float(p.get("eps", 0.8)), int(p.get("min_points", 5))))
        return np.asarray(res.labels)
    labels, _ = agglomerative_fit(points, int(p.get("n_clusters", 2)), p.get("linkage", DEFAULT_LINKAGE),
                                  size_cap=p.get("size_cap", DEFAULT_SIZE_CAP))
    return labels


def refine(seg: SegmentSet, step: RefinementStep, points, seed=0) -> SegmentSet:
    """Re-cluster one segment and splice its pieces back in.

    Untouched segments keep their relative order; the pieces are appended.
    When the method returns a single group the input comes back unchanged.
    Pieces of DBSCAN noise are flagged extreme, as are pieces of an extreme
    segment.
    """
    ps = as_points(points)
    if ps.ids != seg.ids:
        raise ValueError("points are not aligned with the segmented customers")
    t = step.target_segment
    if not isinstance(t, (int, np.integer)) or not (0 <= t < seg.n_segments):
        raise KeyError(f"no segment {t!r}; segments are 0..{seg.n_segments - 1}")
    members = seg.member_index(t)
    if len(members) == 1:
        return seg
    sub = _sub_labels(ps.subset(members), step, seed)
    groups = [int(v) for v in np.unique(sub) if v != NOISE] + ([NOISE] if np.any(sub == NOISE) else [])
    if len(groups) <= 1:
        return seg

    keep = [s for s in range(seg.n_segments) if s != t]
    new_id = {old: i for i, old in enumerate(keep)}
    assignment = np.array([new_id.get(int(v), -1) for v in seg.assignment], dtype=np.int64)
    base = len(keep)
    for j, g in enumerate(groups):
        assignment[members[sub == g]] = base + j
    parent = seg.provenance[t]
    prov = [seg.provenance[s] for s in keep] + [
        f"{parent}{ARROW}{step.method}:{'noise' if g == NOISE else g}" for g in groups
    ]
    extreme = [seg.extreme[s] for s in keep] + [
        seg.extreme[t] or (step.method == "dbscan" and g == NOISE) for g in groups
    ]
    return SegmentSet(seg.ids, assignment, tuple(prov), tuple(extreme))


def select_max_recency_spread(seg: SegmentSet, points, axis: int = RECENCY_AXIS) -> int:
    """Segment whose members have the largest recency variance (lowest id on ties)."""
    x = as_points(points).points[:, axis]
    spreads = [float(np.var(x[seg.member_index(s)])) for s in range(seg.n_segments)]
    return int(np.argmax(spreads))


def resolve_target(seg: SegmentSet, target, points) -> int:
    if isinstance(target, str):
        if target == MAX_RECENCY_SPREAD:
            return select_max_recency_spread(seg, points)
        try:
            target = int(target)
        except ValueError:
            raise ValueError(f"refine target must be a segment id or {MAX_RECENCY_SPREAD!r}, got {target!r}") from None
    if not (0 <= target < seg.n_segments):
        raise KeyError(f"refine target {target} resolves to no segment (have 0..{seg.n_segments - 1})")
    return int(target)


# ---------------------------------------------------------------- models


def kmeans_stage(points, k: int, seed=0, restarts: int = 10) -> SegmentSet:
    ps = as_points(points)
    model = kmeans_best_of(ps, k, seed=seed, restarts=restarts)
    return from_labels(ps.ids, model.assignments, "kmeans")


def run_model1(rfm_std, refine_target, k1: int = 4, k2: int = 2, seed=0, restarts: int = 10) -> SegmentSet:
    """k-means with ``k1`` clusters, then k-means with ``k2`` inside one of them.

    ``refine_target`` is a segment id of the first stage or
    ``"max-recency-spread"``.
    """
    ps = as_points(rfm_std)
    stage1 = kmeans_stage(ps, k1, seed=seed, restarts=restarts)
    target = resolve_target(stage1, refine_target, ps)
    step = RefinementStep(target, "kmeans", {"k": k2, "restarts": restarts})
    return refine(stage1, step, ps, seed=seed)


def run_model2(rfm_std, params: DbscanParams, k_outliers: int = 2, seed=0, restarts: int = 10) -> SegmentSet:
    """DBSCAN segments plus ``k_outliers`` k-means groups carved from its noise."""
    ps = as_points(rfm_std)
    res = dbscan_fit(ps, params)
    seg = from_labels(ps.ids, res.labels, "dbscan", noise_extreme=True)
    n_noise = int(res.noise_mask.sum())
    if n_noise == 0:
        warnings.warn("DBSCAN labelled no point as noise; returning its clusters alone", stacklevel=2)
        return seg
    if n_noise < k_outliers:
        raise ValueError(f"only {n_noise} noise point(s) for k_outliers={k_outliers}; use a smaller k")
    noise_seg = seg.n_segments - 1
    step = RefinementStep(noise_seg, "kmeans", {"k": k_outliers, "restarts": restarts})
    return refine(seg, step, ps, seed=seed)


def run_model3(rfm_std, n_clusters: int = 4, linkage: str = DEFAULT_LINKAGE,
               size_cap: int | None = DEFAULT_SIZE_CAP) -> SegmentSet:
    ps = as_points(rfm_std)
    labels, tree = agglomerative_fit(ps, n_clusters, linkage, size_cap=size_cap)
    return replace(from_labels(ps.ids, labels, "agglomerative"), tree=tree)


# ---------------------------------------------------------------- labelling


def label_segments(seg: SegmentSet, rfm_raw: Sequence[RfmVector]) -> SegmentSet:
    """Attach raw-unit centroids and activity / frequency / spend labels.

    Thresholds are population-relative: recency at or below the median is
    active, frequency at or above the median is high, and monetary at or
    above the 90th percentile is high spend.
    """
    by_id = {v.customer_id: v for v in rfm_raw}
    missing = [c for c in seg.ids if c not in by_id]
    if missing:
        raise KeyError(f"{len(missing)} segmented customer(s) lack an RFM row, e.g. {missing[0]!r}")
    raw = np.array([[by_id[c].recency, by_id[c].frequency, by_id[c].monetary_minor / 100.0] for c in seg.ids],
                   dtype=np.float64)
    med_r = np.median(raw[:, 0])
    med_f = np.median(raw[:, 1])
    p90_m = np.percentile(raw[:, 2], 90)
    cents = np.array([raw[seg.member_index(s)].mean(axis=0) for s in range(seg.n_segments)])
    labels = tuple(
        SegmentLabel(
            active=bool(c[0] <= med_r),
            high_frequency=bool(c[1] >= med_f),
            high_spend=bool(c[2] >= p90_m),
            extreme=seg.extreme[s],
        )
        for s, c in enumerate(cents)
    )
    return replace(seg, centroid_raw=cents, labels=labels)


# ---------------------------------------------------------------- export


def _num(x) -> float:
    return float(x)


def write_segments_csv(seg: SegmentSet, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["customer_id", "segment_id", "label_text"])
    for cid, s in zip(seg.ids, seg.assignment.tolist()):
        w.writerow([cid, s, seg.labels[s].text if seg.labels else ""])


def write_scatter_csv(seg: SegmentSet, rfm_raw: Sequence[RfmVector], stream: IO[str]) -> None:
    by_id = {v.customer_id: v for v in rfm_raw}
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["recency", "frequency", "monetary", "segment_id"])
    for cid, s in zip(seg.ids, seg.assignment.tolist()):
        v = by_id[cid]
        w.writerow([v.recency, v.frequency, f"{v.monetary:.2f}", s])


def sidecar(seg: SegmentSet, rfm_std, parameters: Mapping) -> dict:
    ps = as_points(rfm_std)
    std_cent = [ps.points[seg.member_index(s)].mean(axis=0) for s in range(seg.n_segments)]
    segs = []
    for s in range(seg.n_segments):
        entry = {
            "segment_id": s,
            "size": int(seg.sizes()[s]),
            "provenance": seg.provenance[s],
            "extreme": seg.extreme[s],
            "centroid_std": [_num(v) for v in std_cent[s]],
        }
        if seg.centroid_raw is not None:
            entry["centroid_raw"] = [_num(v) for v in seg.centroid_raw[s]]
        if seg.labels is not None:
            entry["label"] = seg.labels[s].to_dict()
        segs.append(entry)
    return {"parameters": dict(parameters), "segments": segs}


def write_sidecar(doc: dict, stream: IO[str]) -> None:
    json.dump(doc, stream, indent=1, sort_keys=True)
    stream.write("\n")


def read_segment_set(segments_csv: IO[str], sidecar_doc: Mapping) -> SegmentSet:
    """Rebuild an (unlabelled) SegmentSet from its CSV export and JSON sidecar."""
    ids, assignment = [], []
    for rec in csv.DictReader(segments_csv):
        ids.append(rec["customer_id"])
        assignment.append(int(rec["segment_id"]))
    segs = sorted(sidecar_doc["segments"], key=lambda e: e["segment_id"])
    return SegmentSet(tuple(ids), np.array(assignment, dtype=np.int64),
                      tuple(e["provenance"] for e in segs), tuple(e["extreme"] for e in segs))
