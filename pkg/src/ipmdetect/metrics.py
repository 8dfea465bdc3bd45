"""Detection-quality metrics: per-class detection/miss/false-positive rates.

Definitions (per class, duck = yellow, cone = orange):

* correctly_detected: predictions matched to a truth obstacle within the
  match distance (greedy nearest pairing per frame), regardless of lane flag.
* false_position: the subset of matched detections whose in-lane flag is
  wrong (counted separately, not subtracted from correctly_detected).
* missed: truth obstacles left unmatched.
* false_positive: predictions left unmatched, attributed by predicted color.

Rates: detection_rate = detected / (detected + missed) and missed_rate is its
complement; false_positive_rate = fp / (detected + fp); false_position_rate =
false_position / detected.  Zero denominators give zero rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import FrameMismatch

_KIND_OF_COLOR = {"yellow": "duck", "orange": "cone"}
CLASSES = ("duck", "cone")


@dataclass
class ClassCounts:
    correctly_detected: int = 0
    missed: int = 0
    false_positive: int = 0
    false_position: int = 0

    @property
    def detection_rate(self) -> float:
        total = self.correctly_detected + self.missed
        return self.correctly_detected / total if total else 0.0

    @property
    def missed_rate(self) -> float:
        total = self.correctly_detected + self.missed
        return self.missed / total if total else 0.0

    @property
    def false_positive_rate(self) -> float:
        total = self.correctly_detected + self.false_positive
        return self.false_positive / total if total else 0.0

    @property
    def false_position_rate(self) -> float:
        return self.false_position / self.correctly_detected if self.correctly_detected else 0.0


@dataclass
class LatencyStats:
    count: int = 0
    mean_ms: float = 0.0
    p50_ms: float = 0.0
    p95_ms: float = 0.0
    max_ms: float = 0.0

    @classmethod
    def from_samples(cls, samples_ms: list[float]) -> "LatencyStats":
        if not samples_ms:
            return cls()
        ordered = sorted(samples_ms)
        n = len(ordered)
        return cls(
            count=n,
            mean_ms=sum(ordered) / n,
            p50_ms=ordered[(n - 1) // 2],
            p95_ms=ordered[min(n - 1, math.ceil(0.95 * n) - 1)],
            max_ms=ordered[-1],
        )

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "mean_ms": self.mean_ms,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "max_ms": self.max_ms,
        }


@dataclass
class EvalReport:
    per_class: dict[str, ClassCounts] = field(default_factory=dict)
    frames: int = 0
    latency: LatencyStats = field(default_factory=LatencyStats)

    def to_json(self) -> dict:
        out: dict = {"frames": self.frames, "latency": self.latency.to_json()}
        for name, c in self.per_class.items():
            out[name] = {
                "correctly_detected": c.correctly_detected,
                "missed": c.missed,
                "false_positive": c.false_positive,
                "false_position": c.false_position,
                "detection_rate": c.detection_rate,
                "missed_rate": c.missed_rate,
                "false_positive_rate": c.false_positive_rate,
                "false_position_rate": c.false_position_rate,
            }
        return out


def _greedy_match(preds: list[dict], truths: list[dict], match_dist: float):
    """Greedy nearest pairing; returns (pairs, unmatched_pred, unmatched_truth)."""
    pairs = []
    for pi, p in enumerate(preds):
        for ti, t in enumerate(truths):
            d = math.hypot(p["x_m"] - t["x"], p["y_m"] - t["y"])
            if d <= match_dist:
                pairs.append((d, pi, ti))
    pairs.sort(key=lambda q: (q[0], q[1], q[2]))
    used_p: set[int] = set()
    used_t: set[int] = set()
    matched = []
    for d, pi, ti in pairs:
        if pi in used_p or ti in used_t:
            continue
        matched.append((pi, ti))
        used_p.add(pi)
        used_t.add(ti)
    return (
        matched,
        [pi for pi in range(len(preds)) if pi not in used_p],
        [ti for ti in range(len(truths)) if ti not in used_t],
    )


def evaluate(
    predictions: dict[int, list[dict]],
    truth: dict[int, list[dict]],
    match_dist: float = 0.05,
    latencies_ms: list[float] | None = None,
) -> EvalReport:
    """Score per-frame obstacle predictions against analytic ground truth.

    predictions maps frame index to pose-array records (x_m, y_m, z_m, color);
    truth maps frame index to records with x, y, in_lane, kind.  Frame index
    sets must match exactly.
    """
    if set(predictions.keys()) != set(truth.keys()):
        missing = set(truth) ^ set(predictions)
        raise FrameMismatch(f"prediction/truth frame indices differ: {sorted(missing)[:10]}")

    report = EvalReport(per_class={name: ClassCounts() for name in CLASSES})
    report.frames = len(truth)
    for fi in sorted(truth.keys()):
        preds = predictions[fi]
        truths = truth[fi]
        matched, extra_preds, missed_truths = _greedy_match(preds, truths, match_dist)
        for pi, ti in matched:
            kind = truths[ti]["kind"]
            counts = report.per_class.setdefault(kind, ClassCounts())
            counts.correctly_detected += 1
            pred_in_lane = preds[pi]["z_m"] >= 0
            if bool(truths[ti]["in_lane"]) != pred_in_lane:
                counts.false_position += 1
        for ti in missed_truths:
            kind = truths[ti]["kind"]
            report.per_class.setdefault(kind, ClassCounts()).missed += 1
        for pi in extra_preds:
            kind = _KIND_OF_COLOR.get(preds[pi].get("color", ""), "duck")
            report.per_class.setdefault(kind, ClassCounts()).false_positive += 1

    if latencies_ms is not None:
        report.latency = LatencyStats.from_samples(latencies_ms)
    return report
