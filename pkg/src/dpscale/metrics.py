"""Scale-accuracy metrics and report aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field


def scale_ratio(s_est: float, s_gt: float) -> float:
    """Estimated over ground-truth scale; 1 means perfect recovery."""
    if s_gt <= 0:
        raise ValueError(f"ground-truth scale must be positive, got {s_gt}")
    return s_est / s_gt


def average_error(ratios) -> float:
    """Mean absolute deviation of the scale ratios from 1."""
    ratios = list(ratios)
    if not ratios:
        raise ValueError("cannot average an empty ratio list")
    return sum(abs(1.0 - r) for r in ratios) / len(ratios)


@dataclass
class ScaleEntry:
    ratio: float
    scene: str = ""
    lens: str = ""
    aperture: str = ""
    stage: str = "optim"  # "initial" or "optim"


@dataclass
class ScaleReport:
    entries: list[ScaleEntry] = field(default_factory=list)

    def add(self, ratio, scene="", lens="", aperture="", stage="optim"):
        self.entries.append(ScaleEntry(ratio, scene, lens, aperture, stage))

    def ratios(self, stage=None):
        return [e.ratio for e in self.entries if stage is None or e.stage == stage]

    def error(self, stage=None) -> float:
        return average_error(self.ratios(stage))

    def as_dict(self) -> dict:
        out = {
            "entries": [
                {
                    "scene": e.scene,
                    "lens": e.lens,
                    "aperture": e.aperture,
                    "stage": e.stage,
                    "scale_ratio": e.ratio,
                    "scale_ratio_rounded": round(e.ratio, 3),
                }
                for e in self.entries
            ],
            "n": len(self.entries),
        }
        for stage in sorted({e.stage for e in self.entries}):
            err = self.error(stage)
            out[f"average_error_{stage}"] = err
            out[f"average_error_{stage}_rounded"] = round(err, 3)
        return out
