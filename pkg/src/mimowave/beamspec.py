"""Piecewise-constant desired beampatterns and the training class catalog.

Catalog files are JSON::

    {"format": "mimowave-catalog", "version": 1,
     "classes": [{"class_id": 0, "name": "rect_10", "intervals": [[-5.0, 5.0, 1.0]]}, ...]}

Each interval is ``[start_deg, end_deg, level]`` and is closed at both ends.
"""

import json
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError

CATALOG_FORMAT = "mimowave-catalog"
CATALOG_VERSION = 1


@dataclass(frozen=True)
class BeamSpec:
    intervals: tuple
    name: str = ""
    class_id: int = 0

    def __post_init__(self):
        ivs = tuple((float(a), float(b), float(lv)) for a, b, lv in self.intervals)
        if not ivs:
            raise DomainError("a beam spec needs at least one interval")
        for a, b, lv in ivs:
            if not (-90.0 <= a <= b <= 90.0):
                raise DomainError(f"interval ({a}, {b}) not inside [-90, 90]")
            if lv < 0:
                raise DomainError(f"interval level {lv} is negative")
        ordered = sorted(ivs)
        for (a0, b0, _), (a1, b1, _) in zip(ordered, ordered[1:]):
            if a1 <= b0:
                raise DomainError(f"intervals ({a0}, {b0}) and ({a1}, {b1}) overlap")
        if not any(lv > 0 for _, _, lv in ivs):
            raise DomainError("at least one interval must have a positive level")
        object.__setattr__(self, "intervals", tuple(ordered))
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "name", str(self.name))

    @property
    def levels(self):
        return {lv for _, _, lv in self.intervals}

    def to_dict(self):
        return {
            "class_id": self.class_id,
            "name": self.name,
            "intervals": [list(iv) for iv in self.intervals],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(tuple(iv) for iv in d["intervals"]), name=d.get("name", ""),
                   class_id=d.get("class_id", 0))


@dataclass(frozen=True)
class BeamClassCatalog:
    specs: tuple

    def __post_init__(self):
        specs = tuple(self.specs)
        ids = [s.class_id for s in specs]
        if ids != list(range(len(specs))):
            raise DomainError(f"class ids must be 0..{len(specs) - 1} in order, got {ids}")
        object.__setattr__(self, "specs", specs)

    def __len__(self):
        return len(self.specs)

    def __getitem__(self, i):
        return self.specs[i]

    def __iter__(self):
        return iter(self.specs)

    @classmethod
    def from_specs(cls, specs):
        """Build a catalog, renumbering class ids to 0..K-1 in the given order."""
        return cls(tuple(BeamSpec(s.intervals, s.name, i) for i, s in enumerate(specs)))

    def to_dict(self):
        return {
            "format": CATALOG_FORMAT,
            "version": CATALOG_VERSION,
            "classes": [s.to_dict() for s in self.specs],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format", CATALOG_FORMAT) != CATALOG_FORMAT:
            raise ValueError(f"not a catalog document: format={d.get('format')!r}")
        return cls(tuple(BeamSpec.from_dict(c) for c in d["classes"]))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def rect_beam(width_deg, center_deg=0.0, class_id=0, name=None):
    """Unit-level beam of ``width_deg`` degrees centred on ``center_deg``."""
    width = float(width_deg)
    center = float(center_deg)
    if width <= 0:
        raise DomainError("beam width must be positive")
    lo, hi = center - width / 2.0, center + width / 2.0
    if lo < -90.0 or hi > 90.0:
        raise DomainError(f"beam [{lo}, {hi}] exceeds [-90, 90] degrees")
    if name is None:
        name = f"rect_{width:g}" if center == 0 else f"rect_{width:g}@{center:g}"
    return BeamSpec(((lo, hi, 1.0),), name=name, class_id=class_id)


def notched_beam(width_deg=60.0, notch_deg=10.0, class_id=0, name="notch_60_10"):
    """Broadside beam with a zero-level gap in its middle (interferer avoidance)."""
    half, gap = width_deg / 2.0, notch_deg / 2.0
    return BeamSpec(((-half, -gap, 1.0), (gap, half, 1.0)), name=name, class_id=class_id)


def omni_beam(class_id=0):
    return BeamSpec(((-90.0, 90.0, 1.0),), name="omni", class_id=class_id)


def default_catalog():
    """26 broadside beams of width 10..60 degrees in 2-degree steps, then the notched beam."""
    specs = [rect_beam(w, 0.0, class_id=i) for i, w in enumerate(range(10, 61, 2))]
    specs.append(notched_beam(class_id=len(specs)))
    return BeamClassCatalog(tuple(specs))


def sample_on_grid(spec, grid):
    """Desired level at every grid angle; closed intervals, zero outside."""
    ang = grid.angles_deg
    out = np.zeros(ang.size)
    for a, b, lv in spec.intervals:
        out[(ang >= a) & (ang <= b)] = lv
    return out
