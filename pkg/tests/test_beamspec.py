import numpy as np
import pytest

from mimowave._validation import DomainError
from mimowave.array import AngleGrid
from mimowave.beamspec import (BeamClassCatalog, BeamSpec, default_catalog, notched_beam, omni_beam,
                               rect_beam, sample_on_grid)


def test_rect_beam_intervals():
    assert rect_beam(10, 0).intervals == ((-5.0, 5.0, 1.0),)
    assert rect_beam(60, 0).intervals == ((-30.0, 30.0, 1.0),)


@pytest.mark.parametrize("width,center", [(200, 0), (0, 0), (20, 85)])
def test_rect_beam_rejects_bad_beams(width, center):
    with pytest.raises(DomainError):
        rect_beam(width, center)


def test_notched_beam():
    nb = notched_beam()
    assert nb.intervals == ((-30.0, -5.0, 1.0), (5.0, 30.0, 1.0))
    assert sum(b - a for a, b, _ in nb.intervals) == 50.0
    grid = AngleGrid()
    b = sample_on_grid(nb, grid)
    assert b[grid.angles_deg == 0][0] == 0
    # closed intervals: the passband edge at -5 degrees is in-band
    assert b[grid.angles_deg == -5][0] == 1
    assert b[grid.angles_deg == -4][0] == 0


def test_default_catalog_layout():
    cat = default_catalog()
    assert len(cat) == 27
    widths = [s.intervals[0][1] - s.intervals[0][0] for s in cat.specs[:26]]
    assert widths == list(range(10, 61, 2))
    assert cat[26].intervals == notched_beam().intervals
    assert [s.class_id for s in cat] == list(range(27))


def test_sample_on_grid_counts():
    assert sample_on_grid(rect_beam(10, 0), AngleGrid()).sum() == 11


def test_sample_levels_subset():
    spec = BeamSpec(((-40, -10, 0.5), (0, 20, 2.0)))
    vals = set(np.unique(sample_on_grid(spec, AngleGrid.uniform(0.25))))
    assert vals <= spec.levels | {0.0}


def test_spec_validation():
    with pytest.raises(DomainError):
        BeamSpec(((-10, 10, 1.0), (5, 20, 1.0)))
    with pytest.raises(DomainError):
        BeamSpec(((-10, 10, 0.0),))
    with pytest.raises(DomainError):
        BeamSpec(((-10, 10, -1.0),))


def test_catalog_ids_must_be_contiguous():
    with pytest.raises(DomainError):
        BeamClassCatalog((rect_beam(10, class_id=0), rect_beam(20, class_id=2)))


def test_catalog_roundtrip_bit_exact(tmp_path):
    cat = BeamClassCatalog.from_specs(list(default_catalog()) + [omni_beam(), rect_beam(17.3, 11.1)])
    p = tmp_path / "catalog.json"
    cat.save(p)
    back = BeamClassCatalog.load(p)
    assert back == cat
    assert back.dumps().encode() == p.read_bytes()
