import random
import xml.etree.ElementTree as ET
from fractions import Fraction

import pytest

from allowseq.engine import verify_trace
from allowseq.errors import ContractError
from allowseq.geom import (HalfPeriod, PointSet, circular_sequence,
                           deviation_imbalance_link, format_points,
                           in_general_position, line_imbalances, parse_points,
                           render_points_svg, render_trace_svg)
from allowseq.seqcore import identity_sequence
from allowseq.engine import new_trace, Window
from conftest import five_element_steps


def random_general_position(rng, n, span=60):
    while True:
        pts = {(rng.randrange(-span, span), rng.randrange(-span, span))
               for _ in range(n)}
        if len(pts) != n:
            continue
        ps = PointSet(sorted(pts))
        if in_general_position(ps):
            return ps


def test_triangle():
    tri = PointSet([(0, 0), (4, 0), (1, 3)])
    records, mn = line_imbalances(tri)
    assert mn == 1 and all(r.imbalance == 1 for r in records)
    hp = circular_sequence(tri)
    rep = verify_trace(hp.to_trace())
    assert rep.allowable and rep.reaches_reversal
    assert deviation_imbalance_link(tri)


def test_unit_square():
    sq = PointSet([(0, 0), (1, 0), (0, 1), (1, 1)])
    records, mn = line_imbalances(sq)
    assert mn == 0
    assert sorted(r.imbalance for r in records) == [0, 0, 2, 2, 2, 2]
    for r in records:
        assert r.left_count + r.right_count + len(r.labels) == 4


def test_collinear_triple_one_step():
    col = PointSet([(0, 0), (1, 1), (2, 2)])
    hp = circular_sequence(col)
    assert len(hp.events) == 1
    assert hp.events[0].step.flips[0].size == 3
    rep = verify_trace(hp.to_trace())
    assert rep.allowable and rep.reaches_reversal


def test_two_parallel_pairs_share_a_step():
    ps = PointSet([(0, 0), (0, 1), (10, 0), (10, 1)])
    hp = circular_sequence(ps)
    packed = [len(ev.step.flips) for ev in hp.events]
    assert 2 in packed     # the vertical pairs swap simultaneously
    rep = verify_trace(hp.to_trace())
    assert rep.allowable and rep.reaches_reversal


def test_duplicate_points_rejected():
    with pytest.raises(ContractError):
        PointSet([(0, 0), (0, 0)])


def test_link_rejects_collinear():
    with pytest.raises(ContractError):
        deviation_imbalance_link(PointSet([(0, 0), (1, 1), (2, 2)]))


def test_random_sets_pair_count_and_link(rng):
    for _ in range(40):
        n = rng.randint(3, 10)
        ps = random_general_position(rng, n)
        hp = circular_sequence(ps)
        rep = verify_trace(hp.to_trace())
        assert rep.allowable and rep.reaches_reversal
        transpositions = sum(f.size * (f.size - 1) // 2
                             for ev in hp.events for f in ev.step.flips)
        assert transpositions == n * (n - 1) // 2
        assert deviation_imbalance_link(ps)


def test_imbalance_parity(rng):
    for _ in range(25):
        n = rng.randint(3, 9)
        ps = random_general_position(rng, n)
        records, _ = line_imbalances(ps)
        for r in records:
            assert r.imbalance % 2 == n % 2


def test_pivot_independence_under_translation(rng):
    for _ in range(10):
        ps = random_general_position(rng, 6)
        dx, dy = rng.randrange(-30, 30), rng.randrange(-30, 30)
        moved = PointSet([(x + dx, y + dy) for x, y in ps.points])
        assert circular_sequence(ps).steps() == circular_sequence(moved).steps()


def test_rational_coordinates():
    ps = PointSet([(Fraction(1, 3), 0), (Fraction(2, 3), Fraction(1, 7)),
                   (0, 1)])
    assert deviation_imbalance_link(ps)


def test_point_file_round_trip():
    text = "# corners\n0 0\n1 0\n1/2 3/4\n-2 5\n"
    ps = parse_points(text)
    assert len(ps) == 4
    assert parse_points(format_points(ps)) == ps
    with pytest.raises(ContractError):
        parse_points("1 2 3\n")
    with pytest.raises(ContractError):
        parse_points("a b\n")


def test_render_trace_svg_structure():
    tr = new_trace(identity_sequence(1, 5), Window(0))
    for step in five_element_steps():
        tr.emit_step(step)
    svg = render_trace_svg(tr)
    root = ET.fromstring(svg)
    polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert len(polylines) == 5
    # every pair of labels crosses exactly once over the half period
    tr2 = new_trace(identity_sequence(1, 5), Window(0))
    for step in five_element_steps():
        tr2.emit_step(step)
    assert sum(f.size * (f.size - 1) // 2 for s in tr2.to_trace().steps
               for f in s.flips) == 10


def test_render_empty_trace():
    tr = new_trace(identity_sequence(-2, 2), Window(1))
    svg = render_trace_svg(tr)
    root = ET.fromstring(svg)
    polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert len(polylines) == 5


def test_render_points_svg_wellformed(rng):
    ps = random_general_position(rng, 7)
    for with_lines in (False, True):
        ET.fromstring(render_points_svg(ps, with_lines=with_lines))
