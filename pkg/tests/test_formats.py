import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_instance
from rhvrp.cuts import FractionalSolution
from rhvrp.formats import (
    ParseError, RouteRecord, RunResult, bundled, emit_result, load_result, parse_canonical, parse_cordeau,
    parse_fractional, parse_golden_taillard, parse_instance, write_canonical, write_fractional,
)
from rhvrp.instance import Variant, apply_variant

SDVRP_SAMPLE = """\
3 2 4 2
0 20
0 30
1 10 0 0 5 1 1 1
2 0 10 0 7 1 2 1 2
3 -10 0 0 4 1 1 2
4 0 -10 0 6 1 2 1 2
0 0 0 0 0
"""

MDVRP_SAMPLE = """\
2 3 3 2
0 15
0 15
1 1 1 0 4 1 2 1 2
2 9 1 0 5 1 2 1 2
3 5 5 0 6 1 2 1 2
4 0 0 0 0
5 10 0 0 0
"""


def test_bundled_taillard_13_dimensions():
    inst = parse_instance(bundled("taillard_13"), "golden_taillard")
    assert (inst.n, inst.m) == (50, 6)


def test_bundled_golden_files_parse():
    for name, n in [("golden_03", 20), ("golden_04", 20), ("cmt_01", 50)]:
        assert parse_instance(bundled(name), "golden_taillard").n == n


def test_cordeau_sdvrp_sample():
    inst = parse_cordeau(SDVRP_SAMPLE)
    assert inst.variant is Variant.SDVRP
    assert (inst.n, inst.m) == (4, 2)
    assert inst.allowed_types(1) == {0}
    assert inst.allowed_types(2) == {0, 1}
    assert inst.capacities.tolist() == [20, 30]
    assert inst.counts.tolist() == [2, 2]


def test_cordeau_mdvrp_sample():
    inst = parse_cordeau(MDVRP_SAMPLE)
    assert inst.variant is Variant.MDVRP
    assert inst.costs[0, 0, 2] == pytest.approx(np.hypot(9, 1))
    assert inst.costs[1, 0, 2] == pytest.approx(np.hypot(1, 1))


def test_canonical_round_trip_of_bundled_instance():
    inst = apply_variant(parse_instance(bundled("golden_04"), "golden_taillard"), "FSMD")
    assert parse_canonical(write_canonical(inst)) == inst


@pytest.mark.parametrize("sample", [SDVRP_SAMPLE, MDVRP_SAMPLE])
def test_canonical_round_trip_with_sections(sample):
    inst = parse_cordeau(sample)
    back = parse_canonical(write_canonical(inst))
    assert back == inst
    np.testing.assert_array_equal(back.costs, inst.costs)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["none", "one_decimal", "integer"]))
def test_canonical_round_trip_random(seed, rounding):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, int(rng.integers(1, 12)), int(rng.integers(1, 4))).replace(rounding=rounding)
    assert parse_canonical(write_canonical(inst)) == inst


def _golden_text():
    return bundled("golden_03").read_text()


def test_parse_error_reports_line_number():
    lines = _golden_text().splitlines()
    lines[4] = "2 49 abc 30"
    with pytest.raises(ParseError) as exc:
        parse_golden_taillard("\n".join(lines))
    assert exc.value.line == 5
    assert "abc" in str(exc.value)


def test_wrong_field_count_is_reported():
    lines = _golden_text().splitlines()
    lines[3] = "2 49 49"
    with pytest.raises(ParseError) as exc:
        parse_golden_taillard("\n".join(lines))
    assert exc.value.line == 4


def test_every_truncation_is_rejected():
    text = _golden_text()
    keep = text.splitlines()
    body = [i for i, l in enumerate(keep) if l.split("#", 1)[0].strip()]
    for cut in body[:-1]:
        with pytest.raises(ParseError):
            parse_golden_taillard("\n".join(keep[:cut + 1]))


def test_trailing_data_rejected():
    with pytest.raises(ParseError):
        parse_golden_taillard(_golden_text() + "\n7 7 7 7\n")


def test_canonical_rejects_unknown_section():
    text = write_canonical(parse_cordeau(SDVRP_SAMPLE)).replace("allowed", "forbidden")
    with pytest.raises(ParseError):
        parse_canonical(text)


def test_cordeau_rejects_bad_combination():
    bad = SDVRP_SAMPLE.replace("1 10 0 0 5 1 1 1", "1 10 0 0 5 1 1 3")
    with pytest.raises(ParseError) as exc:
        parse_cordeau(bad)
    assert exc.value.line == 4


def _result():
    return RunResult(
        cost=12.5, penalized_cost=12.5, feasible=True,
        routes=[RouteRecord([1, 3], 0, 7.0, 3.0), RouteRecord([2], 1, 4.0, 1.0)],
        seed=123, wall_time=0.25, tabu_calls=4, trace=[[10, 1, 20.0], [30, 3, 12.5]],
        config={"instance": "x.txt", "alpha": 0.1},
    )


def test_result_round_trip(tmp_path):
    res = _result()
    emit_result(res, tmp_path / "r.json")
    assert load_result(tmp_path / "r.json") == res


def test_result_file_has_stable_key_order(tmp_path):
    emit_result(_result(), tmp_path / "a.json")
    emit_result(_result(), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_corrupted_result_is_a_parse_error(tmp_path):
    p = tmp_path / "r.json"
    emit_result(_result(), p)
    p.write_text(p.read_text()[:-20])
    with pytest.raises(ParseError):
        load_result(p)
    p.write_text(json.dumps({"format": "rhvrp-result", "version": 1, "result": {"cost": 1}}))
    with pytest.raises(ParseError):
        load_result(p)
    p.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ParseError):
        load_result(p)


def test_fractional_round_trip_and_errors():
    fs = FractionalSolution(3, 2, {(0, 1, 0): 1.0, (1, 2, 0): 0.5, (2, 3, 1): 0.25}, {(1, 0): 1.0, (2, 1): 0.5})
    back = parse_fractional(write_fractional(fs))
    assert back.x == fs.x and back.y == fs.y
    with pytest.raises(ParseError) as exc:
        parse_fractional("3 2\ny 1 0 1.0\nz 1 2 3\n")
    assert exc.value.line == 3
    with pytest.raises(ParseError):
        parse_fractional("3 1\nx 1 2 0 1.5\n")
