import re

import pytest

from driftbench.bench import ALL_KINDS, PolicyScore, PopulationResult
from driftbench.errors import FormatError
from driftbench.report import (curve_svg, emit_report, parse_population_csv, population_csv, rank_rows,
                               topk_markdown)


def pop(arch, corridor):
    p = PopulationResult(arch)
    for i, c in enumerate(corridor):
        d = {k.value: 40.0 + i + 0.25 * j for j, k in enumerate(ALL_KINDS)}
        d["corridor"] = c
        p.policies.append(PolicyScore(arch, i, 1000 + i, distances=d))
    return p


def test_empty_population_headers_only(tmp_path):
    paths = emit_report([], tmp_path)
    assert (tmp_path / "population.csv").read_text() == "arch,index,train_seed,status,canyon,forest,sandbox,corridor,rank\n"
    assert set(paths) >= {"population.csv", "topk.md", "curve.svg"}


def test_two_arch_curve_has_two_polylines(tmp_path):
    emit_report([pop("naux", [10, 20, 15]), pop("auxd", [12, 8, 30])], tmp_path)
    svg = (tmp_path / "curve.svg").read_text()
    assert svg.count("<polyline") == 2


def test_topk_layout():
    rows = parse_population_csv(population_csv([pop("naux", [10, 20, 15, 5, 9, 1]), pop("auxd", [3, 4, 5, 6, 7, 8])]))
    md = topk_markdown(rows)
    lines = md.strip().splitlines()
    assert lines[0] == ("| Average distance [m] | TOP5 NAUX | TOP5 AUXD | TOP3 NAUX | TOP3 AUXD | TOP1 NAUX | "
                        "TOP1 AUXD |")
    assert [l.split("|")[1].strip() for l in lines[2:]] == ["Canyon", "Forest", "Sandbox", "Corridor"]
    corridor = lines[-1].split("|")[2:-1]
    # TOP1 NAUX is the 20 m policy, TOP3 NAUX the mean of 20, 15, 10.
    assert corridor[4].strip() == "20.00" and corridor[2].strip() == "15.00"


def test_single_policy_topk_columns_equal():
    rows = parse_population_csv(population_csv([pop("naux", [12.5])]))
    for line in topk_markdown(rows).strip().splitlines()[2:]:
        cells = [c.strip() for c in line.split("|")[2:-1]]
        assert len(set(cells)) == 1


def test_ranks_in_csv_follow_corridor():
    text = population_csv([pop("naux", [3.0, 9.0, 9.0])])
    rows = text.strip().splitlines()[1:]
    assert [r.split(",")[-1] for r in rows] == ["3", "1", "2"]
    assert [r["index"] for r in rank_rows(parse_population_csv(text), "naux")] == [1, 2, 0]


def test_aborted_policy_row():
    p = pop("naux", [3.0])
    p.policies.append(PolicyScore("naux", 1, 77, status="aborted"))
    text = population_csv([p])
    assert text.strip().splitlines()[-1] == "naux,1,77,aborted,,,,,"


def test_bad_csv_rejected():
    with pytest.raises(FormatError):
        parse_population_csv("a,b\n1,2\n")


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    rows = parse_population_csv(population_csv([pop("naux", [10, 20]), pop("auxd", [5, 25])]))
    root = ET.fromstring(curve_svg(rows))
    assert root.tag.endswith("svg")
    pts = [p.get("points") for p in root.iter() if p.tag.endswith("polyline")]
    xs = [float(pair.split(",")[0]) for pair in pts[0].split()]
    assert xs == sorted(xs)


def test_acd_markdown_rows_and_topk_by_corridor():
    from driftbench.report import acd_markdown

    rows = parse_population_csv(population_csv([pop("naux", [1.0, 9.0])]))
    acd = ("arch,index,loc:atrium,loc:garage,cue:Strange,cue:Vertical,location_avg,cue_avg,per_frame\n"
           "naux,0,10,20,30,40,15,35,50\n"
           "naux,1,90,80,70,60,85,65,55\n")
    md = acd_markdown(rows, acd).strip().splitlines()
    titles = [l.split("|")[1].strip() for l in md[2:]]
    assert titles == ["Atrium", "Garage", "Avg. Loc.", "Strange", "Vertical", "Avg. Cue", "Per frame"]
    # TOP1 is index 1 (corridor 9 m); TOP3/TOP5 average both policies.
    atrium = [c.strip() for c in md[2].split("|")[2:-1]]
    assert atrium == ["50", "50", "90"]
