import json
import re

import pytest

from pcbr.cli import main


def run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def table_sections(text):
    """Parse a text plan table into {section: [[cell per server], ...]}."""
    sections, current = {}, None
    for line in text.splitlines():
        m = re.fullmatch(r"\[(.+)\]", line.strip())
        if m:
            current = m.group(1)
            sections.setdefault(current, [])
        elif current and "|" in line and "Server" not in line and not set(line) <= set("-=+|"):
            sections[current].append([c.strip() for c in line.split("|")])
    return sections


def test_bounds_text(capsys):
    status, out, _ = run(capsys, "bounds", "-N", "2", "-K", "5", "-D", "2")
    assert status == 0
    assert "rate R = 8/13" in out and "L_* = 8" in out and "L^* = 8" in out
    assert "bounds tight" in out
    assert "82/135" in out


def test_bounds_not_tight(capsys):
    status, out, _ = run(capsys, "bounds", "-N", "2", "-K", "6", "-D", "2")
    assert "L_* = 4" in out and "L^* = 8" in out and "not tight" in out


def test_bounds_json_and_csv(capsys):
    _, out, _ = run(capsys, "bounds", "-N", "2", "-K", "5", "-D", "2", "--format", "json")
    assert json.loads(out)["rate"] == {"num": 8, "den": 13}
    _, out, _ = run(capsys, "bounds", "-N", "2", "-K", "5", "-D", "2", "--format", "csv")
    header, row = out.strip().splitlines()
    assert dict(zip(header.split(","), row.split(",")))["rate"] == "8/13"


def test_bounds_rejects_single_server(capsys):
    status, _, err = run(capsys, "bounds", "-N", "1", "-K", "5", "-D", "2")
    assert status == 2
    assert "N must be ≥ 2" in err


def test_plan_text_matches_table_shape(capsys):
    status, out, _ = run(capsys, "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "--format", "text")
    assert status == 0
    sections = table_sections(out)
    assert [len(sections[k]) for k in ("singletons", "2-sums", "3-sums")] == [7, 5, 1]
    assert sections["3-sums"] == [["a7+c4+e4", "a8+c3+e3"]]


def test_plan_json_schema(capsys):
    _, out, _ = run(capsys, "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "2", "--format", "json")
    obj = json.loads(out)
    assert obj["demand_index"] == 2 and obj["params"]["L"] == 8
    assert len(obj["servers"]) == 2 and all(len(s) == 13 for s in obj["servers"])
    sym = obj["servers"][0][-1]
    assert set(sym) == {"support", "entries", "demand_entry", "side_info"}
    assert sym["support"] == [1, 3, 5] and sym["demand_entry"] == 3
    assert sym["side_info"]["server"] == 2
    target = obj["servers"][1][sym["side_info"]["symbol"]]
    assert target["support"] == [1, 5]


def test_plan_csv(capsys):
    _, out, _ = run(capsys, "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "--format", "csv")
    lines = out.strip().splitlines()
    assert lines[0] == "server,k,support,entries,demand_entry,side_info"
    assert len(lines) == 27
    assert "1,2,1;3,1:3;3:2,1,2:3" in lines


def test_plan_large_demand_two_sections(capsys):
    _, out, _ = run(capsys, "plan", "-N", "2", "-K", "5", "-D", "3", "-j", "1")
    assert "Phase 1" in out and "Phase 2" in out
    phase1 = out.split("Phase 2")[0]
    assert "c1" in phase1 and "c3" in phase1


def test_plan_bad_window(capsys):
    status, _, err = run(capsys, "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "5")
    assert status == 2
    assert "W4=[4:5]" in err


def test_run_reports(capsys):
    status, out, _ = run(capsys, "run", "-N", "2", "-K", "5", "-D", "2", "-j", "3", "-q", "2", "--seed", "7")
    assert status == 0 and out.strip() == "rate 8/13, decode OK, oracle OK"
    status, out, _ = run(capsys, "run", "-N", "2", "-K", "5", "-D", "3", "-j", "1", "-q", "5")
    assert status == 0 and out.startswith("rate 3/4, decode OK")


def test_run_json(capsys):
    _, out, _ = run(capsys, "run", "-N", "2", "-K", "5", "-D", "2", "--format", "json")
    obj = json.loads(out)
    assert obj["rate"] == {"num": 8, "den": 13} and obj["ok"] and obj["oracle"]


def test_run_rejects_composite_q(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "-N", "2", "-K", "5", "-D", "2", "-q", "4"])
    assert exc.value.code == 2
    assert "q must be prime" in capsys.readouterr().err


def test_audit_passes(capsys):
    status, out, _ = run(capsys, "audit", "-N", "2", "-K", "5", "-D", "2",
                          "--samples", "2000", "--threshold", "0.15")
    assert status == 0
    assert out.strip().splitlines()[-1].startswith("overall: PASS")


def test_sweep_output(capsys):
    status, out, _ = run(capsys, "sweep", "--N", "2", "--K", "3..5", "--q", "2,3", "--seeds", "2")
    assert status == 0
    assert "(2,5,2): 8/13 @ L=8 vs MPIR 82/135 @ L=82" in out
    assert "overall: PASS" in out


def test_sweep_empty_range(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--K", "3..2"])
    assert exc.value.code == 2
    assert "empty range" in capsys.readouterr().err


def test_output_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        main(["run", "-N", "3", "-K", "7", "-D", "3", "-j", "2", "-q", "3", "--seed", "9",
              "--format", "json", "-o", str(path)])
    assert a.read_bytes() == b.read_bytes()


def test_env_default_format(capsys, monkeypatch):
    monkeypatch.setenv("PCBR_FORMAT", "json")
    _, out, _ = run(capsys, "bounds", "-N", "2", "-K", "5", "-D", "2")
    assert json.loads(out)["L_upper"] == 8


def test_no_float_rates(capsys):
    _, out, _ = run(capsys, "bounds", "-N", "3", "-K", "7", "-D", "3", "--format", "json")
    assert isinstance(json.loads(out)["rate"]["num"], int)
    _, out, _ = run(capsys, "bounds", "-N", "3", "-K", "7", "-D", "3")
    assert re.search(r"rate R = \d+/\d+$", out, re.M)
