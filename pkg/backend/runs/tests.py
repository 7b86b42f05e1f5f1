import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from spinlab.errors import ConfigError, DomainError, OutputError
from droplets.services import DropletRow, DropletTable
from .campaigns import droplet_checks, manifest_path_for, sibling
from .config import RunConfig, build_config, convert, load_config, parse_config
from .emit import Table, emit, format_cell, render_csv, render_json
from .models import AssertionRecord, RunRecord
from .tasks import run_campaign_task


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _run(name, **opts):
    out = io.StringIO()
    call_command(name, stdout=out, **opts)
    return out.getvalue()


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

def test_parse_config_types():
    text = """
    # comment
    [run]
    subcommand = foel   ; trailing comment
    format = json
    [model]
    L = 6
    spin = 1
    periodic = yes
    [dynamics]
    times = 0, 0.5
    """
    values = parse_config(text)
    assert values == {"subcommand": "foel", "format": "json", "L": 6, "spin": "1", "periodic": True,
                      "times": (0.0, 0.5)}


@pytest.mark.parametrize("text,line,key", [
    ("[model]\nL = 4\n\nfoo = 2\n", 4, "foo"),
    ("[nope]\n", 1, "nope"),
    ("L = 4\n", 1, "L"),
    ("[model]\nL = 4\nL = 5\n", 3, "L"),
    ("[model]\nL = four\n", 2, "L"),
    ("[model]\nmodel = ising\n", 2, "model"),
    ("[run]\nrecord = maybe\n", 2, "record"),
])
def test_parse_config_errors_carry_the_line(text, line, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert exc.value.key == key


def test_parse_config_needs_key_value():
    with pytest.raises(ConfigError) as exc:
        parse_config("[model]\nL\n")
    assert exc.value.line == 2


def test_convert_none_only_for_optional_keys():
    assert convert("q", "none") is None
    with pytest.raises(ConfigError):
        convert("L", "none")
    with pytest.raises(ConfigError):
        convert("lambdas", "")


def test_build_config_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[model]\nL = 4\nJ = 2.0\n")
    cfg = build_config("spectrum", path, {"L": "6", "Delta": None})
    assert cfg["L"] == 6 and cfg["J"] == 2.0 and cfg["Delta"] is None
    assert cfg.sources["L"] == "flag"
    assert cfg.sources["J"].startswith("file:")
    assert cfg.sources["spin"] == "default"
    echo = cfg.echo()
    assert echo["model"]["L"] == 6
    assert echo["dynamics"]["times"] == [0.0, 0.1, 0.5, 1.0, 2.0]
    with pytest.raises(KeyError):
        cfg["nope"]


def test_build_config_rejects_wrong_subcommand(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[run]\nsubcommand = foel\n")
    with pytest.raises(ConfigError):
        build_config("spectrum", path)
    with pytest.raises(ConfigError):
        RunConfig("nope")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def test_format_cell():
    assert format_cell(0.1) == "0.10000000000000001"
    assert float(format_cell(1 / 3)) == 1 / 3
    assert format_cell(math.nan) == "nan"
    assert format_cell(-math.inf) == "-inf"
    assert format_cell(True) == "true"
    assert format_cell(Fraction(-3, 2)) == "-3/2"
    assert format_cell(7) == "7"
    with pytest.raises(DomainError):
        format_cell(1j)


def test_empty_table_is_a_header():
    table = Table(("a", "b"))
    assert render_csv(table) == "a,b\n"
    assert json.loads(render_json(table)) == {"columns": ["a", "b"], "data": {"a": [], "b": []}}
    with pytest.raises(DomainError):
        Table(("a", "b"), [(1,)])


def test_csv_and_json_agree(tmp_path):
    table = Table.of(("S", "E"), [(Fraction(1), -0.25), (Fraction(0), 0.75)])
    a = emit(table, "csv", tmp_path / "t.csv")
    b = emit(table, "json", tmp_path / "t.json")
    rows = _rows(a)
    data = json.loads(b.read_text())["data"]
    assert [r["S"] for r in rows] == data["S"] == ["1", "0"]
    assert [float(r["E"]) for r in rows] == data["E"] == [-0.25, 0.75]
    assert table.column("E") == [-0.25, 0.75]


def test_emission_is_byte_identical(tmp_path):
    table = Table(("x",), [(0.1 + 0.2,), (1e-300,)])
    a = emit(table, "csv", tmp_path / "a.csv").read_bytes()
    b = emit(table, "csv", tmp_path / "b.csv").read_bytes()
    assert a == b


def test_unwritable_path_is_an_output_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(OutputError):
        emit(Table(("x",)), "csv", blocker / "t.csv")


def test_artifact_names():
    assert sibling(Path("/o/foel.csv"), "levels") == Path("/o/foel_levels.csv")
    assert manifest_path_for(Path("/o/foel.csv")) == Path("/o/foel.manifest.json")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@pytest.mark.django_db
def test_spectrum_two_spins(tmp_path):
    out = tmp_path / "s.csv"
    text = _run("spectrum", L=2, out=str(out))
    assert "sector_union_matches_full" in text
    rows = _rows(out)
    assert sorted(float(r["energy"]) for r in rows) == pytest.approx([-0.25, -0.25, -0.25, 0.75], abs=1e-12)
    assert {r["M"] for r in rows} == {"-1", "0", "1"}
    manifest = json.loads((tmp_path / "s.manifest.json").read_text())
    assert manifest["exit_code"] == 0
    assert manifest["config"]["model"]["L"] == 2
    assert "numpy" in manifest["versions"]
    run = RunRecord.objects.get()
    assert run.passed and run.subcommand == "spectrum"
    assert run.manifest()["assertions"] == manifest["assertions"]


@pytest.mark.django_db
def test_spectrum_json_without_record(tmp_path):
    out = tmp_path / "s.json"
    _run("spectrum", L=3, format="json", out=str(out), no_record=True)
    payload = json.loads(out.read_text())
    assert payload["columns"] == ["M", "level", "energy"]
    assert len(payload["data"]["energy"]) == 8
    assert RunRecord.objects.count() == 0


@pytest.mark.django_db
def test_foel_spin_one_chain(tmp_path):
    out = tmp_path / "foel.csv"
    _run("foel", L=5, spin="1", out=str(out))
    assert len(_rows(out)) == 243
    levels = _rows(tmp_path / "foel_levels.csv")
    assert [r["S"] for r in levels] == ["5", "4", "3", "2", "1", "0"]
    run = RunRecord.objects.get()
    assert run.passed
    names = set(run.assertions.values_list("name", flat=True))
    assert names == {"foel", "gap_is_top_splitting", "lieb_mattis_side"}
    assert not AssertionRecord.objects.filter(passed=False).exists()


@pytest.mark.django_db
def test_foel_on_antiferromagnet_fails_with_exit_one(tmp_path):
    out = tmp_path / "foel.csv"
    with pytest.raises(CommandError) as exc:
        _run("foel", L=4, J=-1, out=str(out))
    assert exc.value.returncode == 1
    assert out.exists()
    run = RunRecord.objects.get()
    assert run.exit_code == 1
    assert run.assertions.get(name="foel").passed is False


@pytest.mark.django_db
def test_ssep_on_graph_file(tmp_path):
    graph = tmp_path / "path4.graph"
    graph.write_text("vertices 4\n0 1 1.0\n1 2 1.0\n2 3 1.0\n")
    out = tmp_path / "ssep.csv"
    _run("ssep", graph=str(graph), out=str(out))
    rows = _rows(out)
    assert [int(r["n"]) for r in rows] == [1, 2, 3]
    assert [int(r["dim"]) for r in rows] == [4, 6, 4]
    for r in rows:
        assert float(r["lambda_n"]) == pytest.approx(2 - 2 * math.cos(math.pi / 4), abs=1e-8)
    run = RunRecord.objects.get()
    assert run.passed
    assert run.assertions.filter(name="aldous_identity").exists()


@pytest.mark.django_db
def test_ssep_off_paths_reports_the_margin_as_data(tmp_path):
    graph = tmp_path / "triangle.graph"
    graph.write_text("vertices 3\n0 1 1.0\n1 2 1.0\n0 2 1.0\n")
    out = tmp_path / "ssep.csv"
    _run("ssep", graph=str(graph), out=str(out), no_record=True)
    manifest = json.loads((tmp_path / "ssep.manifest.json").read_text())
    assert "aldous_margin" in manifest["summary"]
    assert "aldous_identity" not in {a["name"] for a in manifest["assertions"]}


@pytest.mark.django_db
def test_droplet_single_overturned_spin(tmp_path):
    out = tmp_path / "droplet.csv"
    _run("droplet", q=0.5, n=1, Lmin=14, Lmax=16, out=str(out))
    rows = _rows(out)
    assert [int(r["L"]) for r in rows] == [14, 15, 16]
    assert list(rows[0]) == ["q", "n", "L", "E_L_periodic", "E_open_suq", "E_formula", "abs_dev",
                             "band_width_measured", "band_width_formula"]
    for r in rows:
        assert float(r["E_L_periodic"]) == pytest.approx(0.2, abs=1e-10)
    # the open chain sits (1 − cos(π/L))/Δ above the closed form
    assert float(rows[-1]["E_open_suq"]) - 0.2 == pytest.approx(0.8 * (1 - math.cos(math.pi / 16)), abs=1e-9)
    manifest = json.loads((tmp_path / "droplet.manifest.json").read_text())
    assert manifest["summary"]["E_formula"] == pytest.approx(0.2)
    names = [a["name"] for a in manifest["assertions"]]
    assert names == ["ring_convergence", "open_chain_convergence", "one_magnon_energy", "one_magnon_width",
                     "open_chain_foel"]
    assert all(a["passed"] for a in manifest["assertions"])


@pytest.mark.django_db
def test_droplet_short_open_chain_fails_convergence(tmp_path):
    # at L = 8 the open chain is still 0.061 above E(1)
    with pytest.raises(CommandError) as exc:
        _run("droplet", q=0.5, n=1, Lmin=4, Lmax=8, out=str(tmp_path / "d.csv"))
    assert exc.value.returncode == 1
    record = RunRecord.objects.get()
    failed = [a.name for a in AssertionRecord.objects.filter(run=record, passed=False)]
    assert failed == ["open_chain_convergence"]


def _droplet_table(n, widths, dev_open=0.01):
    rows = [DropletRow(L, 0.0, 0.0, 0.0, dev_open, w) for L, w in widths]
    return DropletTable(0.5, n, 0.0, 0.0, rows)


def test_droplet_checks_two_magnon_width():
    one = droplet_checks(_droplet_table(2, [(12, 0.5), (14, 0.8)]), 0.5, 2, 1e-2)
    assert [c.name for c in one] == ["ring_convergence", "open_chain_convergence", "width_single_candidate"]
    assert one[-1].passed and one[-1].detail["verdict"] == "printed"
    assert one[-1].detail["L"] == 14
    # inside both 15% windows
    both = droplet_checks(_droplet_table(2, [(14, 0.7)]), 0.5, 2, 1e-2)
    assert not both[-1].passed and both[-1].detail["verdict"] == "both"
    none = droplet_checks(_droplet_table(2, [(14, 0.3)]), 0.5, 2, 1e-2)
    assert not none[-1].passed


def test_droplet_checks_skip_missing_columns():
    table = _droplet_table(3, [(6, math.nan)], dev_open=math.nan)
    assert [c.name for c in droplet_checks(table, 0.5, 3, 1e-2)] == ["ring_convergence"]
    failing = droplet_checks(_droplet_table(3, [(6, math.nan)], dev_open=0.03), 0.5, 3, 1e-2)
    assert not failing[1].passed


def test_one_magnon_width_uses_largest_even_ring():
    table = _droplet_table(1, [(8, 1.6), (9, 1.58)])
    checks = droplet_checks(table, 0.5, 1, 1e-2)
    width = checks[-1]
    assert width.name == "one_magnon_width"
    assert width.passed and width.detail["L"] == 8


@pytest.mark.django_db
def test_lightcone_on_chain(tmp_path):
    out = tmp_path / "lc.csv"
    _run("lightcone", L=8, times="0,0.2,1.0", out=str(out))
    rows = _rows(out)
    assert len(rows) == 8 * 3
    assert RunRecord.objects.get().passed


@pytest.mark.django_db
def test_cluster_on_aklt_ring(tmp_path):
    out = tmp_path / "cl.csv"
    _run("cluster", model="aklt", L=6, periodic="true", b_points=3, out=str(out))
    rows = _rows(out)
    assert rows and float(rows[0]["gamma"]) > 0.1
    assert RunRecord.objects.get().passed
    names = {a.name for a in AssertionRecord.objects.all()}
    assert names == {"gapped_unique_ground_state", "exponential_clustering", "zero_b_truncated_correlation",
                     "trivial_decay_bound"}


@pytest.mark.django_db
def test_perturb_aklt_ring(tmp_path):
    out = tmp_path / "p.csv"
    _run("perturb", model="aklt", periodic="true", Ls="6", lambdas="-0.1,0,0.1", out=str(out))
    rows = _rows(out)
    assert [float(r["lambda"]) for r in rows] == [-0.1, 0.0, 0.1]
    assert all(float(r["gap"]) > 0 for r in rows)
    assert RunRecord.objects.get().passed


@pytest.mark.django_db
def test_config_error_exits_with_two(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[model]\nwidth = 3\n")
    with pytest.raises(CommandError) as exc:
        _run("spectrum", config=str(cfg), out=str(tmp_path / "s.csv"))
    assert exc.value.returncode == 2
    assert not (tmp_path / "s.csv").exists()


@pytest.mark.django_db
def test_domain_error_exits_with_three(tmp_path):
    with pytest.raises(CommandError) as exc:
        _run("spectrum", model="xxz_periodic", L=2, q=0.5, out=str(tmp_path / "s.csv"))
    assert exc.value.returncode == 3
    run = RunRecord.objects.get()
    assert run.exit_code == 3 and run.error


@pytest.mark.django_db
def test_output_error_exits_with_four(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(CommandError) as exc:
        _run("spectrum", L=2, out=str(blocker / "s.csv"))
    assert exc.value.returncode == 4


@pytest.mark.django_db
def test_campaign_task_runs_eagerly(tmp_path):
    out = tmp_path / "s.csv"
    result = run_campaign_task.apply(args=("spectrum",), kwargs={"overrides": {"L": 2, "out": str(out)}}).get()
    assert result["exit_code"] == 0
    assert result["data_path"] == str(out)
    assert RunRecord.objects.filter(pk=result["record_id"]).exists()
    failed = run_campaign_task.apply(args=("spectrum",), kwargs={"overrides": {"model": "custom"},
                                                                 "record": False}).get()
    assert failed["exit_code"] == 2
