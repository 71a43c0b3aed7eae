import pytest

from lsqsim import harness
from lsqsim.harness import (
    CSV_COLUMNS,
    PRESETS,
    RunCache,
    build_config,
    get_scenario,
    run_sweep,
)
from lsqsim.processes import ConfigError


def test_presets_are_balanced_hundreds():
    assert set(PRESETS) == {
        "moderate_10_90", "moderate_50_50", "moderate_90_10",
        "high_10_90", "high_50_50", "high_90_10",
    }
    for scen in PRESETS.values():
        assert scen.n == 100
        assert scen.m == 10
        assert abs(scen.capacity() - 100.0) < 1e-9


def test_preset_service_layout():
    scen = PRESETS["high_10_90"]
    strong = [s for s in scen.services if s.kind == "geometric_min1"]
    weak = [s for s in scen.services if s.kind == "geometric"]
    assert len(strong) == 10 and len(weak) == 90
    # fast servers come first and run ten times the weak rate
    assert scen.services[0].kind == "geometric_min1"
    assert scen.services[-1].kind == "geometric"
    assert abs(strong[0].rate - 10 * weak[0].rate) < 1e-12


def test_build_config_scales_arrivals_to_load():
    scen = get_scenario("moderate_50_50")
    cfg = build_config(scen, "sample:2", 0.9, 50_000, seed=7)
    assert abs(cfg.arrival.total_rate - 0.9 * 100.0) < 1e-9
    assert cfg.warmup == 5_000
    assert cfg.m == 10 and cfg.n == 100
    assert cfg.scenario == "moderate_50_50"
    assert cfg.load == 0.9
    cfg.validate()


def test_get_scenario_rejects_unknown():
    with pytest.raises(ConfigError):
        get_scenario("no_such_mix")


def test_scenario_yaml_round_trip(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(
        "name: tiny\n"
        "dispatchers: 2\n"
        "services:\n"
        "  - {kind: geometric_min1, rate: 2.0, count: 3}\n"
        "  - {kind: deterministic, rate: 1.0}\n"
        "loads: [0.5]\n"
        "seeds: [9]\n"
        "slots: 4000\n"
    )
    scen = get_scenario(str(path))
    assert scen.name == "tiny"
    assert scen.m == 2
    assert scen.n == 4
    assert scen.capacity() == 7.0
    assert scen.default_loads == (0.5,)
    assert scen.default_seeds == (9,)
    assert scen.default_slots == 4000


def test_run_cache_memoizes_by_fingerprint():
    scen = get_scenario("moderate_50_50")
    cache = RunCache()
    a = cache.get(build_config(scen, "jsq", 0.5, 2_000, 1))
    b = cache.get(build_config(scen, "jsq", 0.5, 2_000, 1))
    assert a is b
    assert cache.misses == 1
    cache.get(build_config(scen, "jsq", 0.5, 2_000, 2))
    assert cache.misses == 2


def test_cell_formatting():
    assert harness._cell(None) == ""
    assert harness._cell(1.5) == "1.5"
    assert harness._cell(3) == 3


def test_sweep_writes_deterministic_outputs(tmp_path):
    scen = get_scenario("moderate_10_90")
    kw = dict(policies=["sample:2"], loads=[0.8], seeds=[1, 2], slots=2_000)
    run_sweep(scen, tmp_path / "a", **kw)
    run_sweep(scen, tmp_path / "b", **kw)

    csv_a = (tmp_path / "a" / "results.csv").read_bytes()
    csv_b = (tmp_path / "b" / "results.csv").read_bytes()
    assert csv_a == csv_b
    lines = csv_a.decode().splitlines()
    assert lines[0] == "# schema_version: 1"
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2 + 2  # two grid rows

    json_a = (tmp_path / "a" / "reports.json").read_bytes()
    json_b = (tmp_path / "b" / "reports.json").read_bytes()
    assert json_a == json_b


def test_parallel_sweep_matches_serial(tmp_path):
    scen = get_scenario("moderate_90_10")
    kw = dict(policies=["jsq", "update:0.2"], loads=[0.5], seeds=[1], slots=1_000)
    run_sweep(scen, tmp_path / "serial", parallel=1, **kw)
    run_sweep(scen, tmp_path / "par", parallel=2, **kw)
    assert (tmp_path / "serial" / "results.csv").read_bytes() == (
        tmp_path / "par" / "results.csv"
    ).read_bytes()
