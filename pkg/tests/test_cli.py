import json
import warnings

import pytest

from cachelab import cli
from cachelab.approx import che_lru, fagin_lru
from cachelab.fixtures import figure11_catalog
from cachelab.markov import ChainSpec, brute_force_chain, lru_exact_variable_size
from cachelab.sim import Kind, simulate
from cachelab.workload import load_trace

EXACT_OHR = {"LRU": 731 / 1400, "FIFO": 131 / 248, "CLOCK_PER_REQUEST": 613 / 1160,
             "RANDOM": 529 / 1000}


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    text = out.read_text() if out.exists() else ""
    if name.endswith(".json"):
        return code, json.loads(text)["rows"] if text else []
    return code, cli.rows_from_csv(text) if text else []


def stat_rows(rows):
    return [{k: v for k, v in r.items() if k != "runtime"} for r in rows]


def test_gen_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["gen", "--catalog", "500", "--zipf", "0.8", "--sizes", "lognormal:1,0.5",
            "--requests", "5000", "--seed", "9"]
    assert cli.main([*args, "--out", str(a)]) == 0
    assert cli.main([*args, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    tr = load_trace(str(a))
    assert len(tr) == 5000
    m = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert m["seeds"] == [9]


def test_sim_figure11(tmp_path):
    code, rows = run(tmp_path, "sim", "--fixture", "figure11", "--requests", "400000",
                     "--policy", "LRU,FIFO,CPR,RANDOM", "--capacity", "4", "--seed", "3")
    assert code == 0
    ohr = {r["solver"]: r for r in rows if r["metric"] == "ohr"}
    assert set(ohr) == set(EXACT_OHR)
    for name, exact in EXACT_OHR.items():
        assert abs(ohr[name]["value"] - exact) < 4 * ohr[name]["stderr"]
    for r in rows:
        assert r["stderr"] is not None and r["seed"] == 3 and r["rep"] == 0


def test_exact_rows_equal_direct_calls(tmp_path):
    code, rows = run(tmp_path, "exact", "--fixture", "figure11")
    assert code == 0
    cat = figure11_catalog()
    got = {(r["solver"], r["metric"]): r["value"] for r in rows}
    lru = lru_exact_variable_size(cat.pmf, cat.sizes, 4, cat.values)
    assert got[("LRU[exact]", "ohr")] == lru.ohr and got[("LRU[exact]", "bhr")] == lru.bhr
    for kind in ("FIFO", "CLOCK_PER_REQUEST", "RANDOM"):
        ch = brute_force_chain(ChainSpec(kind, tuple(cat.pmf), 4, tuple(cat.sizes),
                                         tuple(cat.values)))
        assert got[(f"{kind}[chain]", "ohr")] == ch.ohr
        assert got[(f"{kind}[chain]", "bhr")] == ch.bhr
    for r in rows:
        assert r["stderr"] is None  # analytic rows carry no standard error


def test_exact_guard_gives_partial_exit(tmp_path):
    code, rows = run(tmp_path, "exact", "--catalog", "30", "--capacity", "5", "--policy",
                     "LRU,FIFO")
    assert code == cli.EXIT_PARTIAL
    assert any(r["status"] == cli.SKIPPED for r in rows)
    # the unit-size product form still runs for FIFO
    assert any(r["solver"] == "PRODUCT_FORM" and r["status"] == "ok" for r in rows)


def test_sweep_fast_path_equals_simulation(tmp_path):
    code, rows = run(tmp_path, "sweep", "--catalog", "300", "--requests", "20000",
                     "--capacity", "log:5:300:6", "--policy", "LRU", "--seed", "2")
    assert code == 0
    fast = {r["capacity"]: r["value"] for r in rows
            if r["solver"] == "LRU[stack]" and r["metric"] == "ohr"}
    ns = cli.build_parser().parse_args(["sweep", "--catalog", "300", "--requests", "20000",
                                        "--capacity", "5", "--seed", "2"])
    tr = cli.build_trace(ns, 0)
    assert len(fast) == 6
    for c, v in fast.items():
        assert v == simulate("LRU", tr, c).ohr


def test_sweep_curves_below_static_bound(tmp_path):
    code, rows = run(tmp_path, "sweep", "--catalog", "10000", "--zipf", "1.0", "--requests",
                     "100000", "--capacity", "log:10:10000:4", "--policy", "LRU,FIFO,LFU")
    assert code == 0
    bound = {r["capacity"]: r["value"] for r in rows if r["solver"] == "STATIC_BOUND"}
    for r in rows:
        if r["metric"] == "ohr" and r["stderr"] is not None:
            assert r["value"] <= bound[r["capacity"]] + 4 * r["stderr"]


def test_sweep_variable_sizes_uses_simulation(tmp_path):
    code, rows = run(tmp_path, "sweep", "--catalog", "100", "--sizes", "lognormal:0,1",
                     "--requests", "5000", "--capacity", "10,20", "--policy", "LRU")
    assert code == 0
    assert {r["solver"] for r in rows if r["metric"] == "ohr"} >= {"LRU", "STATIC_BOUND"}


def test_bounds_rows(tmp_path):
    code, rows = run(tmp_path, "bounds", "--fixture", "figure5", "--capacity", "7", "--trim",
                     "0", "--exhaustive")
    assert code == 0
    got = {(r["solver"], r["metric"]): r["value"] for r in rows}
    assert got[("KNAPSACK_2D", "bound_lo")] == pytest.approx(9 / 15)
    assert got[("KNAPSACK_2D", "bound_hi")] == pytest.approx(12 / 15)
    assert got[("EXHAUSTIVE", "vhr")] == pytest.approx(10 / 15)
    code, rows = run(tmp_path, "bounds", "--catalog", "200", "--requests", "5000",
                     "--capacity", "1,10,50,200", name="b2.csv")
    lo = {r["capacity"]: r["value"] for r in rows if r["metric"] == "bound_lo"}
    hi = {r["capacity"]: r["value"] for r in rows if r["metric"] == "bound_hi"}
    assert all(lo[c] <= hi[c] + 1e-12 for c in lo)


def test_approx_rows(tmp_path):
    code, rows = run(tmp_path, "approx", "--catalog", "1000", "--capacity", "10,100")
    assert code == 0
    got = {(r["solver"], r["capacity"], r["metric"]): r["value"] for r in rows}
    from cachelab.workload import zipf_pmf
    p = zipf_pmf(1000, 1.0)
    assert got[("CHE", 10, "ohr")] == che_lru(p, 10).hit_ratio
    assert got[("FAGIN", 100, "ct")] == fagin_lru(p, 100).root


def test_ttl_rows(tmp_path):
    code, rows = run(tmp_path, "ttl", "--lam", "1,2", "--delta-t", "0.5", "--requests",
                     "20000", "--reps", "2")
    assert code == 0
    des = [r for r in rows if r["solver"].startswith("DES")]
    assert len(des) == 3 * 2 * 2 and all(r["stderr"] is not None for r in des)


def test_bench_reports_positive_throughput(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code, rows = run(tmp_path, "bench", "--catalog", "200", "--requests", "5000",
                         "--capacity", "20", "--repeat", "2")
    assert code == 0
    assert {r["solver"].split("(")[0] for r in rows} == {"FIFO", "SCORE_GATED_CLOCK", "LRU",
                                                          "LFU"}
    assert all(r["value"] > 0 for r in rows)


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["nope"]) == cli.EXIT_USAGE
    assert cli.main(["sim", "--capacity", "x,y"]) == cli.EXIT_USAGE
    assert cli.main(["sim", "--capacity", "3", "--warmup", "1.5"]) == cli.EXIT_USAGE
    assert cli.main(["sim", "--capacity", "3", "--policy", "MRU"]) == cli.EXIT_USAGE
    assert cli.main(["sim", "--capacity", "3", "--trace", str(tmp_path / "missing.csv")]) \
        == cli.EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("time,object,size,value\n1,a,,\n")
    assert cli.main(["sim", "--capacity", "3", "--trace", str(bad)]) == cli.EXIT_DATA
    assert "line 2" in capsys.readouterr().err


def test_csv_rows_round_trip():
    rows = [cli.row("sim", "LRU", 10, "ohr", 0.123456789012345, 1e-3, 7, 0, 0.5),
            cli.row("exact", "FIFO[chain]", 4, "ohr", 131 / 248),
            cli.row("exact", "LRU", 4, "ohr", None, status=cli.SKIPPED)]
    assert cli.rows_from_csv(cli.rows_to_csv(rows)) == rows


def test_manifest_reproduces_rows(tmp_path):
    argv = ["sim", "--catalog", "200", "--requests", "5000", "--capacity", "5,50",
            "--policy", "RANDOM,LRU", "--reps", "2", "--seed", "4"]
    code, rows = run(tmp_path, *argv)
    m = json.loads((tmp_path / "out.csv.manifest.json").read_text())
    assert m["seeds"] == [4, 5] and m["rows"] == len(rows)
    again = [a for a in m["argv"]]
    i = again.index("--out")
    again[i + 1] = str(tmp_path / "again.csv")
    assert cli.main(again) == 0
    rows2 = cli.rows_from_csv((tmp_path / "again.csv").read_text())
    assert stat_rows(rows) == stat_rows(rows2)


def test_workers_do_not_change_rows(tmp_path):
    argv = ["sim", "--catalog", "200", "--requests", "5000", "--capacity", "5,50",
            "--policy", "RANDOM,FIFO"]
    _, one = run(tmp_path, *argv, name="one.csv")
    _, two = run(tmp_path, *argv, "--workers", "2", name="two.csv")
    assert stat_rows(one) == stat_rows(two)


def test_json_output_embeds_manifest(tmp_path):
    out = tmp_path / "x.json"
    assert cli.main(["approx", "--catalog", "50", "--capacity", "5", "--format", "json",
                     "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["manifest"]["config"]["catalog"] == 50
    assert set(doc["manifest"]["versions"]) >= {"numpy", "scipy", "numba", "cachelab"}
    assert all(set(r) == set(cli.ROW_FIELDS) for r in doc["rows"])


def test_parse_helpers():
    assert cli.parse_capacities("8,2,2") == [2, 8]
    assert cli.parse_capacities("log:1:1000:4") == [1, 10, 100, 1000]
    assert cli.parse_capacities("lin:0:10:3") == [0, 5, 10]
    p = cli.parse_policy("MULTI_LEVEL:1FIFO+2RANDOM")
    assert p.kind is Kind.MULTI_LEVEL and [l for l, _ in p.levels] == [1, 2]
    p = cli.parse_policy("PROB_ADMIT:LRU@0.5")
    assert p.inner is Kind.LRU and p.admit == 0.5
    p = cli.parse_policy("PROB_ADMIT:FIFO@1:0.5")
    assert p.admit == (1.0, 0.5)
    assert cli.parse_policy("WINDOW_LFU:100").window == 100
    assert str(cli.parse_policy("SGC:c/s").score) == "c/s"
    with pytest.raises(cli.UsageError):
        cli.parse_policy("LRU:3")
