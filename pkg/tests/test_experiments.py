import json
import math

import numpy as np
import pytest

from fracreg.errors import DomainError
from fracreg.experiments import (
    ErrorReport,
    ExperimentConfig,
    ReportRow,
    convergence_table,
    emit,
    illposed_demo,
    illposed_mode_count,
    least_squares_slope,
    mise_check,
    remark_rate_exponent,
)
from fracreg.regularizer import RateParams

RATE = RateParams(b=1.0, m=6.0, k=1.0, gamma=3.5, d=1, mu=2.0)


def small_converge_cfg(**kw):
    base = dict(
        kind="converge",
        eps_grid=(1e-4, 3e-5, 1e-5, 3e-6),
        replicates=12,
        seed=4242,
        beta=1.5,
        a=1.0,
        M=32,
        t_eval=(0.25,),
        lipschitz_K=0.02,
        rate=RATE,
        eig_kind="dirichlet",
        eig_count=32,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def small_illposed_cfg(**kw):
    base = dict(
        kind="illposed",
        eps_grid=(1e-1, 1e-2, 1e-3),
        replicates=12,
        seed=555,
        beta=1.8,
        a=1.0,
        M=32,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_illposed_mode_count_rule():
    # floor((2 ln 10)^0.75) + 1 = 4
    assert illposed_mode_count(0.1, 1.0, 1.5) == 4
    assert illposed_mode_count(0.01, 1.0, 1.8) == 8
    with pytest.raises(DomainError):
        illposed_mode_count(1.0, 1.0, 1.5)


def test_illposed_input_analytic_column_decreasing():
    # analytic eps^2 N(eps) decreases once eps < 1/e on the standard grid
    a, beta = 1.0, 1.8
    grid = [1e-1, 1e-2, 1e-3, 1e-4]
    vals = [e * e * illposed_mode_count(e, a, beta) for e in grid]
    assert all(y < x for x, y in zip(vals, vals[1:]))


def test_illposed_demo_small_run():
    rep = illposed_demo(small_illposed_cfg())
    assert len(rep.rows) == 3
    assert rep.meta["checks"]["input_strictly_decreasing"]
    assert rep.meta["checks"]["input_matches_analytic_4se"]
    assert rep.meta["checks"]["output_strictly_increasing"]
    # rows: mise carries output, theory_bound carries input expectation
    assert rep.rows[0].theory_bound == pytest.approx(0.01 * 4)
    assert rep.rows[0].mise > 0


def test_illposed_demo_determinism():
    cfg = small_illposed_cfg()
    a = illposed_demo(cfg)
    b = illposed_demo(cfg)
    assert a.to_csv() == b.to_csv()
    assert a.to_json() == b.to_json()


def test_remark_rate_exponent_values():
    # b=1 collapses the max to the eps^0 term; prefactor drives the order
    rp = RateParams(b=1.0, m=6.0, k=1.0, gamma=3.5, d=1, mu=2.0)
    got = remark_rate_exponent(rp, a=1.0, t=0.25)
    want = 4 * 6 * 0.75 / 13 + 0.0
    assert got == pytest.approx(want, rel=1e-14)
    # away from b=1 the smallest exponent wins
    rp2 = RateParams(b=0.5, m=1.0, k=1.0, gamma=1.0, d=1, mu=0.25)
    got2 = remark_rate_exponent(rp2, a=1.0, t=1.0)
    assert got2 == pytest.approx(min(1.0, 2 * 0.5 * 2 / 3, 4 * 0.5 * 0.25 / 3), rel=1e-14)


def test_convergence_table_small_run():
    rep = convergence_table(small_converge_cfg())
    checks = rep.meta["per_t"]["0.25"]
    assert checks["monotone_decreasing"]
    assert checks["bound_satisfied"]
    assert len(rep.rows) == 4
    # window slopes defined from the third row on
    assert rep.rows[0].loglog_slope is None
    assert rep.rows[2].loglog_slope is not None


def test_convergence_hq_q0_bitwise_equals_l2():
    l2 = convergence_table(small_converge_cfg(norm="l2"))
    h0 = convergence_table(small_converge_cfg(norm="hq", q=0.0))
    for a, b in zip(l2.rows, h0.rows):
        assert a.mise == b.mise  # bitwise: same accumulation path
        assert a.std_err == b.std_err


def test_convergence_requires_rate():
    with pytest.raises(DomainError):
        convergence_table(small_converge_cfg(rate=None))


def test_mise_check_experiment():
    cfg = ExperimentConfig(
        kind="mise-check",
        eps_grid=(0.05,),
        replicates=2000,
        seed=77,
        beta=1.5,
        a=1.0,
    )
    rep = mise_check(cfg)
    assert rep.meta["invariants_ok"]
    assert len(rep.rows) == 3
    for d in rep.meta["settings"]:
        assert d["agrees_4se"] and d["bound_holds"]


def test_config_validation():
    with pytest.raises(DomainError):
        small_converge_cfg(replicates=4)
    with pytest.raises(DomainError):
        small_converge_cfg(eps_grid=(1e-3, 1e-2))  # increasing
    with pytest.raises(DomainError):
        small_converge_cfg(norm="hq", r=0.0)
    with pytest.raises(DomainError):
        ExperimentConfig(kind="nope", eps_grid=(0.1, 0.01), replicates=8,
                         seed=1, beta=1.5, a=1.0)


def test_config_json_round_trip():
    cfg = small_converge_cfg()
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_report_csv_schema_and_order():
    rows = [
        ReportRow(eps=0.1, t=0.5, mise=1.0, std_err=0.1, theory_bound=2.0, loglog_slope=None),
        ReportRow(eps=0.01, t=0.5, mise=0.5, std_err=0.05, theory_bound=None, loglog_slope=1.5),
    ]
    rep = ErrorReport(rows=rows, meta={"x": 1})
    text = rep.to_csv()
    lines = text.splitlines()
    assert lines[0] == "eps,t,mise,std_err,theory_bound,loglog_slope"
    assert lines[1] == "0.1,0.5,1.0,0.1,2.0,"
    assert lines[2] == "0.01,0.5,0.5,0.05,,1.5"
    # eps-descending order is preserved
    eps_col = [float(l.split(",")[0]) for l in lines[1:]]
    assert eps_col == sorted(eps_col, reverse=True)


def test_report_empty_is_header_only():
    assert ErrorReport().to_csv() == "eps,t,mise,std_err,theory_bound,loglog_slope\n"


def test_report_json_round_trip():
    rows = [ReportRow(eps=0.1, t=0.0, mise=1.0, std_err=0.1, theory_bound=None,
                      loglog_slope=None)]
    rep = ErrorReport(rows=rows, meta={"experiment": "t"})
    text = rep.to_json()
    back = ErrorReport.from_json(text)
    assert back.to_json() == text


def test_emit_bit_stable(tmp_path):
    rep = illposed_demo(small_illposed_cfg())
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    emit(rep, str(p1), "csv")
    emit(rep, str(p2), "csv")
    assert p1.read_bytes() == p2.read_bytes()
    j1 = tmp_path / "a.json"
    emit(rep, str(j1), "json")
    assert json.loads(j1.read_text())["meta"]["experiment"] == "illposed"
    with pytest.raises(DomainError):
        emit(rep, str(tmp_path / "c.xml"), "xml")


def test_least_squares_slope_exact_line():
    xs = [0.0, 1.0, 2.0, 3.0]
    ys = [1.0, 3.0, 5.0, 7.0]
    assert least_squares_slope(xs, ys) == pytest.approx(2.0, rel=1e-14)


def test_illposed_two_decade_rise_check_present():
    rep = illposed_demo(small_illposed_cfg())
    assert "output_rises_two_decades" in rep.meta["checks"]
    assert rep.meta["checks"]["output_rises_two_decades"]


def test_shared_noise_config_changes_results_deterministically():
    base = small_converge_cfg()
    shared = small_converge_cfg(shared_noise=True)
    r_ind = convergence_table(base)
    r_sh1 = convergence_table(shared)
    r_sh2 = convergence_table(shared)
    assert r_sh1.to_csv() == r_sh2.to_csv()
    assert r_ind.rows[0].mise != r_sh1.rows[0].mise


def test_convergence_two_eval_times():
    rep = convergence_table(small_converge_cfg(t_eval=(0.25, 0.5), replicates=10))
    assert set(rep.meta["per_t"]) == {"0.25", "0.5"}
    # rows stay eps-descending with both times present per eps
    eps_col = [r.eps for r in rep.rows]
    assert eps_col == sorted(eps_col, reverse=True)
    assert {r.t for r in rep.rows} == {0.25, 0.5}


def test_config_rejects_unknown_keys():
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict({"kind": "illposed", "eps_grid": [0.1, 0.01],
                                    "replicates": 8, "seed": 1, "beta": 1.5,
                                    "a": 1.0, "no_such_knob": 3})


def test_report_renders_rows_eps_descending_even_if_built_unordered():
    rows = [
        ReportRow(eps=0.05, t=0.0, mise=1.0, std_err=0.1, theory_bound=None, loglog_slope=None),
        ReportRow(eps=0.2, t=0.0, mise=2.0, std_err=0.1, theory_bound=None, loglog_slope=None),
        ReportRow(eps=0.01, t=0.0, mise=0.5, std_err=0.1, theory_bound=None, loglog_slope=None),
    ]
    rep = ErrorReport(rows=rows, meta={})
    eps_col = [float(l.split(",")[0]) for l in rep.to_csv().splitlines()[1:]]
    assert eps_col == [0.2, 0.05, 0.01]
    parsed = ErrorReport.from_json(rep.to_json())
    assert [r.eps for r in parsed.rows] == [0.2, 0.05, 0.01]
