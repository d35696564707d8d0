"""Smoke tests for the python module: shapes, determinism, basic invariants."""

import math

import msfilter


def test_simulate_shapes_and_determinism():
    a = msfilter.simulate(eps=0.1, dt=1e-2, horizon=0.5, seed=7)
    assert len(a["t"]) == 51
    assert len(a["x_eps"]) == len(a["z_eps"]) == len(a["x_hom"]) == 51
    assert a["t"][0] == 0.0 and abs(a["t"][-1] - 0.5) < 1e-12
    b = msfilter.simulate(eps=0.1, dt=1e-2, horizon=0.5, seed=7)
    assert a["x_eps"] == b["x_eps"]  # bitwise reproducible
    assert a["x_hom"] == b["x_hom"]
    c = msfilter.simulate(eps=0.1, dt=1e-2, horizon=0.5, seed=8)
    assert a["x_eps"] != c["x_eps"]
    assert a["sup_sq_diff"] > 0.0
    assert all(math.isfinite(v) for v in a["x_eps"] + a["z_eps"] + a["x_hom"])


def test_averaged_drift_oracle():
    # the catalog drift is odd in x; zero at the origin
    assert msfilter.averaged_drift(0.0) == 0.0
    v = msfilter.averaged_drift(0.7)
    assert abs(msfilter.averaged_drift(-0.7) + v) < 1e-15
    assert math.isfinite(v) and v != 0.0


def test_estimate_averaged_drift_matches_oracle():
    est = msfilter.estimate_averaged_drift([0.5], dt=0.01, horizon=300.0, seed=3)
    truth = msfilter.averaged_drift(0.5)
    assert abs(est["bbar"][0] - truth) < max(5.0 * est["se"][0], 0.05)


def test_run_filter_normalization():
    out = msfilter.run_filter(eps=0.1, dt=2e-3, horizon=0.3, np=300, seed=11)
    ones = out["pi"]["one"]
    assert all(v == 1.0 for v in ones)  # normalized estimate of the constant is exact
    assert all(1.0 <= e <= 300.0 + 1e-9 for e in out["ess"])
    tanh_v = out["pi"]["tanh"]
    assert all(-1.0 <= v <= 1.0 for v in tanh_v)


def test_run_experiment_report():
    ok, csv_text = msfilter.run_experiment("invariant-suite")
    lines = csv_text.strip().split("\n")
    assert lines[0] == "record,key,eps,value,se,n,aborts,note"
    assert any(line.startswith("config,experiment.kind,") for line in lines)
    assert ok


def test_config_error_maps_to_python_exception():
    try:
        msfilter.run_experiment("no-such-kind")
    except msfilter.ConfigError:
        pass
    else:
        raise AssertionError("expected ConfigError")
