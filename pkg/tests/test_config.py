import pytest
import yaml

from sampled_qubit.config import ConfigError, dump_scenario, load_scenario, scenario_from_dict, scenario_to_dict
from sampled_qubit.sampled_loop import Fixed, run_protocol

BASE = {
    "kind": "closed",
    "bounds": {"omega": 0.1, "epsilon": 0.2},
    "target": {"failure_prob": 0.01},
    "plan": {"formula": "Tc", "beta": 0.05, "alpha": 2.5e-3, "eta": 0.8},
    "recovery": {"lyapunov": {"k_y": 1000.0}},
}


def with_(**kw):
    d = {**BASE, **kw}
    return d


def test_designed_period_and_override():
    assert scenario_from_dict(BASE).plan.period == pytest.approx(1.0016742, abs=1e-7)
    sc = scenario_from_dict(with_(plan={**BASE["plan"], "period": 0.5, "scale": 2.0}))
    assert sc.plan.period == 1.0


@pytest.mark.parametrize("bad", [
    with_(extra=1),
    with_(bounds={"omega": 0.1, "eps": 0.2}),
    with_(plan={"formula": "Tc", "beta": 0.05, "alfa": 0.0}),
    with_(recovery={"lyapunov": {"k_y": 1.0, "gain": 2}}),
    with_(realization={"random": {"segment": 1.0}}),
    with_(target={"failure_prob": 0.01, "coherence": 0.9}),
    with_(initial=[0, 0]),
    with_(output={"plot": "x.png"}),
])
def test_unknown_or_malformed_keys(bad):
    with pytest.raises(ConfigError):
        scenario_from_dict(bad)


def test_missing_required():
    d = dict(BASE)
    del d["plan"]
    with pytest.raises(ConfigError, match="missing"):
        scenario_from_dict(d)


def test_load_errors(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("kind: [unclosed\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_scenario(p)
    p.write_text("- a list\n")
    with pytest.raises(ConfigError):
        load_scenario(p)
    p.write_text(yaml.safe_dump(with_(kind="closed", recovery=None)))
    with pytest.raises(ConfigError):
        load_scenario(p)


def test_round_trip(tmp_path):
    sc = scenario_from_dict(with_(realization={"random": {"segment_len": 0.01, "drive": "x"}}, n_periods=3))
    assert scenario_from_dict(scenario_to_dict(sc)) == sc
    p = tmp_path / "out.yaml"
    dump_scenario(sc, p)
    assert load_scenario(p)[0] == sc


def test_fixed_realization_round_trip(tmp_path):
    from sampled_qubit.sampled_loop import certify_bound

    sc = scenario_from_dict(with_(plan={**BASE["plan"], "scale": 1.5}))
    cert = certify_bound(sc, grid=4, levels=4)
    wit = cert.witness(sc)
    p = tmp_path / "w.yaml"
    dump_scenario(wit, p)
    back = load_scenario(p)[0]
    assert isinstance(back.source, Fixed)
    assert back == wit
    assert run_protocol(back).summary()["max_p_fail"] == pytest.approx(cert.worst, abs=1e-9)


def test_shipped_scenarios_load(scenarios_dir):
    files = [f for f in sorted(scenarios_dir.rglob("*.yaml")) if f.name not in ("design_params.yaml", "physical_rates.yaml")]
    assert len(files) == 16
    for f in files:
        load_scenario(f)
