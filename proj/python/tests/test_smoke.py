import csv
import io
import json
import math

import pytest

import gal_engine as gal


def test_formulas():
    assert gal.entropy(0.5) == pytest.approx(math.log(2), abs=1e-12)
    assert gal.entropy(0.0) == 0.0
    assert gal.entropy(0.3) == pytest.approx(0.61086430, abs=1e-8)
    with pytest.raises(gal.DomainError):
        gal.entropy(1.5)
    assert gal.openness([0.2, 0.4], 0.005) == pytest.approx(0.0015, abs=1e-15)
    assert gal.rank_top_k([0.2, 0.0, 0.6, 0.6], 3) == [2, 3, 0]
    assert gal.should_stop([0.2, 0.0, 0.0], 3, 1, 4) == (True, "converged")
    assert gal.phi([1, 1, 0], [1, 0, 0], [0, 1, 0])  # tie counts as overfit
    assert not gal.phi([0.9, 0.1, 0], [1, 0, 0], [0, 1, 0])


def test_config_round_trip(tmp_path):
    cfg = gal.default_config()
    assert len(cfg["anchors"]) == 18
    assert cfg["m"] == 10 and cfg["k"] == 3
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert gal.load_config(path) == cfg
    bad = dict(cfg, k=0)
    with pytest.raises(gal.ConfigError):
        gal.Run.start(bad, tmp_path / "bad")


def test_simulated_run(tmp_path):
    cfg = dict(gal.default_config(), master_seed=7)
    with gal.Run.start(cfg, tmp_path / "run") as run:
        assert run.status == "running"
        run.run_round()
        assert run.current_round == 1
        rounds = run.rounds()
        assert len(rounds[0]["anchors"]) == 18
        assert run.run_until_pause() == "stopped"
        summary = run.summary()
        digest = run.state_hash()
    assert summary["status"] == "stopped"
    resumed = gal.Run.resume(tmp_path / "run")
    assert resumed.state_hash() == digest
    resumed.export("training-set", tmp_path / "out")
    refs = json.loads((tmp_path / "out" / "references.json").read_text())
    assert refs[0]["origin"] == "original"


def test_human_decision(tmp_path):
    cfg = dict(gal.default_config(), strategy="human", master_seed=3)
    run = gal.Run.start(cfg, tmp_path / "run")
    assert run.run_until_pause() == "awaiting_human"
    cands = run.candidates()
    assert len(cands["anchors"]) == 18
    with pytest.raises(gal.ValidationError):
        run.submit_decision([(0, "r1-a1-j1")])
    pairs = [(a["anchor_id"], a["candidates"][0]["sample_id"]) for a in cands["anchors"][:3]]
    run.submit_decision(pairs)
    refs = run.references()
    assert len(refs) == 4
    assert refs[1]["weight"] == pytest.approx(cands["delta_preview"], abs=1e-6)
    with pytest.raises(gal.StateError):
        run.submit_decision([])


def test_compare(tmp_path):
    text = gal.compare(gal.default_config(), ["random", "uncertainty+balance"], 2, tmp_path)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0][0] == "strategy"
    assert len(rows) == 1 + 4 + 2
    with pytest.raises(gal.ConfigError):
        gal.compare(gal.default_config(), ["human"], 1, tmp_path)
