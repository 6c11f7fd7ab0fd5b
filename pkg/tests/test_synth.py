from __future__ import annotations

import hashlib
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from cascadia.influence import IrLabel, Stage, comment_positions, influence_ratio, life_stage
from cascadia.ingest import Kind, load_threads, parse_thread_file
from cascadia.synth import (
    InfeasiblePlant, PlantSpec, SynthConfig, emit, format_config, generate, load_config, parse_config,
    parse_plant, simulate_arrivals, write_truth,
)
from cascadia.urlclass import UrlClass
from conftest import FIXTURES


def expected_count(mu, tau, alpha, omega, horizon):
    """E[N(horizon)] for the self-exciting process, from its mean-intensity ODE.

    m(t) = mu e^{-t/tau} + E(t),  E' = alpha m - E/omega,  N' = m.
    """
    def rhs(t, y):
        e, _ = y
        m = mu * np.exp(-t / tau) + e
        return [alpha * m - e / omega, m]

    sol = solve_ivp(rhs, (0, horizon), [0.0, 0.0], rtol=1e-10, atol=1e-10)
    return sol.y[1, -1]


@pytest.mark.parametrize("params", [
    (2.0, 20.0, 0.3, 2.0, 240.0),
    (1.0, 60.0, 0.0, 1.0, 120.0),
    (3.0, 10.0, 0.5, 1.5, 90.0),
])
def test_thinning_matches_quadrature(params):
    mu, tau, alpha, omega, horizon = params
    counts = [len(simulate_arrivals(np.random.default_rng([17, n]), *params)) for n in range(2000)]
    expected = expected_count(mu, tau, alpha, omega, horizon)
    assert abs(np.mean(counts) - expected) <= 0.05 * expected


def test_poisson_case_has_closed_form():
    # alpha = 0: the count is Poisson with mean mu tau (1 - e^{-H/tau}).
    assert expected_count(2.0, 20.0, 0.0, 1.0, 240.0) == pytest.approx(40 * (1 - np.exp(-12)), rel=1e-8)


def test_arrivals_in_range_and_sorted():
    times = simulate_arrivals(np.random.default_rng(0), 2.0, 20.0, 0.3, 2.0, 60.0)
    assert times == sorted(times) and all(0 <= t < 60 for t in times)


def test_silent_process():
    threads, truth = generate(SynthConfig(n_threads=5, base_rate=0.0, excitation=0.0))
    assert [len(t.activities) for t in threads] == [0] * 5
    assert truth.plants == [] and not any(truth.targets.values())


def test_same_seed_byte_identical(tmp_path):
    cfg = load_config(FIXTURES / "planted.conf")
    emit(generate(cfg)[0], tmp_path / "a.jsonl")
    emit(generate(cfg)[0], tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    emit(generate(replace(cfg, seed=cfg.seed + 1))[0], tmp_path / "c.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() != (tmp_path / "c.jsonl").read_bytes()


def test_worker_count_does_not_change_output():
    cfg = replace(load_config(FIXTURES / "planted.conf"), n_threads=12)
    assert generate(cfg, workers=3) == generate(cfg, workers=1)


def test_emit_roundtrip(tmp_path, planted):
    threads, _ = planted
    emit(threads, tmp_path / "c.jsonl")
    assert load_threads(tmp_path / "c.jsonl") == threads
    emit([], tmp_path / "empty.jsonl")
    assert (tmp_path / "empty.jsonl").read_bytes() == b""
    with open(tmp_path / "empty.jsonl", "rb") as fh:
        assert parse_thread_file(fh) == []


def test_truth_file(tmp_path, planted):
    threads, truth = planted
    write_truth(truth, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["record", "post_id", "target"]
    assert sum(l.startswith("thread,") for l in lines) == len(threads)
    assert sum(l.startswith("plant,") for l in lines) == len(truth.plants)


def test_plants_land_in_their_stage(planted):
    threads, truth = planted
    by_id = {t.post_id: t for t in threads}
    for p in truth.plants:
        rank, total, _ = comment_positions(by_id[p.post_id])[p.comment_id]
        assert life_stage(rank / total) is p.stage


def test_regime_directions_realised(planted):
    threads, truth = planted
    by_id = {t.post_id: t for t in threads}
    inc = [p for p in truth.plants if p.direction is IrLabel.INCREASE]
    dec = [p for p in truth.plants if p.direction is IrLabel.DECREASE]
    assert inc and dec
    pos = sum(influence_ratio(by_id[p.post_id], p.comment_id, 60) > 0 for p in inc)
    assert pos / len(inc) >= 0.8
    neg = sum(influence_ratio(by_id[p.post_id], p.comment_id, 60) <= 0 for p in dec)
    assert neg / len(dec) >= 0.8


def test_infeasible_plant():
    cfg = SynthConfig(n_threads=2, base_rate=0.0, excitation=0.0,
                      plants=(PlantSpec(UrlClass.LIGHT, "porn", Stage.DORMANCY),))
    with pytest.raises(InfeasiblePlant, match="p000000"):
        generate(cfg)
    threads, truth = generate(replace(cfg, on_infeasible="skip"))
    assert truth.plants == [] and len(threads) == 2


def test_explosive_config_is_rejected():
    with pytest.raises(ValueError, match="explosive"):
        generate(SynthConfig(n_threads=1, excitation=0.6, max_comments=500))


def test_config_roundtrip_and_errors():
    cfg = load_config(FIXTURES / "planted.conf")
    assert parse_config(format_config(cfg)) == cfg
    assert cfg.ir_regimes == (20.0, 0.0)
    assert parse_plant("critical,spyware,rapidgrowth,2").count == 2
    for bad in ("light,spyware,dormancy,1", "benign,,sometime,1", "light,porn,dormancy"):
        with pytest.raises(ValueError):
            parse_plant(bad)
    with pytest.raises(ValueError, match="line 1"):
        parse_config("bogus = 3\n")
    with pytest.raises(ValueError):
        SynthConfig(decay=0)
    assert cfg.digest() == parse_config(format_config(cfg)).digest()


def test_thread_layout(planted):
    threads, _ = planted
    t = threads[3]
    assert t.post_id == "p000003"
    assert all(a.activity_id.startswith("p000003-") for a in t.activities)
    kinds = {a.kind for a in t.activities}
    assert kinds == {Kind.COMMENT, Kind.REPLY, Kind.REACTION}


def test_content_hash_stable(planted, tmp_path):
    threads, _ = planted
    emit(threads, tmp_path / "x.jsonl")
    first = hashlib.sha256((tmp_path / "x.jsonl").read_bytes()).hexdigest()
    emit(generate(load_config(FIXTURES / "planted.conf"))[0], tmp_path / "y.jsonl")
    assert hashlib.sha256((tmp_path / "y.jsonl").read_bytes()).hexdigest() == first
