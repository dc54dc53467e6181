"""End-to-end acceptance checks.

One test per numbered criterion; each prints a PASS/FAIL line with the
measured quantities before asserting, so `pytest -v -s tests/test_acceptance.py`
reads as a checklist. Criteria 3 and 4a assert certified-rate caps on a
ring instance; see README "Verification notes" for why those caps are
not met by the faithful protocol (the measured slopes are printed and
asserted as specified, and the tests fail honestly).
"""

import dataclasses
import time

import numpy as np
import pytest

from consensus_splitting.cli import main as cli_main
from consensus_splitting.compression import (
    CompressionOperator,
    apply,
    dense_nbytes,
    verify_contract,
)
from consensus_splitting.ecl import EclConfig, EclNetwork
from consensus_splitting.presets import get_preset
from consensus_splitting.simulator import (
    DivergenceError,
    build_graph,
    compute_fixed_point,
    geometric_rate,
    partition,
    run,
    to_csv,
)
from consensus_splitting.theory import (
    alpha_rule,
    argmin_theta,
    contraction_factor,
    delta,
    tau_min,
    theta_interval,
)

from reference_drift import ring_gossip_drift

# oracle value of the gossip steady-state bias on the scalar drift
# instance (ring of 8, minima 0..7, eta = 0.05, 5 local steps); the
# standalone simulation in reference_drift.py reproduces it at test time
DRIFT_FLOOR_FIXTURE = 1.3081055150474117


def _criterion(num: str, ok: bool, detail: str) -> None:
    print(f"[criterion {num}] {'PASS' if ok else 'FAIL'} - {detail}")


# ---------------------------------------------------------------------------


def test_criterion_1_compression_contract():
    start = time.perf_counter()
    gaps = {}
    for k in (1.0, 10.0, 20.0, 100.0):
        emp = verify_contract(CompressionOperator.rand_k(k), d=1000,
                              n_samples=10_000, seed=int(k))
        gaps[k] = abs(emp - k / 100.0)

    op = CompressionOperator.rand_k(37.0)
    rng = np.random.default_rng(0)
    bit_exact = True
    for _ in range(1000):
        d = int(rng.integers(1, 64))
        x = rng.standard_normal(d)
        y = rng.standard_normal(d)
        mask = rng.random(d) < 0.5
        lin = np.array_equal(
            apply(op, x + y, mask).densify(),
            apply(op, x, mask).densify() + apply(op, y, mask).densify(),
        )
        odd = np.array_equal(apply(op, -x, mask).densify(),
                             -apply(op, x, mask).densify())
        bit_exact = bit_exact and lin and odd
    elapsed = time.perf_counter() - start

    ok = max(gaps.values()) <= 0.01 and bit_exact and elapsed < 5.0
    _criterion("1", ok, f"max |empirical tau - k/100| = {max(gaps.values()):.5f}, "
                        f"bit-exact = {bit_exact}, {elapsed:.2f}s")
    assert max(gaps.values()) <= 0.01, gaps
    assert bit_exact
    assert elapsed < 5.0


def test_criterion_2_golden_two_node_trace():
    start = time.perf_counter()
    cfg = get_preset("two-node-trace")
    graph = build_graph(cfg.graph)
    net = EclNetwork(graph, partition(cfg.problem, 2), cfg.ecl, seed=cfg.seed)

    net.run_round(0)
    w1 = net.stacked_w()[:, 0]
    err = max(abs(w1[0] - 0.5), abs(w1[1] - 1.5))

    net.run_round(1)
    w2 = net.stacked_w()[:, 0]
    err = max(err, abs(w2[0] - 2.0), abs(w2[1] - 2.0))

    z_ref = net.stacked_z()
    for r in range(2, 6):
        net.run_round(r)
        err = max(err, float(np.abs(net.stacked_z() - z_ref).max()))
    elapsed = time.perf_counter() - start

    ok = err <= 1e-12 and elapsed < 1.0
    _criterion("2", ok, f"max trace deviation = {err:.2e}, {elapsed:.2f}s")
    assert err <= 1e-12
    assert elapsed < 1.0


def test_criterion_3_ecl_linear_rate():
    start = time.perf_counter()
    cfg = get_preset("ring8-quadratic-ecl")
    result = run(cfg)
    dlt = delta(result.spectrum.mu, result.spectrum.L, result.alphas[0], 2, 2)

    z_res = [m.z_residual for m in result.metrics]  # index r-1 holds round r
    measured = geometric_rate(z_res, 2, 30)  # rounds 3..31: 28 per-round ratios
    elapsed = time.perf_counter() - start

    upper = dlt + 0.02
    lower = 0.1 * dlt
    ok = measured is not None and lower <= measured <= upper and elapsed < 10.0
    _criterion("3", ok, f"measured slope = {measured:.4f}, certified delta = "
                        f"{dlt:.4f}, required range [{lower:.4f}, {upper:.4f}], "
                        f"{elapsed:.2f}s")
    assert measured is not None
    assert elapsed < 10.0
    assert lower <= measured, (measured, lower)
    assert measured <= upper, (
        f"measured geometric slope {measured:.4f} exceeds the certified cap "
        f"{upper:.4f}; see README verification notes"
    )


def test_criterion_4a_cecl_rate_bound():
    start = time.perf_counter()
    base = get_preset("ring8-quadratic-cecl96")
    dlt = delta(1.0, 10.0, float(base.ecl.alpha), 2, 2)
    rho = contraction_factor(1.0, dlt, 0.96)
    assert 0.96 >= tau_min(dlt)

    residual_rows = []
    for s in range(20):
        result = run(dataclasses.replace(base, seed=1000 + s))
        residual_rows.append([m.z_residual for m in result.metrics])
    mean_res = np.array(residual_rows).mean(axis=0)
    measured = geometric_rate(mean_res, 2, 30)
    elapsed = time.perf_counter() - start

    cap = rho + 0.03
    ok = measured is not None and measured <= cap and elapsed < 60.0
    _criterion("4a", ok, f"measured mean-slope = {measured:.4f}, certified rho = "
                         f"{rho:.4f}, cap = {cap:.4f}, {elapsed:.2f}s")
    assert measured is not None
    assert elapsed < 60.0
    assert measured <= cap, (
        f"measured geometric slope {measured:.4f} of the seed-averaged dual "
        f"residual exceeds the certified cap {cap:.4f}; see README "
        f"verification notes"
    )


def test_criterion_4b_cecl_converges_every_seed():
    start = time.perf_counter()
    base = get_preset("ring8-quadratic-cecl96")
    worst = 0.0
    for s in range(20):
        result = run(dataclasses.replace(base, seed=1000 + s))
        best = min(m.dist_to_opt for m in result.metrics)
        worst = max(worst, best)
    elapsed = time.perf_counter() - start

    ok = worst <= 1e-8 and elapsed < 60.0
    _criterion("4b", ok, f"worst-seed best dist_to_opt = {worst:.2e}, "
                         f"{elapsed:.2f}s")
    assert worst <= 1e-8
    assert elapsed < 60.0


def test_criterion_5_admissibility_boundary(capsys):
    code = cli_main(["theory", "--mu", "1", "--L", "10", "--alpha", "1",
                     "--n-min", "2", "--n-max", "2", "--tau", "0.9"])
    captured = capsys.readouterr()
    assert "tau_min=0.96" in captured.out

    cfg = get_preset("ring8-quadratic-cecl90-inadmissible")
    try:
        result = run(cfg)
        reached = min(m.dist_to_opt for m in result.metrics) <= 1e-6
        outcome = (
            "run converged to 1e-6 within 500 rounds (the certified condition "
            "is sufficient, not necessary)"
            if reached else
            "run did not reach 1e-6 within 500 rounds (no certified rate)"
        )
    except DivergenceError as exc:
        outcome = f"run tripped the divergence guard at round {exc.round_index}"

    ok = code == 3 and outcome is not None
    _criterion("5", ok, f"theory exit code = {code}; recorded outcome: {outcome}")
    assert code == 3
    assert outcome


def test_criterion_6_heterogeneity_contrast():
    start = time.perf_counter()
    gossip_result = run(get_preset("ring8-hetero-gossip"))
    cecl_result = run(get_preset("ring8-hetero-cecl-k20"))

    w_star = gossip_result.w_star  # 3.5, the mean of 0..7
    gossip_floor = float(np.abs(gossip_result.final_w[:, 0] - w_star[0]).max())
    cecl_err = float(np.abs(cecl_result.final_w[:, 0] - w_star[0]).max())

    oracle = ring_gossip_drift(8, 0.05, 5, 500)
    elapsed = time.perf_counter() - start

    ok = (
        abs(oracle - DRIFT_FLOOR_FIXTURE) <= 1e-9
        and abs(gossip_floor - oracle) <= 1e-9
        and gossip_floor >= 0.99 * DRIFT_FLOOR_FIXTURE
        and cecl_err <= 1e-6
        and gossip_floor >= 10.0 * cecl_err
        and elapsed < 30.0
    )
    _criterion("6", ok, f"gossip floor = {gossip_floor:.6f} (oracle "
                        f"{oracle:.6f}), compressed-splitting error = "
                        f"{cecl_err:.2e}, ratio = {gossip_floor / max(cecl_err, 1e-300):.1e}, "
                        f"{elapsed:.2f}s")
    assert abs(oracle - DRIFT_FLOOR_FIXTURE) <= 1e-9
    assert abs(gossip_floor - oracle) <= 1e-9
    assert gossip_floor >= 0.99 * DRIFT_FLOOR_FIXTURE
    assert cecl_err <= 1e-6
    assert gossip_floor >= 10.0 * cecl_err
    assert elapsed < 30.0


def test_criterion_7_communication_accounting():
    dense_round = 2 * 8 * dense_nbytes(1000)
    assert dense_round == 16 * 8004

    ecl_result = run(get_preset("ring8-comm-ecl"))
    for m in ecl_result.metrics:
        assert m.bytes_sent == dense_round  # exact dense count per round
    ecl_total = ecl_result.metrics[-1].cum_bytes

    k10_total = run(get_preset("ring8-comm-cecl-k10")).metrics[-1].cum_bytes
    k1_total = run(get_preset("ring8-comm-cecl-k1")).metrics[-1].cum_bytes
    ratio10 = k10_total / ecl_total
    ratio1 = k1_total / ecl_total

    ok = 0.13 <= ratio10 <= 0.17 and 0.013 <= ratio1 <= 0.022
    _criterion("7", ok, f"dense bytes/round = {dense_round}, rand-10% ratio = "
                        f"{ratio10:.4f}, rand-1% ratio = {ratio1:.4f}")
    assert 0.13 <= ratio10 <= 0.17, ratio10
    assert 0.013 <= ratio1 <= 0.022, ratio1


def test_criterion_8_theory_calculator_fidelity():
    start = time.perf_counter()
    tol = 1e-9
    sqrt10 = np.sqrt(10.0)
    checks = [
        (delta(1.0, 1.0, 1.0, 1, 1), 0.0),
        (delta(1.0, 10.0, 1.0, 2, 2), 2.0 / 3.0),
        (delta(1.0, 10.0, sqrt10 / 2.0, 2, 2), (sqrt10 - 1.0) / (sqrt10 + 1.0)),
        (tau_min(0.0), 0.0),
        (tau_min(2.0 / 3.0), 0.96),
        (tau_min((sqrt10 - 1.0) / (sqrt10 + 1.0)), 0.9),
        (theta_interval(0.5, 1.0)[1], 4.0 / 3.0),
        (theta_interval(0.0, 0.5)[1], 2.0 / (1.0 + np.sqrt(0.5))),
        (contraction_factor(1.0, 0.5, 1.0), 0.5),
        (contraction_factor(1.0, 0.2, 0.96), 0.44),
        (contraction_factor(1.0, 0.0, 1.0), 0.0),
        (alpha_rule(0.001, 2, 5, 100.0), 125.0),
        (alpha_rule(0.001, 2, 5, 10.0), 1.0 / 0.098),
    ]
    worst = max(abs(got - want) for got, want in checks)
    assert theta_interval(2.0 / 3.0, 0.9) is None

    # 20-point admissibility grid: theta = 1 minimizes the factor
    grid_ok = True
    rng = np.random.default_rng(12)
    points = 0
    while points < 20:
        d = float(rng.uniform(0.0, 0.9))
        t = float(rng.uniform(tau_min(d), 1.0))
        iv = theta_interval(d, t)
        if iv is None:
            continue
        points += 1
        star = argmin_theta(d, t)
        rho_star = contraction_factor(star, d, t)
        thetas = np.linspace(max(iv[0], 1e-6) + 1e-9, iv[1] - 1e-9, 41)
        grid_ok = grid_ok and star == 1.0 and all(
            rho_star <= contraction_factor(th, d, t) + 1e-12 for th in thetas
        )
    elapsed = time.perf_counter() - start

    ok = worst <= tol and grid_ok and elapsed < 5.0
    _criterion("8", ok, f"max formula deviation = {worst:.2e}, theta*=1 grid "
                        f"confirmed = {grid_ok}, {elapsed:.2f}s")
    assert worst <= tol
    assert grid_ok
    assert elapsed < 5.0


def test_criterion_9_equivalence_and_fixed_point():
    start = time.perf_counter()
    base = dataclasses.replace(get_preset("ring8-quadratic-ecl"),
                               rounds=50, track_z_residual=False)
    cecl_identity = dataclasses.replace(base, algorithm="cecl")
    csv_ecl = to_csv(run(base))
    csv_cecl = to_csv(run(cecl_identity))
    bitwise = csv_ecl == csv_cecl

    graph = build_graph(base.graph)
    objectives = partition(base.problem, graph.n_nodes)
    z_bar = compute_fixed_point(graph, objectives, base.ecl, tol=1e-12)

    plain = EclNetwork(graph, objectives, base.ecl, seed=0)
    plain.load_stacked_z(z_bar)
    plain.run_round(0)
    move_plain = float(np.abs(plain.stacked_z() - z_bar).max())

    comp_cfg = dataclasses.replace(
        base.ecl, compression=CompressionOperator.rand_k(96.0))
    compressed = EclNetwork(graph, objectives, comp_cfg, seed=123)
    compressed.load_stacked_z(z_bar)
    compressed.run_round(0)
    move_comp = float(np.abs(compressed.stacked_z() - z_bar).max())
    elapsed = time.perf_counter() - start

    ok = bitwise and move_plain <= 1e-9 and move_comp <= 1e-9 and elapsed < 5.0
    _criterion("9", ok, f"bitwise identity = {bitwise}, fixed-point move "
                        f"(plain {move_plain:.2e}, compressed {move_comp:.2e}), "
                        f"{elapsed:.2f}s")
    assert bitwise
    assert move_plain <= 1e-9
    assert move_comp <= 1e-9
    assert elapsed < 5.0
