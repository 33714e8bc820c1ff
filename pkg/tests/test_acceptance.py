"""End-to-end acceptance checks. Each test records one PASS/FAIL line."""

import math
import re
import time

import numpy as np
import pytest

import conftest
from fairbbr.bbr import BbrController, BtlBwFilter, RtPropFilter
from fairbbr.experiments import (DEFAULT_RATES, classifier_factories, default_advisor, fairness_comparison,
                                 regression_data, sweep)
from fairbbr.fairness import CoupledController, CoupledGroup, SharedBottleneckSet, jain_index
from fairbbr.measurement import Dataset
from fairbbr.ml import Adam, Mlp, MlpRegressor, SplitSpec, kfold_cv, standardize_apply, standardize_fit
from fairbbr.ml import train_test_split
from fairbbr.ml.evaluation import majority_baseline
from fairbbr.scenario import arrival_times_ns, config_from_dict, default_config, fairness_config
from fairbbr.simcore import Flow, Link, Simulator, seconds_to_ns

pytestmark = pytest.mark.slow

CAPACITY_MSGS = 160.0  # 1.6 Mbps bottleneck, 1250-byte messages


def record(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def spearman(x, y):
    def ranks(v):
        v = np.asarray(v, dtype=float)
        order = np.argsort(v, kind="mergesort")
        r = np.empty(len(v))
        r[order] = np.arange(len(v), dtype=float)
        # average ranks over ties
        for val in np.unique(v):
            idx = v == val
            r[idx] = r[idx].mean()
        return r
    return float(np.corrcoef(ranks(x), ranks(y))[0, 1])


@pytest.fixture(scope="module")
def sweeps():
    base = default_config(duration_s=60, seed=1)
    t0 = time.perf_counter()
    ref = sweep(base, DEFAULT_RATES, (50,))
    t_ref = time.perf_counter() - t0
    t0 = time.perf_counter()
    rest = sweep(base, DEFAULT_RATES, (10, 100))
    t_all = t_ref + time.perf_counter() - t0
    return ref, rest, t_ref, t_all


@pytest.fixture(scope="module")
def sim_dataset(sweeps):
    ref, rest, _, _ = sweeps
    return Dataset(ref.rows() + rest.rows())


def test_criterion_1_latency_rises_with_send_rate(sweeps):
    ref, _, t_ref, _ = sweeps
    lat = [ref.latency(r, 50) for r in DEFAULT_RATES]
    rho = spearman(DEFAULT_RATES, lat)
    ok = rho >= 0.9 and t_ref <= 120 and not ref.failures
    record(1, ok, f"spearman rho={rho:.4f} (>= 0.9), sweep {t_ref:.1f}s (<= 120s)")


def test_criterion_2_throughput_plateaus_at_capacity(sweeps):
    ref, _, t_ref, _ = sweeps
    tput = [ref.throughput(r, 50) for r in DEFAULT_RATES]
    onset = next((i for i, t in enumerate(tput) if t >= 0.95 * CAPACITY_MSGS), None)
    if onset is None:
        record(2, False, f"no plateau reached, max throughput {max(tput):.2f} msg/s")
    rising = all(b >= a for a, b in zip(tput[:onset + 1], tput[1:onset + 1]))
    plateau = float(np.mean(tput[onset:]))
    within = abs(plateau - CAPACITY_MSGS) <= 0.05 * CAPACITY_MSGS
    onset_rate = DEFAULT_RATES[onset]
    ok = rising and within and onset_rate >= CAPACITY_MSGS and t_ref <= 120
    record(2, ok, f"non-decreasing to onset={rising}, plateau={plateau:.2f} msg/s "
                  f"(capacity {CAPACITY_MSGS:g} +-5%), onset rate={onset_rate:g} (>= {CAPACITY_MSGS:g})")


def test_criterion_3_buffer_ordering(sweeps):
    ref, rest, _, t_all = sweeps

    def cell(rate, buf):
        return ref.cells[(rate, buf)] if buf == 50 else rest.cells[(rate, buf)]

    top = DEFAULT_RATES[-2:]
    lat_ok = all(cell(r, 100).avg_latency <= cell(r, 10).avg_latency for r in top)
    best = {b: max(cell(r, b).throughput for r in DEFAULT_RATES) for b in (10, 50, 100)}
    order_ok = best[100] >= best[50] * 0.99 and best[50] >= best[10] * 0.99
    lats = ", ".join(f"rate {r}: {cell(r, 100).avg_latency:.3f}s vs {cell(r, 10).avg_latency:.3f}s" for r in top)
    ok = lat_ok and order_ok and t_all <= 300
    record(3, ok, f"latency buf100 vs buf10 [{lats}], max throughput "
                  f"10/50/100 = {best[10]:.2f}/{best[50]:.2f}/{best[100]:.2f}, sweep {t_all:.1f}s (<= 300s)")


def test_criterion_4_classifiers(sim_dataset):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    Xs = np.column_stack([rng.choice([10.0, 50.0, 100.0], 400), rng.uniform(0, 160, 400)])
    ys = (Xs[:, 1] > 80.0).astype(np.int64)
    X, y = sim_dataset.features, sim_dataset.labels
    base = majority_baseline(y)
    parts, ok = [], len(y) >= 500
    for name, factory in classifier_factories().items():
        sep = kfold_cv(factory, Xs, ys, k=5, seed=0).mean
        cv = kfold_cv(factory, X, y, k=5, seed=0, num_runs=10)
        ok = ok and sep >= 0.95 and cv.mean >= base + 0.10 and cv.run_std < 0.05
        parts.append(f"{name} sep={sep:.3f} sim={cv.mean:.3f} run_std={cv.run_std:.4f}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed <= 120
    record(4, ok, f"{len(y)} rows, majority={base:.3f}; " + "; ".join(parts) + f"; {elapsed:.1f}s (<= 120s)")


def test_criterion_5_regressor_loss_and_trace(sim_dataset):
    t0 = time.perf_counter()
    X, y = regression_data(sim_dataset)
    X_tr, _, y_tr, _ = train_test_split(X, y, SplitSpec(0.25, 0))
    scaler = standardize_fit(X_tr)
    reg = MlpRegressor(seed=0).fit(standardize_apply(scaler, X_tr), y_tr)
    elapsed = time.perf_counter() - t0
    lines = reg.trace_lines()
    fmt = re.compile(r"^Epoch (\d+), Loss: (\S+)$")
    matches = [fmt.match(l) for l in lines]
    fmt_ok = all(matches) and [int(m.group(1)) for m in matches] == list(range(0, 1000, 100))
    fmt_ok = fmt_ok and all(float(m.group(2)) == v for m, (_, v) in zip(matches, reg.trace))
    first, last = reg.trace[0][1], reg.trace[-1][1]
    ratio = last / first
    ok = fmt_ok and ratio <= 0.2 and elapsed <= 30
    record(5, ok, f"loss {first:.4f} -> {last:.4f} ratio={ratio:.4f} (<= 0.2), "
                  f"trace format ok={fmt_ok}, {elapsed:.1f}s (<= 30s)")


def test_criterion_6_fairness():
    t0 = time.perf_counter()
    report = fairness_comparison(fairness_config(duration_s=60, seed=1), advisor=default_advisor())
    elapsed = time.perf_counter() - t0
    j = report.jain
    ok = (j["coupled"] >= j["bbr"] and j["coupled"] >= 0.95 and j["coupled_ml"] >= j["coupled"] - 0.02
          and elapsed <= 60)
    record(6, ok, f"Jain bbr={j['bbr']:.4f} coupled={j['coupled']:.4f} coupled_ml={j['coupled_ml']:.4f}, "
                  f"{elapsed:.1f}s (<= 60s)")


def _filters_match_brute_force(n_logs, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n_logs):
        window = int(rng.integers(1, 12))
        bw, rt = BtlBwFilter(window), RtPropFilter(float(window))
        log_bw, log_rt = [], []
        rnd, t = 0, 0.0
        for _ in range(int(rng.integers(1, 40))):
            rnd += int(rng.integers(0, 3))
            t += float(rng.uniform(0, 3))
            v = float(rng.uniform(0, 1e8))
            r = float(rng.uniform(1e-3, 1.0))
            bw.update(rnd, v)
            rt.update(t, r)
            log_bw.append((rnd, v))
            log_rt.append((t, r))
            if bw.estimate(rnd) != max(x for k, x in log_bw if k > rnd - window):
                return False
            if rt.estimate(t) != min(x for k, x in log_rt if k > t - window):
                return False
    return True


def _trace(controller, group=None):
    cfg = default_config(send_rate=120, duration_s=15, seed=2)
    spec, link = cfg.flows[0], cfg.links[0]
    sim = Simulator(trace=True)
    sim.add_link(Link(link.id, link.rate_bps, link.delay_ms / 1000.0, link.buffer_pkts))
    if group is not None:
        group.attach(spec.id, controller)
    arrivals = arrival_times_ns(spec, 0, cfg.seed, cfg.duration_s)
    sim.add_flow(Flow(spec.id, [sim.links[link.id]], controller, arrivals_ns=arrivals,
                      stop_ns=seconds_to_ns(cfg.duration_s)))
    sim.run(seconds_to_ns(cfg.duration_s))
    return sim.trace


def test_criterion_7_oracle_equivalence():
    t0 = time.perf_counter()
    filters_ok = _filters_match_brute_force(10_000, 7)
    group = CoupledGroup(SharedBottleneckSet("solo", ["f1"]))
    coupled = _trace(CoupledController(seed=5), group)
    plain = _trace(BbrController(seed=5))
    alpha_one = group.alpha_for("f1") == 1.0
    same = coupled == plain
    elapsed = time.perf_counter() - t0
    ok = filters_ok and alpha_one and same and elapsed <= 30
    record(7, ok, f"filters exact on 10^4 logs={filters_ok}, singleton alpha=1 trace identical={same} "
                  f"({len(plain)} events), {elapsed:.1f}s (<= 30s)")


def _grad_rel_error(output, rng, n_points):
    net = Mlp(3, 16, 1, output, seed=int(rng.integers(0, 2**31)))
    X = rng.normal(size=(16, 3))
    y = (rng.random(16) < 0.5).astype(float) if output == "sigmoid" else rng.normal(size=16)
    _, grads = net.loss_and_grads(X, y)
    h, worst = 1e-6, 0.0
    for _ in range(n_points):
        k = int(rng.integers(0, 4))
        p = net.params[k]
        idx = tuple(int(rng.integers(0, d)) for d in p.shape)
        old = p[idx]
        p[idx] = old + h
        up = net.loss(X, y)
        p[idx] = old - h
        down = net.loss(X, y)
        p[idx] = old
        num = (up - down) / (2 * h)
        worst = max(worst, abs(num - grads[k][idx]) / max(abs(num) + abs(grads[k][idx]), 1e-8))
    return worst


def _adam_error():
    # f(x) = x^2 from x = 1, lr 0.1; moments worked out by hand
    x = np.array([1.0])
    opt = Adam([x], lr=0.1)
    expected = [0.9000000005, 0.8004122286917928, 0.7015862729460303]
    err = 0.0
    for want in expected:
        opt.step([2 * x])
        err = max(err, abs(float(x[0]) - want))
    return err


def _jain_invariance(n_vectors, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n_vectors):
        v = rng.exponential(1.0, int(rng.integers(1, 30)))
        j = jain_index(v)
        if not (1 / len(v) - 1e-12 <= j <= 1 + 1e-12):
            return False
        if not math.isclose(jain_index(rng.permutation(v)), j, rel_tol=1e-12):
            return False
        if not math.isclose(jain_index(v * float(rng.uniform(1e-3, 1e3))), j, rel_tol=1e-12):
            return False
    return True


def test_criterion_8_numerical_checks():
    rng = np.random.default_rng(8)
    g_bce = _grad_rel_error("sigmoid", rng, 20)
    g_mse = _grad_rel_error("linear", rng, 20)
    adam = _adam_error()
    jain_ok = _jain_invariance(1000, 8)
    ok = g_bce < 1e-4 and g_mse < 1e-4 and adam <= 1e-12 and jain_ok
    record(8, ok, f"grad rel err bce={g_bce:.2e} mse={g_mse:.2e} (< 1e-4), adam err={adam:.1e} (<= 1e-12), "
                  f"jain invariances on 10^3 vectors={jain_ok}")
