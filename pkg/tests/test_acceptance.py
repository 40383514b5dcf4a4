"""Acceptance criteria, one reported line each (see the summary section)."""

import itertools
import math
import time
from fractions import Fraction

import numpy as np

from regencore.analysis import (MarkovParams, bad_ratio, bandwidth_lower_bound,
                                bandwidth_ratio_table, census, mttf, mttf_exact,
                                mttf_monte_carlo)
from regencore.cluster import Cluster
from regencore.codes import build_code, decode_original, encode_stripe
from regencore.recovery import (PatternClass, classify_pattern, gather_symbols,
                                plan_recovery, recover)

from _oracles import pattern_solvable

# Sweep ranges used for the 10-100x band: transfer rate 100 Mbps to 10 Gbps
# with 1/lambda = 4 years, and lambda 0.05 to 4 per year at 1 Gbps.
SWEEP_BANDWIDTH = [1e8 / 8, 2.5e8 / 8, 5e8 / 8, 1e9 / 8, 2.5e9 / 8, 5e9 / 8, 1e10 / 8]
SWEEP_LAMBDA = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0]
DESK_SCALE = [(2 * k, k) for k in range(3, 11)]


def random_stripe(spec, seed):
    rng = np.random.default_rng(seed)
    data = rng.integers(0, 256, (spec.k * spec.r, spec.symbol_size), dtype=np.uint8)
    return encode_stripe(spec, data)


def measured(spec, stripe, failed, scheme="core"):
    """Recover ``failed`` and return (bytes downloaded, byte-identical?)."""
    damaged = stripe.with_failures(failed)
    strips, plan = recover(spec, damaged, failed, scheme)
    nbytes = gather_symbols(spec, damaged, plan).nbytes
    exact = sorted(strips) == sorted(failed) and all(
        np.array_equal(strips[f], stripe.stored[f]) for f in failed)
    return nbytes, exact, plan


def test_criterion_1_single_failure(acceptance):
    start = time.perf_counter()
    spec = build_code(6, 3, symbol_size=9)
    M = spec.stripe_data_size
    stripe = random_stripe(spec, 1)
    results = [measured(spec, stripe, [f]) for f in range(6)]
    elapsed = time.perf_counter() - start
    ok = all(b == 5 * M // 9 and good for b, good, _ in results) and elapsed < 1
    acceptance(1, ok, f"(6,3) single failure downloads {sorted({r[0] for r in results})} bytes "
                      f"per stripe, expected 5M/9 = {5 * M // 9}; {elapsed:.3f}s < 1s")


def test_criterion_2_motivating_example(acceptance):
    spec = build_code(6, 3, symbol_size=9)
    M = spec.stripe_data_size
    nbytes, exact, plan = measured(spec, random_stripe(spec, 2), [0, 1])
    good = classify_pattern(spec, [0, 1]) is PatternClass.GOOD
    ok = good and plan.scheme == "core" and nbytes == 8 * M // 9 and exact
    acceptance(2, ok, f"(6,3) pattern {{N0,N1}} good={good}, downloads {nbytes} bytes "
                      f"(8M/9 = {8 * M // 9}), strips byte-identical={exact}")


def test_criterion_3_lower_bound_equality(acceptance):
    start = time.perf_counter()
    checked, mismatches = 0, []
    for n, k in [(6, 3), (8, 4), (10, 5)]:
        spec = build_code(n, k, symbol_size=2)
        M = spec.stripe_data_size
        stripe = random_stripe(spec, n)
        for t in range(1, k):
            for failed in itertools.combinations(range(n), t):
                if classify_pattern(spec, failed) is not PatternClass.GOOD:
                    continue
                nbytes, exact, _ = measured(spec, stripe, failed)
                checked += 1
                if Fraction(nbytes) != Fraction(M * t * (n - t), k * (n - k)) or not exact:
                    mismatches.append((n, k, failed))
    elapsed = time.perf_counter() - start
    ok = not mismatches and checked > 0 and elapsed < 60
    acceptance(3, ok, f"{checked} good patterns with t < k on (6,3),(8,4),(10,5) meet "
                      f"M*t(n-t)/(k(n-k)) exactly, {len(mismatches)} mismatches; {elapsed:.1f}s < 60s")


def test_criterion_4_ratio_table(acceptance):
    table = bandwidth_ratio_table(20, 10)
    good = dict(zip(table.column("t"), table.column("good_ratio")))
    bad = dict(zip(table.column("t"), table.column("bad_ratio")))
    got_good = [good[t] for t in (1, 2, 3, 4)]
    got_bad = [bad[t] for t in (2, 3, 4)]
    want_good = [Fraction(x, 100) for x in (19, 36, 51, 64)]
    want_bad = [Fraction(x, 100) for x in (51, 64, 75)]
    optimal = (round(100 * (1 - max(got_good[1:]))), round(100 * (1 - min(got_good[1:]))))
    sub = (round(100 * (1 - max(got_bad))), round(100 * (1 - min(got_bad))))
    ok = got_good == want_good and got_bad == want_bad and optimal == (36, 64) and sub == (25, 49)
    acceptance(4, ok, f"(20,10) good {[float(x) for x in got_good]}, bad {[float(x) for x in got_bad]}; "
                      f"savings {optimal[0]}-{optimal[1]}% optimal, {sub[0]}-{sub[1]}% sub-optimal")


def test_criterion_5_census(acceptance):
    # cold timing first: drop any classifications memoized by earlier tests
    spec = build_code(16, 8)
    spec.memo.clear()
    census_time = time.perf_counter()
    for t in (1, 2, 3):
        census(spec, t)
    budget = time.perf_counter() - census_time

    start = time.perf_counter()
    disagreements, worst, t1_nonzero, rows = [], (0.0, None), [], 0
    for n, k in DESK_SCALE:
        spec = build_code(n, k)
        for t in range(1, min(4, n - k) + 1):
            report = census(spec, t)
            oracle_bad = sum(not pattern_solvable(spec, p)
                             for p in itertools.combinations(range(n), t))
            rows += 1
            if Fraction(report.bad_count, report.examined) != Fraction(oracle_bad, math.comb(n, t)):
                disagreements.append((n, k, t))
            if t == 1 and report.bad_count:
                t1_nonzero.append((n, k))
            if report.bad_fraction > worst[0]:
                worst = (report.bad_fraction, (n, k, t))
    elapsed = time.perf_counter() - start
    ok = not disagreements and not t1_nonzero and worst[0] <= 0.02 and budget < 600
    acceptance(5, ok, f"census equals the row-space oracle on {rows} (n,k,t) cases "
                      f"(n=2k, 6<=n<=20, t<=4), t=1 always 0, worst bad fraction "
                      f"{100 * worst[0]:.2f}% at {worst[1]} <= 2%; (16,8) t<=3 in {budget:.1f}s; "
                      f"total {elapsed:.1f}s")


def test_criterion_6_bad_pattern_recovery(acceptance):
    found, failures = 0, []
    for n, k in DESK_SCALE:
        spec = build_code(n, k, symbol_size=k * (n - k))
        M = spec.stripe_data_size
        stripe = random_stripe(spec, n + 100)
        for t in range(2, min(4, n - k) + 1):
            for failed in itertools.combinations(range(n), t):
                if classify_pattern(spec, failed) is not PatternClass.BAD:
                    continue
                found += 1
                plan = plan_recovery(spec, failed)
                nbytes, exact, _ = measured(spec, stripe, failed)
                bound = bandwidth_lower_bound(n, k, t + 1, M)
                one_node = (plan.escalation_depth == 1 and plan.effective_pattern.t == t + 1
                            if plan.scheme == "core" else t + 1 == k)
                if not (one_node and exact and nbytes == bound == bad_ratio(n, k, t) * M):
                    failures.append((n, k, failed, plan.scheme, nbytes, bound))
    ok = found > 0 and not failures
    acceptance(6, ok, f"{found} bad patterns at desk scale: each escalates by one node to a good "
                      f"pattern, recovers byte-exactly and downloads the good (t+1) bound; "
                      f"{len(failures)} failures")


def test_criterion_7_mttf(acceptance):
    base = dict(n=16, k=8, S=1e12)
    ratio = float(mttf_exact(MarkovParams(lam=0.25, B=1e9 / 8, scheme="core", **base))
                  / mttf_exact(MarkovParams(lam=0.25, B=1e9 / 8, scheme="conventional", **base)))
    sweep = []
    for B in SWEEP_BANDWIDTH:
        sweep.append(float(mttf_exact(MarkovParams(lam=0.25, B=B, **base))
                           / mttf_exact(MarkovParams(lam=0.25, B=B, scheme="conventional", **base))))
    for lam in SWEEP_LAMBDA:
        sweep.append(float(mttf_exact(MarkovParams(lam=lam, B=1e9 / 8, **base))
                           / mttf_exact(MarkovParams(lam=lam, B=1e9 / 8, scheme="conventional",
                                                     **base))))
    mc = []
    for scheme in ("core", "conventional"):
        p = MarkovParams(6, 3, 1.0, 1e6, 1e12, scheme)
        mean, err = mttf_monte_carlo(p, 10**5, seed=2024)
        mc.append(abs(mean - mttf(p)) / err)
    ok = abs(ratio - 26) <= 0.2 * 26 and all(10 <= r <= 100 for r in sweep) and max(mc) <= 3
    acceptance(7, ok, f"(16,8) 1TB 1Gbps lambda=0.25 ratio {ratio:.2f} (26 +/- 20%); sweep ratios "
                      f"{min(sweep):.1f}-{max(sweep):.1f} within [10,100]; Monte Carlo at 1e5 trials "
                      f"within {max(mc):.2f} standard errors (<= 3)")


def test_criterion_8_round_trips(acceptance):
    mds_ok = True
    for n, k in [(6, 3), (8, 4)]:
        spec = build_code(n, k, symbol_size=3)
        rng = np.random.default_rng(n)
        data = rng.integers(0, 256, (spec.k * spec.r, 3), dtype=np.uint8)
        stripe = encode_stripe(spec, data)
        for nodes in itertools.combinations(range(n), k):
            got = decode_original(spec, {i: stripe.strip(i) for i in nodes})
            mds_ok &= bool(np.array_equal(got, data))

    spec = build_code(6, 3, symbol_size=4)
    payload = np.random.default_rng(8).integers(0, 256, 1500, dtype=np.uint8).tobytes()

    def fresh():
        c = Cluster(spec, 4 * spec.strip_size)
        c.stripe_file(payload)
        return c

    e2e_ok, patterns = True, 0
    for t in range(1, 4):
        for failed in itertools.combinations(range(6), t):
            c = fresh()
            c.fail_nodes(failed)
            degraded = c.read_file()[0]
            c.run_recovery()
            e2e_ok &= degraded == payload and c.read_file()[0] == payload
            patterns += 1

    pipe_ok = True
    for failed in [(0,), (1, 4), (0, 2, 5)]:
        seq, pipe = fresh(), fresh()
        seq.fail_nodes(failed)
        pipe.fail_nodes(failed)
        a = seq.run_recovery(workers=0)
        b = pipe.run_recovery(workers=3, queue_size=2)
        pipe_ok &= a == b and seq.nodes == pipe.nodes
    ok = mds_ok and e2e_ok and pipe_ok
    acceptance(8, ok, f"MDS decode from every k-subset of (6,3)/(8,4)={mds_ok}; encode-fail-recover-"
                      f"read identical for all {patterns} patterns t<=3 on (6,3)={e2e_ok}; pipelined "
                      f"equals sequential (contents and ledgers)={pipe_ok}")


def test_criterion_9_wall_clock_not_reproduced(acceptance):
    # Stated as out of scope: hardware-dependent throughput numbers are not
    # measured; criteria 1-3 check the byte counts that drive them.
    acceptance(9, True, "NOT REPRODUCED (by design): wall-clock throughput and MapReduce "
                        "timings depend on the original hardware; replaced by the byte-exact "
                        "bandwidth checks of criteria 1-3")
