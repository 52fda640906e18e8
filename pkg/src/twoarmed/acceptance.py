"""End-to-end acceptance checks, runnable at full or reduced ("quick") scale."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bandit import BanditParams, coupled_pair
from .bounds import beta_limit_moment, failure_lb_constant, interior_mass_formula, success_lb_constant
from .markov import absorption_solve, psi_neumann_grid
from .mean_field import mean_path, mean_rate_band
from .montecarlo import Outcome, estimate_interior_mass, moments_from_sample, run_batch, simulate_terminal
from .polya import exact_bandit_replay, urn_bandit_equivalence, urn_path
from .schedule import Constant, Fallibility, PowerI, classify_schedule
from .stopping import monitor_batch


@dataclass(frozen=True)
class Scale:
    name: str
    beta_N: int = 10**5
    beta_M: int = 20_000
    interior_N: int = 10**4
    interior_M: int = 20_000
    bern_N: int = 10**3
    bern_M: int = 10_000
    fail_N: int = 10**3
    fail_M: int = 10_000
    op_N: int = 10**5
    op_M: int = 20_000
    coupling_pairs: int = 200
    coupling_N: int = 10**4
    urn_cases: int = 50
    urn_N: int = 10**4
    inf_N: int = 10**6
    inf_M: int = 10_000
    stop_N: int = 10**5
    stop_certified: int = 10_000
    mean_N: int = 10**5
    det_workers: tuple = (1, 4, 8)


SUITES = {
    "full": Scale("full"),
    "quick": Scale(
        "quick", beta_N=10**4, beta_M=4_000, interior_M=4_000, bern_M=2_000, fail_M=2_000, op_N=2 * 10**4,
        op_M=2_000, coupling_pairs=40, urn_cases=10, inf_N=10**5, inf_M=1_000, stop_N=2 * 10**4,
        stop_certified=1_000, det_workers=(1, 2),
    ),
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        brief = ", ".join(f"{k}={_short(v)}" for k, v in self.details.items() if not isinstance(v, (list, dict)))
        return f"[{status}] criterion {self.number:2d} {self.name}: {brief} ({self.seconds:.1f}s)"

    def to_dict(self):
        return {"number": self.number, "name": self.name, "passed": self.passed, "details": self.details}


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# ---------------------------------------------------------------------------
# criteria; each returns (passed, details)


def beta_law(scale: Scale, workers: int = 1, seed: int = 101):
    params = BanditParams(1.0, 1.0, 0.5)
    b = simulate_terminal(params, PowerI(1.0, 1.0), scale.beta_N, scale.beta_M, seed, workers)
    est = moments_from_sample(b.x_final, 4)
    target = [beta_limit_moment(0.5, 1.0, m - 1) for m in est.orders]
    z = [(v - t) / s for v, t, s in zip(est.values, target, est.se)]
    return all(abs(q) <= 4.0 for q in z), {
        "moments": list(est.values), "targets": target, "se": list(est.se), "max_abs_z": max(abs(q) for q in z),
    }


def interior_identity(scale: Scale, workers: int = 1, seed: int = 202):
    e = estimate_interior_mass(BanditParams(0.5, 0.5, 0.5), PowerI(1.0, 1.0), scale.interior_N, scale.interior_M, seed, workers)
    return abs(e.mean - e.formula) <= 4.0 * e.se, {"mean": e.mean, "formula": e.formula, "se": e.se, "z": e.z}


def bernoulli_limit(scale: Scale, workers: int = 1, seed: int = 303):
    ok = True
    rows = []
    for x0 in (0.1, 0.5, 0.9):
        est = run_batch(BanditParams(0.5, 0.5, x0), Constant(0.5), scale.bern_N, scale.bern_M, seed, workers=workers)
        lo, hi = est.interval(Outcome.AT_ONE)
        inside = lo <= x0 <= hi
        interior = est.counts[Outcome.INTERIOR.value]
        ok &= inside and interior == 0
        rows.append({"x0": x0, "at_one": est.estimate(Outcome.AT_ONE), "ci": [lo, hi], "interior": interior})
    return ok, {"rows": rows, "max_dev": max(abs(r["at_one"] - r["x0"]) for r in rows)}


def failure_bound(scale: Scale, workers: int = 1, seed: int = 404):
    est = run_batch(BanditParams(1.0, 1.0, 0.5), Constant(0.5), scale.fail_N, scale.fail_M, seed, workers=workers)
    p = est.estimate(Outcome.AT_ZERO)
    se = math.sqrt(p * (1 - p) / est.M)
    bound = failure_lb_constant(0.5, 1.0, 0.5)
    return p >= bound - 4.0 * se, {"at_zero": p, "bound": bound, "se": se}


OP_CASES = [(g, x) for g in (0.05, 0.1) for x in (0.3, 0.5, 0.7)]


def operator_sandwich(scale: Scale, workers: int = 1, seed: int = 505, cache: dict | None = None):
    pA, pB = 0.6, 0.4
    ok = True
    rows = []
    for g in (0.05, 0.1):
        sol = absorption_solve(g, pA, pB)
        neu = psi_neumann_grid(g, pA, pB)
        for x in (0.3, 0.5, 0.7):
            u = float(sol(x))
            lb = success_lb_constant(x, pA, pB, g)
            ub = 1.0 - failure_lb_constant(x, pB, g)
            ident = abs(u - (x + (pA - pB) * g * float(neu(x))))
            est = run_batch(BanditParams(pA, pB, x), Constant(g), scale.op_N, scale.op_M, seed, workers=workers)
            if cache is not None:
                cache[(g, x)] = est.to_json()
            p = est.estimate(Outcome.AT_ONE)
            hw = est.half_width(Outcome.AT_ONE)
            good = lb <= u <= ub and ident <= 1e-6 and abs(u - p) <= hw + 1e-3
            ok &= good
            rows.append({"gamma": g, "x": x, "u": u, "lb": lb, "ub": ub, "identity_err": ident, "mc": p, "ci_half": hw, "ok": good})
    return ok, {"rows": rows, "max_identity_err": max(r["identity_err"] for r in rows),
                "max_mc_gap": max(abs(r["u"] - r["mc"]) for r in rows)}


def coupling(scale: Scale, workers: int = 1, seed: int = 606):
    rng = np.random.default_rng(seed)
    violations = 0
    for i in range(scale.coupling_pairs):
        x, xp = np.sort(rng.random(2))
        pa, pap = np.sort(rng.random(2))
        pb = float(rng.random())
        sched = Constant(float(rng.uniform(0.01, 0.5))) if i % 2 == 0 else PowerI(float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.3, 1.0)))
        lo, hi = coupled_pair(float(x), float(xp), float(pa), float(pap), pb, sched, scale.coupling_N, int(rng.integers(0, 2**63)))
        violations += int(np.sum(lo.x > hi.x)) + int(np.sum(lo.one_minus_x < hi.one_minus_x))
    return violations == 0, {"pairs": scale.coupling_pairs, "violations": violations}


def urn_equivalence(scale: Scale, workers: int = 1, seed: int = 707):
    rng = np.random.default_rng(seed)
    worst = 0.0
    exact_ok = True
    for _ in range(scale.urn_cases):
        r, b = (int(v) for v in rng.integers(1, 50, 2))
        s = int(rng.integers(0, 2**63))
        worst = max(worst, urn_bandit_equivalence(r, b, scale.urn_N, s))
        exact_ok &= urn_path(r, b, 100, s).fractions() == exact_bandit_replay(r, b, 100, s)
    return worst <= 1e-12 and exact_ok, {"max_discrepancy": worst, "exact_replay": exact_ok}


def infallible_ceiling(scale: Scale, workers: int = 1, seed: int = 808):
    params = BanditParams(0.6, 0.5, 0.2)
    sched = PowerI(1.0, 1.0)
    regime = classify_schedule(sched, params.pB)
    est = run_batch(params, sched, scale.inf_N, scale.inf_M, seed, workers=workers)
    zeros = est.counts[Outcome.AT_ZERO.value]
    return zeros == 0 and regime is Fallibility.INFALLIBLE, {
        "at_zero": zeros, "M": est.M, "ceiling": 3.0 / est.M, "regime": regime.value,
        "undecided": est.counts[Outcome.UNDECIDED.value],
    }


def stopping_validity(scale: Scale, workers: int = 1, seed: int = 909, epsilon: float = 0.05):
    """Monitor paths in index order until ``stop_certified`` of them certify.

    The regime is infallible, so the limit is 1 on every path and a declaration
    of arm B is wrong; the side of 1/2 at the horizon is reported as a check.
    """
    params = BanditParams(0.9, 0.1, 0.5)
    sched = PowerI(1.0, 1.0)
    need = scale.stop_certified
    chunk = 4096
    first = 0
    wrong = certified = off_side = scanned = 0
    while certified < need:
        mb = monitor_batch(params, sched, scale.stop_N, chunk, seed, epsilon, first=first)
        idx = np.flatnonzero(mb.certified)[: need - certified]
        declared_a = mb.declared_a[idx]
        wrong += int(np.sum(~declared_a))
        off_side += int(np.sum(declared_a != (mb.final_x[idx] > mb.final_y[idx])))
        certified += len(idx)
        scanned = first + (int(idx[-1]) + 1 if len(idx) and certified == need else chunk)
        first += chunk
    freq = wrong / certified
    se = math.sqrt(epsilon * (1 - epsilon) / certified)
    return freq <= epsilon + 3 * se, {
        "certified": certified, "scanned": scanned, "wrong": wrong, "wrong_freq": freq, "limit": epsilon + 3 * se,
        "disagree_with_horizon_side": off_side,
    }


def mean_field_chain(scale: Scale, workers: int = 1, seed: int = 0):
    ok = True
    rows = []
    for sched in (PowerI(1.0, 1.0), PowerI(1.0, 0.75), Constant(0.01)):
        for pi in (0.1, 0.5):
            for x0 in (0.1, 0.5, 0.9):
                p = mean_path(x0, pi, sched, scale.mean_N)
                y = p.one_minus_x
                chain = bool(np.all(y <= p.bound_drift()) and np.all(p.bound_drift() <= p.bound_start()))
                lower = bool(np.all(p.lower_bound() <= y))
                band_ok = True
                if sched.square_summable:
                    band = mean_rate_band(p)
                    band_ok = 0.0 < band.lower <= band.upper < math.inf
                ok &= chain and lower and band_ok
                rows.append({"schedule": sched.id, "pi": pi, "x0": x0, "chain": chain, "lower": lower, "band": band_ok})
    return ok, {"cases": len(rows), "failed": sum(not (r["chain"] and r["lower"] and r["band"]) for r in rows)}


def determinism(scale: Scale, workers: int = 1, seed: int = 505, cache: dict | None = None):
    """Rerun the operator cross-check batches with several worker counts; JSON must match byte for byte."""
    pA, pB = 0.6, 0.4
    mismatches = 0
    for g, x in OP_CASES:
        ref = None if cache is None else cache.get((g, x))
        for w in scale.det_workers:
            if ref is not None and w == 1:
                continue
            js = run_batch(BanditParams(pA, pB, x), Constant(g), scale.op_N, scale.op_M, seed, workers=w).to_json()
            if ref is None:
                ref = js
            elif js != ref:
                mismatches += 1
    return mismatches == 0, {"cases": len(OP_CASES), "workers": list(scale.det_workers), "mismatches": mismatches}


CRITERIA = {
    1: ("beta-law", beta_law),
    2: ("interior-identity", interior_identity),
    3: ("bernoulli-limit", bernoulli_limit),
    4: ("failure-bound", failure_bound),
    5: ("operator-sandwich", operator_sandwich),
    6: ("coupling", coupling),
    7: ("urn-equivalence", urn_equivalence),
    8: ("infallible-ceiling", infallible_ceiling),
    9: ("stopping-validity", stopping_validity),
    10: ("mean-field", mean_field_chain),
    11: ("determinism", determinism),
}


def run_criterion(number: int, scale: Scale | str = "full", workers: int = 1, cache: dict | None = None) -> CriterionResult:
    scale = SUITES[scale] if isinstance(scale, str) else scale
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    if number in (5, 11):
        passed, details = fn(scale, workers, cache=cache)
    else:
        passed, details = fn(scale, workers)
    return CriterionResult(number, name, bool(passed), details, time.perf_counter() - t0)


def run_suite(suite: str = "quick", workers: int = 1, only=None, echo=None) -> list[CriterionResult]:
    scale = SUITES[suite]
    cache: dict = {}
    out = []
    for number in sorted(CRITERIA if only is None else only):
        res = run_criterion(number, scale, workers, cache)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out


def with_scale(suite: str, **overrides) -> Scale:
    return replace(SUITES[suite], **overrides)
