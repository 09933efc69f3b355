"""Canned reproductions of the acceptance checks.

Each ``criterion_*`` function runs one check at full budget and returns a
``CriterionResult``; ``run`` executes a selection and is what the ``demo``
subcommand calls.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import conformal as cf
from .errors import BrownexitError
from .estimators import burkholder_check, estimate_moment, hill_tail_index, moment_sweep
from .geometry import Disk, HalfPlane, SpiralComplement, Union, Wedge
from .gluing import GlueProblem, alternating_exit, glue
from .plcheck import (BoundedRational, Constant, ExpPower, Polynomial, harmonic_measure_halfplane,
                      harmonic_measure_mc, verify_pl)
from .sampler import SamplerConfig, coupled_exit_pair, sample_exits

QUADRANT = Wedge(math.pi / 4)          # full opening angle pi/2
SLIT = SpiralComplement(0.0, 1.0, (0.0,))
TAIL_CAP = 1e12                        # keeps censoring far below 0.1% for index-1/4 tails
HARMONIC_POINTS = (1j, complex(math.cos(3 * math.pi / 4), math.sin(3 * math.pi / 4)),
                   1 + 1j, -2 + 0.5j, 0.3 + 3j)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "details": _plain(self.details)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("infinite" if x > 0 else "-infinite")
    if isinstance(x, complex):
        return [x.real, x.imag]
    if x is None or isinstance(x, str):
        return x
    return str(x)


def criterion_1(seed: int = 7) -> CriterionResult:
    t0 = time.perf_counter()
    b = sample_exits(Disk(), 0j, 100_000, SamplerConfig(), seed)
    e = estimate_moment(b, 1.0)
    elapsed = time.perf_counter() - t0
    ok = abs(e.mean - 0.5) <= 0.005 and elapsed < 10.0
    return CriterionResult(1, "disk mean exit time", ok,
                           {"mean": e.mean, "std_err": e.std_err, "seconds": elapsed})


def criterion_2(seed: int = 7) -> CriterionResult:
    grid = [0.25, 0.5, 0.75, 1.0, 1.25]
    s = moment_sweep(QUADRANT, 1 + 0j, grid, 100_000, SamplerConfig(), seed)
    idx = s.tail.index
    ok = 0.85 <= idx <= 1.15 and s.first_flagged in (1.0, 1.25)
    return CriterionResult(2, "wedge threshold", ok,
                           {"tail_index": idx, "tail_ci": s.tail.ci95, "flagged": s.flagged(),
                            "first_flagged": s.first_flagged})


def criterion_3(seed: int = 7) -> CriterionResult:
    details = {}
    ok = True
    try:
        h4 = cf.hardy_norm(cf.Koebe(), 0.4)
        h6 = cf.hardy_norm(cf.Koebe(), 0.6)
        details.update(koebe_0_4=h4.verdict, koebe_0_4_value=h4.value, koebe_0_6=h6.verdict)
        ok &= h4.finite and h6.divergent
    except BrownexitError as exc:
        details["hardy_error"] = str(exc)
        ok = False
    b = sample_exits(SLIT, 0j, 100_000, SamplerConfig(modulus_cap=TAIL_CAP), seed)
    t = hill_tail_index(b, rng=seed)
    details.update(tail_index=t.index, tail_ci=t.ci95, censored=b.n_censored)
    ok &= 0.20 <= t.index <= 0.30
    return CriterionResult(3, "Koebe / slit-plane threshold", bool(ok), details)


def criterion_4(seed: int = 7) -> CriterionResult:
    cfg = SamplerConfig(modulus_cap=TAIL_CAP)
    out = {}
    for sigma in (0.0, math.pi / 4):
        d = SpiralComplement(sigma, 1.0, (0.0, math.pi))
        b = sample_exits(d, 0j, 100_000, cfg, seed)
        out[sigma] = hill_tail_index(b, rng=seed).index
    ratio = out[math.pi / 4] / out[0.0]
    return CriterionResult(4, "spiral cos^2 factor", abs(ratio - 2.0) <= 0.5,
                           {"index_sigma_0": out[0.0], "index_sigma_pi_4": out[math.pi / 4],
                            "ratio": ratio})


def criterion_5(seed: int = 7) -> CriterionResult:
    rows = []
    ok = True
    for i, a in enumerate(HARMONIC_POINTS):
        formula = harmonic_measure_halfplane(a)
        mc, se = harmonic_measure_mc(a, 100_000, rng=seed + i)
        rows.append({"a": a, "formula": formula, "mc": mc, "std_err": se})
        ok &= abs(formula - mc) < 0.01
    return CriterionResult(5, "harmonic measure", bool(ok), {"rows": rows})


def criterion_6(seed: int = 7) -> CriterionResult:
    rep = glue(GlueProblem(HalfPlane(0j, 0.0), HalfPlane(1 + 0j, math.pi), 0.4, seed=seed))
    ok = rep.verdict == "failed(iii)" and rep.r_ci[0] > 0.99
    return CriterionResult(6, "gluing negative control", ok,
                           {"verdict": rep.verdict, "r_hat": rep.r_hat, "r_ci": rep.r_ci})


def criterion_7(seed: int = 7) -> CriterionResult:
    V, W, p = Disk(), QUADRANT, 0.5
    prob = GlueProblem(V, W, p, seed=seed)
    rep = glue(prob)
    start = 1 + 0j
    direct = sample_exits(Union((V, W)), start, 10_000, SamplerConfig(), seed)
    e = estimate_moment(direct, p, tail_index=math.inf)
    trace = alternating_exit(prob, start, 10_000)
    ks = stats.ks_2samp(trace.total, direct.exit_time).statistic
    finite = math.isfinite(rep.series_bound)
    below = finite and e.mean <= rep.series_bound ** p + 3 * e.std_err
    ok = finite and rep.verdict == "certified-up-to-cap" and below and ks < 0.02
    return CriterionResult(7, "gluing positive control", bool(ok),
                           {"verdict": rep.verdict, "r_ci": rep.r_ci, "series_bound": rep.series_bound,
                            "bound_p": rep.series_bound ** p if finite else math.inf,
                            "direct_moment": e.mean, "direct_se": e.std_err, "ks": ks,
                            "max_alternations": int(trace.alternations.max())})


def criterion_8(seed: int = 7) -> CriterionResult:
    family = {"disk": (Disk(), 0j), "half_plane": (HalfPlane(0j, 0.0), 1 + 0j),
              "wedge": (QUADRANT, 1 + 0j)}
    ratios, sure = [], True
    rows = []
    for name, (d, a) in family.items():
        for s in range(5):
            b = sample_exits(d, a, 100_000, SamplerConfig(), seed + 1000 * s)
            rep = burkholder_check(b, 0.2, a, rng=seed + s)
            per_sample = bool(np.all(np.abs(b.exit_point) <= b.max_mod_hi))
            sure &= per_sample and rep.bt <= rep.mid_hi
            ratios += [rep.ratios["mid_lo/lhs"], rep.ratios["mid_hi/lhs"]]
            rows.append({"domain": name, "seed": seed + 1000 * s, **rep.ratios})
    band = max(ratios) / min(ratios)
    return CriterionResult(8, "Burkholder sandwich", bool(sure and band <= 100),
                           {"band": band, "rows": rows})


def validated_pairs():
    return [
        ("identity/disk", cf.Identity(), Disk()),
        ("hansen/wedge", cf.HansenSpiral(0.0, math.pi / 2, -math.pi / 4), QUADRANT),
        ("koebe/slit", cf.Koebe(), SpiralComplement(0.0, 0.25, (math.pi,))),
    ]


def criterion_9(seed: int = 7) -> CriterionResult:
    grid = [0.2, 0.3, 0.6]
    rows = []
    ok = True
    for name, f, dom in validated_pairs():
        frac = cf.image_membership_check(f, dom, 100_000, seed)
        a = complex(f(0j))
        s = moment_sweep(dom, a, grid, 100_000, SamplerConfig(modulus_cap=TAIL_CAP), seed)
        for p, est in zip(grid, s):
            try:
                verdict = cf.hardy_norm(f, 2 * p).verdict
            except BrownexitError as exc:
                verdict = f"error: {exc}"
            match = (verdict == "finite") == (not est.divergent_flag)
            ok &= match and frac == 1.0
            rows.append({"pair": name, "p": p, "hardy": verdict, "flag": est.divergent_flag,
                         "tail_index": est.tail_index, "match": match})
    return CriterionResult(9, "Hardy verdict vs moment flags", bool(ok), {"rows": rows})


def pl_library():
    return [Constant(2.0), Constant(0.5 - 0.5j), Polynomial((0.0, 1.0)), Polynomial((1.0, 0.5, 0.25)),
            BoundedRational((1.0,), (2.0, 1.0)), BoundedRational((1.0, 2.0), (5.0, 1.0, 1.0)),
            ExpPower(1.0), ExpPower(2.0)]


def pl_benchmarks():
    """(name, domain, p, functions meeting both hypotheses there)."""
    lib = pl_library()
    return [
        ("disk", Disk(), 0.5, lib),
        ("wedge", QUADRANT, 0.5, [lib[0], lib[1], lib[4], lib[5]]),
        ("slit", SpiralComplement(0.0, 1.0, (math.pi,)), 0.2, [lib[0], lib[1]]),
    ]


def criterion_10(seed: int = 7) -> CriterionResult:
    rows = []
    ok = True
    for name, dom, p, funcs in pl_benchmarks():
        for f in funcs:
            v = verify_pl(f, dom, p, seed=seed)
            ok &= v.conclusion == "bound-holds"
            rows.append({"domain": name, "f": f.to_dict(), "conclusion": v.conclusion, "K_hat": v.K_hat})
    sharp = verify_pl(ExpPower(2.0), QUADRANT, 1.0, seed=seed)
    ok &= sharp.conclusion == "hypothesis-unmet" and sharp.unbounded_witness
    ok &= sharp.witness is not None and abs(sharp.witness.imag) < 0.1 * sharp.witness.real
    return CriterionResult(10, "Phragmen-Lindelof suite", bool(ok),
                           {"rows": rows, "sharpness": sharp.conclusion,
                            "witness": sharp.witness, "witness_log_modulus": sharp.interior_log_max})


def criterion_11(seed: int = 7) -> CriterionResult:
    pairs = [
        ("disk1<disk2", Disk(0j, 1.0), Disk(0j, 2.0), 0j, SamplerConfig(engine="euler", step_size=1e-3)),
        ("wedge<half_plane", QUADRANT, HalfPlane(0j, 0.0), 1 + 0j,
         SamplerConfig(engine="euler", step_size=1e-2, modulus_cap=30.0)),
        ("disk=disk", Disk(0j, 1.0), Disk(0j, 1.0), 0.5 + 0j, SamplerConfig(engine="euler", step_size=1e-3)),
    ]
    rows = []
    ok = True
    for name, inner, outer, a, cfg in pairs:
        bi, bo = coupled_exit_pair(inner, outer, a, cfg, seed, n=10_000)
        viol = int(np.count_nonzero(bi.exit_time > bo.exit_time))
        ok &= viol == 0
        if inner == outer:
            ok &= bool(np.all(bi.exit_time == bo.exit_time))
        rows.append({"pair": name, "violations": viol})
    return CriterionResult(11, "monotone coupling", bool(ok), {"rows": rows})


def criterion_12(seed: int = 7) -> CriterionResult:
    import json
    import tempfile
    from pathlib import Path
    from .cli import main

    rows = []
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "disk.json").write_text(json.dumps({"type": "disk", "center": [0, 0], "radius": 1}))
        (tmp / "wedge.json").write_text(json.dumps({"type": "wedge", "half_angle": math.pi / 4}))
        runs = [
            ["moment", "--domain", str(tmp / "disk.json"), "--p", "1.0", "--samples", "100000"],
            ["sweep", "--domain", str(tmp / "wedge.json"), "--start", "1,0", "--p-grid", "0.5,1.0",
             "--samples", "60000", "--format", "json"],
        ]
        for args in runs:
            outs = []
            for tag, workers in (("a", 1), ("b", 1), ("c", 2)):
                d = tmp / f"{args[0]}_{tag}"
                status = main(args + ["--seed", str(seed), "--workers", str(workers), "--out", str(d)])
                ok &= status == 0
                outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
            same = outs[0] == outs[1] == outs[2]
            ok &= same and bool(outs[0])
            rows.append({"command": args[0], "identical": same, "files": sorted(outs[0])})
    return CriterionResult(12, "determinism", bool(ok), {"rows": rows})


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run(numbers=None, seed: int = 7, echo=None) -> list[CriterionResult]:
    out = []
    for n in (numbers or sorted(CRITERIA)):
        t0 = time.perf_counter()
        try:
            res = CRITERIA[n](seed)
        except BrownexitError as exc:
            res = CriterionResult(n, CRITERIA[n].__name__, False, {"error": f"{exc.code}: {exc}"})
        res.seconds = time.perf_counter() - t0
        if echo:
            echo(res.line())
        out.append(res)
    return out
