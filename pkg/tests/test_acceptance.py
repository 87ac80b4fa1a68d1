"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL`` line (visible under ``pytest -v``)
and then asserts the same condition.
"""

import json
import time

import numpy as np
import pytest

from zygcomm import _accel
from zygcomm.awf import awf_twice, calibrate_amplitude, oscillation_lower_bound
from zygcomm.cli import SUBCOMMANDS, main
from zygcomm.compact import compactness_dossier, select_disjoint
from zygcomm.fields import (
    GridFunction,
    constant_symbol,
    extremal_testfunction,
    get_symbol,
    grid_nodes,
    holder_x3,
    linear_x1,
    linear_x3,
    save_grid_file,
    sign_x3,
    symbol_names,
)
from zygcomm.geometry import Box, Interval, ZygmundRectangle, enumerate_zygmund, reflect
from zygcomm.kernels import get_kernel, size_z
from zygcomm.multiplier import (
    CORNER_VALUE,
    clearance_points,
    gradient_check,
    mz1_stability,
    unboundedness_sweep,
)
from zygcomm.norms import bmo_norm, check_equivalence, holder_x3_seminorm
from zygcomm.operators import Sampled1D, check_domination, check_majorant_chain, riesz_potential_1d

UNIT = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


def _report(capsys, n, ok, detail=""):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def _spread(items, count):
    idx = np.linspace(0, len(items) - 1, count).astype(int)
    return [items[i] for i in idx]


@pytest.fixture(scope="module")
def nw():
    return get_kernel("nagel-wainger")


@pytest.fixture(scope="module")
def cube():
    return ZygmundRectangle.from_bounds(UNIT)


@pytest.fixture(scope="module")
def cal8(nw, cube):
    return calibrate_amplitude(nw, cube, 8)


def test_criterion_1_homogeneity(capsys, nw):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    n = 100_000
    z = 2.0 ** rng.uniform(-8, 8, (n, 3)) * rng.choice([-1.0, 1.0], (n, 3))
    s, t = 2.0 ** rng.uniform(-10, 10, n), 2.0 ** rng.uniform(-10, 10, n)
    rz = z * np.column_stack([s, t, s * t])
    origin = np.zeros_like(z)
    lhs = nw(z, origin)
    rhs = (s * t) ** 2 * nw(rz, origin)
    k_err = float(np.max(np.abs(lhs - rhs) / np.abs(lhs)))
    a = np.abs(z)
    s_err = 0.0
    for theta in (0.1, 0.5, 1.0):
        base = size_z(a[:, 0], a[:, 1], a[:, 2], theta)
        scaled = size_z(s * a[:, 0], t * a[:, 1], s * t * a[:, 2], theta)
        s_err = max(s_err, float(np.max(np.abs(scaled * (s * t) ** 2 - base) / base)))
    elapsed = time.perf_counter() - t0
    ok = k_err <= 1e-12 and s_err <= 1e-12 and elapsed < 5
    _report(capsys, 1, ok, f"kernel rel err {k_err:.2e}, size rel err {s_err:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_bracketing(capsys, nw, cube):
    t0 = time.perf_counter()
    res = 32
    cal = calibrate_amplitude(nw, cube, res)
    A = cal.amplitude
    rng = np.random.default_rng(2)
    vals = []
    for r in _spread(enumerate_zygmund(cube, 0, 3), 20):
        rt = reflect(r, nw, A).reflected
        x = rt.lo + rng.uniform(size=(50, 3)) * rt.lengths
        y = grid_nodes(r, res)
        w = np.full(len(y), r.volume / res**3)
        vals.append(_accel.apply(nw, x, y, w, absolute=True))
    v = np.concatenate(vals) * A
    c, C = float(v.min()), float(v.max())
    elapsed = time.perf_counter() - t0
    ok = c > 0 and C / c <= 10 and elapsed < 120
    _report(capsys, 2, ok, f"A={A:g}, c={c:.4f}, C={C:.4f}, C/c={C / c:.3f}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_awf(capsys, nw, cube):
    t0 = time.perf_counter()
    res = 24
    A = calibrate_amplitude(nw, cube, res).amplitude
    rects = _spread(enumerate_zygmund(cube, 0, 2), 10)
    failures = []
    worst = {"mean": 0.0, "h": 0.0, "resid": 0.0}
    for r in rects:
        symbols = [constant_symbol(), linear_x3(), sign_x3(at=r.center[2]), holder_x3(0.5)]
        for b in symbols:
            f = extremal_testfunction(b, r, res)
            avg = float(np.mean(np.abs(f.samples)))
            sup = f.sup_norm()
            d1 = awf_twice(nw, r, f, A)
            d16 = awf_twice(nw, r, f, 16 * A)
            mean_ok = d1.error_mean <= 1e-8 * avg * r.volume
            h_ok = d1.h_R.sup_norm() <= 8 * A * sup
            resid_ok = d1.residual_sup <= 1e-8 * sup
            # f vanishes for a constant symbol, so the error ratio is 0 at both amplitudes
            decay_ok = d16.eta < d1.eta if avg > 0 else d1.e.sup_norm() == 0 == d16.e.sup_norm()
            if avg > 0:
                worst["mean"] = max(worst["mean"], d1.error_mean / (avg * r.volume))
                worst["resid"] = max(worst["resid"], d1.residual_sup / sup)
                worst["h"] = max(worst["h"], d1.h_ratio)
            if not (mean_ok and h_ok and resid_ok and decay_ok):
                failures.append((b.label(), r.label()))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 600
    _report(
        capsys, 3, ok,
        f"A={A:g}, max |int e|/(<|f|>|R|)={worst['mean']:.1e}, max h/(A|f|)={worst['h']:.3f}, "
        f"max resid={worst['resid']:.1e}, failures={failures}, {elapsed:.1f}s",
    )
    assert ok


def _catalog(tmp_path):
    box = Box.from_bounds([(-1.0, 7.0), (-1.0, 7.0), (-1.0, 63.0)])
    g = GridFunction.from_function(lambda x: np.cos(x[..., 2]) + 0.1 * x[..., 0], box, (8, 8, 64))
    path = tmp_path / "symbol.f8"
    save_grid_file(g, path)
    out = []
    for name in symbol_names():
        out.append(get_symbol(name, path=str(path)) if name == "from-grid-file" else get_symbol(name))
    return out


def test_criterion_4_certificates(capsys, nw, cube, cal8, tmp_path):
    rects = _spread(enumerate_zygmund(cube, 0, 2), 25)
    total, bad = 0, []
    for b in _catalog(tmp_path):
        for r in rects:
            cert = oscillation_lower_bound(b, nw, r, cal8)
            total += 1
            if not cert.valid:
                bad.append((b.label(), r.label(), cert.osc_value, cert.bound))
    ok = not bad
    _report(capsys, 4, ok, f"{total} certificates, C={cal8.constant:.4f}, failures={len(bad)}")
    assert ok


def test_criterion_5_norms(capsys):
    est = bmo_norm(linear_x3(), UNIT, (0, 4), 0.5, 4)
    bmo_ok = abs(est.value - 0.25) <= 0.02 * 0.25 and abs(est.minimum - 0.25) <= 0.02 * 0.25
    hol = holder_x3_seminorm(linear_x3(), 0.5, n=20_000)
    hol_ok = 0.98 <= hol.value <= 1.0 + 1e-12
    eq = check_equivalence(linear_x3(), 0.5, UNIT, (0, 4), 20_000, res=4, seed=5)
    eq_ok = eq.ratio is not None and 1 / 16 <= eq.ratio <= 16
    x1 = check_equivalence(linear_x1(), 0.5, UNIT, (0, 2), 5_000, res=4, seed=5)
    ok = bmo_ok and hol_ok and eq_ok and x1.flagged
    _report(
        capsys, 5, ok,
        f"bmo max={est.value:.6f} min={est.minimum:.6f} over {est.family_size} rectangles, "
        f"holder={hol.value:.6f}, ratio={eq.ratio}, x1 status={x1.status!r}",
    )
    assert ok


def test_criterion_6_majorants(capsys, nw, cube):
    rng = np.random.default_rng(6)
    f = extremal_testfunction(linear_x3(), cube, 16)
    far = np.column_stack([2 + rng.uniform(0, 3, 100), -1 - rng.uniform(0, 3, 100), 1.5 + rng.uniform(0, 3, 100)])
    dom = check_domination(linear_x3(), nw, f, far)
    ones = GridFunction.constant(cube, 16)
    near = 1 + 2.0 ** rng.uniform(-4, 1, (100, 3))
    norm = bmo_norm(linear_x3(), UNIT, (0, 3), 0.25, 4).value
    chain = check_majorant_chain(linear_x3(), nw, ones, near, 0.25, norm)
    riesz = riesz_potential_1d(0.5, Sampled1D.from_function(np.ones_like, 0.0, 1.0, 4096), 2.0).value
    riesz_ok = abs(riesz - 0.8284) <= 1e-3
    ok = dom.holds and chain.holds and riesz_ok
    _report(
        capsys, 6, ok,
        f"domination max excess={dom.max_excess:.2e}, chain C={chain.constant:.4f}, riesz={riesz:.8f}",
    )
    assert ok


def _axis3(intervals):
    out = []
    for lo, hi in intervals:
        i3 = Interval(lo, hi)
        out.append(ZygmundRectangle(Interval(0, 1), Interval(0, i3.length), i3))
    return out


def _exact_disjoint(ivs):
    return all(a.hi <= b.lo or b.hi <= a.lo for i, a in enumerate(ivs) for b in ivs[i + 1:])


def test_criterion_7_selection(capsys, nw):
    A = 256.0
    seqs = {
        "escape": _axis3([(i, i + 1) for i in range(1, 101)]),
        "nested": _axis3([(0.0, 1.0 / i) for i in range(1, 101)]),
        "cubic": _axis3([(1.0 / i, 1.0 / i + 1.0 / i**3) for i in range(1, 101)]),
    }
    t0 = time.perf_counter()
    results = {name: select_disjoint(rects, nw, A, 3) for name, rects in seqs.items()}
    elapsed = time.perf_counter() - t0
    ok = elapsed < 1.0
    parts = []
    for name, res in results.items():
        rects = seqs[name]
        fam = [rects[i].i3 if res.which == "base" else reflect(rects[i], nw, A).reflected.i3 for i in res.indices]
        good = len(res.indices) >= 10 and _exact_disjoint(fam) and list(res.indices) == sorted(set(res.indices))
        ok &= good
        parts.append(f"{name}: {len(res.indices)} {res.which}")
    _report(capsys, 7, ok, f"{', '.join(parts)}, {elapsed * 1000:.0f}ms")
    assert ok


def test_criterion_8_dossier(capsys, nw, cal8):
    const = compactness_dossier(constant_symbol(), 0.5, nw, cal8, UNIT, depths=(0, 3))
    x3 = compactness_dossier(linear_x3(), 0.5, nw, cal8, UNIT, depths=(0, 3))
    infs = [a.probe.inf_witness for a in x3.axes]
    ok = (
        not const.obstruction
        and all(a.obstruction for a in x3.axes)
        and all(abs(v - 0.25) <= 0.02 * 0.25 for v in infs)
    )
    _report(capsys, 8, ok, f"constant: {const.conclusion!r}; x3: {x3.conclusion!r}, inf_witness={infs}")
    assert ok


def test_criterion_9_multiplier(capsys):
    t0 = time.perf_counter()
    grad = float(gradient_check(clearance_points(10_000, seed=9)).max())
    stab = mz1_stability()
    stab_ok = all(np.isfinite(r.coarse) and np.isfinite(r.fine) and r.change <= 0.05 for r in stab)
    rows = unboundedness_sweep()
    cols_ok = True
    for col in ("d1", "d2", "d3"):
        v = np.array([getattr(r, col) for r in rows])
        cols_ok &= bool(v.max() - v.min() <= 0.05 * v.max())
    corner_ok = all(abs(r.corner - CORNER_VALUE) <= 1e-9 for r in rows)
    elapsed = time.perf_counter() - t0
    ok = grad <= 1e-6 and stab_ok and cols_ok and corner_ok and elapsed < 60
    worst = max(stab, key=lambda r: r.change)
    _report(
        capsys, 9, ok,
        f"gradient err={grad:.1e}, worst grid change={worst.change:.3%} at {worst.alpha.label()}, "
        f"sweep d1={rows[0].d1:.5f} corner={rows[0].corner:.10f}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_10_determinism(capsys, tmp_path):
    cfg = {"depths": [0, 2], "resolution": [4, 4, 4], "samples": 500, "log_grid": [-8, 8, 33], "seed": 11, "p": 2.0, "q": 4.0}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    mismatched = []
    for group, actions in SUBCOMMANDS.items():
        for action in actions:
            outs = []
            for run in ("a", "b"):
                d = tmp_path / run / f"{group}-{action}"
                code = main([group, action, "--config", str(path), "--out", str(d)])
                outs.append((code, {p.name: p.read_bytes() for p in sorted(d.iterdir())}))
            if outs[0] != outs[1] or not outs[0][1] or outs[0][0] != 0:
                mismatched.append(f"{group} {action}")
    ok = not mismatched
    _report(capsys, 10, ok, f"subcommands rerun: {sum(len(a) for a in SUBCOMMANDS.values())}, mismatched={mismatched}")
    assert ok
