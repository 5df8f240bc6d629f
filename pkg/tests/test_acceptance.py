"""Acceptance gate: one test per release criterion, each printing a single
PASS/FAIL line with the measured numbers.

The sweeps here are the expensive part of the suite (tens of minutes on one
core); they are shared across criteria through module-scoped fixtures.  The
L=12 wall-time criterion half is optional: set SPINQCP_ACCEPT_L12=1 to run
it (roughly half an hour on one core).
"""

import os
import time

import numpy as np
import pytest

from spinqcp.models import ModelSpec
from spinqcp.teleport import (
    external_closed_form,
    external_detector,
    internal_closed_form,
    internal_detector,
)
from spinqcp.thermal import (
    correlators,
    diagonalize,
    full_state,
    gibbs_state,
    reduced_state,
)
from spinqcp.scan import (
    SweepSpec,
    Window,
    branch_change_points,
    branch_segmented_derivative,
    cross_detector_coincidence,
    filter_finite_size_steps,
    finite_difference,
    locate_extremum,
    ranked_peaks,
    sweep,
)

WORKERS = 1
KT6 = (0.01, 0.1, 0.2, 0.3, 0.4, 0.5)


def within(value, target, tol):
    """Tolerance check immune to float grid jitter (0.99 vs 1.0 is 0.01)."""
    return abs(value - target) <= tol + 1e-9


def report(n, ok, detail):
    line = f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    assert ok, line


def by_key(curves):
    return {(c.kT, c.detector): c for c in curves}


# ----------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def xxz_h0():
    """XXZ h=0, L=12, full anisotropy range (criteria 2 and 3)."""
    spec = SweepSpec(ModelSpec.xxz(12, 0.0, 0.0), param="delta",
                     start=-2.0, stop=2.0, step=0.01, kts=(0.01, 1.0))
    return by_key(sweep(spec, workers=WORKERS))


@pytest.fixture(scope="module")
def xxz_h12():
    """XXZ h=12, L in {10, 12}, six temperatures (criteria 4 and 5)."""
    out = {}
    for L in (10, 12):
        spec = SweepSpec(ModelSpec.xxz(L, 0.0, 12.0), param="delta",
                         start=1.5, stop=5.5, step=0.01, kts=KT6)
        out[L] = by_key(sweep(spec, workers=WORKERS))
    return out


@pytest.fixture(scope="module")
def xxz_h12_small():
    """XXZ h=12, L in {6, 8}, second-QCP neighbourhood only (criterion 5)."""
    out = {}
    for L in (6, 8):
        spec = SweepSpec(ModelSpec.xxz(L, 0.0, 12.0), param="delta",
                         start=3.6, stop=5.5, step=0.01, kts=(0.1,))
        out[L] = by_key(sweep(spec, workers=WORKERS))
    return out


@pytest.fixture(scope="module")
def xx_curves():
    """XX chain, L in {10, 12} (criteria 6 and 10)."""
    out = {}
    for L in (10, 12):
        spec = SweepSpec(ModelSpec.xy(L, 0.0, 0.0), param="lam",
                         start=0.5, stop=1.5, step=0.01, kts=(0.01, 0.1))
        out[L] = by_key(sweep(spec, workers=WORKERS))
    return out


@pytest.fixture(scope="module")
def xy05_curves():
    spec = SweepSpec(ModelSpec.xy(12, 0.0, 0.5), param="lam",
                     start=0.7, stop=1.3, step=0.01, kts=(0.01,),
                     detectors=("dint",))
    return by_key(sweep(spec, workers=WORKERS))


@pytest.fixture(scope="module")
def ising_curves():
    spec = SweepSpec(ModelSpec.xy(12, 0.0, 1.0), param="lam",
                     start=0.7, stop=1.3, step=0.01, kts=(0.01,))
    return by_key(sweep(spec, workers=WORKERS))


# ----------------------------------------------------------------- criteria

def test_criterion_01_oracle_equivalence():
    families = [
        ("xxz_h0", lambda L, x: ModelSpec.xxz(L, x, 0.0), np.linspace(-2.0, 2.0, 5)),
        ("xxz_h12", lambda L, x: ModelSpec.xxz(L, x, 12.0), np.linspace(1.5, 5.5, 5)),
        ("xx", lambda L, x: ModelSpec.xy(L, x, 0.0), np.linspace(0.2, 1.8, 5)),
        ("xy05", lambda L, x: ModelSpec.xy(L, x, 0.5), np.linspace(0.2, 1.8, 5)),
        ("ising", lambda L, x: ModelSpec.xy(L, x, 1.0), np.linspace(0.2, 1.8, 5)),
    ]
    t0 = time.perf_counter()
    worst_int = worst_ext = 0.0
    for _, make, values in families:
        for L in (4, 6, 8):
            for x in values:
                spec = make(L, float(x))
                spectrum = diagonalize(spec)
                for kt in (0.05, 0.5, 2.0):
                    ts = gibbs_state(spec, kt, spectrum=spectrum)
                    c = correlators(ts)
                    rho1 = reduced_state(ts, (1,))
                    rho12 = reduced_state(ts, (1, 2))
                    di = internal_detector(rho1, rho12).value
                    worst_int = max(worst_int, abs(di - internal_closed_form(c)))
                    fe = external_detector(rho12).value
                    worst_ext = max(worst_ext, abs(fe - external_closed_form(c).value))
    elapsed = time.perf_counter() - t0
    ok = worst_int < 1e-9 and worst_ext < 1e-9 and elapsed < 120.0
    report(1, ok, f"protocol vs closed form over 225 thermal states: "
                  f"max |dint diff| = {worst_int:.2e}, max |fext diff| = "
                  f"{worst_ext:.2e} (tol 1e-9), runtime {elapsed:.0f}s (< 120s)")


def test_criterion_02_xxz_h0_internal_trivial(xxz_h0):
    worst = max(np.abs(xxz_h0[(kt, "dint")].values).max() for kt in (0.01, 1.0))
    report(2, worst < 1e-9,
           f"XXZ h=0 L=12 internal detector: max over grid and kT = "
           f"{worst:.2e} (tol 1e-9)")


def test_criterion_03_xxz_h0_qcps(xxz_h0):
    curves = [xxz_h0[(0.01, "fext")], xxz_h0[(1.0, "fext")]]
    masks, _ = filter_finite_size_steps(curves)
    d1 = finite_difference(curves[0], 1)
    peaks = ranked_peaks(d1, mask=masks[0.01])
    top = sorted(p[0] for p in peaks[:2])
    ok = within(top[0], -1.0, 0.10) and within(top[1], 1.0, 0.10)
    report(3, ok, f"two most prominent surviving |dF/dDelta| peaks at "
                  f"{top[0]:+.2f} and {top[1]:+.2f} (targets -1/+1, tol 0.10)")


def test_criterion_04_xxz_h12_first_qcp(xxz_h12):
    results, ok = [], True
    for L in (10, 12):
        for det in ("fext", "dint"):
            curves = [xxz_h12[L][(kt, det)] for kt in KT6]
            masks, _ = filter_finite_size_steps(curves)
            for kt in (0.01, 0.1):
                est = locate_extremum(
                    finite_difference(xxz_h12[L][(kt, det)], 1),
                    Window(1.7, 2.5, order=1), mask=masks[kt])
                ok &= within(est.value, 2.0, 0.05)
                results.append(f"L={L} {det} kT={kt}: {est.value:.2f}")
    report(4, ok, "step-filtered d1 extrema vs Delta1=2.0 (tol 0.05): "
                  + "; ".join(results))


def test_criterion_05_xxz_h12_second_qcp_trend(xxz_h12, xxz_h12_small):
    lines, ok = [], True
    for det in ("fext", "dint"):
        dists = []
        for L in (6, 8, 10, 12):
            curves = xxz_h12_small[L] if L in (6, 8) else xxz_h12[L]
            est = locate_extremum(finite_difference(curves[(0.1, det)], 2),
                                  Window(4.0, 5.3, order=2))
            dists.append(abs(est.value - 4.875))
        ok &= all(b < a for a, b in zip(dists, dists[1:]))
        lines.append(f"{det}: " + " > ".join(f"{d:.3f}" for d in dists))
    report(5, ok, "distance of d2 estimate to Delta2=4.875, L=6,8,10,12 "
                  "(strictly decreasing): " + "; ".join(lines))


def test_criterion_06_xx_transition(xx_curves):
    ests, ok = [], True
    for L in (10, 12):
        est = locate_extremum(finite_difference(xx_curves[L][(0.1, "dint")], 1),
                              Window(0.6, 1.4, order=1))
        ok &= within(est.value, 1.00, 0.01)
        ests.append(f"L={L}: {est.value:.2f}")
    report(6, ok, "XX |dD/dlam| extremum at kT=0.10 vs lam_c=1.00 "
                  "(tol 0.01): " + "; ".join(ests))


def test_criterion_07_xy_gamma05(xy05_curves):
    est = locate_extremum(finite_difference(xy05_curves[(0.01, "dint")], 1),
                          Window(0.75, 1.25, order=1))
    ok = within(est.value, 0.98, 0.01)
    report(7, ok, f"XY gamma=0.5 L=12 kT=0.01 d1 extremum of D_int at "
                  f"{est.value:.2f} (target 0.98 +- 0.01)")


def test_criterion_08_ising(ising_curves):
    fext = ising_curves[(0.01, "fext")]
    # the branch-change cusp next to the QCP must not be mistaken for the
    # inflection, so the derivative is taken per attaining-branch segment
    est_f = locate_extremum(branch_segmented_derivative(fext, 1),
                            Window(0.75, 1.25, order=1))
    est_d = locate_extremum(finite_difference(ising_curves[(0.01, "dint")], 2),
                            Window(0.75, 1.25, order=2))
    ok = within(est_f.value, 0.97, 0.01) and within(est_d.value, 0.98, 0.02)
    report(8, ok, f"Ising L=12 kT=0.01: fext d1 inflection at {est_f.value:.2f} "
                  f"(target 0.97 +- 0.01), dint d2 inflection at "
                  f"{est_d.value:.2f} (target 0.98 +- 0.02)")


def test_criterion_09_gamma_transition():
    spec = SweepSpec(ModelSpec.xy(12, 1.5, 0.0), param="gamma",
                     start=-0.1, stop=0.1, step=0.01, kts=(0.05, 0.5))
    curves = by_key(sweep(spec, workers=WORKERS))
    lines, ok = [], True
    for kt in (0.05, 0.5):
        fe = curves[(kt, "fext")]
        di = curves[(kt, "dint")]
        g_min = float(fe.grid[np.argmin(fe.values)])
        g_max = float(di.grid[np.argmax(di.values)])
        ok &= within(g_min, 0.0, 0.01) and within(g_max, 0.0, 0.01)
        lines.append(f"kT={kt}: Fext min at {g_min:+.2f}, Dint max at {g_max:+.2f}")
    report(9, ok, "gamma-transition extrema vs gamma_c=0.00 (tol 0.01): "
                  + "; ".join(lines))


def test_criterion_10_cusp_classification(xx_curves):
    fext = xx_curves[12][(0.01, "fext")]
    dint = xx_curves[12][(0.01, "dint")]
    bcs = branch_change_points(fext)
    cusp_bcs = [b for b in bcs if 1.1 <= b <= 1.4]
    d1f = finite_difference(fext, 1)
    est_cusp = locate_extremum(d1f, Window(1.1, 1.4, order=1))
    est_qcp = locate_extremum(d1f, Window(0.6, 1.1, order=1))
    est_dint = locate_extremum(finite_difference(dint, 1), Window(0.6, 1.4, order=1))
    v_cusp = cross_detector_coincidence(est_cusp, est_dint, branch_changes_a=bcs)
    v_qcp = cross_detector_coincidence(est_qcp, est_dint, branch_changes_a=bcs)
    ok = (len(cusp_bcs) == 1
          and v_cusp.label == "suspect-optimization-cusp"
          and v_qcp.label == "QCP-consistent")
    report(10, ok, f"XX L=12 kT=0.01: branch change at {cusp_bcs}; cusp feature "
                   f"at {est_cusp.value:.2f} -> {v_cusp.label}; QCP feature at "
                   f"{est_qcp.value:.2f} vs Dint {est_dint.value:.2f} -> {v_qcp.label}")


def test_criterion_11_even_odd_convergence():
    curves = {}
    for L in (9, 10, 11, 12):
        spec = SweepSpec(ModelSpec.xxz(L, 0.0, 0.0), param="delta",
                         start=-2.0, stop=2.0, step=0.05, kts=(1.0,),
                         detectors=("xx",))
        (curves[L],) = sweep(spec, workers=WORKERS)
    d_even = float(np.abs(curves[12].values - curves[10].values).max())
    d_odd = float(np.abs(curves[11].values - curves[9].values).max())
    report(11, d_even < d_odd,
           f"XXZ h=0 kT=1.0 xx-curve convergence: max|L12-L10| = {d_even:.4f} "
           f"< max|L11-L9| = {d_odd:.4f} (even faster than odd)")


def test_criterion_12_performance():
    def timed_sweep(L):
        spec = SweepSpec(ModelSpec.xy(L, 0.0, 1.0), param="lam",
                         start=0.0, stop=2.0, step=0.01, kts=KT6)
        t0 = time.perf_counter()
        sweep(spec, workers=WORKERS)
        return time.perf_counter() - t0

    t10 = timed_sweep(10)
    spec8 = ModelSpec.xy(8, 1.0, 1.0)
    diff = float(np.abs(full_state(gibbs_state(spec8, 0.1, blocked=True))
                        - full_state(gibbs_state(spec8, 0.1, blocked=False))).max())
    if os.environ.get("SPINQCP_ACCEPT_L12"):
        t12 = timed_sweep(12)
        l12 = f"L=12 sweep {t12:.0f}s (< 2700s)"
        ok12 = t12 < 2700.0
    else:
        l12 = "L=12 sweep skipped (set SPINQCP_ACCEPT_L12=1 to run)"
        ok12 = True
    ok = t10 < 300.0 and diff < 1e-10 and ok12
    report(12, ok, f"full 6-temperature lam sweep: L=10 in {t10:.0f}s (< 300s); "
                   f"{l12}; blocked vs unblocked L=8 max diff {diff:.1e} (tol 1e-10)")
