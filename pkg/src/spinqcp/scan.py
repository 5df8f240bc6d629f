"""Parameter sweeps of the QCP detectors and the estimation pipeline:
finite-difference derivatives, finite-size step filtering, derivative
extrema with grid-step error bars, and linear extrapolation to T=0."""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import find_peaks

from . import teleport as tp
from .models import ModelSpec
from .thermal import correlators, diagonalize, gibbs_state, reduced_state

DETECTORS = ("fext", "dint")
CORRELATOR_CURVES = ("z", "xx", "yy", "zz")


@dataclass(frozen=True)
class StepFilterConfig:
    """Knobs of the vanish-at-high-temperature artifact mask."""

    radius: float = 0.05       # parameter distance to search for a high-kT counterpart
    rel_height: float = 0.2    # peak threshold, relative to each profile's max
    high_kt_min: float = 0.5   # minimum temperature accepted as reference


@dataclass(frozen=True)
class Window:
    """Search window for one expected QCP, with the derivative order to use."""

    lo: float
    hi: float
    order: int = 1

    def __post_init__(self):
        if self.lo >= self.hi:
            raise ValueError(f"window [{self.lo}, {self.hi}] is empty")
        if self.order not in (1, 2):
            raise ValueError(f"derivative order must be 1 or 2, got {self.order}")


@dataclass(frozen=True)
class SweepSpec:
    """One detector sweep: a model family with fixed couplings, a tuning
    parameter grid, a temperature list and the detectors to evaluate."""

    model: ModelSpec
    param: str                       # "delta", "lam" or "gamma"
    start: float
    stop: float
    step: float = 0.01
    kts: tuple = (0.01,)
    detectors: tuple = DETECTORS
    windows: tuple = ()
    step_filter: StepFilterConfig = StepFilterConfig()
    name: str = ""

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.start >= self.stop:
            raise ValueError(f"empty range [{self.start}, {self.stop}]")
        if any(kt <= 0 for kt in self.kts):
            raise ValueError(f"temperatures must be positive: {self.kts}")
        known = DETECTORS + CORRELATOR_CURVES
        for d in self.detectors:
            if d not in known:
                raise ValueError(f"unknown detector {d!r}, expected one of {known}")
        for w in self.windows:
            if w.lo < self.start or w.hi > self.stop:
                raise ValueError(f"window [{w.lo}, {w.hi}] outside the sweep range")

    def grid(self):
        n = int(round((self.stop - self.start) / self.step))
        return np.round(self.start + self.step * np.arange(n + 1), 12)


@dataclass(frozen=True)
class DetectorCurve:
    """A sampled detector (or correlator) at fixed L and kT."""

    param: str
    grid: np.ndarray
    values: np.ndarray
    branches: tuple          # attaining-branch label per grid point ("" if n/a)
    L: int
    kT: float
    detector: str
    order: int = 0           # how many derivatives have been taken
    model_tag: str = ""

    @property
    def step(self):
        return float(self.grid[1] - self.grid[0])


@dataclass(frozen=True)
class QcpEstimate:
    value: float
    error: float
    kT: float
    L: int
    detector: str
    order: int


@dataclass(frozen=True)
class ZeroTExtrapolation:
    estimates: tuple
    slope: float
    intercept: float
    intercept_stderr: float
    residuals: tuple

    @property
    def predicted_qcp(self):
        return self.intercept


@dataclass(frozen=True)
class CoincidenceVerdict:
    label: str               # "QCP-consistent" or "suspect-optimization-cusp"
    separation: float
    combined_error: float
    branch_cusp_a: bool = False
    branch_cusp_b: bool = False


def _model_tag(spec):
    if spec.family == "xxz":
        return f"xxz(h={spec.h:g})"
    return f"xy(gamma={spec.gamma:g})"


def _point_values(spec, value, param, kts, detectors, mode):
    """Evaluate all requested detectors at one grid point, sharing the
    diagonalization across temperatures."""
    point = spec.with_tuning(param, value)
    spectrum = diagonalize(point)
    rows = []
    for kt in kts:
        ts = gibbs_state(point, kt, spectrum=spectrum)
        c = correlators(ts)
        for det in detectors:
            if det in CORRELATOR_CURVES:
                rows.append((kt, det, getattr(c, det), ""))
            elif det == "fext":
                if mode == "protocol":
                    r = tp.external_detector(reduced_state(ts, (1, 2)))
                else:
                    r = tp.external_closed_form(c)
                rows.append((kt, det, r.value, r.branch))
            else:
                if mode == "protocol":
                    r = tp.internal_detector(reduced_state(ts, (1,)),
                                             reduced_state(ts, (1, 2)))
                    rows.append((kt, det, r.value, r.branch))
                else:
                    rows.append((kt, det, tp.internal_closed_form(c),
                                 tp.internal_branch(c)))
    return rows


def _worker(args):
    return _point_values(*args)


def default_workers():
    env = os.environ.get("SPINQCP_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def sweep(spec, mode="closed-form", workers=None):
    """Run one sweep; returns a DetectorCurve per (kT, detector).

    Grid points are independent; with workers > 1 they are evaluated in a
    process pool, with deterministic output ordering either way.
    """
    if mode not in ("closed-form", "protocol"):
        raise ValueError(f"unknown mode {mode!r}")
    if workers is None:
        workers = default_workers()
    grid = spec.grid()
    jobs = [(spec.model, v, spec.param, spec.kts, spec.detectors, mode) for v in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs, chunksize=4))
    else:
        results = [_worker(job) for job in jobs]
    curves = []
    tag = _model_tag(spec.model)
    for kt in spec.kts:
        for det in spec.detectors:
            vals, branches = [], []
            for rows in results:
                for rkt, rdet, v, b in rows:
                    if rkt == kt and rdet == det:
                        vals.append(v)
                        branches.append(b)
            curves.append(DetectorCurve(
                param=spec.param, grid=grid, values=np.array(vals),
                branches=tuple(branches), L=spec.model.L, kT=kt,
                detector=det, order=0, model_tag=tag))
    return curves


def finite_difference(curve, order=1):
    """Numerical derivative of a uniformly sampled curve; central differences
    inside, one-sided at the endpoints."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if len(curve.grid) < order + 2:
        raise ValueError(f"need at least {order + 2} points, have {len(curve.grid)}")
    steps = np.diff(curve.grid)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]):
        raise ValueError("grid is not uniform")
    vals = curve.values
    for _ in range(order):
        vals = np.gradient(vals, curve.grid, edge_order=2)
    return replace(curve, values=vals,
                   detector=f"d{order + curve.order}({curve.detector.split('(')[-1].rstrip(')')})",
                   order=curve.order + order)


def locate_extremum(dcurve, window, mask=None):
    """Grid point of greatest |derivative| inside the window; the error bar is
    one grid step per derivative order."""
    if dcurve.order < 1:
        raise ValueError("locate_extremum expects a derivative curve")
    lo, hi = (window.lo, window.hi) if isinstance(window, Window) else window
    sel = (dcurve.grid >= lo - 1e-12) & (dcurve.grid <= hi + 1e-12)
    if mask is not None:
        sel &= ~mask
    if not sel.any():
        raise ValueError(f"window [{lo}, {hi}] contains no (unmasked) grid points")
    mag = np.where(sel, np.abs(dcurve.values), -np.inf)
    i = int(np.argmax(mag))
    return QcpEstimate(value=float(dcurve.grid[i]),
                       error=dcurve.order * dcurve.step,
                       kT=dcurve.kT, L=dcurve.L,
                       detector=dcurve.detector, order=dcurve.order)


def branch_segmented_derivative(curve, order=1):
    """Derivative computed independently on each attaining-branch segment.

    A change of the attaining branch puts a kink in the curve; differencing
    across it contaminates nearby points with the kink's (meaningless)
    slope.  Splitting at branch changes keeps each segment's derivative
    clean.  Segments too short to difference contribute zeros.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    cuts = [0]
    for i in range(1, len(curve.branches)):
        if curve.branches[i] != curve.branches[i - 1]:
            cuts.append(i)
    cuts.append(len(curve.grid))
    vals = np.zeros(len(curve.grid))
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < order + 2:
            continue
        seg = curve.values[a:b]
        for _ in range(order):
            seg = np.gradient(seg, curve.grid[a:b], edge_order=2)
        vals[a:b] = seg
    return replace(curve, values=vals,
                   detector=f"d{order + curve.order}({curve.detector.split('(')[-1].rstrip(')')})",
                   order=curve.order + order)


def ranked_peaks(dcurve, mask=None):
    """Local maxima of |derivative|, most prominent first.

    Prominence (not raw height) ranks sharp critical-point signatures above
    broad slope plateaus.  Returns a list of (grid_value, height, prominence)
    tuples; masked points are zeroed out before peak finding.
    """
    if dcurve.order < 1:
        raise ValueError("ranked_peaks expects a derivative curve")
    mag = np.abs(dcurve.values).copy()
    if mask is not None:
        mag[np.asarray(mask, dtype=bool)] = 0.0
    peaks, props = find_peaks(mag, prominence=0.0)
    order = np.argsort(props["prominences"])[::-1]
    return [(float(dcurve.grid[p]), float(mag[p]), float(pr))
            for p, pr in zip(peaks[order], props["prominences"][order])]


def _derivative_profile(curve):
    c = curve if curve.order >= 1 else finite_difference(curve, 1)
    return np.abs(c.values)


def filter_finite_size_steps(curves, config=StepFilterConfig()):
    """Mask per curve of grid regions whose low-kT derivative spikes have no
    counterpart in the high-kT derivative profile (finite-size steps).

    Returns (masks, warning) where masks maps kT -> boolean exclusion array.
    With no reference temperature >= config.high_kt_min all masks are empty
    and warning is True.
    """
    if not curves:
        return {}, True
    ref = max(curves, key=lambda c: c.kT)
    masks = {c.kT: np.zeros(len(c.grid), dtype=bool) for c in curves}
    if ref.kT < config.high_kt_min or len(curves) < 2:
        return masks, True
    gref = _derivative_profile(ref)
    ref_thr = config.rel_height * gref.max()
    for curve in curves:
        if curve.kT == ref.kT:
            continue
        g = _derivative_profile(curve)
        if g.max() <= 0:
            continue
        peaks, _ = find_peaks(g, height=config.rel_height * g.max())
        mask = masks[curve.kT]
        for p in peaks:
            near = np.abs(ref.grid - curve.grid[p]) <= config.radius + 1e-12
            if gref[near].max() < ref_thr:
                mask |= np.abs(curve.grid - curve.grid[p]) <= config.radius + 1e-12
    return masks, False


def count_masked_regions(mask):
    """Number of contiguous masked runs."""
    m = np.asarray(mask, dtype=int)
    return int(np.sum(np.diff(np.concatenate(([0], m))) == 1))


def extrapolate_to_zero_T(estimates):
    """Ordinary least squares of estimate value against kT; the T=0 prediction
    is the intercept."""
    estimates = tuple(estimates)
    kts = np.array([e.kT for e in estimates])
    if len(estimates) < 3 or len(set(kts)) < 3:
        raise ValueError("need estimates at >= 3 distinct temperatures")
    vals = np.array([e.value for e in estimates])
    (slope, intercept), cov = np.polyfit(kts, vals, 1, cov=True)
    resid = vals - (slope * kts + intercept)
    return ZeroTExtrapolation(
        estimates=estimates, slope=float(slope), intercept=float(intercept),
        intercept_stderr=float(np.sqrt(cov[1, 1])), residuals=tuple(resid))


def branch_change_points(curve):
    """Grid values where the attaining-branch label changes (cusp candidates)."""
    pts = []
    for i in range(1, len(curve.branches)):
        if curve.branches[i] != curve.branches[i - 1]:
            pts.append(float(curve.grid[i]))
    return pts


def cross_detector_coincidence(est_a, est_b, branch_changes_a=(), branch_changes_b=(),
                               grid_step=0.01):
    """Check whether two detector estimates mark the same feature.

    Estimates overlapping within combined error bars are "QCP-consistent";
    otherwise the feature is a "suspect-optimization-cusp".  Estimates whose
    grid point sits within one grid step of an attaining-branch change are
    flagged individually.
    """
    sep = abs(est_a.value - est_b.value)
    combined = est_a.error + est_b.error
    label = "QCP-consistent" if sep <= combined + 1e-12 else "suspect-optimization-cusp"
    near = lambda v, pts: any(abs(v - p) <= grid_step + 1e-12 for p in pts)
    return CoincidenceVerdict(
        label=label, separation=sep, combined_error=combined,
        branch_cusp_a=near(est_a.value, branch_changes_a),
        branch_cusp_b=near(est_b.value, branch_changes_b))
