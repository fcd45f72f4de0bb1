"""Time integration of the curvature flow dF/dt = H and trajectory analysis.

The stepper advances node positions with the mean curvature vector extracted
by :mod:`mcflow.immersion`; explicit RK4 (default) or forward Euler.  On
lat-long grids the velocity field passes through a zonal spectral filter that
removes Fourier modes the meridional resolution cannot represent anyway (the
cutoff at latitude row theta is  K(theta) = clip(round(N_lat sin theta), 2,
N_lon / 2)).  Without the filter the pole-clustered zonal spacing forces an
explicit time step smaller by a factor of sin(theta_min)^2, for no gain in
accuracy; with it, modes above the cutoff receive zero velocity and therefore
never move, while every resolved mode satisfies the step bound below.

Step size.  With s_eff the per-node, per-direction effective ambient spacing
(zonal spacings are widened by N_lon / (2 K(theta)), so the shortest KEPT
zonal wavelength counts, not the raw pole-clustered spacing):

    dt = cfl * s_min^2 / (2 n (1 + max|h|^2 * s_min^2)),   s_min = min s_eff.

For the resolved modes this gives |lambda| dt <= cfl * pi^2 / (2 n), inside
the RK4 real-axis stability region for cfl <= 1 (and Euler's for cfl <= 0.8).

Diagnostics records carry, per recorded time: area, integral of |H|^2,
max/min |H|, max pinching ratio, minQ := min over nodes of -Q (the distance to
a pinching violation: positive while the surface is strictly pinched), the
integral phi of f_sigma^p, the Gauss curvature integral (n = 2), and the
type-I quantity (-t) max|H|^2 (ancient) or (T - t) max|H|^2 (forward, with T
estimated by extrapolating 1 / max|H|^2 linearly in t to its root).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .curvature import PinchSpec
from .errors import DegenerateGeometryError, MinimalPointError
from .grid import ParamGrid, shift_positions
from .immersion import (
    DiscreteImmersion,
    GeometryFields,
    gauss_curvature_field,
    geometry_fields,
    integrate,
    mean_curvature_vector,
)

__all__ = [
    "FlowConfig",
    "DiagnosticsRecord",
    "Trajectory",
    "RescaleResult",
    "ClassifyResult",
    "cfl_dt",
    "step",
    "run",
    "diagnostics",
    "fsigma_integral",
    "classify_type",
    "blowup_type2",
    "rescale_type1",
    "fit_area_decay",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
    "synthetic_trajectory",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("t", "area", "intH2", "maxH", "minH", "maxRatio", "minQ",
               "phi", "gaussBonnet", "tIq")


@dataclass(frozen=True)
class FlowConfig:
    """Knobs of a flow run."""

    t_end: float
    cfl: float = 0.2
    integrator: str = "RK4"
    max_steps: int = 1_000_000
    stop_on_blowup: float = 1e6        # cap on max |h|^2
    pinch: Optional[PinchSpec] = None  # defaults to c = 4/(3n), a = 0
    snapshot_every: int = 25
    sigma: float = 0.1
    p: float = 10.0

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.integrator not in ("RK4", "Euler"):
            raise ValueError("integrator must be RK4 or Euler")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One time slice of every scalar functional tracked along a run.

    ``minQ`` stores min over nodes of -Q = c|H|^2 - a - |h|^2; a strictly
    pinched surface keeps it positive, and -minQ is the worst (largest) nodal
    Q.  ``gaussBonnet`` is the Gauss curvature integral and is None for
    n != 2.  ``tIq`` is the type-I quantity for the trajectory's mode.
    """

    t: float
    area: float
    intH2: float
    maxH: float
    minH: float
    maxRatio: float
    minQ: float
    phi: float
    gaussBonnet: Optional[float]
    tIq: float


@dataclass
class Trajectory:
    """Time-ordered snapshots plus diagnostics produced by a run."""

    snapshots: list[DiscreteImmersion]
    diagnostics: list[DiagnosticsRecord]
    mode: str = "Forward"
    T_singular: Optional[float] = None
    stop_reason: str = "t_end"

    def __post_init__(self):
        if self.mode not in ("Ancient", "Forward"):
            raise ValueError("mode must be Ancient or Forward")
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


@dataclass(frozen=True)
class RescaleResult:
    """A parabolically rescaled trajectory.

    L is the curvature normalisation (|H|^2 at the base point for the
    curvature-normalised transform, 1/(-t_j) for the type-I transform);
    base_point is the flat node index of the blow-up centre (None for
    type-I), base_time its time.
    """

    trajectory: Trajectory
    L: float
    base_point: Optional[int]
    base_time: float


@dataclass(frozen=True)
class ClassifyResult:
    kind: str            # "TypeI" | "TypeII"
    C: float             # sqrt(sup tIq); the type-I constant when kind == TypeI
    sup_tIq: float
    trend: float         # max tIq on the limit half / max on the other half


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _zonal_cutoffs(grid: ParamGrid) -> np.ndarray:
    nlat, nlon = grid.res
    k = np.rint(nlat * np.sin(grid.theta_values())).astype(int)
    return np.clip(k, 2, nlon // 2)


def _polar_filter(grid: ParamGrid, vel: np.ndarray) -> np.ndarray:
    """Zero zonal Fourier modes above the per-row cutoff (LatLongSphere only)."""
    if grid.topology != "LatLongSphere":
        return vel
    cut = _zonal_cutoffs(grid)
    spec = np.fft.rfft(vel, axis=1)
    modes = np.arange(spec.shape[1])
    keep = modes[None, :] <= cut[:, None]
    spec *= keep[:, :, None]
    return np.fft.irfft(spec, n=vel.shape[1], axis=1)


def _velocity(im: DiscreteImmersion, gf: GeometryFields | None = None) -> np.ndarray:
    vel = gf.Hvec if gf is not None else mean_curvature_vector(im)
    return _polar_filter(im.grid, vel)


def _effective_spacing_sq_min(im: DiscreteImmersion) -> float:
    grid = im.grid
    s2min = math.inf
    cut = _zonal_cutoffs(grid) if grid.topology == "LatLongSphere" else None
    for axis in range(grid.ndim):
        nbr = shift_positions(grid, im.positions, axis, 1, im.wrap_offsets)
        ds2 = np.einsum("...x,...x->...", nbr - im.positions, nbr - im.positions)
        if cut is not None and axis == 1:
            widen = (grid.res[1] / (2.0 * cut)) ** 2
            ds2 = ds2 * widen[:, None]
        s2min = min(s2min, float(ds2.min()))
    return s2min


def _dt_bound(im: DiscreteImmersion, cfl: float, gf: GeometryFields) -> float:
    s2 = _effective_spacing_sq_min(im)
    hmax = float(gf.normh2.max())
    return cfl * s2 / (2.0 * im.n * (1.0 + hmax * s2))


def cfl_dt(im: DiscreteImmersion, cfl: float) -> float:
    """Parabolic step bound; see the module docstring for the exact formula."""
    return _dt_bound(im, cfl, geometry_fields(im))


def step(im: DiscreteImmersion, dt: float, integrator: str = "RK4",
         first_stage_velocity: np.ndarray | None = None) -> DiscreteImmersion:
    """Advance the immersion one explicit step of size dt.

    ``first_stage_velocity`` lets a caller that already extracted the current
    geometry reuse it for the first stage.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos = im.positions
    k1 = first_stage_velocity if first_stage_velocity is not None else _velocity(im)
    if integrator == "Euler":
        new = pos + dt * k1
    elif integrator == "RK4":
        k2 = _velocity(im.with_positions(pos + 0.5 * dt * k1, im.t))
        k3 = _velocity(im.with_positions(pos + 0.5 * dt * k2, im.t))
        k4 = _velocity(im.with_positions(pos + dt * k3, im.t))
        new = pos + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError("integrator must be RK4 or Euler")
    return im.with_positions(new, im.t + dt)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def fsigma_integral(im: DiscreteImmersion, sigma: float, p: float,
                    gf: GeometryFields | None = None) -> tuple[float, float]:
    """(integral of f_sigma^p, max f_sigma) with f_sigma = |h0|^2 / |H|^(2(1-sigma)).

    Raises MinimalPointError when any node's |H|^2 falls below 1e-14 times the
    maximum, where the functional degenerates.
    """
    if gf is None:
        gf = geometry_fields(im)
    hmax = float(gf.normH2.max())
    if hmax <= 0 or float(gf.normH2.min()) < 1e-14 * hmax:
        raise MinimalPointError("f_sigma undefined near minimal points (|H| ~ 0)")
    f = gf.normh02 / gf.normH2 ** (1.0 - sigma)
    phi = integrate(im, f ** p, gf)
    return phi, float(f.max())


def fsigma_scaling_report(im: DiscreteImmersion, sigma: float, p: float,
                          gf: GeometryFields | None = None):
    """Report-only comparison of the two sides of the interpolation step.

    With gamma = 1 + 2/(sigma p), returns (integral of f_sigma^(gamma p),
    integral of |H|^2 f_sigma^p, their ratio).  The two sides scale
    differently under dilation, so no inequality between them is asserted
    anywhere; this exists to make the comparison inspectable.
    """
    if gf is None:
        gf = geometry_fields(im)
    hmax = float(gf.normH2.max())
    if hmax <= 0 or float(gf.normH2.min()) < 1e-14 * hmax:
        raise MinimalPointError("comparison undefined near minimal points")
    gamma = 1.0 + 2.0 / (sigma * p)
    f = gf.normh02 / gf.normH2 ** (1.0 - sigma)
    lhs = integrate(im, f ** (gamma * p), gf)
    rhs = integrate(im, gf.normH2 * f ** p, gf)
    return lhs, rhs, (lhs / rhs if rhs > 0 else math.inf)


def diagnostics(im: DiscreteImmersion, mode: str = "Forward",
                T: Optional[float] = None, pinch: Optional[PinchSpec] = None,
                sigma: float = 0.1, p: float = 10.0) -> DiagnosticsRecord:
    """All scalar functionals of one time slice.

    ``T`` is the (estimated) singular time and is only used in Forward mode;
    the type-I quantity is NaN when it is unknown.
    """
    gf = geometry_fields(im)
    if pinch is None:
        pinch = PinchSpec(c=4.0 / (3.0 * im.n))
    ones = np.ones(im.grid.res)
    area = integrate(im, ones, gf)
    intH2 = integrate(im, gf.normH2, gf)
    maxH2 = float(gf.normH2.max())
    minH2 = float(gf.normH2.min())
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(gf.normH2 > 0, gf.normh2 / gf.normH2, np.inf)
    neg_q = pinch.c * gf.normH2 - pinch.a - gf.normh2
    try:
        phi, _ = fsigma_integral(im, sigma, p, gf)
    except MinimalPointError:
        phi = math.nan
    gb = integrate(im, gauss_curvature_field(im, gf), gf) if im.n == 2 else None
    if mode == "Ancient":
        tiq = -im.t * maxH2
    else:
        tiq = (T - im.t) * maxH2 if T is not None else math.nan
    return DiagnosticsRecord(
        t=im.t, area=area, intH2=intH2, maxH=math.sqrt(maxH2),
        minH=math.sqrt(max(minH2, 0.0)), maxRatio=float(ratio.max()),
        minQ=float(neg_q.min()), phi=phi, gaussBonnet=gb, tIq=tiq,
    )


def _estimate_singular_time(times: np.ndarray, maxH2: np.ndarray) -> Optional[float]:
    """Root of a linear fit to 1 / max|H|^2 over the last quarter of records."""
    if len(times) < 3 or np.any(maxH2 <= 0):
        return None
    m = max(3, len(times) // 4)
    x, y = times[-m:], 1.0 / maxH2[-m:]
    slope, intercept = np.polyfit(x, y, 1)
    if slope >= 0:
        return None
    return float(-intercept / slope)


def run(seed: DiscreteImmersion, config: FlowConfig, mode: str = "Forward") -> Trajectory:
    """Flow a seed immersion until t_end, max_steps, blow-up cap, or geometry
    degeneracy; snapshots and diagnostics are recorded every
    ``snapshot_every`` steps and at both endpoints.

    Mid-run degeneracy aborts with the last good snapshot (recorded states are
    always extraction-verified first); a seed that fails extraction raises.
    """
    im = seed.copy()
    snapshots = [im.copy()]
    stop_reason = "t_end"
    steps = 0
    record_due = False
    t_end = config.t_end
    while im.t < t_end - 1e-15 and steps < config.max_steps:
        try:
            gf = geometry_fields(im)   # validates the current state
            if record_due:
                snapshots.append(im.copy())
                record_due = False
            if float(gf.normh2.max()) > config.stop_on_blowup:
                if snapshots[-1].t < im.t:
                    snapshots.append(im.copy())
                stop_reason = "blowup"
                break
            dt = min(_dt_bound(im, config.cfl, gf), t_end - im.t)
            im = step(im, dt, config.integrator,
                      first_stage_velocity=_velocity(im, gf))
        except DegenerateGeometryError:
            stop_reason = "degenerate"
            im = snapshots[-1]
            break
        steps += 1
        if steps % config.snapshot_every == 0:
            record_due = True
    if steps >= config.max_steps and im.t < t_end - 1e-15 and stop_reason == "t_end":
        stop_reason = "max_steps"
    if stop_reason != "degenerate" and snapshots[-1].t < im.t:
        try:
            geometry_fields(im)
            snapshots.append(im.copy())
        except DegenerateGeometryError:
            stop_reason = "degenerate"

    pre = [diagnostics(s, mode="Ancient", pinch=config.pinch,
                       sigma=config.sigma, p=config.p) for s in snapshots]
    T = None
    if mode == "Forward":
        T = _estimate_singular_time(np.array([r.t for r in pre]),
                                    np.array([r.maxH ** 2 for r in pre]))
        records = [replace(r, tIq=(T - r.t) * r.maxH ** 2 if T is not None else math.nan)
                   for r in pre]
    else:
        records = pre
    return Trajectory(snapshots=snapshots, diagnostics=records, mode=mode,
                      T_singular=T, stop_reason=stop_reason)


# ---------------------------------------------------------------------------
# classification and rescaling
# ---------------------------------------------------------------------------

def classify_type(traj: Trajectory, t_max: Optional[float] = None) -> ClassifyResult:
    """Type-I / type-II dichotomy from the recorded type-I quantity.

    The record window is split in half at the median time; the half adjacent
    to the limit (t -> -inf for ancient, t -> T for forward) is compared
    against the other.  A bounded series (limit-side max within 5% of the
    other half's max) is type I with constant C = sqrt(sup tIq).
    """
    recs = [r for r in traj.diagnostics if not math.isnan(r.tIq)]
    if t_max is not None and traj.mode == "Ancient":
        recs = [r for r in recs if r.t <= t_max]
    if len(recs) < 10:
        raise ValueError(f"need >= 10 records to classify, have {len(recs)}")
    recs.sort(key=lambda r: r.t)
    tiq = np.array([r.tIq for r in recs])
    half = len(recs) // 2
    if traj.mode == "Ancient":
        limit_half, other_half = tiq[:half], tiq[half:]
    else:
        limit_half, other_half = tiq[half:], tiq[:half]
    sup = float(tiq.max())
    trend = float(limit_half.max() / other_half.max())
    kind = "TypeI" if trend <= 1.05 else "TypeII"
    return ClassifyResult(kind=kind, C=math.sqrt(sup), sup_tIq=sup, trend=trend)


def _transform_snapshot(im: DiscreteImmersion, scale: float,
                        origin: np.ndarray | None, new_t: float) -> DiscreteImmersion:
    pos = im.positions
    if origin is not None:
        pos = pos - origin
    pos = scale * pos
    wraps = None
    if im.wrap_offsets:
        wraps = {a: scale * v for a, v in im.wrap_offsets.items()}
    return DiscreteImmersion(grid=im.grid, n=im.n, k=im.k, positions=pos,
                             t=new_t, wrap_offsets=wraps)


def blowup_type2(traj: Trajectory, window: Optional[tuple[float, float]] = None
                 ) -> RescaleResult:
    """Curvature-normalised blow-up about the space-time curvature maximum.

    The base point (x_j, t_j) maximises (-t)|H|^2 (ancient) or (T-t)|H|^2
    (forward) over the stored snapshots in the window; ties break to the
    earliest time, then the lowest flat node index.  Snapshots transform as
    F -> sqrt(L)(F - F(x_j, t_j)) with L = |H(x_j, t_j)|^2, times as
    tau = (t - t_j) L, so the tau = 0 slice has max |H| = 1 up to roundoff
    and the pinching ratio field is untouched.
    """
    snaps = traj.snapshots
    if window is not None:
        lo, hi = window
        snaps = [s for s in snaps if lo <= s.t <= hi]
    if not snaps:
        raise ValueError("empty rescaling window")
    if traj.mode == "Forward":
        if traj.T_singular is None:
            raise ValueError("forward-mode blow-up needs an estimated singular time")
        weight = lambda t: traj.T_singular - t
    else:
        weight = lambda t: -t

    best = None  # (-q, t, flat_index, normH2_at_node, position)
    for s in snaps:
        gf = geometry_fields(s)
        h2 = gf.normH2.reshape(-1)
        idx = int(np.argmax(h2))
        q = weight(s.t) * float(h2[idx])
        key = (-q, s.t, idx)
        if best is None or key < best[0]:
            best = (key, s.t, idx, float(h2[idx]),
                    s.positions.reshape(-1, s.ambient_dim)[idx].copy())
    _, t_j, x_j, L, origin = best
    scale = math.sqrt(L)
    out = [_transform_snapshot(s, scale, origin, (s.t - t_j) * L) for s in snaps]
    rtraj = Trajectory(snapshots=out, diagnostics=[], mode=traj.mode,
                       T_singular=None, stop_reason=traj.stop_reason)
    return RescaleResult(trajectory=rtraj, L=L, base_point=x_j, base_time=t_j)


def rescale_type1(traj: Trajectory, t_j: float, n_tau: int = 11) -> RescaleResult:
    """Type-I rescaling F(x, -t_j tau) / sqrt(-t_j) on the window tau in [-2, -1].

    Snapshots at the uniform tau grid are built by per-node linear
    interpolation in t of the stored snapshots, which must cover
    [2 t_j, t_j]."""
    if t_j >= 0:
        raise ValueError("type-I rescaling requires t_j < 0")
    if traj.mode != "Ancient":
        raise ValueError("type-I rescaling applies to ancient-mode trajectories")
    times = traj.times
    if times[0] > 2.0 * t_j + 1e-12 or times[-1] < t_j - 1e-12:
        raise ValueError(
            f"trajectory covers [{times[0]:.6g}, {times[-1]:.6g}] but the "
            f"transform needs [{2 * t_j:.6g}, {t_j:.6g}]"
        )
    scale = 1.0 / math.sqrt(-t_j)
    taus = np.linspace(-2.0, -1.0, n_tau)
    out = []
    for tau in taus:
        t = -t_j * tau
        j = int(np.searchsorted(times, t))
        j = min(max(j, 1), len(times) - 1)
        t0, t1 = times[j - 1], times[j]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        pos = (1.0 - w) * traj.snapshots[j - 1].positions + w * traj.snapshots[j].positions
        interp = traj.snapshots[j - 1].with_positions(pos, t)
        out.append(_transform_snapshot(interp, scale, None, float(tau)))
    rtraj = Trajectory(snapshots=out, diagnostics=[], mode="Ancient",
                       T_singular=None, stop_reason=traj.stop_reason)
    return RescaleResult(trajectory=rtraj, L=1.0 / (-t_j), base_point=None, base_time=t_j)


def fit_area_decay(traj: Trajectory, window: Optional[tuple[float, float]] = None
                   ) -> tuple[float, float]:
    """Least-squares fit of log(area) against log|t| (ancient) or log(T - t)
    (forward): returns (c, r) with area ~ c |t|^r over the fit window."""
    recs = traj.diagnostics
    if window is not None:
        lo, hi = window
        recs = [r for r in recs if lo <= r.t <= hi]
    if traj.mode == "Ancient":
        x = np.array([-r.t for r in recs])
    else:
        if traj.T_singular is None:
            raise ValueError("forward-mode fit needs an estimated singular time")
        x = np.array([traj.T_singular - r.t for r in recs])
    y = np.array([r.area for r in recs])
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("not enough records in the fit window")
    r_exp, logc = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(math.exp(logc)), float(r_exp)


def synthetic_trajectory(times, max_h2, mode: str = "Ancient",
                         T: Optional[float] = None) -> Trajectory:
    """Diagnostics-only trajectory from a max|H|^2 time series (no snapshots);
    used to feed scalar laws through the classification machinery."""
    times = np.asarray(times, dtype=float)
    max_h2 = np.asarray(max_h2, dtype=float)
    recs = []
    for t, h2 in zip(times, max_h2):
        tiq = -t * h2 if mode == "Ancient" else (T - t) * h2
        recs.append(DiagnosticsRecord(
            t=float(t), area=math.nan, intH2=math.nan, maxH=math.sqrt(h2),
            minH=math.nan, maxRatio=math.nan, minQ=math.nan, phi=math.nan,
            gaussBonnet=None, tIq=float(tiq)))
    return Trajectory(snapshots=[], diagnostics=recs, mode=mode, T_singular=T)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_diagnostics_csv(records, path) -> None:
    """Exact column order t,area,intH2,maxH,minH,maxRatio,minQ,phi,gaussBonnet,tIq;
    17 significant digits; gaussBonnet empty for n != 2."""
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        row = [_fmt(r.t), _fmt(r.area), _fmt(r.intH2), _fmt(r.maxH), _fmt(r.minH),
               _fmt(r.maxRatio), _fmt(r.minQ), _fmt(r.phi),
               "" if r.gaussBonnet is None else _fmt(r.gaussBonnet), _fmt(r.tIq)]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_diagnostics_csv(path) -> list[DiagnosticsRecord]:
    with open(path) as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected diagnostics header {header!r}")
        records = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            gb = None if parts[8] == "" else float(parts[8])
            vals = [float(p) for p in parts[:8]]
            records.append(DiagnosticsRecord(
                t=vals[0], area=vals[1], intH2=vals[2], maxH=vals[3], minH=vals[4],
                maxRatio=vals[5], minQ=vals[6], phi=vals[7], gaussBonnet=gb,
                tIq=float(parts[9])))
    return records
