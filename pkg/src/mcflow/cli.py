"""Command-line entry points: simulate, verify, report.

Exit codes: 0 success, 1 property violations, 2 blow-up cap stop,
3 geometry degeneracy, 64 usage error, 65 data error.

Every run writes a JSON manifest (atomically, last) recording the command
line, the resolved configuration, RNG seeds, the package version, wall-clock
duration and the list of output files; re-running with the same inputs
reproduces all numeric outputs byte-for-byte.  ``--threads`` caps the worker
count of the internal map-reduce (the numpy kernels are executed in a fixed
order regardless, so results never depend on it) and falls back to the
MCF_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import DegenerateGeometryError
from .flow import (
    FlowConfig,
    Trajectory,
    blowup_type2,
    classify_type,
    fit_area_decay,
    read_diagnostics_csv,
    rescale_type1,
    run,
    write_diagnostics_csv,
)
from .grid import ParamGrid
from .immersion import geometry_fields, load_snapshot, save_snapshot
from .solutions import SolutionSpec, seed_immersion
from .verify import SUITES, run_suite, write_report

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_BLOWUP = 2
EXIT_DEGENERATE = 3
EXIT_USAGE = 64
EXIT_DATA = 65


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except Exception:
        raise _UsageError(f"bad --grid value {text!r}; expected WxH") from None


def _parse_perturb(text: str) -> tuple[float, int]:
    try:
        amp, mode = text.split(":")
        return float(amp), int(mode)
    except Exception:
        raise _UsageError(f"bad --perturb value {text!r}; expected amp:mode") from None


def _parse_window(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except Exception:
        raise _UsageError(f"bad window {text!r}; expected lo:hi") from None


def _load_config_file(path) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise _UsageError(f"cannot read config file {path}: {exc}") from None
    return values


def _resolve(args, key: str, default, cast):
    """Precedence: explicit flag > config file > default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    cfg = getattr(args, "_config_values", {})
    if key in cfg:
        return cast(cfg[key])
    return default


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get("MCF_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return os.cpu_count() or 1


def _write_manifest(out_dir: str, payload: dict) -> None:
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _add_simulate(sub):
    p = sub.add_parser("simulate", help="flow a seed surface and record diagnostics")
    p.add_argument("--spec", choices=("sphere", "cylinder", "veronese", "torus"))
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--grid", type=str)
    p.add_argument("--perturb", type=str)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--t0", type=float)
    p.add_argument("--mode", choices=("forward", "ancient"))
    p.add_argument("--cfl", type=float)
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--blowup-cap", dest="blowup_cap", type=float)
    p.add_argument("--out", type=str)
    p.add_argument("--threads", type=int)
    p.add_argument("--config", type=str)


def _build_seed(args):
    spec_name = _resolve(args, "spec", None, str)
    if spec_name is None:
        raise _UsageError("--spec is required")
    n = _resolve(args, "n", 2, int)
    k = _resolve(args, "k", None, int)
    radius = _resolve(args, "radius", 1.0, float)
    grid_txt = _resolve(args, "grid", "64x128", str)
    if isinstance(grid_txt, str):
        g1, g2 = _parse_grid(grid_txt)
    else:
        g1, g2 = grid_txt
    amp, mode_no = 0.0, 2
    perturb = _resolve(args, "perturb", None, str)
    if perturb:
        amp, mode_no = _parse_perturb(perturb)

    kind = {"sphere": "Sphere", "cylinder": "Cylinder",
            "veronese": "Veronese", "torus": "TorusSeed"}[spec_name]
    if kind == "Veronese":
        n, k = 2, 3
    if k is None:
        k = {"Sphere": 1, "Cylinder": 1, "TorusSeed": 2}.get(kind, 1)
    if kind in ("Sphere", "Veronese"):
        topology = "Circle" if n == 1 else "LatLongSphere"
    else:
        topology = "Torus2"
    grid = ParamGrid(topology=topology, res=(g1,) if topology == "Circle" else (g1, g2))
    sol = SolutionSpec(kind=kind, n=n, k=k, radius=radius,
                       perturb_amp=amp, perturb_mode=mode_no)
    t0 = _resolve(args, "t0", 0.0, float)
    return sol, grid, t0


def cmd_simulate(args) -> int:
    try:
        sol, grid, t0 = _build_seed(args)
        t_end = _resolve(args, "t_end", None, float)
        if t_end is None:
            raise _UsageError("--t-end is required")
        out_dir = _resolve(args, "out", None, str)
        if not out_dir:
            raise _UsageError("--out is required")
        mode = {"forward": "Forward", "ancient": "Ancient"}[
            _resolve(args, "mode", "forward", str)]
        config = FlowConfig(
            t_end=t_end,
            cfl=_resolve(args, "cfl", 0.2, float),
            snapshot_every=_resolve(args, "snapshot_every", 25, int),
            max_steps=_resolve(args, "max_steps", 1_000_000, int),
            stop_on_blowup=_resolve(args, "blowup_cap", 1e6, float),
        )
        seed_im = seed_immersion(sol, grid, t0)
    except (_UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    started = time.time()
    os.makedirs(out_dir, exist_ok=True)
    try:
        traj = run(seed_im, config, mode=mode)
    except DegenerateGeometryError as exc:
        print(f"degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE

    outputs = []
    for i, snap in enumerate(traj.snapshots):
        name = f"snap_{i:06d}.txt"
        save_snapshot(snap, os.path.join(out_dir, name))
        outputs.append(name)
    write_diagnostics_csv(traj.diagnostics, os.path.join(out_dir, "diagnostics.csv"))
    outputs.append("diagnostics.csv")

    _write_manifest(out_dir, {
        "command": "simulate",
        "argv": list(getattr(args, "_argv", [])),
        "version": __version__,
        "config": {
            "spec": sol.kind, "n": sol.n, "k": sol.k, "radius": sol.radius,
            "grid": "x".join(str(r) for r in grid.res),
            "topology": grid.topology,
            "perturb_amp": sol.perturb_amp, "perturb_mode": sol.perturb_mode,
            "t0": t0, "t_end": config.t_end, "cfl": config.cfl,
            "snapshot_every": config.snapshot_every,
            "max_steps": config.max_steps, "blowup_cap": config.stop_on_blowup,
            "integrator": config.integrator, "threads": _threads(args),
        },
        "seeds": {},
        "mode": mode,
        "T_singular": traj.T_singular,
        "stop_reason": traj.stop_reason,
        "duration_s": time.time() - started,
        "outputs": outputs,
    })
    print(f"{traj.stop_reason}: {len(traj.snapshots)} snapshots, "
          f"t in [{traj.snapshots[0].t:.6g}, {traj.snapshots[-1].t:.6g}]")
    if traj.stop_reason == "blowup":
        return EXIT_BLOWUP
    if traj.stop_reason == "degenerate":
        return EXIT_DEGENERATE
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _add_verify(sub):
    p = sub.add_parser("verify", help="run a randomised property suite")
    p.add_argument("--suite", choices=tuple(SUITES) + ("all",))
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--r-amb", dest="r_amb", type=float)
    p.add_argument("--out", type=str)
    p.add_argument("--threads", type=int)
    p.add_argument("--config", type=str)


def cmd_verify(args) -> int:
    suite = _resolve(args, "suite", None, str)
    if suite is None:
        print("usage error: --suite is required", file=sys.stderr)
        return EXIT_USAGE
    samples = _resolve(args, "samples", 10_000, int)
    seed = _resolve(args, "seed", 42, int)
    out = _resolve(args, "out", "fuzz_report.csv", str)
    kwargs = {}
    for key in ("n", "k", "c", "eps", "delta", "r_amb"):
        val = getattr(args, key, None)
        if val is not None:
            kwargs[key] = val
    started = time.time()
    try:
        rows = run_suite(suite, samples, seed, **kwargs)
    except (KeyError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_report(rows, out)
    total_bad = sum(r.violations for r in rows)
    print(f"suite={suite} seed={seed} samples={sum(r.samples for r in rows)} "
          f"violations={total_bad} elapsed={time.time() - started:.1f}s")
    for r in rows:
        print(f"  {r.suite} n={r.n} k={r.k}: {r.violations} violations, "
              f"worst margin {r.worst_margin:.3e}")
    return EXIT_OK if total_bad == 0 else EXIT_VIOLATIONS


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _add_report(sub):
    p = sub.add_parser("report", help="post-process a simulation directory")
    p.add_argument("--in", dest="in_dir", type=str)
    p.add_argument("--rescale", choices=("type1", "type2"))
    p.add_argument("--classify", action="store_true", default=None)
    p.add_argument("--fit-area-decay", dest="fit_area", action="store_true", default=None)
    p.add_argument("--tj", type=float)
    p.add_argument("--n-tau", dest="n_tau", type=int)
    p.add_argument("--fit-window", dest="fit_window", type=str)
    p.add_argument("--threads", type=int)
    p.add_argument("--config", type=str)


def _load_trajectory(in_dir: str) -> Trajectory:
    manifest_path = os.path.join(in_dir, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        records = read_diagnostics_csv(os.path.join(in_dir, "diagnostics.csv"))
        snaps = sorted(f for f in os.listdir(in_dir)
                       if f.startswith("snap_") and f.endswith(".txt"))
        snapshots = [load_snapshot(os.path.join(in_dir, f)) for f in snaps]
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise IOError(f"cannot load trajectory from {in_dir}: {exc}") from exc
    if not snapshots:
        raise IOError(f"no snapshots in {in_dir}")
    return Trajectory(snapshots=snapshots, diagnostics=records,
                      mode=manifest.get("mode", "Forward"),
                      T_singular=manifest.get("T_singular"),
                      stop_reason=manifest.get("stop_reason", "t_end"))


def _rescaled_summary(result, path):
    lines = ["tau,maxH,maxRatio"]
    for snap in result.trajectory.snapshots:
        gf = geometry_fields(snap)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(gf.normH2 > 0, gf.normh2 / gf.normH2, np.inf)
        lines.append(f"{snap.t:.17g},{math.sqrt(gf.normH2.max()):.17g},"
                     f"{ratio.max():.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_report(args) -> int:
    in_dir = _resolve(args, "in_dir", None, str)
    if not in_dir:
        print("usage error: --in is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        traj = _load_trajectory(in_dir)
    except IOError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    if getattr(args, "classify", None):
        try:
            res = classify_type(traj)
        except ValueError as exc:
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        with open(os.path.join(in_dir, "classify.csv"), "w") as fh:
            fh.write("kind,C,C2,supTIq,trend\n")
            fh.write(f"{res.kind},{res.C:.17g},{res.C ** 2:.17g},"
                     f"{res.sup_tIq:.17g},{res.trend:.17g}\n")
        print(f"{res.kind} C2={res.C ** 2:.6g} trend={res.trend:.4f}")

    if getattr(args, "fit_area", None):
        window = None
        if getattr(args, "fit_window", None):
            window = _parse_window(args.fit_window)
        try:
            c_fit, r_fit = fit_area_decay(traj, window)
        except ValueError as exc:
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        with open(os.path.join(in_dir, "area_fit.csv"), "w") as fh:
            fh.write("c,r,mode\n")
            fh.write(f"{c_fit:.17g},{r_fit:.17g},{traj.mode}\n")
        print(f"area ~ c|t|^r fit: c={c_fit:.6g} r={r_fit:.4f}")

    rescale = getattr(args, "rescale", None)
    if rescale:
        try:
            if rescale == "type2":
                result = blowup_type2(traj)
            else:
                tj = getattr(args, "tj", None)
                if tj is None:
                    times = traj.times
                    tj = float(times[0] / 2.0) if traj.mode == "Ancient" else None
                    if tj is None or tj >= 0:
                        raise ValueError("--tj is required for type1 on this trajectory")
                result = rescale_type1(traj, tj, n_tau=getattr(args, "n_tau", None) or 11)
        except (ValueError, DegenerateGeometryError) as exc:
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        sub = os.path.join(in_dir, f"rescale_{rescale}")
        os.makedirs(sub, exist_ok=True)
        for i, snap in enumerate(result.trajectory.snapshots):
            save_snapshot(snap, os.path.join(sub, f"snap_{i:06d}.txt"))
        _rescaled_summary(result, os.path.join(sub, "summary.csv"))
        print(f"{rescale}: L={result.L:.6g} base_time={result.base_time:.6g} "
              f"-> {sub}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="mcflow", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    _add_simulate(sub)
    _add_verify(sub)
    _add_report(sub)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args._argv = argv
    if getattr(args, "config", None):
        try:
            args._config_values = _load_config_file(args.config)
        except _UsageError as exc:
            print(f"usage error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        args._config_values = {}
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "report":
        return cmd_report(args)
    parser.print_usage(sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
