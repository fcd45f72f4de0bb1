"""Randomised verification suites for the pointwise curvature estimates.

Each suite draws seeded samples, checks one inequality or identity on every
sample, and reports one row per (dimension, codimension) cell:

    suite, n, k, samples, violations, worstMargin, seed

``worstMargin`` is the minimum over samples of the quantity that the claim
requires to be nonnegative (or positive); a violation is a sample on the
wrong side of the stated tolerance.  Cells whose hypothesis class is empty
(e.g. |h|^2 - |H|^2/(n-1) <= -eps |H|^2 needs eps < 1/(n(n-1))) are skipped.

Samples are drawn in batches through :mod:`mcflow.sampling`; per-cell
generators derive deterministically from the base seed, so a report is
reproducible from its seed column alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import sampling
from .curvature import (
    batch_adapted_split,
    batch_gauss_operator,
    batch_reaction_terms,
    batch_scalars,
)
from .sphere import SphereAmbient, batch_aux_f, batch_term_II

__all__ = ["SuiteRow", "SUITES", "run_suite", "write_report", "REPORT_COLUMNS"]

REPORT_COLUMNS = ("suite", "n", "k", "samples", "violations", "worstMargin", "seed")

_BATCH = 50_000

_SUITE_IDS = {
    "lemma31": 1,
    "operator-pinch": 2,
    "reaction": 3,
    "adapted-r2": 4,
    "sphere-case1": 5,
    "sphere-case2": 6,
    "f-bound": 7,
}


@dataclass(frozen=True)
class SuiteRow:
    suite: str
    n: int
    k: int
    samples: int
    violations: int
    worst_margin: float
    seed: int


def _split(total: int, cells: int) -> list[int]:
    base, extra = divmod(total, cells)
    return [base + (1 if i < extra else 0) for i in range(cells)]


def _batches(count: int):
    while count > 0:
        take = min(count, _BATCH)
        count -= take
        yield take


def _cell_rng(seed: int, suite: str, n: int, k: int) -> np.random.Generator:
    return sampling.generator(seed, _SUITE_IDS[suite], n, k)


# ---------------------------------------------------------------------------
# individual suites
# ---------------------------------------------------------------------------

def suite_lemma31(samples: int, seed: int, n: Optional[int] = None, **_) -> list[SuiteRow]:
    """Two-sided check of the eigenvalue-pair trace identity over all pairs;
    tolerance 1e-10 * (1 + |B|^2)."""
    dims = [n] if n else list(range(2, 9))
    rows = []
    for dim, count in zip(dims, _split(samples, len(dims))):
        rng = _cell_rng(seed, "lemma31", dim, 0)
        worst = math.inf
        bad = 0
        for take in _batches(count):
            a = rng.standard_normal((take, dim, dim))
            b = (a + a.transpose(0, 2, 1)) / 2.0
            kappa = np.linalg.eigvalsh(b)
            tr = kappa.sum(axis=1)
            norm2 = (kappa ** 2).sum(axis=1)
            lhs = norm2 - tr ** 2 / (dim - 1)
            m = tr / (dim - 1)
            s_all = ((kappa - m[:, None]) ** 2).sum(axis=1)
            tol = 1e-10 * (1.0 + norm2)
            for i1 in range(dim):
                for i2 in range(i1 + 1, dim):
                    k1, k2 = kappa[:, i1], kappa[:, i2]
                    rhs = (s_all - (k1 - m) ** 2 - (k2 - m) ** 2
                           + (k1 + k2 - m) ** 2 - 2.0 * k1 * k2)
                    margin = tol - np.abs(lhs - rhs)
                    bad += int((margin < 0).sum())
                    worst = min(worst, float(margin.min()))
        rows.append(SuiteRow("lemma31", dim, 0, count, bad, worst, seed))
    return rows


def suite_operator_pinch(samples: int, seed: int, n: Optional[int] = None,
                         k: Optional[int] = None, eps: Optional[float] = None,
                         **_) -> list[SuiteRow]:
    """min eig of the curvature operator >= (eps/2)|H|^2 - 1e-9 |h|^2 under
    |h|^2 - |H|^2/(n-1) <= -eps |H|^2."""
    dims = [n] if n else list(range(2, 7))
    codims = [k] if k else list(range(1, 5))
    eps_grid = [eps] if eps is not None else [0.01, 0.1]
    cells = [(d, c, e) for d in dims for c in codims for e in eps_grid
             if sampling.pinched_cap(d, 1.0 / (d - 1) - e) > 0]
    rows = []
    for (dim, cod, e), count in zip(cells, _split(samples, len(cells))):
        rng = _cell_rng(seed, "operator-pinch", dim, cod)
        worst = math.inf
        bad = 0
        drawn = 0
        for take in _batches(count):
            h = sampling.pinched_tensors(rng, take, dim, cod, 1.0 / (dim - 1) - e)
            drawn += h.shape[0]
            normH2, normh2, _ = batch_scalars(h)
            min_eig = np.linalg.eigvalsh(batch_gauss_operator(h))[:, 0]
            margin = min_eig - (e / 2.0) * normH2 + 1e-9 * normh2
            bad += int((margin < 0).sum())
            worst = min(worst, float(margin.min()))
        rows.append(SuiteRow(f"operator-pinch[eps={e}]", dim, cod, drawn, bad, worst, seed))
    return rows


def suite_reaction(samples: int, seed: int, n: Optional[int] = None,
                   k: Optional[int] = None, c: Optional[float] = None,
                   **_) -> list[SuiteRow]:
    """R1 - c R2 < 0 under |h|^2 <= c |H|^2; default c = 4/(3n) - 0.01.

    Margin is c R2 - R1, required strictly positive.  Unpinchable c (<= 1/n)
    makes a cell empty and it is skipped; c beyond 4/(3n) is allowed and will
    generally produce violations, which the exit code of the CLI reflects.
    """
    dims = [n] if n else [2, 3, 4]
    codims = [k] if k else list(range(1, 5))
    cells = []
    for d in dims:
        cd = c if c is not None else 4.0 / (3.0 * d) - 0.01
        for cod in codims:
            if sampling.pinched_cap(d, cd) > 0:
                cells.append((d, cod, cd))
    rows = []
    for (dim, cod, cd), count in zip(cells, _split(samples, len(cells))):
        rng = _cell_rng(seed, "reaction", dim, cod)
        worst = math.inf
        bad = 0
        drawn = 0
        for take in _batches(count):
            h = sampling.pinched_tensors(rng, take, dim, cod, cd)
            drawn += h.shape[0]
            r1, r2 = batch_reaction_terms(h)
            margin = cd * r2 - r1
            bad += int((margin <= 0).sum())
            worst = min(worst, float(margin.min()))
        rows.append(SuiteRow("reaction", dim, cod, drawn, bad, worst, seed))
    return rows


def suite_adapted_r2(samples: int, seed: int, n: Optional[int] = None,
                     k: Optional[int] = None, **_) -> list[SuiteRow]:
    """Identity R2 = |h01|^2 |H|^2 + |H|^4 / n to 1e-10 relative."""
    dims = [n] if n else list(range(2, 6))
    codims = [k] if k else list(range(1, 5))
    cells = [(d, c) for d in dims for c in codims]
    rows = []
    for (dim, cod), count in zip(cells, _split(samples, len(cells))):
        rng = _cell_rng(seed, "adapted-r2", dim, cod)
        worst = math.inf
        bad = 0
        for take in _batches(count):
            h = sampling.symmetric_tensors(rng, take, dim, cod)
            normH2, _, _ = batch_scalars(h)
            keep = normH2 > 1e-12
            h, normH2 = h[keep], normH2[keep]
            _, r2 = batch_reaction_terms(h)
            _, h01sq, _ = batch_adapted_split(h)
            diff = np.abs(r2 - (h01sq * normH2 + normH2 ** 2 / dim))
            margin = 1e-10 * np.maximum(1.0, np.abs(r2)) - diff
            bad += int((margin < 0).sum())
            worst = min(worst, float(margin.min()))
        rows.append(SuiteRow("adapted-r2", dim, cod, count, bad, worst, seed))
    return rows


def _sphere_cells(n, k, dims_default, codims_default):
    dims = [n] if n else dims_default
    codims = [k] if k else codims_default
    return [(d, c) for d in dims for c in codims]


def suite_sphere_case1(samples: int, seed: int, n: Optional[int] = None,
                       k: Optional[int] = None, eps: float = 1e-3,
                       delta: Optional[float] = None, r_amb: float = 1.0,
                       **_) -> list[SuiteRow]:
    """II <= -2 theta K f with theta = 2 eps under the case-1 pinching
    (n = 4 uses slack delta = 0.1 by default, n >= 5 uses delta = 0);
    tolerance 1e-10 K."""
    amb = SphereAmbient(r_amb)
    K = amb.K
    theta = 2.0 * eps
    cells = _sphere_cells(n, k, [4, 5], list(range(1, 5)))
    rows = []
    for (dim, cod), count in zip(cells, _split(samples, len(cells))):
        if dim < 4:
            raise ValueError("sphere-case1 is only claimed for n >= 4")
        d = delta if delta is not None else (0.1 if dim == 4 else 0.0)
        if dim == 4:
            cap = lambda H2: H2 / 12.0 + (2.0 - d) * K
        else:
            cap = lambda H2: H2 / (dim * (dim - 1)) + 2.0 * K
        rng = _cell_rng(seed, "sphere-case1", dim, cod)
        worst = math.inf
        bad = 0
        for take in _batches(count):
            h = sampling.sphere_pinched_tensors(rng, take, dim, cod, cap)
            f = batch_aux_f(h, amb, eps)
            ii = batch_term_II(h, amb, eps)
            margin = -2.0 * theta * K * f - ii
            bad += int((margin < -1e-10 * K).sum())
            worst = min(worst, float(margin.min()))
        rows.append(SuiteRow(f"sphere-case1[delta={d}]", dim, cod, count, bad, worst, seed))
    return rows


def suite_sphere_case2(samples: int, seed: int, n: Optional[int] = None,
                       k: Optional[int] = None, r_amb: float = 1.0,
                       **_) -> list[SuiteRow]:
    """II <= -4 n K f with b = 0 under |h|^2 <= (4/(3n)) |H|^2; tol 1e-10 K."""
    amb = SphereAmbient(r_amb)
    K = amb.K
    cells = _sphere_cells(n, k, [2, 3, 4, 5], list(range(1, 5)))
    rows = []
    for (dim, cod), count in zip(cells, _split(samples, len(cells))):
        cap = lambda H2: H2 / (3.0 * dim)
        rng = _cell_rng(seed, "sphere-case2", dim, cod)
        worst = math.inf
        bad = 0
        for take in _batches(count):
            h = sampling.sphere_pinched_tensors(rng, take, dim, cod, cap)
            f = batch_aux_f(h, amb, 1.0)        # eps = 1 makes b = 0
            ii = batch_term_II(h, amb, 1.0)
            margin = -4.0 * dim * K * f - ii
            bad += int((margin < -1e-10 * K).sum())
            worst = min(worst, float(margin.min()))
        rows.append(SuiteRow("sphere-case2", dim, cod, count, bad, worst, seed))
    return rows


def suite_f_bound(samples: int, seed: int, n: Optional[int] = None,
                  k: Optional[int] = None, eps: float = 1e-3,
                  r_amb: float = 1.0, **_) -> list[SuiteRow]:
    """f <= 1 under the n >= 5 pinching |h|^2 - |H|^2/(n-1) <= 2K."""
    amb = SphereAmbient(r_amb)
    K = amb.K
    cells = _sphere_cells(n, k, [5, 6], list(range(1, 5)))
    rows = []
    for (dim, cod), count in zip(cells, _split(samples, len(cells))):
        if dim < 5:
            raise ValueError("f-bound samples use the n >= 5 hypothesis")
        cap = lambda H2: H2 / (dim * (dim - 1)) + 2.0 * K
        rng = _cell_rng(seed, "f-bound", dim, cod)
        worst = math.inf
        bad = 0
        for take in _batches(count):
            h = sampling.sphere_pinched_tensors(rng, take, dim, cod, cap)
            f = batch_aux_f(h, amb, eps)
            margin = 1.0 - f
            bad += int((f > 1.0 + 1e-12).sum())
            worst = min(worst, float(margin.min()))
        rows.append(SuiteRow("f-bound", dim, cod, count, bad, worst, seed))
    return rows


SUITES = {
    "lemma31": suite_lemma31,
    "operator-pinch": suite_operator_pinch,
    "reaction": suite_reaction,
    "adapted-r2": suite_adapted_r2,
    "sphere-case1": suite_sphere_case1,
    "sphere-case2": suite_sphere_case2,
    "f-bound": suite_f_bound,
}


def run_suite(name: str, samples: int, seed: int, **kwargs) -> list[SuiteRow]:
    """Run one named suite (or every suite for name == 'all')."""
    if name == "all":
        rows = []
        for sub in SUITES:
            rows.extend(SUITES[sub](samples, seed, **kwargs))
        return rows
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of "
                       f"{', '.join([*SUITES, 'all'])}")
    return SUITES[name](samples, seed, **kwargs)


def write_report(rows: list[SuiteRow], path) -> None:
    lines = [",".join(REPORT_COLUMNS)]
    for r in rows:
        lines.append(f"{r.suite},{r.n},{r.k},{r.samples},{r.violations},"
                     f"{r.worst_margin:.17g},{r.seed}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
