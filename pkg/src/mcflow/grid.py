"""Structured parameter grids and stencil gathers for closed topologies.

Three topologies are supported, all without boundary so every node has a full
stencil:

* Circle        — one periodic direction (n = 1 immersions).
* Torus2        — two periodic directions.  A direction may carry a constant
                  ambient "wrap offset": positions then satisfy
                  F(u + period) = F(u) + offset, which realises flat cylinder
                  factors on a periodic patch.  Derived fields (metric, second
                  fundamental form, ...) are strictly periodic, so the offset
                  only enters gathers of raw positions.
* LatLongSphere — latitude rows offset half a step from the poles, periodic
                  longitude.  Gathers past a pole reflect to the antipodal
                  longitude (theta -> -theta equals phi -> phi + pi on the
                  sphere), which keeps every stencil uniform.  Components of
                  tensors with theta indices flip sign under that reflection;
                  gathers take an optional sign array for this.

With the half-step latitude offset the node set is a uniform grid on the
double cover, so sums of smooth fields against sqrt(det g) are trapezoidal
rules on a torus: integration is spectrally accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ParamGrid", "pad2", "shift_positions", "stencil_d1", "stencil_d2"]

TOPOLOGIES = ("Circle", "Torus2", "LatLongSphere")

MIN_RESOLUTION = 8


@dataclass(frozen=True)
class ParamGrid:
    """Parameter grid: topology tag plus per-direction point counts."""

    topology: str
    res: tuple[int, ...]

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")
        res = tuple(int(r) for r in self.res)
        object.__setattr__(self, "res", res)
        expected = 1 if self.topology == "Circle" else 2
        if len(res) != expected:
            raise ValueError(f"{self.topology} needs {expected} resolution(s), got {res}")
        if any(r < MIN_RESOLUTION for r in res):
            raise ValueError(f"resolutions must be >= {MIN_RESOLUTION}, got {res}")
        if self.topology == "LatLongSphere" and res[1] % 2 != 0:
            raise ValueError("LatLongSphere longitude count must be even (pole reflection)")

    @property
    def ndim(self) -> int:
        return len(self.res)

    @property
    def spacing(self) -> tuple[float, ...]:
        """Parameter step per direction, in radians."""
        if self.topology == "LatLongSphere":
            return (math.pi / self.res[0], 2.0 * math.pi / self.res[1])
        return tuple(2.0 * math.pi / r for r in self.res)

    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def node_count(self) -> int:
        return int(np.prod(self.res))

    def theta_values(self) -> np.ndarray:
        """Latitude angles of the rows (LatLongSphere only)."""
        if self.topology != "LatLongSphere":
            raise ValueError("theta_values only applies to LatLongSphere grids")
        return (np.arange(self.res[0]) + 0.5) * self.spacing[0]


def _shift_periodic(field: np.ndarray, axis: int, s: int,
                    wrap_offset: np.ndarray | None) -> np.ndarray:
    out = np.roll(field, -s, axis=axis)
    if wrap_offset is not None and s != 0:
        out = out.copy()
        npts = field.shape[axis]
        sl = [slice(None)] * field.ndim
        if s > 0:
            sl[axis] = slice(npts - s, None)
            out[tuple(sl)] += wrap_offset
        else:
            sl[axis] = slice(None, -s)
            out[tuple(sl)] -= wrap_offset
    return out


def _shift_polar(field: np.ndarray, s: int, nlon: int, theta_sign) -> np.ndarray:
    """Latitude shift with reflection across the poles.

    field has shape (n_theta, n_phi, ...); rows pushed past a pole come back
    from the same side with the longitude rolled by half a period, multiplied
    by theta_sign (broadcast over trailing dims) when given.
    """
    n0 = field.shape[0]
    idx = np.arange(n0) + s
    refl = (idx < 0) | (idx >= n0)
    src = idx.copy()
    src[idx < 0] = -1 - idx[idx < 0]
    src[idx >= n0] = 2 * n0 - 1 - idx[idx >= n0]
    out = field[src]
    if refl.any():
        out = out.copy()
        reflected = np.roll(field[src[refl]], -(nlon // 2), axis=1)
        if theta_sign is not None:
            reflected = reflected * theta_sign
        out[refl] = reflected
    return out


def shift_positions(grid: ParamGrid, positions: np.ndarray, axis: int, s: int,
                    wrap_offsets: dict[int, np.ndarray] | None = None) -> np.ndarray:
    """Gather raw positions, honouring ambient wrap offsets on periodic axes."""
    if s == 0:
        return positions
    if grid.topology == "LatLongSphere" and axis == 0:
        return _shift_polar(positions, s, grid.res[1], None)
    offset = None if not wrap_offsets else wrap_offsets.get(axis)
    return _shift_periodic(positions, axis, s, offset)


def _reflect_row(row: np.ndarray, nlon: int, theta_sign) -> np.ndarray:
    out = np.roll(row, -(nlon // 2), axis=0)
    if theta_sign is not None:
        out = out * theta_sign
    return out


def pad2(grid: ParamGrid, field: np.ndarray, axis: int, theta_sign=None,
         positions: bool = False, wrap_offsets=None) -> np.ndarray:
    """Field extended by two ghost layers on both sides of one axis.

    All stencils slice this array, which costs a single copy of the field per
    (field, axis) pair instead of one per stencil offset.
    """
    work = field if axis == 0 else np.swapaxes(field, 0, axis)
    npts = work.shape[0]
    out = np.empty((npts + 4,) + work.shape[1:], dtype=field.dtype)
    out[2:-2] = work
    if grid.topology == "LatLongSphere" and axis == 0:
        nlon = grid.res[1]
        sign = None if positions else theta_sign
        out[1] = _reflect_row(work[0], nlon, sign)
        out[0] = _reflect_row(work[1], nlon, sign)
        out[-2] = _reflect_row(work[-1], nlon, sign)
        out[-1] = _reflect_row(work[-2], nlon, sign)
    else:
        offset = wrap_offsets.get(axis) if (positions and wrap_offsets) else None
        out[:2] = work[-2:]
        out[-2:] = work[:2]
        if offset is not None:
            out[:2] -= offset
            out[-2:] += offset
    return out if axis == 0 else np.swapaxes(out, 0, axis)


def _slice_axis(padded: np.ndarray, axis: int, lo: int, hi) -> np.ndarray:
    sl = [slice(None)] * padded.ndim
    sl[axis] = slice(lo, hi)
    return padded[tuple(sl)]


def stencil_d1(grid: ParamGrid, field: np.ndarray, axis: int, *, order: int = 4,
               theta_sign=None, positions: bool = False,
               wrap_offsets=None, padded: np.ndarray | None = None) -> np.ndarray:
    """Central first derivative along a parameter axis."""
    d = grid.spacing[axis]
    p = padded if padded is not None else pad2(
        grid, field, axis, theta_sign, positions, wrap_offsets)
    s = lambda lo, hi: _slice_axis(p, axis, lo, hi)
    if order == 4:
        acc = s(0, -4) - 8.0 * s(1, -3) + 8.0 * s(3, -1) - s(4, None)
        return acc / (12.0 * d)
    if order == 2:
        return (s(3, -1) - s(1, -3)) / (2.0 * d)
    raise ValueError("order must be 2 or 4")


def stencil_d2(grid: ParamGrid, field: np.ndarray, axis: int, *,
               theta_sign=None, positions: bool = False,
               wrap_offsets=None, padded: np.ndarray | None = None) -> np.ndarray:
    """Fourth-order pure second derivative along a parameter axis."""
    d = grid.spacing[axis]
    p = padded if padded is not None else pad2(
        grid, field, axis, theta_sign, positions, wrap_offsets)
    s = lambda lo, hi: _slice_axis(p, axis, lo, hi)
    acc = (-s(0, -4) + 16.0 * s(1, -3) - 30.0 * s(2, -2)
           + 16.0 * s(3, -1) - s(4, None))
    return acc / (12.0 * d ** 2)
