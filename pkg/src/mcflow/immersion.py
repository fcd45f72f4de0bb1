"""Discrete immersions on structured grids and finite-difference geometry.

An immersion F: M^n -> R^(n+k) is stored as positions on a ParamGrid.  All
extraction is stencil-based: fourth-order central differences for the Jacobian
and Hessian, with the induced metric g = jac^T jac, the normal projector
P = I - jac g^(-1) jac^T, and the ambient-vector-valued second fundamental
form  hvec_ij = P d2F/du_i du_j  (normal projection removes all tangential
terms, so no Christoffel correction is needed for h itself).

Covariant gradients are assembled gauge-free: h is differentiated as an
ambient-vector field and projected, so no smooth normal frame is needed, and
the Christoffel terms use the same second-order metric derivatives that define
them, which makes discrete metric compatibility (nabla g = 0) hold exactly.

Pointwise scalar invariants (|H|^2, |h|^2, ratio, Gauss curvature) never need
a normal frame; frames are only constructed when the frame-adapted tensor
h[i, j, a] itself is requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curvature import PointCurvature
from .errors import DegenerateGeometryError
from .grid import ParamGrid, pad2, stencil_d1, stencil_d2

__all__ = [
    "DiscreteImmersion",
    "mean_curvature_vector",
    "PointGeometry",
    "GeometryFields",
    "geometry_fields",
    "jacobian_metric",
    "normal_frame",
    "normal_frame_field",
    "second_fundamental_form",
    "point_curvature_field",
    "covariant_gradients",
    "covariant_gradient_fields",
    "integrate",
    "gauss_curvature",
    "gauss_curvature_field",
    "save_snapshot",
    "load_snapshot",
    "SNAPSHOT_MAGIC",
]

SNAPSHOT_MAGIC = "MCFLOW v1"

CONDITION_CAP = 1e12


@dataclass
class DiscreteImmersion:
    """Positions of an immersed grid in R^(n+k) at one time.

    ``wrap_offsets`` maps a periodic parameter axis to the constant ambient
    vector gained when wrapping that axis once (flat cylinder factors).
    """

    grid: ParamGrid
    n: int
    k: int
    positions: np.ndarray
    t: float
    wrap_offsets: Optional[dict[int, np.ndarray]] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        expected = tuple(self.grid.res) + (self.n + self.k,)
        if pos.shape != expected:
            raise ValueError(f"positions shape {pos.shape} != grid shape {expected}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions contain non-finite entries")
        if self.grid.ndim != self.n:
            raise ValueError(f"grid dimension {self.grid.ndim} != n = {self.n}")
        if self.wrap_offsets:
            if self.grid.topology == "LatLongSphere" and 0 in self.wrap_offsets:
                raise ValueError("wrap offsets are only meaningful on periodic axes")
            self.wrap_offsets = {
                int(a): np.asarray(v, dtype=float) for a, v in self.wrap_offsets.items()
            }
        self.positions = pos

    @property
    def ambient_dim(self) -> int:
        return self.n + self.k

    def with_positions(self, positions: np.ndarray, t: float) -> "DiscreteImmersion":
        return DiscreteImmersion(grid=self.grid, n=self.n, k=self.k,
                                 positions=positions, t=t,
                                 wrap_offsets=self.wrap_offsets)

    def copy(self) -> "DiscreteImmersion":
        return self.with_positions(self.positions.copy(), self.t)


@dataclass(frozen=True)
class PointGeometry:
    """Full first/second order data at one node."""

    g: np.ndarray          # (n, n) induced metric
    jac: np.ndarray        # (n+k, n)
    normals: np.ndarray    # (n+k, k) orthonormal complement
    h_coord: np.ndarray    # (n, n, k) coordinate-basis second fundamental form
    pc: PointCurvature     # frame-adapted tensor


@dataclass(frozen=True)
class GeometryFields:
    """Vectorised geometry over the whole grid (ambient-valued, frame-free)."""

    jac: np.ndarray        # (*res, n+k, n)
    g: np.ndarray          # (*res, n, n)
    ginv: np.ndarray
    detg: np.ndarray       # (*res,)
    proj: np.ndarray       # (*res, n+k, n+k) normal projector
    hvec: np.ndarray       # (*res, n, n, n+k) ambient-valued SFF
    Hvec: np.ndarray       # (*res, n+k) mean curvature vector
    normH2: np.ndarray     # (*res,)
    normh2: np.ndarray     # (*res,)

    @property
    def normh02(self) -> np.ndarray:
        n = self.g.shape[-1]
        return self.normh2 - self.normH2 / n


def _metric_inverse(g: np.ndarray, n: int):
    """Closed-form inverse, determinant and condition number for n <= 2."""
    if n == 1:
        detg = g[..., 0, 0]
        ginv = 1.0 / detg
        return ginv[..., None, None], detg, np.ones_like(detg)
    if n == 2:
        a, b, c = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
        detg = a * c - b * b
        tr = a + c
        disc = np.sqrt(np.maximum(tr * tr - 4.0 * detg, 0.0))
        lam_max = (tr + disc) / 2.0
        lam_min = (tr - disc) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(lam_min > 0, lam_max / lam_min, np.inf)
        ginv = np.empty_like(g)
        ginv[..., 0, 0] = c
        ginv[..., 1, 1] = a
        ginv[..., 0, 1] = -b
        ginv[..., 1, 0] = -b
        # a degenerate metric is reported through the condition number; the
        # division may legitimately produce inf/nan before the caller raises
        with np.errstate(divide="ignore", invalid="ignore"):
            ginv = ginv / detg[..., None, None]
        return ginv, detg, cond
    raise ValueError("only n <= 2 immersions are meshed")


def _isqrt_metric(g: np.ndarray, detg: np.ndarray, n: int) -> np.ndarray:
    """Inverse principal square root of an SPD metric, closed form for n <= 2."""
    if n == 1:
        return 1.0 / np.sqrt(g)
    s = np.sqrt(detg)
    tr = g[..., 0, 0] + g[..., 1, 1]
    root = (g + s[..., None, None] * np.eye(2)) / np.sqrt(tr + 2.0 * s)[..., None, None]
    out = np.empty_like(root)
    out[..., 0, 0] = root[..., 1, 1]
    out[..., 1, 1] = root[..., 0, 0]
    out[..., 0, 1] = -root[..., 0, 1]
    out[..., 1, 0] = -root[..., 1, 0]
    return out / s[..., None, None]


def geometry_fields(im: DiscreteImmersion) -> GeometryFields:
    """Extract first and second fundamental data over the whole grid."""
    grid, pos, off = im.grid, im.positions, im.wrap_offsets
    nd, amb = im.n, im.ambient_dim

    pads = [pad2(grid, pos, a, positions=True, wrap_offsets=off) for a in range(nd)]
    jac = np.stack(
        [stencil_d1(grid, pos, a, order=4, padded=pads[a]) for a in range(nd)],
        axis=-1,
    )
    g = np.swapaxes(jac, -1, -2) @ jac
    ginv, detg, cond = _metric_inverse(g, nd)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > CONDITION_CAP:
        raise DegenerateGeometryError(
            f"metric condition number {worst:.3e} exceeds {CONDITION_CAP:.0e}"
        )

    proj = np.eye(amb) - (jac @ ginv) @ np.swapaxes(jac, -1, -2)

    d2 = {}
    for a in range(nd):
        d2[(a, a)] = stencil_d2(grid, pos, a, padded=pads[a])
        for b in range(a + 1, nd):
            inner = stencil_d1(grid, pos, b, order=4, padded=pads[b])
            d2[(a, b)] = stencil_d1(grid, inner, a, order=4)

    hvec = np.empty(grid.res + (nd, nd, amb))
    for a in range(nd):
        for b in range(a, nd):
            proj_d2 = np.einsum("...xy,...y->...x", proj, d2[(a, b)])
            hvec[..., a, b, :] = proj_d2
            if b != a:
                hvec[..., b, a, :] = proj_d2

    # raise the first index: U^a_{jx} = g^{ai} hvec_{ijx}; the trace over (a, j)
    # is the mean curvature vector and U contracted against itself transposed
    # gives |h|^2 (both indices raised, symmetry of hvec).
    up = (ginv @ hvec.reshape(grid.res + (nd, nd * amb))).reshape(hvec.shape)
    Hvec = np.trace(up, axis1=-3, axis2=-2)
    normH2 = np.einsum("...x,...x->...", Hvec, Hvec)
    normh2 = np.sum(up * np.swapaxes(up, -3, -2), axis=(-3, -2, -1))
    return GeometryFields(jac=jac, g=g, ginv=ginv, detg=detg, proj=proj,
                          hvec=hvec, Hvec=Hvec, normH2=normH2, normh2=normh2)


def mean_curvature_vector(im: DiscreteImmersion) -> np.ndarray:
    """The flow velocity field only: H = P (g^{ij} d2F/du_i du_j).

    Projecting after the trace skips the full second-fundamental-form tensor;
    this is the hot path of time stepping.
    """
    grid, pos, off = im.grid, im.positions, im.wrap_offsets
    nd = im.n
    pads = [pad2(grid, pos, a, positions=True, wrap_offsets=off) for a in range(nd)]
    jac = np.stack(
        [stencil_d1(grid, pos, a, order=4, padded=pads[a]) for a in range(nd)],
        axis=-1,
    )
    g = np.swapaxes(jac, -1, -2) @ jac
    ginv, _, cond = _metric_inverse(g, nd)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > CONDITION_CAP:
        raise DegenerateGeometryError(
            f"metric condition number {worst:.3e} exceeds {CONDITION_CAP:.0e}"
        )
    if nd == 1:
        tr = ginv[..., 0, 0, None] * stencil_d2(grid, pos, 0, padded=pads[0])
    else:
        d00 = stencil_d2(grid, pos, 0, padded=pads[0])
        d11 = stencil_d2(grid, pos, 1, padded=pads[1])
        inner = stencil_d1(grid, pos, 1, order=4, padded=pads[1])
        d01 = stencil_d1(grid, inner, 0, order=4)
        tr = (ginv[..., 0, 0, None] * d00 + 2.0 * ginv[..., 0, 1, None] * d01
              + ginv[..., 1, 1, None] * d11)
    w = np.einsum("...xi,...x->...i", jac, tr)
    u = np.einsum("...ij,...j->...i", ginv, w)
    return tr - np.einsum("...xi,...i->...x", jac, u)


# ---------------------------------------------------------------------------
# normal frames
# ---------------------------------------------------------------------------

def normal_frame(jac: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the normal space, deterministic convention.

    Columns come from a complete orthogonal factorisation of the Jacobian,
    sign-fixed so each normal's largest-magnitude component is positive.
    """
    jac = np.asarray(jac, dtype=float)
    amb, n = jac.shape
    q, r = np.linalg.qr(jac, mode="complete")
    diag = np.abs(np.diagonal(r[:n, :n]))
    if np.any(diag < 1e-13 * max(1.0, np.abs(jac).max())):
        raise DegenerateGeometryError("rank-deficient Jacobian")
    normals = q[:, n:].copy()
    for c in range(normals.shape[1]):
        i = int(np.argmax(np.abs(normals[:, c])))
        if normals[i, c] < 0:
            normals[:, c] = -normals[:, c]
    return normals


def _serpentine(res: tuple[int, ...]):
    if len(res) == 1:
        for i in range(res[0]):
            yield (i,)
        return
    for i in range(res[0]):
        cols = range(res[1]) if i % 2 == 0 else range(res[1] - 1, -1, -1)
        for j in cols:
            yield (i, j)


def normal_frame_field(im: DiscreteImmersion, gf: GeometryFields | None = None,
                       align: bool = True) -> np.ndarray:
    """Normal frames at every node, shape (*res, n+k, k).

    With ``align`` the frames are swept in a fixed serpentine node order and
    each is rotated onto its predecessor by the orthogonal Procrustes
    solution, which makes the field continuous wherever the raw factorisation
    jumps.  The sweep is sequential by construction, so the result does not
    depend on any parallelism in the surrounding code.
    """
    if gf is None:
        gf = geometry_fields(im)
    amb, n, k = im.ambient_dim, im.n, im.k
    q, r = np.linalg.qr(gf.jac, mode="complete")
    diag = np.abs(np.diagonal(r[..., :n, :n], axis1=-2, axis2=-1))
    if np.any(diag < 1e-13 * max(1.0, np.abs(gf.jac).max())):
        raise DegenerateGeometryError("rank-deficient Jacobian in frame extraction")
    frames = q[..., n:].copy()

    idx = np.argmax(np.abs(frames), axis=-2)
    picked = np.take_along_axis(frames, idx[..., None, :], axis=-2)[..., 0, :]
    sign = np.where(picked < 0, -1.0, 1.0)
    frames *= sign[..., None, :]

    if align and k >= 1:
        order = list(_serpentine(im.grid.res))
        prev = order[0]
        for node in order[1:]:
            m = frames[node].T @ frames[prev]
            u, _, vt = np.linalg.svd(m)
            frames[node] = frames[node] @ (u @ vt)
            prev = node
    return frames


def point_curvature_field(im: DiscreteImmersion, gf: GeometryFields | None = None,
                          align: bool = True):
    """Frame-adapted h[i, j, a] at every node plus the frames used."""
    if gf is None:
        gf = geometry_fields(im)
    frames = normal_frame_field(im, gf, align=align)
    isq = _isqrt_metric(gf.g, gf.detg, im.n)
    hadapt = np.einsum("...ip,...jq,...pqx,...xa->...ija", isq, isq, gf.hvec, frames)
    return hadapt, frames


# ---------------------------------------------------------------------------
# pointwise API
# ---------------------------------------------------------------------------

def jacobian_metric(im: DiscreteImmersion, node) -> tuple[np.ndarray, np.ndarray]:
    """(Jacobian, induced metric) at one node."""
    gf = geometry_fields(im)
    node = tuple(node)
    return gf.jac[node], gf.g[node]


def second_fundamental_form(im: DiscreteImmersion, node) -> PointGeometry:
    """Full pointwise geometry at one node, including the frame-adapted tensor."""
    gf = geometry_fields(im)
    node = tuple(node)
    nor = normal_frame(gf.jac[node])
    h_coord = np.einsum("ijx,xa->ija", gf.hvec[node], nor)
    isq = _isqrt_metric(gf.g[node][None], gf.detg[node][None], im.n)[0]
    h_frame = np.einsum("ip,jq,pqa->ija", isq, isq, h_coord)
    return PointGeometry(g=gf.g[node], jac=gf.jac[node], normals=nor,
                         h_coord=h_coord, pc=PointCurvature(h_frame))


_THETA_SIGNS = np.array([-1.0, 1.0])


def covariant_gradient_fields(im: DiscreteImmersion,
                              gf: GeometryFields | None = None):
    """(|grad h|^2, |grad H|^2) at every node.

    The tensor being differentiated is ambient-valued, with its normal
    projection taken at the centre node, so no smooth normal frame enters.
    Fourth-order stencils are used for the metric derivatives feeding the
    Christoffel symbols as well: near the poles of a lat-long grid the
    inverse-metric contractions amplify component errors by 1/sin^2(theta)
    per longitude index, and second-order assembly loses two full orders of
    the result there.
    """
    if gf is None:
        gf = geometry_fields(im)
    grid, nd = im.grid, im.n

    if grid.topology == "LatLongSphere":
        sig = _THETA_SIGNS
        sign_g = sig[:, None] * sig[None, :]
        sign_h = sign_g[:, :, None]
    else:
        sign_g = None
        sign_h = None

    dg = np.stack(
        [stencil_d1(grid, gf.g, a, order=4, theta_sign=sign_g) for a in range(nd)],
        axis=-3,
    )
    # Gamma^l_{di} = 1/2 g^{lm} (d_d g_{mi} + d_i g_{md} - d_m g_{di})
    comb = dg + np.swapaxes(dg, -3, -1) - np.moveaxis(dg, -2, -3)
    gamma = 0.5 * np.einsum("...lm,...dmi->...dli", gf.ginv, comb)

    dh = np.stack(
        [stencil_d1(grid, gf.hvec, a, order=4, theta_sign=sign_h) for a in range(nd)],
        axis=-4,
    )
    nab_h = (np.einsum("...xy,...dijy->...dijx", gf.proj, dh)
             - np.einsum("...dli,...ljx->...dijx", gamma, gf.hvec)
             - np.einsum("...dlj,...ilx->...dijx", gamma, gf.hvec))
    gradh2 = np.einsum("...da,...ib,...jc,...dijx,...abcx->...",
                       gf.ginv, gf.ginv, gf.ginv, nab_h, nab_h)

    dH = np.stack(
        [stencil_d1(grid, gf.Hvec, a, order=4) for a in range(nd)],
        axis=-2,
    )
    nab_H = np.einsum("...xy,...dy->...dx", gf.proj, dH)
    gradH2 = np.einsum("...da,...dx,...ax->...", gf.ginv, nab_H, nab_H)
    return gradh2, gradH2


def covariant_gradients(im: DiscreteImmersion, node) -> tuple[float, float]:
    """(|grad h|^2, |grad H|^2) at one node."""
    gradh2, gradH2 = covariant_gradient_fields(im)
    node = tuple(node)
    return float(gradh2[node]), float(gradH2[node])


def integrate(im: DiscreteImmersion, field_values, gf: GeometryFields | None = None) -> float:
    """Integral of a nodal scalar field against the induced area measure."""
    if gf is None:
        gf = geometry_fields(im)
    field_values = np.asarray(field_values, dtype=float)
    if field_values.shape != tuple(im.grid.res):
        raise ValueError("field shape does not match the grid")
    return float(np.sum(field_values * np.sqrt(gf.detg)) * im.grid.cell_volume())


def gauss_curvature_field(im: DiscreteImmersion, gf: GeometryFields | None = None) -> np.ndarray:
    """Gauss curvature of a surface (n = 2): half the flat-ambient scalar curvature."""
    if im.n != 2:
        raise ValueError("Gauss curvature requires n = 2")
    if gf is None:
        gf = geometry_fields(im)
    return (gf.normH2 - gf.normh2) / 2.0


def gauss_curvature(im: DiscreteImmersion, node) -> float:
    return float(gauss_curvature_field(im)[tuple(node)])


# ---------------------------------------------------------------------------
# snapshot files
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_snapshot(im: DiscreteImmersion, path) -> None:
    """Write the line-oriented snapshot format.

    Header: ``MCFLOW v1 n=<n> k=<k> topology=<name> res=<r1>x<r2> t=<float>``;
    a one-direction grid writes ``res=<r1>x1``.  Nonzero wrap offsets append
    optional ``wrap<axis>=<c0>,<c1>,...`` tokens.  Then one node per line in
    row-major order, n+k coordinates at 17 significant digits.
    """
    res = im.grid.res
    r1 = res[0]
    r2 = res[1] if len(res) > 1 else 1
    header = (f"{SNAPSHOT_MAGIC} n={im.n} k={im.k} topology={im.grid.topology} "
              f"res={r1}x{r2} t={_fmt(im.t)}")
    if im.wrap_offsets:
        for axis in sorted(im.wrap_offsets):
            vec = ",".join(_fmt(c) for c in im.wrap_offsets[axis])
            header += f" wrap{axis}={vec}"
    flat = im.positions.reshape(-1, im.ambient_dim)
    lines = [header]
    lines.extend(" ".join(_fmt(c) for c in row) for row in flat)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_snapshot(path) -> DiscreteImmersion:
    """Read a snapshot file written by :func:`save_snapshot`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith(SNAPSHOT_MAGIC):
            raise ValueError(f"{path}: not a {SNAPSHOT_MAGIC} snapshot")
        fields = {}
        wraps = {}
        try:
            for token in header[len(SNAPSHOT_MAGIC):].split():
                key, _, value = token.partition("=")
                if key.startswith("wrap"):
                    wraps[int(key[4:])] = np.array([float(c) for c in value.split(",")])
                else:
                    fields[key] = value
            n, k = int(fields["n"]), int(fields["k"])
            topology = fields["topology"]
            r1, r2 = (int(r) for r in fields["res"].split("x"))
            t = float(fields["t"])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}: malformed snapshot header {header!r}") from exc
        res = (r1,) if topology == "Circle" else (r1, r2)
        grid = ParamGrid(topology=topology, res=res)
        data = np.loadtxt(fh, ndmin=2)
    expected = (grid.node_count(), n + k)
    if data.shape != expected:
        raise ValueError(f"{path}: node block shape {data.shape} != {expected}")
    positions = data.reshape(grid.res + (n + k,))
    return DiscreteImmersion(grid=grid, n=n, k=k, positions=positions, t=t,
                             wrap_offsets=wraps or None)
