"""Binary CRF over the pixel grid, minimized exactly by max-flow/min-cut.

The energy is a sum of per-pixel two-label costs and Potts pairwise terms
charged once per unordered 4-neighbor edge whose endpoints disagree. Such an
energy is submodular, so a single min cut on the standard two-terminal graph
gives the global minimizer: per-pixel terminal capacities carry the unary
margin after subtracting the per-pixel minimum (a constant offset), and each
grid edge becomes an undirected arc pair of capacity V(p, q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _maxflow
from .priors import UnaryField


@dataclass(frozen=True)
class PairwiseField:
    """Capacities on the 4-neighbor grid edges.

    right[r, c] joins pixels (r, c) and (r, c+1); down[r, c] joins (r, c) and
    (r+1, c). One value per unordered edge keeps the field symmetric by
    construction.
    """

    right: np.ndarray
    down: np.ndarray

    def __post_init__(self):
        r, d = self.right, self.down
        if r.ndim != 2 or d.ndim != 2:
            raise ValueError("edge fields must be 2-d arrays")
        h = r.shape[0]
        w = d.shape[1]
        if r.shape != (h, w - 1) or d.shape != (h - 1, w):
            raise ValueError(
                f"inconsistent edge field shapes {r.shape} and {d.shape}")
        for name, x in (("right", r), ("down", d)):
            if not np.all(np.isfinite(x)):
                raise ValueError(f"{name} capacities must be finite")
            if (x < 0).any():
                raise ValueError(f"{name} capacities must be non-negative")

    @property
    def height(self) -> int:
        return self.right.shape[0]

    @property
    def width(self) -> int:
        return self.down.shape[1]

    @staticmethod
    def zeros(width: int, height: int) -> "PairwiseField":
        return PairwiseField(right=np.zeros((height, width - 1)),
                             down=np.zeros((height - 1, width)))


@dataclass(frozen=True)
class CostField:
    unary: UnaryField
    pairwise: PairwiseField

    def __post_init__(self):
        if (self.unary.height, self.unary.width) != \
                (self.pairwise.height, self.pairwise.width):
            raise ValueError("unary and pairwise dimensions disagree")

    @property
    def height(self) -> int:
        return self.unary.height

    @property
    def width(self) -> int:
        return self.unary.width


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel binary labeling; road[v, u] = True means label R."""

    road: np.ndarray

    def __post_init__(self):
        if self.road.ndim != 2 or self.road.dtype != np.bool_:
            raise ValueError("expected an HxW bool array")

    @property
    def height(self) -> int:
        return self.road.shape[0]

    @property
    def width(self) -> int:
        return self.road.shape[1]


@dataclass(frozen=True)
class SolveResult:
    mask: LabelMask
    energy: float
    flow: float
    offset: float


def energy(mask: LabelMask, costs: CostField) -> float:
    """Total labeling cost: unaries plus V(p,q) per disagreeing edge."""
    if (mask.height, mask.width) != (costs.height, costs.width):
        raise ValueError("mask and cost field dimensions disagree")
    road = mask.road
    u = costs.unary
    total = float(np.where(road, u.cost_road, u.cost_nonroad).sum())
    total += float(costs.pairwise.right[road[:, :-1] != road[:, 1:]].sum())
    total += float(costs.pairwise.down[road[:-1, :] != road[1:, :]].sum())
    return total


def _build_graph(costs: CostField):
    """Assemble interleaved arc pairs and the CSR adjacency for the cut graph."""
    h, w = costs.height, costs.width
    n_px = h * w
    source = n_px
    sink = n_px + 1

    cr = costs.unary.cost_road
    cn = costs.unary.cost_nonroad
    m = np.minimum(cr, cn)
    offset = float(m.sum())
    # after removing the offset, one terminal capacity per pixel is exactly 0
    cap_sink = (cr - m).ravel()    # cut when the pixel stays on the source side
    cap_src = (cn - m).ravel()     # cut when the pixel falls to the sink side

    pix = np.arange(n_px, dtype=np.int64).reshape(h, w)

    tails = []
    heads = []
    cap_fwd = []
    cap_rev = []

    sel = np.nonzero(cap_src > 0.0)[0]
    tails.append(np.full(len(sel), source, dtype=np.int64))
    heads.append(sel)
    cap_fwd.append(cap_src[sel])
    cap_rev.append(np.zeros(len(sel)))

    sel = np.nonzero(cap_sink > 0.0)[0]
    tails.append(sel)
    heads.append(np.full(len(sel), sink, dtype=np.int64))
    cap_fwd.append(cap_sink[sel])
    cap_rev.append(np.zeros(len(sel)))

    vr = costs.pairwise.right.ravel()
    a = pix[:, :-1].ravel()
    b = pix[:, 1:].ravel()
    sel = np.nonzero(vr > 0.0)[0]
    tails.append(a[sel])
    heads.append(b[sel])
    cap_fwd.append(vr[sel])
    cap_rev.append(vr[sel])

    vd = costs.pairwise.down.ravel()
    a = pix[:-1, :].ravel()
    b = pix[1:, :].ravel()
    sel = np.nonzero(vd > 0.0)[0]
    tails.append(a[sel])
    heads.append(b[sel])
    cap_fwd.append(vd[sel])
    cap_rev.append(vd[sel])

    u = np.concatenate(tails)
    v = np.concatenate(heads)
    cf = np.concatenate(cap_fwd)
    cv = np.concatenate(cap_rev)

    n_arcs = 2 * len(u)
    arc_from = np.empty(n_arcs, dtype=np.int64)
    arc_to = np.empty(n_arcs, dtype=np.int64)
    arc_cap = np.empty(n_arcs, dtype=np.float64)
    arc_from[0::2] = u
    arc_from[1::2] = v
    arc_to[0::2] = v
    arc_to[1::2] = u
    arc_cap[0::2] = cf
    arc_cap[1::2] = cv

    n_nodes = n_px + 2
    counts = np.bincount(arc_from, minlength=n_nodes)
    adj_start = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=adj_start[1:])
    adj_list = np.argsort(arc_from, kind="stable").astype(np.int64)

    return n_nodes, arc_to, arc_cap, adj_start, adj_list, source, sink, offset


def solve(costs: CostField) -> SolveResult:
    """Global minimizer of the CRF energy via one max-flow computation.

    The returned mask labels R exactly the pixels on the source side of the
    min cut; the minimum energy equals the max-flow value plus the unary
    offset removed during graph construction.
    """
    (n_nodes, arc_to, arc_cap, adj_start, adj_list,
     source, sink, offset) = _build_graph(costs)
    flow = float(_maxflow.max_flow(n_nodes, arc_to, arc_cap, adj_start,
                                   adj_list, source, sink))
    reach = _maxflow.source_side(n_nodes, arc_to, arc_cap, adj_start,
                                 adj_list, source)
    road = np.ascontiguousarray(
        reach[:costs.height * costs.width].reshape(costs.height, costs.width))
    mask = LabelMask(road=road)
    return SolveResult(mask=mask, energy=flow + offset, flow=flow,
                       offset=offset)


def brute_force_solve(costs: CostField):
    """Exhaustive minimum over all labelings; only for tiny instances."""
    h, w = costs.height, costs.width
    n = h * w
    if n > 20:
        raise ValueError(f"brute force limited to 20 pixels, got {n}")
    codes = np.arange(1 << n, dtype=np.uint32)
    bits = ((codes[:, None] >> np.arange(n, dtype=np.uint32)) & 1).astype(bool)

    cr = costs.unary.cost_road.ravel()
    cn = costs.unary.cost_nonroad.ravel()
    e = bits @ cr + (~bits) @ cn

    pix = np.arange(n).reshape(h, w)
    for (i, j), v in np.ndenumerate(costs.pairwise.right):
        e += float(v) * (bits[:, pix[i, j]] != bits[:, pix[i, j + 1]])
    for (i, j), v in np.ndenumerate(costs.pairwise.down):
        e += float(v) * (bits[:, pix[i, j]] != bits[:, pix[i + 1, j]])

    best = int(np.argmin(e))
    mask = LabelMask(road=bits[best].reshape(h, w).copy())
    return mask, float(e[best])
