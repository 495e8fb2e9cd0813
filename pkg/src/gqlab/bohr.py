"""Leaf enumeration, holonomy, and the Bohr-Sommerfeld census.

A circle leaf is threaded through the cover as a chain of element segments
with switch points in consecutive double overlaps; its holonomy is the
product of segment transport factors exp(-i integral theta) and transition
values at the switches.  A leaf is Bohr-Sommerfeld exactly when that
product is 1, i.e. when the accumulated action lands in 2 pi Z.  The census
locates BS leaves by root-solving the action phase between sampled sign
changes, so BS values need not be hit by the sample grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Polarization
from .prequantum import ConfigurationError, TrivializationCover
from .transport import LeafTransport

TWO_PI = 2.0 * math.pi


class CoverageError(ValueError):
    pass


class HolonomyUndefinedError(ValueError):
    pass


@dataclass(frozen=True)
class LeafSegment:
    element: int
    t0: float  # element-frame leaf parameter bounds
    t1: float
    c_elem: float  # transverse label lifted into the element frame


@dataclass(frozen=True)
class Leaf:
    label: float
    topology: str  # circle | line | point
    segments: tuple
    switch_points: np.ndarray  # canonical coords; entry i joins segment i, i+1
    singular: bool = False
    point: tuple | None = None


@dataclass(frozen=True)
class HolonomyResult:
    holonomy: complex
    phase: float  # principal argument of the holonomy, in (-pi, pi]
    action: float  # accumulated integral of theta plus transition phases
    nearest_multiple: int
    residual: float  # action - 2 pi * nearest_multiple

    def as_dict(self) -> dict:
        return {
            "holonomy": [self.holonomy.real, self.holonomy.imag],
            "phase": self.phase,
            "action": self.action,
            "nearest_multiple": self.nearest_multiple,
            "residual": self.residual,
        }


# ---------------------------------------------------------------------------
# Leaf construction


def _axis_candidates(cover, pol, c: float):
    """(element, t-interval, c lifted into the element frame) per crossing."""
    out = []
    manifold = cover.manifold
    la, ta = pol.label_axis, pol.leaf_axis
    period_label = manifold.periods[la]
    for el in cover.elements:
        lo, hi = el.box.interval(la)
        c_lift = c
        if period_label is not None:
            mid = 0.5 * (lo + hi)
            c_lift = c + period_label * round((mid - c) / period_label)
        if lo + 1e-9 < c_lift < hi - 1e-9:
            t0, t1 = el.box.interval(ta)
            out.append((el.index, t0, t1, c_lift))
    return out


def _thread_circle(cover, pol, c: float) -> Leaf:
    period = pol.leaf_period
    cands = _axis_candidates(cover, pol, c) if pol.kind == "axis" else None
    if pol.kind == "radial":
        cands = []
        for el in cover.elements:
            half = min(el.box.hi[0], el.box.hi[1], -el.box.lo[0], -el.box.lo[1])
            if 0.0 < c < 0.5 * half * half:
                cands.append((el.index, 0.0, TWO_PI, c))
    if not cands:
        raise CoverageError(f"leaf {c} crosses no cover element")

    # Whole-circle elements carry the leaf in one segment.
    for idx, t0, t1, c_elem in cands:
        if t1 - t0 >= period - 1e-9:
            start = t0 + 0.5 * ((t1 - t0) - period)
            seg = LeafSegment(idx, start, start + period, c_elem)
            return Leaf(c, "circle", (seg,), np.empty((0, 2)))

    # Greedy interval chain around the circle in the unwrapped parameter:
    # placements carry (walk start, walk end, element, frame offset, label)
    # with element-frame t = walk t + offset.
    items = []
    for idx, t0, t1, c_elem in cands:
        a = math.fmod(t0, period)
        if a < 0:
            a += period
        items.append((a, a + (t1 - t0), idx, t0 - a, c_elem))
    items.sort()
    start = items[0]
    placements = [start]
    switches = []
    cur_end = start[1]
    guard = 4 * len(items) + 4
    closed = False
    while guard and not closed:
        guard -= 1
        best = None
        for it in items:
            for s in (0.0, period):
                a, b = it[0] + s, it[1] + s
                if a < cur_end - 1e-12 and b > cur_end + 1e-12:
                    cand = (b, -it[2], -s, a, it, s)
                    if best is None or cand > best:
                        best = cand
        if best is None:
            raise CoverageError(
                f"cover leaves a gap on the leaf {c} near t={cur_end}"
            )
        _, _, _, a, it, s = best
        switches.append(0.5 * (a + cur_end))
        if it is start and s == period:
            closed = True
        else:
            placements.append((a, it[1] + s, it[2], it[3] - s, it[4]))
            cur_end = it[1] + s
    if not closed:
        raise CoverageError(f"leaf {c} did not close while threading the cover")

    # Segment i runs from switch i-1 to switch i; the first segment starts at
    # the closing switch pulled back one period.
    segments = []
    u_prev = switches[-1] - period
    for placement, u_next in zip(placements, switches):
        _, _, idx, off, c_elem = placement
        segments.append(LeafSegment(idx, u_prev + off, u_next + off, c_elem))
        u_prev = u_next
    base = pol.root
    switch_pts = cover.manifold.reduce(_switch_coords(base, c, np.array(switches)))
    return Leaf(c, "circle", tuple(segments), switch_pts)


def _switch_coords(base_pol, c: float, ts: np.ndarray) -> np.ndarray:
    if len(ts) == 0:
        return np.empty((0, 2))
    from . import expr as ex

    cols = {"c": complex(c), "t": ts + 0j}
    return np.column_stack(
        [np.real(ex.evaluate(comp, cols)) for comp in base_pol.curve]
    )


def _thread_line(cover, pol, c: float) -> Leaf:
    cands = _axis_candidates(cover, pol, c)
    if not cands:
        raise CoverageError(f"leaf {c} crosses no cover element")
    lo = min(t0 for _, t0, _, _ in cands)
    cands.sort(key=lambda r: (r[1], r[0]))
    segments = []
    switches = []
    idx, t0, t1, c_elem = cands[0]
    cur_end = t1
    cur = (idx, t0, c_elem)
    for nidx, n0, n1, nc in cands[1:]:
        if n0 >= cur_end - 1e-12:
            raise CoverageError(f"cover leaves a gap on the line leaf {c}")
        if n1 <= cur_end:
            continue
        switch = 0.5 * (n0 + cur_end)
        segments.append(LeafSegment(cur[0], cur[1], switch, cur[2]))
        switches.append(switch)
        cur = (nidx, switch, nc)
        cur_end = n1
    segments.append(LeafSegment(cur[0], cur[1], cur_end, cur[2]))
    base = pol.root
    return Leaf(c, "line", tuple(segments), _switch_coords(base, c, np.array(switches)))


def enumerate_leaves(
    cover: TrivializationCover,
    pol: Polarization,
    crange: tuple,
    count: int,
    include_singular: bool = True,
) -> list:
    """Leaves at `count` fiber-map values in crange, plus declared singular
    points as point leaves."""
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    lo, hi = crange
    if cover.pullback_of is not None:
        src, phi_map = cover.pullback_of
        up = enumerate_leaves(src, pol.base, crange, count, include_singular)
        out = []
        for leaf in up:
            switch = (
                cover.manifold.reduce(phi_map.apply_inverse(leaf.switch_points))
                if len(leaf.switch_points)
                else leaf.switch_points
            )
            point = (
                tuple(phi_map.apply_inverse(np.array([leaf.point]))[0])
                if leaf.point is not None
                else None
            )
            out.append(
                Leaf(leaf.label, leaf.topology, leaf.segments, switch,
                     leaf.singular, point)
            )
        return out
    if pol.label_periodic:
        values = lo + (hi - lo) * np.arange(count) / count
    else:
        values = np.linspace(lo, hi, count) if count > 1 else np.array([lo])
    singular_labels = pol.label_of(np.array(pol.singular_points)) if (
        pol.singular_points
    ) else np.array([])
    leaves = []
    for c in values:
        if len(singular_labels) and np.min(np.abs(singular_labels - c)) < 1e-9:
            continue  # the point leaf below represents this label
        if pol.leaf_period is None:
            leaves.append(_thread_line(cover, pol, float(c)))
        else:
            leaves.append(_thread_circle(cover, pol, float(c)))
    if include_singular:
        # Declared singular points always join the census as point leaves.
        for p, c in zip(pol.singular_points, singular_labels):
            leaves.append(
                Leaf(
                    label=float(c),
                    topology="point",
                    segments=(),
                    switch_points=np.empty((0, 2)),
                    singular=True,
                    point=tuple(p),
                )
            )
    return leaves


# ---------------------------------------------------------------------------
# Holonomy


def holonomy(
    cover: TrivializationCover,
    pol: Polarization,
    leaf: Leaf,
    transport: LeafTransport | None = None,
) -> HolonomyResult:
    """Parallel transport around a closed leaf.

    The convention matches the cochain transport: a value f in the alpha
    trivialization becomes lambda_{alpha beta} f in the beta trivialization,
    and moving along the leaf multiplies by exp(-i integral theta).
    """
    if leaf.topology == "line":
        raise HolonomyUndefinedError(
            "holonomy is undefined for noncompact (line) leaves"
        )
    if leaf.topology == "point":
        return HolonomyResult(1.0 + 0.0j, 0.0, 0.0, 0, 0.0)
    if transport is None:
        transport = LeafTransport(cover, pol)
    action = 0.0
    hol = 1.0 + 0.0j
    for seg in leaf.segments:
        val = transport.integral(seg.element, seg.c_elem, seg.t0, seg.t1)
        action += val.real
        hol *= np.exp(-1j * val)
    nseg = len(leaf.segments)
    for j in range(len(leaf.switch_points)):
        a = leaf.segments[j].element
        b = leaf.segments[(j + 1) % nseg].element
        lam = cover.transition(a, b, leaf.switch_points[j])[0]
        hol *= lam
        action -= math.atan2(lam.imag, lam.real)
    phase = math.atan2(hol.imag, hol.real)
    nearest = int(round(action / TWO_PI))
    return HolonomyResult(
        holonomy=complex(hol),
        phase=phase,
        action=action,
        nearest_multiple=nearest,
        residual=action - TWO_PI * nearest,
    )


# ---------------------------------------------------------------------------
# Census


@dataclass(frozen=True)
class BSEntry:
    leaf: Leaf
    holonomy: HolonomyResult | None
    is_bs: bool


@dataclass(frozen=True)
class BSReport:
    entries: tuple
    bs_locations: tuple  # root-solved labels of smooth BS circle leaves
    q_bs_smooth: int
    q_bs_singular: int
    q_bs: int
    lines_excluded: int
    tol: float

    def as_dict(self) -> dict:
        return {
            "q_bs": self.q_bs,
            "q_bs_smooth": self.q_bs_smooth,
            "q_bs_singular": self.q_bs_singular,
            "bs_locations": list(self.bs_locations),
            "lines_excluded": self.lines_excluded,
            "tol": self.tol,
            "leaves": [
                {
                    "label": e.leaf.label,
                    "topology": e.leaf.topology,
                    "singular": e.leaf.singular,
                    "is_bs": e.is_bs,
                    **(e.holonomy.as_dict() if e.holonomy else {}),
                }
                for e in self.entries
            ],
        }


def bs_census(
    cover: TrivializationCover,
    pol: Polarization,
    crange: tuple,
    count: int,
    tol: float = 1e-8,
    include_lines: bool = False,
) -> BSReport:
    """Bohr-Sommerfeld census over a label range.

    Circle leaves are sampled at `count` labels; BS locations are then
    root-solved to 1e-10 in the label from sign changes of sin(action/2).
    Point leaves (declared singular points) are BS with trivial holonomy.
    Noncompact line leaves are excluded from the count unless
    include_lines is set (they all admit covariantly constant sections).
    """
    transport = LeafTransport(cover, pol)
    leaves = enumerate_leaves(cover, pol, crange, count)
    entries = []
    sampled: list = []
    lines = 0
    singular_bs = 0
    for leaf in leaves:
        if leaf.topology == "line":
            lines += 1
            entries.append(BSEntry(leaf, None, include_lines))
            continue
        hres = holonomy(cover, pol, leaf, transport)
        is_bs = abs(hres.phase) < tol
        if leaf.topology == "point":
            singular_bs += 1
        else:
            sampled.append((leaf.label, hres.holonomy))
        entries.append(BSEntry(leaf, hres, is_bs))

    def hol_at(c: float) -> complex:
        if cover.pullback_of is not None:
            leaf = enumerate_leaves(cover, pol, (c, c), 1, include_singular=False)[0]
        else:
            leaf = _thread_circle(cover, pol, c)
        return holonomy(cover, pol, leaf, transport).holonomy

    # The holonomy is continuous in the label (the action is only defined
    # up to the threading), so we root-solve Im(hol) between sign changes
    # and keep the roots where the holonomy is +1 rather than -1.
    locations = []
    sampled.sort()
    for (c0, h0), (c1, h1) in zip(sampled, sampled[1:]):
        s0, s1 = h0.imag, h1.imag
        if abs(s0) < 1e-12:
            if h0.real > 0.0:
                locations.append(c0)
            continue
        if s0 * s1 < 0.0:
            lo_c, hi_c, lo_s = c0, c1, s0
            hol_root = h1
            while hi_c - lo_c > 1e-12:
                mid = 0.5 * (lo_c + hi_c)
                hm = hol_at(mid)
                if hm.imag == 0.0:
                    lo_c = hi_c = mid
                    hol_root = hm
                    break
                if (hm.imag < 0.0) == (lo_s < 0.0):
                    lo_c = mid
                else:
                    hi_c = mid
                    hol_root = hm
            if hol_root.real > 0.0:
                locations.append(0.5 * (lo_c + hi_c))
    if sampled:
        c_last, h_last = sampled[-1]
        if abs(h_last.imag) < 1e-12 and h_last.real > 0.0:
            locations.append(c_last)

    # dedupe, respecting label periodicity
    period = pol.label_range[1] - pol.label_range[0] if pol.label_periodic else None
    unique = []
    for c in sorted(locations):
        dup = any(
            abs(c - u) < 1e-9
            or (period is not None and abs(abs(c - u) - period) < 1e-9)
            for u in unique
        )
        if not dup:
            unique.append(c)

    q_smooth = len(unique)
    q_total = q_smooth + singular_bs + (lines if include_lines else 0)
    return BSReport(
        entries=tuple(entries),
        bs_locations=tuple(unique),
        q_bs_smooth=q_smooth,
        q_bs_singular=singular_bs,
        q_bs=q_total,
        lines_excluded=0 if include_lines else lines,
        tol=tol,
    )


def lattice_count(lo: float, hi: float, tol: float = 1e-9) -> int:
    """Number of integer points in the closed interval [lo, hi]."""
    if hi < lo:
        return 0
    first = math.ceil(lo - tol)
    last = math.floor(hi + tol)
    return max(0, last - first + 1)
