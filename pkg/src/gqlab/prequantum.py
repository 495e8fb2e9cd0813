"""Trivialization covers and their local data.

A cover never materializes bundle sections: the pair (transitions lambda,
potentials theta) is the complete representation of the prequantum line
bundle.  Elements are coordinate rectangles, stored unrolled so that a
rectangle crossing a periodic seam keeps a single consistent branch of the
periodic coordinate; potentials attached to an element are always evaluated
in that unrolled frame.  Transition expressions must be well defined on the
manifold itself (periodic in the periodic coordinates), which every builtin
family satisfies.

The nerve records every nonempty multi-overlap up to degree 3, one cell per
connected component, with interior sample points, per-member unrolling
shifts, and face links; this is the combinatorial carrier for the cochain
complex, the consistency checks, and the holonomy loop threading.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .geometry import Box, Manifold, SymplecticForm, as_points, eval_at

MAX_TUPLE = 4  # tuples up to 4 indices: cochain degrees 0..3


class ConfigurationError(ValueError):
    pass


class RefinementError(ValueError):
    pass


@dataclass(frozen=True)
class CoverElement:
    index: int
    box: Box
    contractible: bool
    name: str = ""

    def wraps(self, manifold: Manifold) -> tuple:
        out = []
        for axis, period in enumerate(manifold.periods):
            if period is None:
                out.append(False)
            else:
                out.append(self.box.lo[axis] < 0.0 or self.box.hi[axis] > period)
        return tuple(out)


@dataclass
class LocalData:
    """Transition functions and connection potentials as expressions.

    transitions holds both orientations of every overlapping pair;
    potentials holds the two 1-form components per element.
    """

    transitions: dict  # (a, b) -> Expr
    potentials: dict  # a -> (Expr, Expr)

    def transition_expr(self, a: int, b: int) -> ex.Expr:
        if a == b:
            return ex.ONE
        try:
            return self.transitions[(a, b)]
        except KeyError:
            raise ConfigurationError(f"no transition for pair ({a}, {b})") from None


@dataclass(frozen=True)
class NerveCell:
    indices: tuple  # strictly increasing element indices
    comp: int  # component number within this index tuple
    box: Box  # in the frame of the first member
    shifts: tuple  # per member: integer period multiples into its frame
    samples: np.ndarray  # interior points, cell frame

    @property
    def key(self):
        return (self.indices, self.comp)

    @property
    def degree(self) -> int:
        return len(self.indices) - 1


@dataclass
class Nerve:
    cells: dict  # key -> NerveCell
    faces: dict  # key -> tuple of (face key, frame offset (int, int))
    max_degree: int

    def degree(self, n: int):
        return [c for c in self.cells.values() if c.degree == n]

    def __len__(self):
        return len(self.cells)


@dataclass
class TrivializationCover:
    manifold: Manifold
    omega: SymplecticForm
    elements: list
    data: LocalData
    nerve: Nerve | None = None
    pullback_of: tuple | None = None  # (source cover, map)
    meta: dict = field(default_factory=dict)

    # -- structure ---------------------------------------------------------

    def element(self, index: int) -> CoverElement:
        return self.elements[index]

    @property
    def source(self) -> "TrivializationCover":
        return self.pullback_of[0] if self.pullback_of else self

    def member_points(self, index: int, pts) -> np.ndarray:
        """Lift canonical points into the element's unrolled frame."""
        return self.manifold.lift_into(as_points(pts), self.elements[index].box)

    def contains(self, index: int, pts) -> np.ndarray:
        if self.pullback_of is not None:
            src, phi = self.pullback_of
            return src.contains(index, src.manifold.reduce(phi.apply(pts)))
        lifted = self.member_points(index, pts)
        inside = ~np.isnan(lifted[:, 0]) & ~np.isnan(lifted[:, 1])
        good = np.nan_to_num(lifted, nan=np.inf)
        inside &= self.elements[index].box.contains(good, tol=1e-9)
        return inside & self.manifold.in_domain(pts)

    # -- local data evaluation (canonical coordinate inputs) ----------------

    def transition(self, a: int, b: int, pts) -> np.ndarray:
        pts = as_points(pts)
        if a == b:
            return np.ones(len(pts), dtype=np.complex128)
        if self.pullback_of is not None:
            src, phi = self.pullback_of
            return src.transition(a, b, src.manifold.reduce(phi.apply(pts)))
        return eval_at(
            self.data.transition_expr(a, b), self.manifold.coords, pts
        )

    def transition_dlog(self, a: int, b: int, pts) -> tuple:
        """(d lambda / lambda) components; branch free."""
        pts = as_points(pts)
        if self.pullback_of is not None:
            src, phi = self.pullback_of
            up = src.manifold.reduce(phi.apply(pts))
            g0, g1 = src.transition_dlog(a, b, up)
            jac = phi.jacobian(pts)
            return (
                g0 * jac[:, 0, 0] + g1 * jac[:, 1, 0],
                g0 * jac[:, 0, 1] + g1 * jac[:, 1, 1],
            )
        lam = self.data.transition_expr(a, b)
        coords = self.manifold.coords
        vals = eval_at(lam, coords, pts)
        return tuple(
            eval_at(ex.differentiate(lam, c), coords, pts) / vals for c in coords
        )

    def potential(self, a: int, pts) -> tuple:
        """Connection potential components at canonical points."""
        pts = as_points(pts)
        if self.pullback_of is not None:
            src, phi = self.pullback_of
            up = src.manifold.reduce(phi.apply(pts))
            t0, t1 = src.potential(a, up)
            jac = phi.jacobian(pts)
            return (
                t0 * jac[:, 0, 0] + t1 * jac[:, 1, 0],
                t0 * jac[:, 0, 1] + t1 * jac[:, 1, 1],
            )
        lifted = self.member_points(a, pts)
        if np.any(np.isnan(lifted)):
            raise ConfigurationError(
                f"potential of element {a} requested outside the element"
            )
        comps = self.data.potentials[a]
        return tuple(eval_at(c, self.manifold.coords, lifted) for c in comps)

    def curvature(self, a: int, pts) -> np.ndarray:
        """d(theta_a) coefficient (the dx^dy component) at canonical points."""
        pts = as_points(pts)
        if self.pullback_of is not None:
            src, phi = self.pullback_of
            up = src.manifold.reduce(phi.apply(pts))
            w = src.omega.eval(src.manifold, up)
            det = np.linalg.det(phi.jacobian(pts))
            return w * det
        lifted = self.member_points(a, pts)
        t0, t1 = self.data.potentials[a]
        coords = self.manifold.coords
        d0t1 = eval_at(ex.differentiate(t1, coords[0]), coords, lifted)
        d1t0 = eval_at(ex.differentiate(t0, coords[1]), coords, lifted)
        return d0t1 - d1t0


# ---------------------------------------------------------------------------
# Nerve construction


def _shift_candidates(manifold: Manifold):
    cands = []
    for period in manifold.periods:
        cands.append((0,) if period is None else (-1, 0, 1))
    return [(s0, s1) for s0 in cands[0] for s1 in cands[1]]


def _period_vec(manifold: Manifold) -> np.ndarray:
    return np.array([p if p is not None else 0.0 for p in manifold.periods])


def _cell_samples(manifold: Manifold, box: Box, degree: int) -> np.ndarray:
    n = max(3, 10 - 2 * degree)
    pts = box.grid(n)
    keep = manifold.in_domain(manifold.reduce(pts))
    return pts[keep]


def build_nerve(cover: TrivializationCover, max_tuple: int = MAX_TUPLE) -> Nerve:
    """Enumerate multi-overlap components up to tuples of max_tuple indices."""
    manifold = cover.manifold
    periods = _period_vec(manifold)
    shift_cands = _shift_candidates(manifold)
    cells: dict = {}
    faces: dict = {}
    by_shape: dict = {}  # (indices, shifts) -> key

    def register(indices, shifts, box):
        comp = 0
        while (indices, comp) in cells:
            comp += 1
        cell = NerveCell(
            indices=indices,
            comp=comp,
            box=box,
            shifts=shifts,
            samples=_cell_samples(manifold, box, len(indices) - 1),
        )
        cells[cell.key] = cell
        by_shape[(indices, shifts)] = cell.key
        return cell

    for el in cover.elements:
        register((el.index,), ((0, 0),), el.box)

    frontier = [c for c in cells.values()]
    for _size in range(2, max_tuple + 1):
        new_cells = []
        for cell in frontier:
            for el in cover.elements:
                if el.index <= cell.indices[-1]:
                    continue
                for s in shift_cands:
                    cand = el.box.shifted((-s[0] * periods[0], -s[1] * periods[1]))
                    inter = cell.box.intersect(cand)
                    if inter is None:
                        continue
                    new = register(
                        cell.indices + (el.index,), cell.shifts + (s,), inter
                    )
                    new_cells.append(new)
        frontier = new_cells

    # Face links: deleting the j-th index lands in a unique smaller cell.
    for cell in cells.values():
        if cell.degree == 0:
            continue
        links = []
        for j in range(len(cell.indices)):
            sub_idx = cell.indices[:j] + cell.indices[j + 1 :]
            sub_shift = cell.shifts[:j] + cell.shifts[j + 1 :]
            base = sub_shift[0]
            norm = tuple((a - base[0], b - base[1]) for a, b in sub_shift)
            key = by_shape.get((sub_idx, norm))
            if key is None:  # pragma: no cover - construction guarantees it
                raise ConfigurationError(f"nerve not closed under faces at {cell.key}")
            links.append((key, base))
        faces[cell.key] = tuple(links)

    return Nerve(cells=cells, faces=faces, max_degree=max_tuple - 1)


def coverage_gaps(cover: TrivializationCover, grid: int = 40) -> int:
    """Number of window grid points lying in no element."""
    pts = cover.manifold.sample_grid(grid)
    covered = np.zeros(len(pts), dtype=bool)
    for el in cover.elements:
        covered |= cover.contains(el.index, pts)
    return int(np.sum(~covered))


# ---------------------------------------------------------------------------
# Consistency checks


@dataclass(frozen=True)
class LocalDataReport:
    cocycle_max: float
    inverse_max: float
    curvature_max: float
    compatibility_max: float
    tol: float
    cells_checked: int

    @property
    def passed(self) -> bool:
        return (
            self.cocycle_max < self.tol
            and self.inverse_max < self.tol
            and self.curvature_max < self.tol
            and self.compatibility_max < self.tol
        )

    def as_dict(self) -> dict:
        return {
            "cocycle_max": self.cocycle_max,
            "inverse_max": self.inverse_max,
            "curvature_max": self.curvature_max,
            "compatibility_max": self.compatibility_max,
            "tol": self.tol,
            "cells_checked": self.cells_checked,
            "pass": self.passed,
        }


def check_local_data(cover: TrivializationCover, tol: float = 1e-8) -> LocalDataReport:
    """Verify every law the bundle imposes on (lambda, theta).

    Checks, each as a max residual over nerve cell samples: the cocycle law
    on triple overlaps, lambda_ab lambda_ba = 1 on pairs, d theta_a = omega
    on each element (exact symbolic exterior derivative), and the
    compatibility theta_a - theta_b = -i dlambda_ab / lambda_ab.
    """
    if cover.nerve is None or len(cover.nerve) == 0:
        raise ConfigurationError("cover has no nerve; build_nerve first")
    manifold = cover.manifold
    curv_max = 0.0
    inv_max = 0.0
    compat_max = 0.0
    cocycle_max = 0.0
    checked = 0
    for cell in cover.nerve.cells.values():
        pts = manifold.reduce(cell.samples)
        if len(pts) == 0:
            continue
        checked += 1
        if cell.degree == 0:
            (a,) = cell.indices
            w = cover.omega.eval(manifold, pts) if cover.pullback_of is None else (
                cover.omega.eval(manifold, pts)
            )
            resid = np.abs(cover.curvature(a, pts) - w)
            curv_max = max(curv_max, float(np.max(resid)))
        elif cell.degree == 1:
            a, b = cell.indices
            lam_ab = cover.transition(a, b, pts)
            lam_ba = cover.transition(b, a, pts)
            inv_max = max(inv_max, float(np.max(np.abs(lam_ab * lam_ba - 1.0))))
            ta = cover.potential(a, pts)
            tb = cover.potential(b, pts)
            dlog = cover.transition_dlog(a, b, pts)
            for comp in range(2):
                resid = np.abs(ta[comp] - tb[comp] + 1j * dlog[comp])
                compat_max = max(compat_max, float(np.max(resid)))
        elif cell.degree == 2:
            a, b, c = cell.indices
            resid = np.abs(
                cover.transition(a, b, pts) * cover.transition(b, c, pts)
                - cover.transition(a, c, pts)
            )
            cocycle_max = max(cocycle_max, float(np.max(resid)))
    return LocalDataReport(
        cocycle_max=cocycle_max,
        inverse_max=inv_max,
        curvature_max=curv_max,
        compatibility_max=compat_max,
        tol=tol,
        cells_checked=checked,
    )


# ---------------------------------------------------------------------------
# Refinement


@dataclass(frozen=True)
class RefinementMap:
    assignment: dict  # fine index -> coarse index

    def __call__(self, fine_index: int) -> int:
        return self.assignment[fine_index]


def refine(cover: TrivializationCover, targets: list) -> tuple:
    """Restricted refinement: fine data is the coarse data through the map.

    targets is a list of Boxes (or (Box, contractible) pairs), each of which
    must fit inside some element of the source cover, possibly after a
    period shift; the stored fine box is then expressed in the containing
    coarse element's frame so that potentials keep their branch.
    """
    if cover.pullback_of is not None:
        raise RefinementError("refine operates on base covers")
    manifold = cover.manifold
    periods = _period_vec(manifold)
    shift_cands = _shift_candidates(manifold)
    fine_elements = []
    assignment = {}
    for fine_index, target in enumerate(targets):
        box, contractible = (
            target if isinstance(target, tuple) else (target, None)
        )
        placed = False
        for el in cover.elements:
            for s in shift_cands:
                shifted = box.shifted((s[0] * periods[0], s[1] * periods[1]))
                if (
                    shifted.lo[0] >= el.box.lo[0] - 1e-12
                    and shifted.lo[1] >= el.box.lo[1] - 1e-12
                    and shifted.hi[0] <= el.box.hi[0] + 1e-12
                    and shifted.hi[1] <= el.box.hi[1] + 1e-12
                ):
                    fine_elements.append(
                        CoverElement(
                            index=fine_index,
                            box=shifted,
                            contractible=(
                                el.contractible if contractible is None else contractible
                            ),
                            name=f"{el.name}/{fine_index}",
                        )
                    )
                    assignment[fine_index] = el.index
                    placed = True
                    break
            if placed:
                break
        if not placed:
            raise RefinementError(
                f"target element {fine_index} with box {box} fits in no source element"
            )

    transitions = {}
    potentials = {}
    refmap = RefinementMap(assignment)
    fine = TrivializationCover(
        manifold=manifold,
        omega=cover.omega,
        elements=fine_elements,
        data=LocalData(transitions, potentials),
        meta={"refined_from": cover.meta.get("name", "?")},
    )
    fine.nerve = build_nerve(fine)
    for el in fine_elements:
        potentials[el.index] = cover.data.potentials[assignment[el.index]]
    for cell in fine.nerve.degree(1):
        a, b = cell.indices
        ca, cb = assignment[a], assignment[b]
        transitions[(a, b)] = cover.data.transition_expr(ca, cb)
        transitions[(b, a)] = cover.data.transition_expr(cb, ca)
    return fine, refmap


def split_boxes(cover: TrivializationCover, factor: int = 2, overlap: float = 0.25):
    """Quadrant-style subdivision targets for a one-step refinement."""
    targets = []
    for el in cover.elements:
        for axis_parts in _axis_splits(el.box, factor, overlap):
            targets.append(axis_parts)
    return targets


def _axis_splits(box: Box, factor: int, overlap: float):
    pieces = []
    edges = [
        np.linspace(box.lo[a], box.hi[a], factor + 1) for a in range(2)
    ]
    pads = [min(overlap, 0.25 * box.width(a) / factor) for a in range(2)]
    for ix in range(factor):
        for iy in range(factor):
            lo = (
                max(box.lo[0], edges[0][ix] - pads[0]),
                max(box.lo[1], edges[1][iy] - pads[1]),
            )
            hi = (
                min(box.hi[0], edges[0][ix + 1] + pads[0]),
                min(box.hi[1], edges[1][iy + 1] + pads[1]),
            )
            pieces.append(Box(lo, hi))
    return pieces


def verify_refinement(
    fine: TrivializationCover,
    coarse: TrivializationCover,
    refmap: RefinementMap,
    samples: int = 6,
) -> float:
    """Max containment violation of V_beta inside U_phi(beta) (0 when good)."""
    worst = 0.0
    for el in fine.elements:
        pts = fine.manifold.reduce(el.box.grid(samples))
        inside = coarse.contains(refmap(el.index), pts)
        worst = max(worst, float(np.mean(~inside)))
    return worst


# ---------------------------------------------------------------------------
# Serialization (base covers)


def cover_to_json(cover: TrivializationCover) -> str:
    if cover.pullback_of is not None:
        raise ConfigurationError("pullback covers serialize via their provenance")
    m = cover.manifold
    doc = {
        "schema": "gqlab.cover/1",
        "manifold": {
            "name": m.name,
            "coords": list(m.coords),
            "periods": [p for p in m.periods],
            "window": {"lo": list(m.window.lo), "hi": list(m.window.hi)},
            "disk_radius": m.disk_radius,
        },
        "omega": ex.to_source(cover.omega.coefficient),
        "elements": [
            {
                "index": el.index,
                "name": el.name,
                "lo": list(el.box.lo),
                "hi": list(el.box.hi),
                "contractible": el.contractible,
                "wraps": list(el.wraps(m)),
            }
            for el in cover.elements
        ],
        "transitions": [
            {"pair": [a, b], "source": ex.to_source(lam)}
            for (a, b), lam in sorted(cover.data.transitions.items())
        ],
        "potentials": [
            {"index": a, "sources": [ex.to_source(c) for c in comps]}
            for a, comps in sorted(cover.data.potentials.items())
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def cover_from_json(text: str) -> TrivializationCover:
    doc = json.loads(text)
    if doc.get("schema") != "gqlab.cover/1":
        raise ConfigurationError("unrecognized cover schema")
    md = doc["manifold"]
    manifold = Manifold(
        name=md["name"],
        coords=tuple(md["coords"]),
        periods=tuple(md["periods"]),
        window=Box(tuple(md["window"]["lo"]), tuple(md["window"]["hi"])),
        disk_radius=md["disk_radius"],
    )
    names = set(manifold.coords)
    elements = [
        CoverElement(
            index=el["index"],
            box=Box(tuple(el["lo"]), tuple(el["hi"])),
            contractible=el["contractible"],
            name=el["name"],
        )
        for el in sorted(doc["elements"], key=lambda e: e["index"])
    ]
    data = LocalData(
        transitions={
            (t["pair"][0], t["pair"][1]): ex.parse_expr(t["source"], names)
            for t in doc["transitions"]
        },
        potentials={
            p["index"]: tuple(ex.parse_expr(s, names) for s in p["sources"])
            for p in doc["potentials"]
        },
    )
    cover = TrivializationCover(
        manifold=manifold,
        omega=SymplecticForm(ex.parse_expr(doc["omega"], names)),
        elements=elements,
        data=data,
    )
    cover.nerve = build_nerve(cover)
    return cover
