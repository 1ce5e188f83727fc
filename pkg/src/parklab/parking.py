"""Random parking (random sequential adsorption) constructions.

Arrivals form a unit-intensity Poisson process in space-time, realized
lazily per spatial grid cell of side ``2*rho0`` from keyed streams.  The
same master seed therefore yields one underlying space-time process
shared by every domain, which is what couples ``xi^{Q_R}`` across R and
makes stabilization experiments meaningful.

Three routes produce parked configurations:

* :func:`park_sequential` — time-ordered sweep of an explicit finite
  arrival stream, accepting points at distance >= 2*rho0 from all
  earlier acceptances;
* :func:`park_graphical` — the oriented-graph root-peeling construction
  on the same stream (provably identical output; the pair is this
  module's central oracle);
* :func:`park_to_saturation` — runs the sweep on the lazy process until
  a voxel tree certifies that no point of the domain can host another
  center; only provably-rejected arrivals are skipped, so the result is
  the exact time-ordered functional of the underlying process.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Domain, PointConfig
from .rng import KeyedRng

__all__ = [
    "ArrivalStream",
    "ParkingResult",
    "SaturationCertificate",
    "generate_arrivals",
    "park_sequential",
    "park_graphical",
    "park_to_saturation",
    "park_coupled_infinite",
]

_ARRIVAL_CHUNK0 = 8
_ARRIVAL_CHUNK_MAX = 8192
_MAX_VOXEL_DEPTH = 60
_ACCEPT_SPLIT_BUDGET = 5
_REJECT_SPLIT_BUDGET = 4


def _cell_of(x, s: float) -> tuple:
    return tuple(int(math.floor(c / s)) for c in x)


def _arrival_chunk(gen: np.random.Generator, t0: float, k: int, lo: np.ndarray,
                   s: float, rate: float):
    """Next ``k`` arrivals of one cell stream.

    Each arrival consumes exactly ``1 + d`` uniform doubles (gap, then
    position), so the stream content does not depend on chunk sizes.
    """
    d = lo.size
    u = gen.random((k, 1 + d))
    gaps = -np.log1p(-u[:, 0]) / rate
    times = t0 + np.cumsum(gaps)
    pos = lo + u[:, 1:] * s
    return times, pos


def _order_keys(times: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Indices sorting arrivals by time, ties broken lexicographically."""
    keys = tuple(pos[:, k] for k in reversed(range(pos.shape[1]))) + (times,)
    return np.lexsort(keys)


class ArrivalStream:
    """Time-ordered finite arrival list, extendable in the horizon.

    Generated streams keep per-cell generator state so that a later
    ``extend`` appends arrivals without rewriting the existing prefix.
    Streams may also be built directly from arrays for test fixtures.
    """

    def __init__(self, domain: Domain, rho0: float, times, positions,
                 horizon: float = math.inf, rng: KeyedRng | None = None):
        times = np.asarray(times, dtype=float)
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        if len(times) == 0:
            positions = positions.reshape(0, domain.dimension)
        if positions.shape[0] != times.shape[0]:
            raise ValueError("times and positions disagree in length")
        order = _order_keys(times, positions)
        self.domain = domain
        self.rho0 = float(rho0)
        self.times = times[order]
        self.positions = positions[order]
        self.horizon = float(horizon)
        self.rng = rng

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def extend(self, horizon: float) -> "ArrivalStream":
        """Arrivals up to the larger horizon; the old list is a prefix.

        Keyed streams are pure functions of (seed, cell), so extension
        regenerates deterministically; the previous arrivals reappear
        byte-identical, with later ones appended.
        """
        if self.rng is None:
            raise ValueError("only generated streams can be extended")
        if horizon < self.horizon:
            raise ValueError("horizon can only grow")
        return generate_arrivals(self.domain, horizon, self.rho0, self.rng)

    def restrict(self, domain: Domain) -> "ArrivalStream":
        keep = domain.contains(self.positions) if len(self) else np.zeros(0, bool)
        return ArrivalStream(domain, self.rho0, self.times[keep],
                             self.positions[keep], self.horizon)


def _domain_cells(domain: Domain, s: float):
    lo, hi = domain.bounding_box()
    d = lo.size
    ranges = [range(int(math.floor(l / s)), int(math.floor(h / s)) + 1)
              for l, h in zip(lo, hi)]
    for idx in itertools.product(*ranges):
        clo = np.asarray(idx, dtype=float) * s
        if domain.box_intersects(clo, clo + s):
            yield idx


def generate_arrivals(domain: Domain, horizon: float, rho0: float,
                      rng: KeyedRng) -> ArrivalStream:
    """Poisson(|domain| * horizon) arrivals, uniform in domain x [0, horizon].

    Positions are drawn per grid cell and filtered by domain membership,
    so the arrivals falling inside any sub-box coincide — bytes and all —
    with those of a stream generated for that sub-box alone.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    s = 2.0 * rho0
    all_t, all_p = [], []
    if not domain.is_empty:
        rate = s ** domain.dimension
        for idx in _domain_cells(domain, s):
            gen = rng.stream("arr", rho0, idx)
            t_last = 0.0
            lo = np.asarray(idx, dtype=float) * s
            while t_last <= horizon:
                times, pos = _arrival_chunk(gen, t_last, _ARRIVAL_CHUNK0 * 4,
                                            lo, s, rate)
                t_last = float(times[-1])
                keep = (times <= horizon) & domain.contains(pos)
                if keep.any():
                    all_t.append(times[keep])
                    all_p.append(pos[keep])
    times = np.concatenate(all_t) if all_t else np.zeros(0)
    pos = (np.concatenate(all_p) if all_p
           else np.zeros((0, domain.dimension)))
    return ArrivalStream(domain, rho0, times, pos, horizon, rng=rng)


@dataclass(frozen=True)
class SaturationCertificate:
    """Summary of the voxel tree that certified saturation.

    Every point of the domain was shown to lie strictly within
    ``coverage_radius`` of an accepted center (so no further center
    fits).  ``depth_cap_hit`` flags the diagnostic case where the
    subdivision limit was reached.
    """

    coverage_radius: float
    cells: int
    voxels_killed: int
    max_depth: int
    depth_cap_hit: bool = False


@dataclass(frozen=True)
class ParkingResult:
    accepted: PointConfig
    rejected: int
    saturation_time: float
    provenance: str
    certificate: SaturationCertificate | None = None
    accepted_times: np.ndarray | None = None

    @property
    def count(self) -> int:
        return len(self.accepted)

    @property
    def density(self) -> float:
        vol = self.accepted.domain.volume
        return self.count / vol if vol > 0 else float("nan")


def _result_config(points: np.ndarray, domain: Domain, rho0: float,
                   certified: bool) -> PointConfig:
    # rho1 slightly below 2*rho0 keeps the radii strictly ordered as in
    # the admissibility class the rest of the library assumes.
    return PointConfig(
        np.asarray(points, dtype=float).reshape(-1, domain.dimension),
        rho1=2.0 * rho0 * (1.0 - 1e-9),
        rho2=2.0 * rho0,
        domain=domain,
        coverage_bound=2.0 * rho0 if certified else None,
    )


def park_sequential(stream: ArrivalStream) -> ParkingResult:
    """Sweep arrivals in time order; accept at distance >= 2*rho0."""
    s = 2.0 * stream.rho0
    r2 = s * s
    cells: dict[tuple, list] = {}
    accepted_idx = []
    offsets = list(itertools.product((-1, 0, 1), repeat=stream.dimension))
    pos = stream.positions
    for i in range(len(stream)):
        x = pos[i]
        xt = tuple(x)
        c = _cell_of(xt, s)
        ok = True
        for off in offsets:
            bucket = cells.get(tuple(a + b for a, b in zip(c, off)))
            if not bucket:
                continue
            for y in bucket:
                dist2 = sum((a - b) ** 2 for a, b in zip(xt, y))
                if dist2 < r2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            cells.setdefault(c, []).append(xt)
            accepted_idx.append(i)
    accepted = pos[accepted_idx] if accepted_idx else np.zeros((0, stream.dimension))
    times = stream.times[accepted_idx] if accepted_idx else np.zeros(0)
    return ParkingResult(
        accepted=_result_config(accepted, stream.domain, stream.rho0, False),
        rejected=len(stream) - len(accepted_idx),
        saturation_time=float(times[-1]) if len(times) else 0.0,
        provenance="sequential-sweep",
        accepted_times=times,
    )


def park_graphical(stream: ArrivalStream) -> ParkingResult:
    """Root-peeling on the oriented overlap graph of the stream.

    Edges run from each arrival to every later overlapping arrival
    (equal times broken lexicographically).  Rounds alternate: accept
    the current roots, discard their offspring, repeat on the rest.
    """
    n = len(stream)
    pos = stream.positions
    r = 2.0 * stream.rho0
    if n == 0:
        src = dst = np.zeros(0, dtype=int)
    else:
        pairs = cKDTree(pos).query_pairs(r, output_type="ndarray")
        if len(pairs):
            d = np.linalg.norm(pos[pairs[:, 0]] - pos[pairs[:, 1]], axis=1)
            pairs = pairs[d < r]
        # stream order is the (time, lex) order, so i < j means i precedes j
        src = np.minimum(pairs[:, 0], pairs[:, 1]) if len(pairs) else np.zeros(0, int)
        dst = np.maximum(pairs[:, 0], pairs[:, 1]) if len(pairs) else np.zeros(0, int)

    alive = np.ones(n, dtype=bool)
    accepted = np.zeros(n, dtype=bool)
    while alive.any():
        live_edge = alive[src] & alive[dst]
        has_parent = np.zeros(n, dtype=bool)
        has_parent[dst[live_edge]] = True
        roots = alive & ~has_parent
        if not roots.any():  # cannot happen: the order is acyclic
            raise RuntimeError("graphical construction found no roots")
        off = np.zeros(n, dtype=bool)
        root_edge = live_edge & roots[src]
        off[dst[root_edge]] = True
        accepted |= roots
        alive &= ~(roots | off)

    idx = np.nonzero(accepted)[0]
    times = stream.times[idx] if len(idx) else np.zeros(0)
    return ParkingResult(
        accepted=_result_config(pos[idx], stream.domain, stream.rho0, False),
        rejected=n - len(idx),
        saturation_time=float(times.max()) if len(times) else 0.0,
        provenance="graphical-construction",
        accepted_times=times,
    )


# ---------------------------------------------------------------------------
# saturation engine


class _Cell:
    __slots__ = ("idx", "lo", "gen", "t_last", "pending", "voxels",
                 "voxel_arrays", "accepted")

    def __init__(self, idx, lo):
        self.idx = idx
        self.lo = lo
        self.gen = None
        self.t_last = 0.0
        self.pending = deque()       # (time, pos tuple), time-ordered
        self.voxels: list = []       # (lo tuple, hi tuple, depth)
        self.voxel_arrays = None
        self.accepted: list = []     # accepted position tuples in this cell


def _farthest_corner_sq(lo, hi, x) -> float:
    acc = 0.0
    for l, h, c in zip(lo, hi, x):
        m = max(abs(l - c), abs(h - c))
        acc += m * m
    return acc


def _nearest_point_sq(lo, hi, x) -> float:
    acc = 0.0
    for l, h, c in zip(lo, hi, x):
        if c < l:
            acc += (l - c) ** 2
        elif c > h:
            acc += (c - h) ** 2
    return acc


def _split_box(lo, hi):
    mids = tuple((l + h) / 2.0 for l, h in zip(lo, hi))
    d = len(lo)
    for sel in itertools.product((0, 1), repeat=d):
        clo = tuple(lo[k] if sel[k] == 0 else mids[k] for k in range(d))
        chi = tuple(mids[k] if sel[k] == 0 else hi[k] for k in range(d))
        yield clo, chi


class _SaturationEngine:
    def __init__(self, domain: Domain, rho0: float, rng: KeyedRng,
                 max_arrivals: int | None = None):
        if domain.volume <= 0:
            raise ValueError("domain must have positive volume")
        self.domain = domain
        self.rho0 = rho0
        self.s = 2.0 * rho0
        self.r2 = self.s * self.s
        self.rng = rng
        self.d = domain.dimension
        self.offsets = list(itertools.product((-1, 0, 1), repeat=self.d))
        self.cells: dict[tuple, _Cell] = {}
        self.heap: list = []
        self.accepted_pos: list = []
        self.accepted_t: list = []
        self.rejected = 0
        self.killed = 0
        self.max_depth_seen = 0
        self.depth_cap_hit = False
        self.max_arrivals = max_arrivals

    # -- voxel machinery ----------------------------------------------------

    def _neighbors_accepted(self, idx) -> list:
        pts = []
        for off in self.offsets:
            cell = self.cells.get(tuple(a + b for a, b in zip(idx, off)))
            if cell is not None and cell.accepted:
                pts.extend(cell.accepted)
        return pts

    def _refine(self, vox, ball, nearby, budget, out):
        """Carve ``ball`` out of voxel ``vox``; surviving pieces go to ``out``."""
        lo, hi, depth = vox
        self.max_depth_seen = max(self.max_depth_seen, depth)
        for y in nearby:
            if _farthest_corner_sq(lo, hi, y) < self.r2:
                self.killed += 1
                return
        if not self.domain.box_intersects(np.asarray(lo), np.asarray(hi)):
            self.killed += 1
            return
        if (ball is None or budget <= 0
                or _nearest_point_sq(lo, hi, ball) >= self.r2):
            if depth >= _MAX_VOXEL_DEPTH:
                self.depth_cap_hit = True
            out.append(vox)
            return
        if depth >= _MAX_VOXEL_DEPTH:
            self.depth_cap_hit = True
            out.append(vox)
            return
        for clo, chi in _split_box(lo, hi):
            self._refine((clo, chi, depth + 1), ball, nearby, budget - 1, out)

    def _update_voxels(self, idx, ball, budget):
        cell = self.cells.get(idx)
        if cell is None or not cell.voxels:
            return
        nearby = self._neighbors_accepted(idx)
        out: list = []
        for vox in cell.voxels:
            self._refine(vox, ball, nearby, budget, out)
        cell.voxels = out
        cell.voxel_arrays = None

    def _voxel_filter(self, cell, pts: np.ndarray) -> np.ndarray:
        if not cell.voxels:
            return np.zeros(len(pts), dtype=bool)
        if cell.voxel_arrays is None:
            los = np.array([v[0] for v in cell.voxels])
            his = np.array([v[1] for v in cell.voxels])
            cell.voxel_arrays = (los, his)
        los, his = cell.voxel_arrays
        inside = ((pts[:, None, :] >= los[None, :, :])
                  & (pts[:, None, :] <= his[None, :, :])).all(axis=2)
        return inside.any(axis=1)

    # -- arrival plumbing ---------------------------------------------------

    def _refill(self, cell: _Cell) -> bool:
        """Top up the pending queue; False when the cell has no live voxels."""
        if not cell.voxels:
            # every remaining arrival in a fully covered cell is a rejection
            self.rejected += len(cell.pending)
            cell.pending.clear()
            return False
        if cell.pending:
            return True
        if cell.gen is None:
            cell.gen = self.rng.stream("arr", self.rho0, cell.idx)
        chunk = _ARRIVAL_CHUNK0
        rate = self.s ** self.d
        while not cell.pending:
            times, pos = _arrival_chunk(cell.gen, cell.t_last, chunk,
                                        cell.lo, self.s, rate)
            cell.t_last = float(times[-1])
            in_dom = self.domain.contains(pos)
            live = self._voxel_filter(cell, pos) & in_dom
            self.rejected += int(in_dom.sum() - live.sum())
            for t, p in zip(times[live], pos[live]):
                cell.pending.append((float(t), tuple(p)))
            chunk = min(chunk * 2, _ARRIVAL_CHUNK_MAX)
        return True

    def _push_next(self, cell: _Cell):
        if self._refill(cell):
            t, p = cell.pending[0]
            heapq.heappush(self.heap, (t, p, cell.idx))

    # -- main loop ------------------------------------------------------------

    def run(self) -> ParkingResult:
        s = self.s
        for idx in _domain_cells(self.domain, s):
            lo = np.asarray(idx, dtype=float) * s
            cell = _Cell(idx, lo)
            cell.voxels = [(tuple(lo), tuple(lo + s), 0)]
            self.cells[idx] = cell
        for cell in self.cells.values():
            self._push_next(cell)

        processed = 0
        while self.heap:
            t, p, idx = heapq.heappop(self.heap)
            cell = self.cells[idx]
            if not cell.voxels:
                self.rejected += len(cell.pending)
                cell.pending.clear()
                continue
            if not cell.pending or cell.pending[0] != (t, p):
                # stale heap entry
                if cell.pending:
                    tq, pq = cell.pending[0]
                    heapq.heappush(self.heap, (tq, pq, idx))
                continue
            cell.pending.popleft()
            processed += 1
            if self.max_arrivals is not None and processed > self.max_arrivals:
                raise RuntimeError(
                    "saturation iteration cap reached "
                    f"({self.max_arrivals} arrivals); domain not certified")

            blocker = None
            for off in self.offsets:
                nb = self.cells.get(tuple(a + b for a, b in zip(idx, off)))
                if nb is None or not nb.accepted:
                    continue
                for y in nb.accepted:
                    dist2 = sum((a - b) ** 2 for a, b in zip(p, y))
                    if dist2 < self.r2:
                        blocker = y
                        break
                if blocker is not None:
                    break

            if blocker is None:
                cell.accepted.append(p)
                self.accepted_pos.append(p)
                self.accepted_t.append(t)
                for off in self.offsets:
                    nidx = tuple(a + b for a, b in zip(idx, off))
                    self._update_voxels(nidx, p, _ACCEPT_SPLIT_BUDGET)
            else:
                self.rejected += 1
                # rejection-driven refinement around the landing voxel keeps
                # covered slivers from pinning the cell alive forever
                self._update_voxels(idx, blocker, _REJECT_SPLIT_BUDGET)
            self._push_next(cell)

        pts = (np.asarray(self.accepted_pos)
               if self.accepted_pos else np.zeros((0, self.d)))
        cert = SaturationCertificate(
            coverage_radius=2.0 * self.rho0,
            cells=len(self.cells),
            voxels_killed=self.killed,
            max_depth=self.max_depth_seen,
            depth_cap_hit=self.depth_cap_hit,
        )
        return ParkingResult(
            accepted=_result_config(pts, self.domain, self.rho0, True),
            rejected=self.rejected,
            saturation_time=max(self.accepted_t) if self.accepted_t else 0.0,
            provenance="finite-box",
            certificate=cert,
            accepted_times=np.asarray(self.accepted_t),
        )


def park_to_saturation(domain: Domain, rho0: float, rng: KeyedRng,
                       max_arrivals: int | None = None) -> ParkingResult:
    """Parking measure of the domain, run to certified saturation.

    Arrivals are consumed strictly in time order (skipping only arrivals
    that land in regions already proven covered), so the output is the
    exact parking functional of the keyed space-time process; runs on
    nested domains with the same rng are coupled through that process.
    """
    return _SaturationEngine(domain, rho0, rng, max_arrivals).run()


def park_coupled_infinite(window: Domain, pad: float, rho0: float,
                          rng: KeyedRng) -> ParkingResult:
    """Approximation of the infinite-volume measure inside ``window``.

    Parks the padded domain to saturation and restricts to the window;
    by exponential stabilization the restriction agrees with the true
    infinite-volume measure once the pad exceeds a finite random radius.
    The pad is exposed so callers can grow it and watch the output stop
    changing.
    """
    if pad < 0:
        raise ValueError("pad must be nonnegative")
    padded = park_to_saturation(window.dilate(pad), rho0, rng)
    pts = padded.accepted.points
    keep = window.contains(pts) if len(pts) else np.zeros(0, bool)
    cfg = PointConfig(pts[keep], rho1=padded.accepted.rho1,
                      rho2=padded.accepted.rho2, domain=window,
                      coverage_bound=padded.accepted.coverage_bound)
    return ParkingResult(
        accepted=cfg,
        rejected=padded.rejected,
        saturation_time=padded.saturation_time,
        provenance=f"padded-coupled(pad={pad:g})",
        certificate=padded.certificate,
        accepted_times=(padded.accepted_times[keep]
                        if padded.accepted_times is not None else None),
    )
