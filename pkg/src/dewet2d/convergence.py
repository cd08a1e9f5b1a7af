"""Refinement studies and shape-distance metrics.

Errors between refinement levels use the one-sided node-to-polyline
distance (max over the coarse curve's nodes of the exact distance to the
finer curve), evaluated at common times by nodewise linear interpolation
between the two stored step snapshots that bracket the requested instant.
Orders are base-2 logarithms of consecutive error ratios under the
(h, tau) -> (h/2, tau/4) coupling.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .anisotropy import AnisotropyModel, PhysicalParams, winterbottom_shape
from .evolution import SimParams, Trajectory, run
from .geometry import Curve, enclosed_area, frames

__all__ = [
    "RefinementLadder",
    "ConvergenceReport",
    "interp_in_time",
    "linf_distance",
    "convergence_study",
    "equilibrium_compare",
]

_CHUNK = 4_000_000  # max pairwise-distance matrix entries held at once


@dataclass(frozen=True)
class RefinementLadder:
    """Geometric refinement plan: level i runs (n0 * 2^i, tau0 / 4^i)."""

    n0: int
    tau0: float
    levels: int

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"a ladder needs at least 2 levels, got {self.levels}")
        if self.n0 < 4:
            raise ValueError(f"base segment count too small: {self.n0}")
        if not self.tau0 > 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0}")

    def segments(self, i: int) -> int:
        return self.n0 * 2**i

    def tau(self, i: int) -> float:
        return self.tau0 / 4**i


@dataclass(frozen=True)
class ConvergenceReport:
    """Errors and orders of one refinement study.

    ``errors[k, i]`` is the distance between levels i and i+1 at
    ``times[k]``; ``orders[k, i]`` compares errors[k, i] and
    errors[k, i+1]. ``h`` and ``tau`` are per level. Failed levels are
    recorded in ``failures`` and excluded from the arrays (NaN entries).
    """

    times: tuple[float, ...]
    h: tuple[float, ...]
    tau: tuple[float, ...]
    errors: np.ndarray
    orders: np.ndarray
    config_hash: str
    failures: tuple[str, ...] = ()
    trajectories: tuple[Trajectory, ...] = field(default=(), repr=False)

    def __post_init__(self):
        finite = self.errors[np.isfinite(self.errors)]
        if finite.size and not np.all(finite > 0):
            raise ValueError("level errors must be positive")

    def csv_rows(self):
        """Rows (level, h, tau, t, error, order) for persistence."""
        rows = []
        for k, t in enumerate(self.times):
            for i in range(self.errors.shape[1]):
                order = self.orders[k, i - 1] if i >= 1 else math.nan
                rows.append(
                    (i, self.h[i], self.tau[i], t, self.errors[k, i], order)
                )
        return rows

    def format_text(self) -> str:
        lines = [f"config {self.config_hash[:12]}"]
        for k, t in enumerate(self.times):
            lines.append(f"t = {t:g}")
            for i in range(self.errors.shape[1]):
                order = "   --" if i == 0 else f"{self.orders[k, i - 1]:5.2f}"
                lines.append(
                    f"  h={self.h[i]:<10.4g} tau={self.tau[i]:<10.4g} "
                    f"error={self.errors[k, i]:<12.4e} order={order}"
                )
        for note in self.failures:
            lines.append(f"FAILED: {note}")
        return "\n".join(lines)


def interp_in_time(traj: Trajectory, t: float, island: int = 0) -> Curve:
    """Curve of one island at time t, nodewise-linear between snapshots."""
    snaps = [(ts, c) for ts, isl, c in traj.snapshots if isl == island]
    if not snaps:
        raise ValueError(f"trajectory has no snapshots for island {island}")
    snaps.sort(key=lambda p: p[0])
    times = np.array([ts for ts, _ in snaps])
    t0, t1 = times[0], times[-1]
    slack = 1e-12 * max(1.0, abs(t1))
    if t < t0 - slack or t > t1 + slack:
        raise ValueError(
            f"time {t:g} outside the recorded span [{t0:g}, {t1:g}]"
        )
    idx = int(np.searchsorted(times, t, side="left"))
    idx = min(idx, len(snaps) - 1)
    if abs(times[idx] - t) <= slack:
        return snaps[idx][1]
    if idx > 0 and abs(times[idx - 1] - t) <= slack:
        return snaps[idx - 1][1]
    lo_t, lo_c = snaps[idx - 1]
    hi_t, hi_c = snaps[idx]
    if lo_c.n_nodes != hi_c.n_nodes:
        raise ValueError(
            "bracketing snapshots changed node count; cannot interpolate"
        )
    w = (t - lo_t) / (hi_t - lo_t)
    nodes = (1.0 - w) * lo_c.nodes + w * hi_c.nodes
    if not lo_c.closed:
        nodes[0, 1] = 0.0
        nodes[-1, 1] = 0.0
    return Curve(nodes, closed=lo_c.closed)


def _polyline_segments(curve: Curve) -> tuple[np.ndarray, np.ndarray]:
    nodes = curve.nodes
    if curve.closed:
        a = nodes
        b = np.roll(nodes, -1, axis=0)
    else:
        a = nodes[:-1]
        b = nodes[1:]
    return a, b


def point_polyline_distances(points: np.ndarray, curve: Curve) -> np.ndarray:
    """Exact distance from each point to the piecewise-linear curve."""
    a, b = _polyline_segments(curve)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd > 0, dd, 1.0)
    pts = np.asarray(points, dtype=float)
    out = np.empty(len(pts))
    step = max(1, _CHUNK // max(1, len(a)))
    for start in range(0, len(pts), step):
        p = pts[start : start + step]
        # projection parameter of every point onto every segment
        w = p[:, None, :] - a[None, :, :]
        tpar = np.clip(np.einsum("psj,sj->ps", w, d) / dd, 0.0, 1.0)
        closest = a[None, :, :] + tpar[:, :, None] * d[None, :, :]
        diff = p[:, None, :] - closest
        dist2 = np.einsum("psj,psj->ps", diff, diff)
        out[start : start + step] = np.sqrt(dist2.min(axis=1))
    return out


def linf_distance(reference: Curve, coarse: Curve) -> float:
    """Max over the coarse curve's nodes of the distance to the reference.

    One-sided by construction: the reference is the finer discretization.
    """
    if reference.closed != coarse.closed:
        raise ValueError("cannot compare curves of different topology")
    return float(point_polyline_distances(coarse.nodes, reference).max())


def _study_hash(model, params, ladder, times, regime, extra) -> str:
    text = "|".join(
        [repr(model), repr(params), repr(ladder), repr(tuple(times)), str(regime), repr(extra)]
    )
    return hashlib.sha256(text.encode()).hexdigest()


def convergence_study(
    build: Callable[[int], Curve],
    model: AnisotropyModel,
    params: PhysicalParams,
    ladder: RefinementLadder,
    times: Sequence[float],
    regime: str | None = None,
    psi_c: float = 2.0,
    keep_trajectories: bool = False,
) -> ConvergenceReport:
    """Run the ladder and tabulate inter-level errors and orders.

    ``build(n)`` must return the initial curve at n segments. Equilibrium
    early-stopping is disabled so every level covers the full horizon.
    """
    times = tuple(sorted(float(t) for t in times))
    if not times or times[0] <= 0:
        raise ValueError("evaluation times must be positive")
    t_end = times[-1]
    trajs: list[Trajectory | None] = []
    failures: list[str] = []
    for i in range(ladder.levels):
        sim = SimParams(
            physical=params,
            tau=ladder.tau(i),
            t_end=t_end,
            n_segments=ladder.segments(i),
            psi_c=psi_c,
            equilibrium_tol=0.0,
            regime=regime,
            snapshot_stride=10**9,
        )
        try:
            traj = run(build(ladder.segments(i)), model, sim, record_times=times)
        except Exception as err:  # noqa: BLE001 - report partial ladder
            failures.append(f"level {i}: {err}")
            trajs.append(None)
            continue
        trajs.append(traj)

    n_err = ladder.levels - 1
    errors = np.full((len(times), n_err), np.nan)
    for k, t in enumerate(times):
        for i in range(n_err):
            if trajs[i] is None or trajs[i + 1] is None:
                continue
            coarse = interp_in_time(trajs[i], t)
            fine = interp_in_time(trajs[i + 1], t)
            errors[k, i] = linf_distance(fine, coarse)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log2(errors[:, :-1] / errors[:, 1:])

    perim = frames(build(ladder.n0)).total_length
    h = tuple(perim / ladder.segments(i) for i in range(ladder.levels))
    report = ConvergenceReport(
        times=times,
        h=h,
        tau=tuple(ladder.tau(i) for i in range(ladder.levels)),
        errors=errors,
        orders=orders,
        config_hash=_study_hash(model, params, ladder, times, regime, psi_c),
        failures=tuple(failures),
        trajectories=tuple(t for t in trajs if t is not None) if keep_trajectories else (),
    )
    return report


def equilibrium_compare(
    curve: Curve,
    model: AnisotropyModel,
    params: PhysicalParams,
    reference: Curve | None = None,
) -> float:
    """Symmetrized distance from a relaxed island to its ideal shape.

    The ideal shape is the substrate-truncated equilibrium construction at
    the island's area (or a caller-provided reference). Both shapes are
    recentered on their contact midpoints before comparison. A mass drift
    above 1% against the reference area triggers a warning.
    """
    if curve.closed:
        raise ValueError("equilibrium comparison applies to islands on the substrate")
    area = enclosed_area(curve)
    if reference is None:
        reference = winterbottom_shape(model, params, target_area=area)
    ref_area = enclosed_area(reference)
    if abs(area - ref_area) > 0.01 * ref_area:
        warnings.warn(
            f"area drift {abs(area - ref_area) / ref_area:.2%} between the "
            "relaxed island and the reference shape",
            stacklevel=2,
        )

    def centered(c: Curve) -> Curve:
        mid = 0.5 * (c.nodes[0, 0] + c.nodes[-1, 0])
        nodes = c.nodes.copy()
        nodes[:, 0] -= mid
        return Curve(nodes, closed=False)

    a = centered(curve)
    b = centered(reference)
    return max(linf_distance(b, a), linf_distance(a, b))
