"""Time-stepping driver: contact motion, stepping, pinch-off, monitors.

One island is an open or closed curve with its curvature and chemical
potential fields. Each step first moves the contact points by forward
Euler (open curves), then solves the coupled implicit system for the new
curve and fields. The driver tracks area, energy, mesh ratio and length,
detects pinch-off (an interior node touching the substrate) and splits
the island, and stops early when every island is numerically stationary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .anisotropy import AnisotropyModel, PhysicalParams, classify, gamma_eval, young_residual
from .fem import NodalField, assemble_strong, assemble_weak, init_fields, solve
from .geometry import Curve, enclosed_area, frames, mesh_ratio, redistribute, resample

__all__ = [
    "SimParams",
    "ContactState",
    "IslandState",
    "Event",
    "Trajectory",
    "NonFiniteStateError",
    "contact_update",
    "energy",
    "step",
    "detect_pinchoff",
    "split_curve",
    "run",
]

EQUILIBRIUM_STREAK = 100  # consecutive quiet steps that count as stationary
MIN_SPLIT_SEGMENTS = 8


@dataclass(frozen=True)
class SimParams:
    """Numerical parameters of a run (physical ones live in ``physical``).

    ``regime`` is normally derived from the energy model; setting it
    explicitly overrides the classification (the weak scheme on a strong
    model is ill-posed and only useful for demonstrations). The pinch-off
    tolerance defaults to 1e-6 times the initial film thickness when left
    unset.
    """

    physical: PhysicalParams = field(default_factory=PhysicalParams)
    tau: float = 1e-4
    t_end: float = 1.0
    n_segments: int | None = None  # used by config/presets to build curves
    psi_c: float = 2.0
    pinch_tol: float | None = None
    equilibrium_tol: float = 1e-6
    regime: str | None = None
    redistribute_weak: bool = False
    snapshot_stride: int = 100

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not self.psi_c > 1:
            raise ValueError(f"psi_c must exceed 1, got {self.psi_c}")
        if self.regime not in (None, "weak", "strong"):
            raise ValueError(f"regime must be weak or strong, got {self.regime!r}")

    def effective_regime(self, model: AnisotropyModel) -> str:
        if self.regime is not None:
            return self.regime
        return "strong" if classify(model) == "strong" else "weak"


@dataclass(frozen=True)
class ContactState:
    """Contact abscissae and dynamic contact angles of an open island."""

    x_left: float
    x_right: float
    theta_left: float
    theta_right: float

    def __post_init__(self):
        if not self.x_left < self.x_right:
            raise ValueError("left contact must lie left of the right contact")

    @staticmethod
    def from_curve(curve: Curve) -> "ContactState":
        f = frames(curve)
        return ContactState(
            x_left=float(curve.nodes[0, 0]),
            x_right=float(curve.nodes[-1, 0]),
            theta_left=float(f.theta[0]),
            theta_right=float(f.theta[-1]),
        )


@dataclass(frozen=True)
class IslandState:
    """One island's complete state at a time level."""

    curve: Curve
    kappa: NodalField
    mu: NodalField
    contact: ContactState | None

    @staticmethod
    def initial(curve: Curve, model: AnisotropyModel, params: PhysicalParams, regime: str):
        kappa, mu = init_fields(curve, model, params, regime)
        contact = None if curve.closed else ContactState.from_curve(curve)
        return IslandState(curve, kappa, mu, contact)


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    island: int
    data: dict


@dataclass(frozen=True)
class IslandRecord:
    island: int
    parent: int | None
    t_start: float
    t_end: float | None
    status: str  # evolving | equilibrium | pinched | collapsed
    final: IslandState | None


@dataclass(frozen=True)
class Trajectory:
    """Everything a run produced.

    Scalar series are sampled at every step (index aligned with ``times``);
    ``contacts`` has one (left, right) pair per island ever created, NaN
    where an island does not exist or is closed. Snapshots are (time,
    island id, curve) at the configured stride plus bracket times requested
    by the convergence harness.
    """

    times: np.ndarray
    area: np.ndarray
    energy: np.ndarray
    psi: np.ndarray
    length: np.ndarray
    contacts: np.ndarray
    snapshots: list[tuple[float, int, Curve]]
    events: list[Event]
    islands: list[IslandRecord]
    pinch_tol: float

    def __post_init__(self):
        if not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(self.area)):
            raise ValueError("trajectory area series contains non-finite values")

    def final_curves(self) -> list[Curve]:
        live = ("evolving", "equilibrium")
        return [r.final.curve for r in self.islands if r.final is not None and r.status in live]


class NonFiniteStateError(RuntimeError):
    """The solve produced non-finite geometry; carries the last good state."""

    def __init__(self, time: float, island: int, last_state: IslandState):
        self.time = time
        self.island = island
        self.last_state = last_state
        super().__init__(
            f"non-finite geometry for island {island} at t = {time:.6g}; "
            "last good state attached for diagnosis"
        )


def contact_update(
    curve: Curve,
    model: AnisotropyModel,
    params: PhysicalParams,
    tau: float,
    kappa_m: NodalField | None = None,
) -> tuple[float, float]:
    """Forward-Euler contact targets (a, b) for the next step.

    Dynamic contact angles are the forward-tangent angles of the first and
    last segments. When ``kappa_m`` is given (strong regime) the driving
    force includes the regularized term with the one-sided curvature
    derivative at each endpoint. Returns a >= b unchanged as the collapse
    signal; callers treat it as a terminal event.
    """
    if curve.closed:
        raise ValueError("contact update applies to open curves only")
    f = frames(curve)
    th_l = float(f.theta[0])
    th_r = float(f.theta[-1])
    if kappa_m is not None:
        k = kappa_m.values if isinstance(kappa_m, NodalField) else np.asarray(kappa_m)
        ks_l = (k[1] - k[0]) / f.length[0]
        ks_r = (k[-1] - k[-2]) / f.length[-1]
        f_l = young_residual(model, params, th_l, kappa_s=ks_l)
        f_r = young_residual(model, params, th_r, kappa_s=ks_r)
    else:
        f_l = young_residual(model, params, th_l)
        f_r = young_residual(model, params, th_r)
    a = float(curve.nodes[0, 0] + tau * params.eta * f_l)
    b = float(curve.nodes[-1, 0] - tau * params.eta * f_r)
    return a, b


def energy(
    curve: Curve,
    model: AnisotropyModel,
    sigma: float = 0.0,
    epsilon: float = 0.0,
    kappa: NodalField | None = None,
) -> float:
    """Discrete interfacial energy of one island.

    Surface term plus the substrate term -sigma (x_r - x_l) for open
    curves; with epsilon > 0 and a curvature field the regularization
    contribution (epsilon^2 / 2) <kappa, kappa> is added.
    """
    f = frames(curve)
    g, _, _ = gamma_eval(model, f.theta)
    w = float(np.sum(g * f.length))
    if not curve.closed:
        w -= sigma * (curve.nodes[-1, 0] - curve.nodes[0, 0])
    if epsilon > 0 and kappa is not None:
        k = kappa.values if isinstance(kappa, NodalField) else np.asarray(kappa)
        qL = np.concatenate([[0.0], f.length]) if not curve.closed else f.length[np.arange(len(k)) - 1]
        qR = np.concatenate([f.length, [0.0]]) if not curve.closed else f.length
        w += 0.5 * epsilon**2 * float(np.sum(0.5 * (qL + qR) * k * k))
    return w


def step(state: IslandState, model: AnisotropyModel, sim: SimParams):
    """Advance one island by one time step.

    Returns (new_state, displacement, events); new_state is None when the
    contacts crossed (island collapse). ``displacement`` is the maximum
    nodal movement of the solved update, measured before any
    redistribution so it reflects the physical velocity.
    """
    params = sim.physical
    regime = sim.effective_regime(model)
    events: list[tuple[str, dict]] = []
    curve = state.curve
    if curve.closed:
        targets = None
    else:
        kap = state.kappa if regime == "strong" else None
        a, b = contact_update(curve, model, params, sim.tau, kappa_m=kap)
        if a >= b:
            events.append(("island_collapse", {"area_lost": enclosed_area(curve)}))
            return None, 0.0, events
        targets = (a, b)
    if regime == "strong":
        system = assemble_strong(curve, state.kappa, targets, model, params, sim.tau)
    else:
        system = assemble_weak(curve, targets, model, sim.tau)
    solution = solve(system)
    nodes, mu, kappa = system.layout.unpack(solution)
    if not np.all(np.isfinite(nodes)):
        raise NonFiniteStateError(math.nan, -1, state)  # rewrapped by run()
    displacement = float(np.hypot(*(nodes - curve.nodes).T).max())
    new_curve = Curve(nodes, closed=curve.closed)
    psi = mesh_ratio(new_curve)
    if psi > sim.psi_c and (regime == "strong" or sim.redistribute_weak):
        new_curve = redistribute(new_curve)
        kfield, mfield = init_fields(new_curve, model, params, regime)
        events.append(("redistribute", {"psi_before": psi}))
    else:
        kfield, mfield = NodalField(kappa), NodalField(mu)
    contact = None if new_curve.closed else ContactState.from_curve(new_curve)
    return IslandState(new_curve, kfield, mfield, contact), displacement, events


def detect_pinchoff(curve: Curve, tol: float):
    """Smallest interior node index whose height is at or below ``tol``."""
    if curve.closed:
        return None
    y = curve.nodes[1:-1, 1]
    hits = np.flatnonzero(y <= tol)
    return int(hits[0]) + 1 if hits.size else None


def split_curve(curve: Curve, j: int, renode: bool = True):
    """Split an open curve at interior node j into two islands.

    The node is projected onto the substrate and duplicated as the right
    contact of the left part and the left contact of the right part. With
    ``renode`` each surviving part is resampled to its proportional share
    of the original segment count (at least 8 segments). A raw part with
    fewer than 4 segments is dropped (merged into the contact); the
    corresponding entry of the returned pair is None.
    """
    if curve.closed:
        raise ValueError("only open curves can pinch off")
    if not 0 < j < curve.n_nodes - 1:
        raise ValueError(f"split index {j} is not interior")
    nodes = curve.nodes.copy()
    nodes[j, 1] = 0.0
    left_nodes = nodes[: j + 1]
    right_nodes = nodes[j:]

    def build(part_nodes):
        if part_nodes.shape[0] - 1 < 4:
            return None
        pn = part_nodes.copy()
        pn[0, 1] = 0.0
        pn[-1, 1] = 0.0
        return Curve(pn, closed=False)

    left = build(left_nodes)
    right = build(right_nodes)
    if renode and left is not None and right is not None:
        total = curve.n_segments
        l_len = frames(left).total_length
        r_len = frames(right).total_length
        share = int(round(total * l_len / (l_len + r_len)))
        n_left = max(MIN_SPLIT_SEGMENTS, share)
        n_right = max(MIN_SPLIT_SEGMENTS, total - share)
        left = resample(left, n_left)
        right = resample(right, n_right)
    elif renode:
        survivor = left if left is not None else right
        if survivor is not None and survivor.n_segments < MIN_SPLIT_SEGMENTS:
            survivor = resample(survivor, MIN_SPLIT_SEGMENTS)
            if left is not None:
                left = survivor
            else:
                right = survivor
    return left, right


@dataclass
class _Island:
    """Mutable per-island bookkeeping inside run()."""

    id: int
    parent: int | None
    state: IslandState
    t_start: float
    streak: int = 0
    status: str = "evolving"
    t_end: float | None = None


def run(
    initial: Curve,
    model: AnisotropyModel,
    sim: SimParams,
    record_times=(),
) -> Trajectory:
    """Evolve an initial island until t_end or global equilibrium.

    ``record_times`` requests curve snapshots at the steps bracketing each
    listed time (for exact-in-time comparisons); snapshots are also taken
    at t = 0, every ``snapshot_stride`` steps, around every event, and at
    the end.
    """
    params = sim.physical
    regime = sim.effective_regime(model)
    if regime == "strong" and params.epsilon <= 0:
        raise ValueError("strong regime requires epsilon > 0")
    thickness = float(initial.nodes[:, 1].max() - (0.0 if not initial.closed else initial.nodes[:, 1].min()))
    pinch_tol = sim.pinch_tol if sim.pinch_tol is not None else 1e-6 * thickness

    islands: list[_Island] = [
        _Island(0, None, IslandState.initial(initial, model, params, regime), 0.0)
    ]
    next_id = 1

    n_steps = int(math.ceil(sim.t_end / sim.tau - 1e-12))
    record_steps: set[int] = set()
    for t_r in record_times:
        base = int(math.floor(t_r / sim.tau + 1e-12))
        record_steps.update((base, base + 1))

    times = [0.0]
    snapshots: list[tuple[float, int, Curve]] = []
    events: list[Event] = []
    series: list[tuple[float, float, float, float]] = []
    contact_rows: list[dict[int, tuple[float, float]]] = []

    def monitor_row():
        a_tot = w_tot = l_tot = 0.0
        psi_max = 1.0
        row: dict[int, tuple[float, float]] = {}
        for isl in islands:
            # pinched islands were replaced by their children; counting
            # them again would double the totals
            if isl.status in ("collapsed", "pinched"):
                continue
            st = isl.state
            a_tot += enclosed_area(st.curve)
            w_tot += energy(
                st.curve,
                model,
                sigma=params.sigma,
                epsilon=params.epsilon if regime == "strong" else 0.0,
                kappa=st.kappa,
            )
            l_tot += frames(st.curve).total_length
            psi_max = max(psi_max, mesh_ratio(st.curve))
            if st.contact is not None:
                row[isl.id] = (st.contact.x_left, st.contact.x_right)
        series.append((a_tot, w_tot, psi_max, l_tot))
        contact_rows.append(row)

    def snapshot_all(t):
        for isl in islands:
            if isl.status in ("evolving", "equilibrium"):
                snapshots.append((t, isl.id, isl.state.curve))

    monitor_row()
    snapshot_all(0.0)

    t = 0.0
    for m in range(1, n_steps + 1):
        t = m * sim.tau
        active = [i for i in islands if i.status == "evolving"]
        if not active:
            break
        for isl in active:
            try:
                new_state, disp, step_events = step(isl.state, model, sim)
            except NonFiniteStateError as err:
                raise NonFiniteStateError(t, isl.id, err.last_state) from None
            for kind, data in step_events:
                events.append(Event(t, kind, isl.id, data))
            if new_state is None:
                isl.status = "collapsed"
                isl.t_end = t
                continue
            isl.state = new_state
            if disp / sim.tau <= sim.equilibrium_tol:
                isl.streak += 1
            else:
                isl.streak = 0
            if isl.streak >= EQUILIBRIUM_STREAK:
                isl.status = "equilibrium"
                isl.t_end = t
                events.append(Event(t, "equilibrium", isl.id, {}))
                continue
            jpinch = None if new_state.curve.closed else detect_pinchoff(new_state.curve, pinch_tol)
            if jpinch is not None:
                x_pinch = float(new_state.curve.nodes[jpinch, 0])
                left, right = split_curve(new_state.curve, jpinch)
                lost = enclosed_area(new_state.curve)
                for part in (left, right):
                    if part is not None:
                        lost -= enclosed_area(part)
                events.append(
                    Event(t, "pinch_off", isl.id, {"x": x_pinch, "area_lost": lost})
                )
                isl.status = "pinched"
                isl.t_end = t
                for part in (left, right):
                    if part is None:
                        continue
                    child = _Island(
                        next_id,
                        isl.id,
                        IslandState.initial(part, model, params, regime),
                        t,
                    )
                    islands.append(child)
                    next_id += 1
                snapshot_all(t)
        times.append(t)
        monitor_row()
        if m in record_steps or m % sim.snapshot_stride == 0 or m == n_steps:
            snapshot_all(t)

    if times[-1] != 0.0:
        snapshot_all(times[-1])

    records = [
        IslandRecord(
            i.id,
            i.parent,
            i.t_start,
            i.t_end,
            i.status,
            None if i.status == "collapsed" else i.state,
        )
        for i in islands
    ]
    all_ids = [i.id for i in islands]
    contacts = np.full((len(times), len(all_ids), 2), np.nan)
    for row_idx, row in enumerate(contact_rows):
        for isl_id, pair in row.items():
            contacts[row_idx, all_ids.index(isl_id)] = pair
    arr = np.asarray(series)
    # drop exact-duplicate trailing snapshot entries
    seen = set()
    unique_snaps = []
    for t_s, isl_id, curve in snapshots:
        key = (t_s, isl_id)
        if key not in seen:
            seen.add(key)
            unique_snaps.append((t_s, isl_id, curve))
    return Trajectory(
        times=np.asarray(times),
        area=arr[:, 0],
        energy=arr[:, 1],
        psi=arr[:, 2],
        length=arr[:, 3],
        contacts=contacts,
        snapshots=unique_snaps,
        events=events,
        islands=records,
        pinch_tol=pinch_tol,
    )
