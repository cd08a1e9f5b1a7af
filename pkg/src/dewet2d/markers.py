"""Explicit marker-particle integrator used as an independent cross-check.

This module advances the same sharp-interface motion as the implicit solver
but with a method sharing no code with it: curvature from arc-length central
differences of the marker positions, the chemical potential evaluated
nodally from the closed-form energy density, and a forward Euler move of
each marker along its normal by the surface Laplacian of that potential.
Contact points of open chains follow the same forward-Euler force balance
as the main scheme. The chain is re-equidistributed by arc length after
every step, which is the classical hygiene that keeps explicit marker
methods alive.

The explicit step is only conditionally stable: the fourth-order operator
bounds the usable step by tau <= c h^4 with c about 1/(8 S) for maximum
surface stiffness S (von Neumann count for the five-point biharmonic
stencil). :func:`marker_step` accepts the documented default c = 0.1 and
refuses larger steps; :func:`marker_run` picks its step adaptively with a
0.8 safety factor against that bound, so shrinking chains stay stable.

Weak regime only: the corner-regularized potential would demand a fifth
derivative of position from the markers, which three-point stencils cannot
deliver at any useful accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .anisotropy import AnisotropyModel, PhysicalParams, gamma_eval, young_residual
from .geometry import Curve

__all__ = [
    "MarkerChain",
    "MarkerInstabilityError",
    "MarkerRun",
    "STABILITY_FACTOR",
    "stable_step_factor",
    "marker_step",
    "marker_run",
]

# Documented default for the step bound tau_e <= STABILITY_FACTOR * h^4.
# Safe as-is for isotropic energy; anisotropic runs must divide by the
# maximum surface stiffness (see stable_step_factor).
STABILITY_FACTOR = 0.1

try:  # pragma: no cover - exercised indirectly through marker_run
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


class MarkerInstabilityError(RuntimeError):
    """The explicit step moved a marker farther than one mesh spacing."""


@dataclass(frozen=True)
class MarkerChain:
    """Ordered marker positions with the same topology rules as curves.

    Open chains keep both endpoints exactly on the substrate line y = 0
    with x increasing; closed chains store each marker once and are
    traversed with the material on the right. Validation is delegated to
    the curve type so the two representations can never drift apart.
    """

    points: np.ndarray
    closed: bool = field(default=False)

    def __post_init__(self):
        curve = Curve(self.points, closed=self.closed)
        object.__setattr__(self, "points", curve.nodes)

    @property
    def n_markers(self) -> int:
        return self.points.shape[0]

    @property
    def n_segments(self) -> int:
        return self.points.shape[0] if self.closed else self.points.shape[0] - 1

    def as_curve(self) -> Curve:
        return Curve(self.points, closed=self.closed)

    @classmethod
    def from_curve(cls, curve: Curve) -> "MarkerChain":
        return cls(curve.nodes, closed=curve.closed)


@dataclass(frozen=True)
class MarkerRun:
    """Outcome of an adaptive marker integration."""

    chain: MarkerChain
    t_final: float
    steps: int
    pinched: bool = False
    pinch_time: float | None = None


def stable_step_factor(model: AnisotropyModel) -> float:
    """Step-bound constant c in tau <= c h^4 for this energy model.

    The explicit operator amplifies the shortest resolved mode by about
    8 S tau / h^4 with S the largest surface stiffness, so c = 0.1 / S
    keeps a 0.8 safety margin against the bound 1/(8 S). Isotropic energy
    recovers the documented default 0.1.
    """
    smax = _max_stiffness(model)
    return STABILITY_FACTOR / smax


def _max_stiffness(model: AnisotropyModel) -> float:
    if model.is_isotropic():
        return 1.0
    if model.has_kfold and not model.has_cusps:
        return 1.0 + model.beta * (model.k**2 - 1.0)
    th = np.linspace(-math.pi, math.pi, 4096, endpoint=False)
    g, _, g2 = gamma_eval(model, th)
    return float(np.max(g + g2))


def _fields(pts: np.ndarray, closed: bool, model: AnisotropyModel):
    """Per-marker normal, potential and curvature from three-point stencils.

    Returns (normal, mu, kappa, seg) where seg holds the chord lengths.
    Interior markers use the nonuniform central-difference first and second
    derivatives in arc length; kappa = -X_ss . n with the outward normal
    n = (-x'_y, x'_x). Open chains copy the potential and curvature of the
    first interior marker to each endpoint; for the potential this is the
    zero-flux closure matching the conservative boundary of the implicit
    scheme. The kappa array is indexed per marker (ends included when open)
    and feeds the curvature-aware resampler.
    """
    if closed:
        fwd = np.roll(pts, -1, axis=0) - pts
    else:
        fwd = np.diff(pts, axis=0)
    seg = np.hypot(fwd[:, 0], fwd[:, 1])
    if closed:
        a = np.roll(seg, 1)[:, None]
        b = seg[:, None]
        nxt = np.roll(pts, -1, axis=0)
        prv = np.roll(pts, 1, axis=0)
        cur = pts
    else:
        a = seg[:-1, None]
        b = seg[1:, None]
        nxt = pts[2:]
        prv = pts[:-2]
        cur = pts[1:-1]
    denom = a * b * (a + b)
    xp = (a**2 * nxt - b**2 * prv + (b**2 - a**2) * cur) / denom
    xpp = 2.0 * (a * nxt + b * prv - (a + b) * cur) / denom
    norm = np.hypot(xp[:, 0], xp[:, 1])[:, None]
    tang = xp / norm
    normal = np.column_stack([-tang[:, 1], tang[:, 0]])
    kappa = -(xpp[:, 0] * normal[:, 0] + xpp[:, 1] * normal[:, 1])
    theta = np.arctan2(tang[:, 1], tang[:, 0])
    g, _, g2 = gamma_eval(model, theta)
    mu_core = (g + g2) * kappa
    if closed:
        return normal, mu_core, kappa, seg
    mu = np.empty(pts.shape[0])
    mu[1:-1] = mu_core
    mu[0] = mu[1]
    mu[-1] = mu[-2]
    kap = np.empty(pts.shape[0])
    kap[1:-1] = kappa
    kap[0] = kap[1]
    kap[-1] = kap[-2]
    return normal, mu, kap, seg


def _step_arrays(
    pts: np.ndarray,
    closed: bool,
    model: AnisotropyModel,
    params: PhysicalParams,
    tau_e: float,
):
    """One explicit move without re-equidistribution.

    Returns (new_pts, max_displacement, min_segment, kappa).
    """
    normal, mu, kappa, seg = _fields(pts, closed, model)
    if closed:
        a = np.roll(seg, 1)
        b = seg
        mu_ss = 2.0 * (
            a * np.roll(mu, -1) + b * np.roll(mu, 1) - (a + b) * mu
        ) / (a * b * (a + b))
        disp = tau_e * mu_ss[:, None] * normal
        new_pts = pts + disp
    else:
        a = seg[:-1]
        b = seg[1:]
        mu_ss = 2.0 * (a * mu[2:] + b * mu[:-2] - (a + b) * mu[1:-1]) / (
            a * b * (a + b)
        )
        new_pts = pts.copy()
        new_pts[1:-1] += tau_e * mu_ss[:, None] * normal
        th_l = math.atan2(pts[1, 1] - pts[0, 1], pts[1, 0] - pts[0, 0])
        th_r = math.atan2(pts[-1, 1] - pts[-2, 1], pts[-1, 0] - pts[-2, 0])
        f_l = float(young_residual(model, params, th_l))
        f_r = float(young_residual(model, params, th_r))
        new_pts[0, 0] = pts[0, 0] + tau_e * params.eta * f_l
        new_pts[-1, 0] = pts[-1, 0] - tau_e * params.eta * f_r
        new_pts[0, 1] = 0.0
        new_pts[-1, 1] = 0.0
        disp = new_pts - pts
    max_disp = float(np.max(np.hypot(disp[:, 0], disp[:, 1])))
    return new_pts, max_disp, float(seg.min()), kappa


def marker_step(
    chain: MarkerChain,
    model: AnisotropyModel,
    params: PhysicalParams,
    tau_e: float,
    c: float = STABILITY_FACTOR,
) -> MarkerChain:
    """Advance the chain by one explicit step of size ``tau_e``.

    The step must satisfy tau_e <= c h^4 with h the current minimum
    segment length; the default c = 0.1 is adequate for isotropic energy
    and callers with anisotropy should pass :func:`stable_step_factor`.
    The chain is re-equidistributed by arc length before returning.

    Raises
    ------
    ValueError
        If ``tau_e`` violates the step bound.
    MarkerInstabilityError
        If any marker moves farther than one mesh spacing, the signature
        of a step past the stability limit.
    """
    if tau_e <= 0.0:
        raise ValueError(f"step size must be > 0, got {tau_e}")
    pts = chain.points
    if chain.closed:
        fwd = np.roll(pts, -1, axis=0) - pts
    else:
        fwd = np.diff(pts, axis=0)
    h = float(np.hypot(fwd[:, 0], fwd[:, 1]).min())
    if tau_e > c * h**4:
        raise ValueError(
            f"step {tau_e:.3e} exceeds the stability bound {c:g} h^4 = "
            f"{c * h**4:.3e} at h = {h:.3e}"
        )
    new_pts, max_disp, h_min, kappa = _step_arrays(
        pts, chain.closed, model, params, tau_e
    )
    if not max_disp <= h_min:
        raise MarkerInstabilityError(
            f"marker moved {max_disp:.3e}, past the mesh spacing {h_min:.3e}"
        )
    try:
        return MarkerChain(
            _resample_arrays(new_pts, chain.closed, kappa), closed=chain.closed
        )
    except ValueError as err:
        raise MarkerInstabilityError(f"chain degenerated: {err}") from err


def _resample_arrays(pts: np.ndarray, closed: bool, kappa: np.ndarray) -> np.ndarray:
    """Arc-length re-equidistribution with a curvature-corrected interpolant.

    New markers land on the local parabolic arc rather than the chord: a
    marker at fraction w of a span of length l is lifted off the chord by
    kbar l^2 w(1 - w) / 2 along the chord's outward normal, kbar being the
    mean signed curvature of the span's endpoints. Plain chordal
    interpolation trims a sliver off every convex span each step, and with
    steps this small the accumulated bite dominates the area budget; the
    parabolic lift removes it at leading order. Spans whose targets
    coincide with existing markers (w = 0 or 1) are reproduced exactly.
    """
    if closed:
        table = np.vstack([pts, pts[:1]])
        kap = np.concatenate([kappa, kappa[:1]])
    else:
        table = pts
        kap = kappa
    chord = np.diff(table, axis=0)
    seg = np.hypot(chord[:, 0], chord[:, 1])
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    n = pts.shape[0] if closed else pts.shape[0] - 1
    if closed:
        targets = total * np.arange(n) / n
    else:
        targets = total * np.arange(n + 1) / n
    pos = np.minimum(np.searchsorted(s, targets, side="right") - 1, len(seg) - 1)
    pos = np.maximum(pos, 0)
    w = (targets - s[pos]) / seg[pos]
    out = table[pos] + w[:, None] * chord[pos]
    kbar = 0.5 * (kap[pos] + kap[pos + 1])
    lift = 0.5 * kbar * seg[pos] ** 2 * w * (1.0 - w)
    n_chord = np.column_stack([-chord[:, 1], chord[:, 0]]) / seg[:, None]
    out += lift[:, None] * n_chord[pos]
    out[0] = table[0]
    if not closed:
        out[-1] = table[-1]
        out[0, 1] = 0.0
        out[-1, 1] = 0.0
    return out


def _run_python(
    pts: np.ndarray,
    closed: bool,
    model: AnisotropyModel,
    params: PhysicalParams,
    t_end: float,
    c: float,
    stop_on_pinch: bool,
    pinch_frac: float,
    pinch_tol: float,
    max_steps: int,
):
    """Reference driver loop; handles every energy model."""
    t = 0.0
    for step in range(max_steps):
        if closed:
            fwd = np.roll(pts, -1, axis=0) - pts
        else:
            fwd = np.diff(pts, axis=0)
        h = float(np.hypot(fwd[:, 0], fwd[:, 1]).min())
        if stop_on_pinch:
            tol = pinch_tol if pinch_tol > 0.0 else pinch_frac * h
            if float(pts[1:-1, 1].min()) <= tol:
                return pts, t, step, 2
        tau = min(c * h**4, t_end - t)
        if tau <= 0.0:
            return pts, t, step, 0
        new_pts, max_disp, h_min, kappa = _step_arrays(pts, closed, model, params, tau)
        if not max_disp <= h_min:
            return pts, t, step, 1
        if not closed and not new_pts[0, 0] < new_pts[-1, 0]:
            return pts, t, step, 3
        pts = _resample_arrays(new_pts, closed, kappa)
        t += tau
    return pts, t, max_steps, 4


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _run_kfold(
        pts, closed, beta, k, phi, sigma, eta, t_end, c, stop_on_pinch,
        pinch_frac, pinch_tol, max_steps,
    ):  # pragma: no cover - compiled path, checked against _run_python
        m = pts.shape[0]
        n_seg = m if closed else m - 1
        seg = np.empty(n_seg)
        mu = np.empty(m)
        kap = np.empty(m)
        nx = np.empty(m)
        ny = np.empty(m)
        disp = np.empty(m)
        s = np.empty(n_seg + 1)
        tx = np.empty(n_seg + 1)
        ty = np.empty(n_seg + 1)
        kapt = np.empty(n_seg + 1)
        scale = 1.0 - k * k
        t = 0.0
        step = 0
        while step < max_steps:
            h = 1e300
            for i in range(n_seg):
                j = (i + 1) % m
                dx = pts[j, 0] - pts[i, 0]
                dy = pts[j, 1] - pts[i, 1]
                seg[i] = math.hypot(dx, dy)
                if seg[i] < h:
                    h = seg[i]
            if stop_on_pinch:
                tol = pinch_tol if pinch_tol > 0.0 else pinch_frac * h
                ylow = 1e300
                for i in range(1, m - 1):
                    if pts[i, 1] < ylow:
                        ylow = pts[i, 1]
                if ylow <= tol:
                    return pts, t, step, 2
            tau = c * h * h * h * h
            if t_end - t < tau:
                tau = t_end - t
            if tau <= 0.0:
                return pts, t, step, 0
            lo = 0 if closed else 1
            hi = m if closed else m - 1
            for i in range(lo, hi):
                ia = (i - 1) % m
                a = seg[ia]
                b = seg[i % n_seg] if closed else seg[i]
                den = a * b * (a + b)
                jn = (i + 1) % m
                jp = (i - 1) % m
                a2 = a * a
                b2 = b * b
                xpx = (a2 * pts[jn, 0] - b2 * pts[jp, 0] + (b2 - a2) * pts[i, 0]) / den
                xpy = (a2 * pts[jn, 1] - b2 * pts[jp, 1] + (b2 - a2) * pts[i, 1]) / den
                xppx = 2.0 * (a * pts[jn, 0] + b * pts[jp, 0] - (a + b) * pts[i, 0]) / den
                xppy = 2.0 * (a * pts[jn, 1] + b * pts[jp, 1] - (a + b) * pts[i, 1]) / den
                norm = math.hypot(xpx, xpy)
                txi = xpx / norm
                tyi = xpy / norm
                nx[i] = -tyi
                ny[i] = txi
                kap[i] = -(xppx * nx[i] + xppy * ny[i])
                theta = math.atan2(tyi, txi)
                stiff = 1.0 + beta * scale * math.cos(k * (theta + phi))
                mu[i] = stiff * kap[i]
            if not closed:
                mu[0] = mu[1]
                mu[m - 1] = mu[m - 2]
                kap[0] = kap[1]
                kap[m - 1] = kap[m - 2]
            max_disp = 0.0
            for i in range(lo, hi):
                ia = (i - 1) % m
                a = seg[ia]
                b = seg[i % n_seg] if closed else seg[i]
                jn = (i + 1) % m
                jp = (i - 1) % m
                mss = 2.0 * (a * mu[jn] + b * mu[jp] - (a + b) * mu[i]) / (
                    a * b * (a + b)
                )
                disp[i] = tau * mss
                d = abs(disp[i])
                if not d <= h:
                    return pts, t, step, 1
                if d > max_disp:
                    max_disp = d
            if not closed:
                thl = math.atan2(pts[1, 1] - pts[0, 1], pts[1, 0] - pts[0, 0])
                thr = math.atan2(
                    pts[m - 1, 1] - pts[m - 2, 1], pts[m - 1, 0] - pts[m - 2, 0]
                )
                gl = 1.0 + beta * math.cos(k * (thl + phi))
                g1l = -beta * k * math.sin(k * (thl + phi))
                gr = 1.0 + beta * math.cos(k * (thr + phi))
                g1r = -beta * k * math.sin(k * (thr + phi))
                fl = gl * math.cos(thl) - g1l * math.sin(thl) - sigma
                fr = gr * math.cos(thr) - g1r * math.sin(thr) - sigma
                da = tau * eta * fl
                db = -tau * eta * fr
                if not abs(da) <= h or not abs(db) <= h:
                    return pts, t, step, 1
                xa = pts[0, 0] + da
                xb = pts[m - 1, 0] + db
                if not xa < xb:
                    return pts, t, step, 3
                pts[0, 0] = xa
                pts[m - 1, 0] = xb
            for i in range(lo, hi):
                pts[i, 0] += disp[i] * nx[i]
                pts[i, 1] += disp[i] * ny[i]
            # arc-length re-equidistribution on the moved polyline
            # re-equidistribution on the moved polyline; new markers are
            # lifted off each chord onto the local parabolic arc so convex
            # spans are not trimmed every step (see _resample_arrays)
            s[0] = 0.0
            x0 = pts[0, 0]
            y0 = pts[0, 1]
            tx[0] = x0
            ty[0] = y0
            kapt[0] = kap[0]
            for i in range(n_seg):
                j = (i + 1) % m
                dx = pts[j, 0] - pts[i, 0]
                dy = pts[j, 1] - pts[i, 1]
                s[i + 1] = s[i] + math.hypot(dx, dy)
                tx[i + 1] = pts[j, 0]
                ty[i + 1] = pts[j, 1]
                kapt[i + 1] = kap[j]
            total = s[n_seg]
            if not total > 0.0 or not np.isfinite(total):
                return pts, t, step, 1
            pos = 0
            for i in range(1, m if closed else m - 1):
                target = total * i / n_seg
                while s[pos + 1] < target and pos < n_seg - 1:
                    pos += 1
                span = s[pos + 1] - s[pos]
                w = (target - s[pos]) / span
                lift = 0.5 * (kapt[pos] + kapt[pos + 1]) * 0.5 * span * span * w * (1.0 - w)
                pts[i, 0] = tx[pos] + w * (tx[pos + 1] - tx[pos]) - lift * (
                    ty[pos + 1] - ty[pos]
                ) / span
                pts[i, 1] = ty[pos] + w * (ty[pos + 1] - ty[pos]) + lift * (
                    tx[pos + 1] - tx[pos]
                ) / span
            pts[0, 0] = x0
            pts[0, 1] = y0 if closed else 0.0
            if not closed:
                pts[m - 1, 1] = 0.0
            t += tau
            step += 1
        return pts, t, max_steps, 4


def marker_run(
    chain: MarkerChain,
    model: AnisotropyModel,
    params: PhysicalParams,
    t_end: float,
    c: float | None = None,
    stop_on_pinch: bool = False,
    pinch_tol: float | None = None,
    max_steps: int = 50_000_000,
    force_python: bool = False,
) -> MarkerRun:
    """Integrate the chain to ``t_end`` with an adaptive explicit step.

    Each step uses tau = c h^4 with h the current minimum segment length
    and c defaulting to :func:`stable_step_factor`, re-checking h after
    every re-equidistribution so shrinking chains never outrun the bound.
    With ``stop_on_pinch`` (open chains only) the run returns as soon as
    an interior marker drops to the pinch tolerance, by default half a
    mesh spacing: a thinner neck is below what the chain can represent.

    Smooth k-fold and isotropic energies run in a compiled kernel when
    numba is importable; other models (and ``force_python``) take the
    vectorized numpy path with identical arithmetic.
    """
    if t_end <= 0.0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    if stop_on_pinch and chain.closed:
        raise ValueError("pinch detection applies to open chains only")
    if c is None:
        c = stable_step_factor(model)
    if not 0.0 < c <= STABILITY_FACTOR:
        raise ValueError(f"stability factor must lie in (0, {STABILITY_FACTOR}], got {c}")
    pinch_frac = 0.5
    tol = float(pinch_tol) if pinch_tol is not None else 0.0
    fast = _HAVE_NUMBA and not force_python and not model.has_cusps
    if fast:
        beta = model.beta if model.has_kfold else 0.0
        k = float(model.k) if model.has_kfold else 2.0
        phi = model.phi if model.has_kfold else 0.0
        pts, t, steps, status = _run_kfold(
            chain.points.copy(), chain.closed, beta, k, phi,
            params.sigma, params.eta, float(t_end), float(c),
            stop_on_pinch, pinch_frac, tol, max_steps,
        )
    else:
        pts, t, steps, status = _run_python(
            chain.points.copy(), chain.closed, model, params, float(t_end),
            float(c), stop_on_pinch, pinch_frac, tol, max_steps,
        )
    if status == 1:
        raise MarkerInstabilityError(
            f"explicit step went unstable at t = {t:.6g} (step {steps})"
        )
    if status == 3:
        raise RuntimeError(f"contact points crossed at t = {t:.6g} (step {steps})")
    if status == 4:
        raise RuntimeError(f"step budget {max_steps} exhausted at t = {t:.6g}")
    out = MarkerChain(pts, closed=chain.closed)
    if status == 2:
        return MarkerRun(out, t, steps, pinched=True, pinch_time=t)
    return MarkerRun(out, t, steps)
