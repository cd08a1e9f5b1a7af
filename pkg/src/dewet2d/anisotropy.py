"""Orientation-dependent surface energies and their reference shapes.

The energy density gamma(theta) is a function of the tangent angle theta of
the interface. Supported families:

* isotropic              gamma = 1
* k-fold                 gamma = 1 + beta cos(k (theta + phi))
* cusp sum               gamma = sum_i sqrt(delta^2 + (1 - delta^2) sin^2(theta - alpha_i))
* k-fold plus cusp sum   gamma = 1 + beta cos(k (theta + phi)) + cusp sum

The cusp families are the smoothed C2 versions of sum_i |sin(theta - alpha_i)|;
delta in (0, 1) is the smoothing parameter and the solver only ever sees the
smoothed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Curve, enclosed_area

__all__ = [
    "AnisotropyModel",
    "PhysicalParams",
    "gamma_eval",
    "classify",
    "young_residual",
    "young_height_range",
    "validate_sigma",
    "wulff_shape",
    "winterbottom_shape",
]

# Dense sampling used for positivity / stiffness-sign checks on the families
# without an analytic criterion.
_SCAN_POINTS = 8192
# Support-function slack for the inner-envelope filter of the Wulff shape.
_ENVELOPE_TOL = 1e-9


@dataclass(frozen=True)
class AnisotropyModel:
    """Parameters of the surface-energy density.

    ``beta = 0`` with no cusp angles is the isotropic model. Non-empty
    ``cusp_angles`` selects the smoothed cusp sum; together with
    ``beta > 0`` it selects the combined family, which keeps the constant
    background term. A pure cusp sum has no background term.
    """

    beta: float = 0.0
    k: int = 4
    phi: float = 0.0
    cusp_angles: tuple[float, ...] = field(default_factory=tuple)
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cusp_angles", tuple(float(a) for a in self.cusp_angles))
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.beta > 0:
            if int(self.k) != self.k or self.k < 2:
                raise ValueError(f"k must be an integer >= 2, got {self.k}")
            if not 0.0 <= self.phi <= math.pi:
                raise ValueError(f"phi must lie in [0, pi], got {self.phi}")
        if self.cusp_angles:
            if not 0.0 < self.delta < 1.0:
                raise ValueError(
                    f"cusp smoothing delta must lie in (0, 1), got {self.delta}"
                )
            for a in self.cusp_angles:
                if not 0.0 <= a <= math.pi:
                    raise ValueError(f"cusp angles must lie in [0, pi], got {a}")
        g, _, _ = gamma_eval(self, np.linspace(-math.pi, math.pi, _SCAN_POINTS))
        if g.min() <= 0.0:
            raise ValueError("gamma(theta) must be positive on [-pi, pi]")

    @property
    def has_kfold(self) -> bool:
        return self.beta > 0

    @property
    def has_cusps(self) -> bool:
        return len(self.cusp_angles) > 0

    @property
    def has_background(self) -> bool:
        # The pure cusp sum carries no constant term.
        return not self.has_cusps or self.has_kfold

    def is_isotropic(self) -> bool:
        return not self.has_kfold and not self.has_cusps


@dataclass(frozen=True)
class PhysicalParams:
    """Material parameters of a dewetting run.

    sigma is the dimensionless substrate energy difference entering the
    Young equation, eta the contact-line mobility, epsilon the corner
    regularization length (> 0 required in the strong regime). The bound
    |sigma| < max_theta (gamma cos - gamma' sin) depends on the energy
    model and is checked by :func:`validate_sigma`.
    """

    sigma: float = 0.0
    eta: float = 100.0
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"contact mobility eta must be > 0, got {self.eta}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


def gamma_eval(model: AnisotropyModel, theta):
    """Energy density and its first two derivatives at tangent angle theta.

    Accepts scalars or arrays; returns (gamma, gamma', gamma'') of the same
    shape. All derivatives are closed-form.
    """
    th = np.asarray(theta, dtype=float)
    g = np.ones_like(th) if model.has_background else np.zeros_like(th)
    g1 = np.zeros_like(th)
    g2 = np.zeros_like(th)
    if model.has_kfold:
        k, beta = float(model.k), model.beta
        arg = k * (th + model.phi)
        g = g + beta * np.cos(arg)
        g1 = g1 - beta * k * np.sin(arg)
        g2 = g2 - beta * k * k * np.cos(arg)
    if model.has_cusps:
        c = 1.0 - model.delta**2
        for alpha in model.cusp_angles:
            u = th - alpha
            s, cs = np.sin(u), np.cos(u)
            root = np.sqrt(model.delta**2 + c * s * s)
            g = g + root
            g1 = g1 + c * s * cs / root
            # d/du of (c/2) sin(2u) / root
            g2 = g2 + c * np.cos(2 * u) / root - (c * c / 4.0) * np.sin(2 * u) ** 2 / root**3
    if np.isscalar(theta):
        return float(g), float(g1), float(g2)
    return g, g1, g2


def stiffness_min(model: AnisotropyModel) -> float:
    """Minimum of the surface stiffness gamma + gamma'' over orientations.

    Computed analytically for the pure k-fold family and by dense sampling
    with local refinement otherwise.
    """
    if model.is_isotropic():
        return 1.0
    if model.has_kfold and not model.has_cusps:
        # stiffness = 1 + beta (1 - k^2) cos(k(theta + phi)), minimized where
        # the cosine is 1 (k >= 2 makes 1 - k^2 negative).
        return 1.0 - model.beta * (model.k**2 - 1)
    th = np.linspace(-math.pi, math.pi, _SCAN_POINTS, endpoint=False)
    g, _, g2 = gamma_eval(model, th)
    stiff = g + g2
    i = int(np.argmin(stiff))
    lo, hi = th[i] - 2 * math.pi / _SCAN_POINTS, th[i] + 2 * math.pi / _SCAN_POINTS
    for _ in range(3):
        fine = np.linspace(lo, hi, 1001)
        gf, _, g2f = gamma_eval(model, fine)
        sf = gf + g2f
        j = int(np.argmin(sf))
        width = (hi - lo) / 1000
        lo, hi = fine[j] - width, fine[j] + width
    return float(min(stiff.min(), sf.min()))


def classify(model: AnisotropyModel) -> str:
    """Return "isotropic", "weak" or "strong".

    Weak means the stiffness gamma + gamma'' stays positive everywhere; a
    stiffness that touches zero (k-fold with beta exactly 1/(k^2 - 1)) is
    classified strong, since the unregularized evolution is ill-posed there.
    """
    if model.is_isotropic():
        return "isotropic"
    return "weak" if stiffness_min(model) > 0.0 else "strong"


def young_residual(model: AnisotropyModel, params: PhysicalParams, theta, kappa_s=None):
    """Contact-angle residual f(theta; sigma), driving contact-line motion.

    f = gamma cos(theta) - gamma' sin(theta) - sigma. With ``kappa_s`` (the
    arc-length derivative of curvature at the contact) the strong-regime
    variant subtracts epsilon^2 kappa_s sin(theta); passing kappa_s with
    epsilon = 0 is a usage error.
    """
    g, g1, _ = gamma_eval(model, theta)
    f = g * np.cos(theta) - g1 * np.sin(theta) - params.sigma
    if kappa_s is not None:
        if params.epsilon <= 0.0:
            raise ValueError("kappa_s given but epsilon is zero; no regularized term")
        f = f - params.epsilon**2 * kappa_s * np.sin(theta)
    return f


def young_height_range(model: AnisotropyModel) -> tuple[float, float]:
    """Range of gamma cos(theta) - gamma' sin(theta) over orientations.

    This is the height coordinate of the energy's equilibrium shape; sigma
    must fall strictly inside the range for the substrate to cut the shape.
    """
    th = np.linspace(-math.pi, math.pi, _SCAN_POINTS, endpoint=False)
    g, g1, _ = gamma_eval(model, th)
    y = g * np.cos(th) - g1 * np.sin(th)
    return float(y.min()), float(y.max())


def validate_sigma(model: AnisotropyModel, params: PhysicalParams) -> None:
    """Check that sigma admits an equilibrium contact angle for this energy."""
    if not abs(params.sigma) < young_height_range(model)[1]:
        raise ValueError(
            f"sigma = {params.sigma} admits no contact-angle root for this energy"
        )


def _wulff_points(model: AnisotropyModel, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Envelope points of the equilibrium shape and their sample angles.

    The boundary point attached to tangent angle theta is
    (-gamma sin - gamma' cos, gamma cos - gamma' sin); equivalently the
    classical support-function formula in the surface-normal angle
    nu = theta + pi/2. Points are generated with theta descending so the
    traversal is material-on-the-right, and self-intersecting swallowtail
    branches (strong anisotropy) are removed by the support test
    P . m(nu) <= gamma(theta) for every sampled orientation.
    """
    theta = math.pi - 2 * math.pi * np.arange(samples) / samples
    g, g1, _ = gamma_eval(model, theta)
    pts = np.column_stack([-g * np.sin(theta) - g1 * np.cos(theta),
                           g * np.cos(theta) - g1 * np.sin(theta)])
    # outward normal of the support line at tangent angle theta
    m = np.column_stack([-np.sin(theta), np.cos(theta)])
    support = pts @ m.T  # support[i, j] = P_i . m_j
    keep = np.all(support <= g[None, :] + _ENVELOPE_TOL, axis=1)
    pts, theta = pts[keep], theta[keep]
    # collapse numerically coincident neighbours (facet endpoints, cusps)
    scale = float(np.abs(pts).max())
    d = np.hypot(*(pts - np.roll(pts, 1, axis=0)).T)
    distinct = d > 1e-9 * scale
    return pts[distinct], theta[distinct]


def wulff_shape(model: AnisotropyModel, samples: int = 1024) -> Curve:
    """Closed polyline approximation of the energy's equilibrium shape."""
    if samples < 64:
        raise ValueError(f"need at least 64 samples, got {samples}")
    pts, _ = _wulff_points(model, samples)
    return Curve(pts, closed=True)


def winterbottom_shape(
    model: AnisotropyModel,
    params: PhysicalParams,
    target_area: float,
    samples: int = 2048,
) -> Curve:
    """Equilibrium island shape on the substrate, scaled to ``target_area``.

    The equilibrium shape is cut by the substrate line at height sigma (in
    the units of the unscaled shape), the part below is discarded, and the
    result is rescaled uniformly and translated to sit on y = 0 centered at
    x = 0. The height of a boundary point attached to tangent angle theta
    is gamma cos - gamma' sin, so the cut meets the curve exactly where the
    Young residual vanishes.
    """
    if target_area <= 0:
        raise ValueError(f"target_area must be positive, got {target_area}")
    pts, _ = _wulff_points(model, samples)
    sigma = params.sigma
    y = pts[:, 1]
    above = y >= sigma
    if not above.any() or above.all():
        raise ValueError(
            f"substrate height sigma = {sigma} does not cut the equilibrium shape"
        )
    # rotate storage so the kept arc is contiguous and starts at index 0
    starts = np.flatnonzero(above & ~np.roll(above, 1))
    if starts.size != 1:
        raise ValueError(
            f"substrate cut is not a single arc (sigma = {sigma}); "
            "the equilibrium shape may be non-convex at this resolution"
        )
    pts = np.roll(pts, -int(starts[0]), axis=0)
    above = np.roll(above, -int(starts[0]))
    arc = pts[above]
    n_above = arc.shape[0]

    def cut(p, q):
        t = (sigma - p[1]) / (q[1] - p[1])
        return np.array([p[0] + t * (q[0] - p[0]), sigma])

    left = cut(pts[-1], pts[0])  # predecessor of the arc is the last point
    right = cut(pts[n_above - 1], pts[n_above % pts.shape[0]])
    nodes = np.vstack([left, arc, right])
    scale = float(np.abs(nodes).max())
    d = np.hypot(*np.diff(nodes, axis=0).T)
    nodes = np.vstack([nodes[:1], nodes[1:][d > 1e-9 * scale]])
    # drop to the substrate frame and center between the contact points
    nodes[:, 1] -= sigma
    nodes[:, 0] -= 0.5 * (nodes[0, 0] + nodes[-1, 0])
    nodes[0, 1] = 0.0
    nodes[-1, 1] = 0.0
    shape = Curve(nodes, closed=False)
    area = enclosed_area(shape)
    if area <= 0:
        raise ValueError("truncated equilibrium shape has non-positive area")
    nodes = nodes * math.sqrt(target_area / area)
    nodes[0, 1] = 0.0
    nodes[-1, 1] = 0.0
    return Curve(nodes, closed=False)
