"""Built-in experiment configurations.

One preset per reproduced figure panel or table: the small-island
relaxation gallery (fig4a-f weak, fig8a-f strong), the faceting snapshots
(fig9), the regularization and smoothing ladders (fig3a/b, fig12, fig13),
the long-island pinch-off runs (fig6 weak, fig11a-c strong), and the six
refinement-table bases (tab1-tab6). Table presets carry their default
evaluation times; ladder presets store the midpoint of their parameter
ladder and the harness overrides it per level.

Strong-regime presets keep the mesh at or below a quarter of the
regularization length; coarser meshes cannot resolve the corner layer and
their dynamics degrade into mesh-scale noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .anisotropy import AnisotropyModel, PhysicalParams
from .config import ShapeSpec, SimConfig
from .evolution import SimParams

__all__ = ["Preset", "preset_names", "get_preset", "resolve_config"]


@dataclass(frozen=True)
class Preset:
    name: str
    config: SimConfig
    times: tuple[float, ...] = ()
    note: str = ""


_RECT_5x1 = ShapeSpec(kind="rectangle", width=5.0, height=1.0)
_RECT_60x1 = ShapeSpec(kind="rectangle", width=60.0, height=1.0)
_TUBE = ShapeSpec(kind="tube", length=4.0, height=1.0, cap_radius=0.5)

_COS_3PI4 = math.cos(3.0 * math.pi / 4.0)
_COS_5PI6 = math.cos(5.0 * math.pi / 6.0)
_COS_2PI3 = math.cos(2.0 * math.pi / 3.0)
_COS_PI3 = math.cos(math.pi / 3.0)


def _small_island_weak(name, beta, k, sigma=_COS_3PI4, phi=0.0, note=""):
    return Preset(
        name=name,
        config=SimConfig(
            shape=_RECT_5x1,
            model=AnisotropyModel(beta=beta, k=k, phi=phi),
            sim=SimParams(
                physical=PhysicalParams(sigma=sigma, eta=100.0),
                tau=5e-4,
                t_end=30.0,
                n_segments=140,
                snapshot_stride=200,
            ),
            out_dir=f"runs/{name}",
        ),
        note=note,
    )


def _small_island_strong(name, beta, k, sigma=_COS_3PI4, phi=0.0,
                         epsilon=0.1, n_segments=280, tau=1e-4, note=""):
    return Preset(
        name=name,
        config=SimConfig(
            shape=_RECT_5x1,
            model=AnisotropyModel(beta=beta, k=k, phi=phi),
            sim=SimParams(
                physical=PhysicalParams(sigma=sigma, eta=100.0, epsilon=epsilon),
                tau=tau,
                t_end=20.0,
                n_segments=n_segments,
                psi_c=2.0,
                snapshot_stride=500,
            ),
            out_dir=f"runs/{name}",
        ),
        note=note,
    )


def _table(name, shape, model, sigma, n_segments, tau, epsilon=0.0,
           regime=None, note=""):
    times = (0.5, 2.0, 5.0)
    return Preset(
        name=name,
        config=SimConfig(
            shape=shape,
            model=model,
            sim=SimParams(
                physical=PhysicalParams(sigma=sigma, eta=100.0, epsilon=epsilon),
                tau=tau,
                t_end=times[-1],
                n_segments=n_segments,
                psi_c=2.0,
                regime=regime,
                snapshot_stride=100,
            ),
            out_dir=f"runs/{name}",
        ),
        times=times,
        note=note,
    )


_H0_TUBE = (8.0 + math.pi) / 120.0


def _build_presets() -> dict[str, Preset]:
    presets: list[Preset] = []

    # equilibrium ladders against the constructed reference shape; the
    # harness sweeps epsilon (or delta) downward from these midpoints
    for name, sigma in (("fig3a", _COS_2PI3), ("fig3b", _COS_PI3)):
        presets.append(_small_island_strong(
            name, beta=0.2, k=4, sigma=sigma, epsilon=0.1,
            note="regularization ladder 0.2/0.1/0.05/0.025; mesh follows h <= eps/4",
        ))

    # weak small-island gallery: growing anisotropy, then other symmetries
    presets.append(_small_island_weak("fig4a", beta=0.02, k=4))
    presets.append(_small_island_weak("fig4b", beta=0.04, k=4))
    presets.append(_small_island_weak("fig4c", beta=0.06, k=4))
    presets.append(_small_island_weak("fig4d", beta=0.32, k=2))
    presets.append(_small_island_weak("fig4e", beta=0.1, k=3))
    presets.append(_small_island_weak("fig4f", beta=0.022, k=6))

    # long weak island: retraction, valley merging, pinch-off near t = 371
    presets.append(Preset(
        name="fig6",
        config=SimConfig(
            shape=_RECT_60x1,
            model=AnisotropyModel(beta=0.06, k=4, phi=0.0),
            sim=SimParams(
                physical=PhysicalParams(sigma=_COS_5PI6, eta=100.0),
                tau=2e-3,
                t_end=400.0,
                n_segments=1000,
                snapshot_stride=2000,
            ),
            out_dir="runs/fig6",
        ),
        note="pinch-off into two islands expected in t = 350..390",
    ))

    # strong small-island gallery at fixed regularization
    presets.append(_small_island_strong("fig8a", beta=0.1, k=4))
    presets.append(_small_island_strong("fig8b", beta=0.2, k=4))
    presets.append(_small_island_strong("fig8c", beta=0.4, k=4))
    presets.append(_small_island_strong("fig8d", beta=0.5, k=2))
    presets.append(_small_island_strong("fig8e", beta=0.3, k=3))
    presets.append(_small_island_strong("fig8f", beta=0.1, k=6))

    # strong faceting snapshots (sawtooth ridges along the cheap orientations)
    presets.append(_small_island_strong("fig9", beta=0.2, k=4))

    # strong long islands, equal area 60, three initial shapes
    for name, shape in (
        ("fig11a", _RECT_60x1),
        ("fig11b", ShapeSpec(kind="trapezoid", top=65.0, bottom=55.0, height=1.0)),
        ("fig11c", ShapeSpec(kind="trapezoid", top=55.0, bottom=65.0, height=1.0)),
    ):
        presets.append(Preset(
            name=name,
            config=SimConfig(
                shape=shape,
                model=AnisotropyModel(beta=0.3, k=4, phi=0.0),
                sim=SimParams(
                    physical=PhysicalParams(sigma=_COS_2PI3, eta=100.0, epsilon=0.2),
                    tau=5e-4,
                    t_end=600.0,
                    n_segments=1250,
                    psi_c=2.0,
                    snapshot_stride=5000,
                ),
                out_dir=f"runs/{name}",
            ),
            note="equal-area initial shapes relaxing through multiple pinch-offs",
        ))

    # cusped energy, smoothed: square equilibrium as delta decreases
    presets.append(Preset(
        name="fig12",
        config=SimConfig(
            shape=_RECT_5x1,
            model=AnisotropyModel(cusp_angles=(0.0, math.pi / 2.0), delta=0.05),
            sim=SimParams(
                physical=PhysicalParams(sigma=_COS_3PI4, eta=100.0),
                tau=1e-4,
                t_end=30.0,
                n_segments=280,
                snapshot_stride=500,
            ),
            out_dir="runs/fig12",
        ),
        note="smoothing ladder 0.2/0.1/0.05 toward the fully faceted square",
    ))

    # combined k-fold plus cusp energy, strongly anisotropic
    presets.append(Preset(
        name="fig13",
        config=SimConfig(
            shape=_RECT_5x1,
            model=AnisotropyModel(beta=0.2, k=4, phi=0.0,
                                  cusp_angles=(0.0,), delta=0.05),
            sim=SimParams(
                physical=PhysicalParams(sigma=_COS_3PI4, eta=100.0, epsilon=0.05),
                tau=5e-5,
                t_end=20.0,
                n_segments=560,
                psi_c=2.0,
                snapshot_stride=1000,
            ),
            out_dir="runs/fig13",
        ),
        note="smoothing and regularization lowered together, 0.2 to 0.05",
    ))

    # refinement-table bases
    presets.append(_table(
        "tab1", _TUBE, AnisotropyModel(), sigma=0.0,
        n_segments=120, tau=0.01,
        note="closed capsule, isotropic; orders about 2",
    ))
    presets.append(_table(
        "tab2", _TUBE, AnisotropyModel(beta=0.06, k=4, phi=0.0), sigma=0.0,
        n_segments=120, tau=0.01,
        note="closed capsule, fourfold anisotropy",
    ))
    presets.append(_table(
        "tab3", _RECT_5x1, AnisotropyModel(), sigma=_COS_5PI6,
        n_segments=140, tau=0.005,
        note="open island, isotropic; first-order contact coupling",
    ))
    presets.append(_table(
        "tab4", _RECT_5x1, AnisotropyModel(beta=0.06, k=4, phi=0.0),
        sigma=_COS_5PI6, n_segments=140, tau=0.005,
        note="open island, fourfold anisotropy",
    ))
    presets.append(_table(
        "tab5", _TUBE, AnisotropyModel(beta=0.1, k=4, phi=0.0), sigma=0.0,
        n_segments=120, tau=_H0_TUBE**2 / 20.0, epsilon=0.1, regime="strong",
        note="closed capsule, regularized strong anisotropy",
    ))
    presets.append(_table(
        "tab6", _RECT_5x1, AnisotropyModel(beta=0.1, k=4, phi=0.0),
        sigma=_COS_3PI4, n_segments=70, tau=0.1**2 / 20.0, epsilon=0.1,
        regime="strong",
        note="open island, regularized strong anisotropy",
    ))

    return {p.name: p for p in presets}


_PRESETS = _build_presets()


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def get_preset(name: str) -> Preset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None


def resolve_config(source: str) -> SimConfig:
    """A config from either a preset name or a configuration file path."""
    from pathlib import Path

    from .config import parse_config

    if source in _PRESETS:
        return _PRESETS[source].config
    if Path(source).exists():
        return parse_config(source)
    raise KeyError(
        f"{source!r} is neither a preset name nor an existing config file; "
        f"presets: {', '.join(preset_names())}"
    )
