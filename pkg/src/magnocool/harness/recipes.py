"""Builtin experiment recipes, one or more per reproduced figure."""
from __future__ import annotations

from dataclasses import dataclass, field

#: G_max / (sqrt(2) omega_b) values of the bipartite training sweep.
BIPARTITE_G_SWEEP = (0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0)


@dataclass(frozen=True)
class Recipe:
    name: str
    figure: str
    command: str
    description: str
    overrides: dict
    #: For sweeps: per-run (suffix, overrides) applied on top of ``overrides``.
    sweep: tuple = field(default=())
    mode: str | None = None  # baseline mode
    needs_teacher: bool = False


def _g_tag(g: float) -> str:
    return f"{g:g}".replace(".", "p")


def _build() -> dict[str, Recipe]:
    r: list[Recipe] = []
    for g in BIPARTITE_G_SWEEP:
        r.append(Recipe(
            f"bipartite-g{_g_tag(g)}", "Fig. 2(a,c), Fig. S4", "train",
            f"SAC on the bipartite system with G_max/sqrt2 = {g:g}",
            {"kind": "bipartite", "env": {"control_max": g}},
        ))
    r.append(Recipe(
        "bipartite-sweep", "Fig. 2(a,c)", "train",
        "all bipartite G_max training runs (use --workers to fan out)",
        {"kind": "bipartite"},
        sweep=tuple((f"g{_g_tag(g)}", {"env": {"control_max": g}}) for g in BIPARTITE_G_SWEEP),
    ))
    r.append(Recipe(
        "bipartite-zero", "Fig. 2 (reference)", "simulate",
        "uncontrolled bipartite evolution (quotient stays near 1)",
        {"kind": "bipartite", "simulate": {"schedule": "zero"}},
    ))
    r.append(Recipe(
        "sideband", "Fig. 2(c), Fig. S3", "baseline",
        "constant-G sideband sweep and the sideband time limit tau_SB",
        {"kind": "bipartite"}, mode="sideband",
    ))
    r.append(Recipe(
        "stirap", "Fig. S5(a-e)", "baseline",
        "optimized counter-intuitive Gaussian pulses, omega_m = 1e3, undamped",
        {"kind": "tripartite", "system": {"omega_m": 1e3, "damped": False}}, mode="stirap",
    ))
    r.append(Recipe(
        "stirap-damped", "Fig. S5(f)", "baseline",
        "as 'stirap' with all dampings on",
        {"kind": "tripartite", "system": {"omega_m": 1e3, "damped": True}}, mode="stirap",
    ))
    r.append(Recipe(
        "stirap-pulse", "Fig. S5(a)", "simulate",
        "one Gaussian pulse pair at Omega_max = 6, omega_m = 1e3, undamped",
        {"kind": "tripartite", "system": {"omega_m": 1e3, "damped": False},
         "simulate": {"schedule": "stirap", "pulse_peak": 6.0, "steps": 105}},
    ))
    r.append(Recipe(
        "limits", "Fig. 3 (Raman limits)", "baseline",
        "Raman time limits and effective two-mode parameters",
        {"kind": "tripartite"}, mode="limits",
    ))
    r.append(Recipe(
        "tripartite-aux", "Fig. S6 (auxiliary)", "train",
        "auxiliary tripartite system: omega_m = 1e3, Omega_max = 10, 150 steps",
        {"kind": "tripartite", "system": {"omega_m": 1e3},
         "env": {"control_max": 10.0, "steps_per_episode": 150}},
    ))
    r.append(Recipe(
        "tripartite-primary", "Fig. 3, Fig. S6 (primary)", "train",
        "primary tripartite system warm-started from an auxiliary teacher (--teacher)",
        {"kind": "tripartite", "system": {"omega_m": 1e5},
         "env": {"control_max": 100.0, "steps_per_episode": 150}, "train": {"episodes": 300}},
        needs_teacher=True,
    ))
    r.append(Recipe(
        "tripartite-primary-cold", "Fig. S6 (control)", "train",
        "primary tripartite system trained from scratch, for comparison with the warm start",
        {"kind": "tripartite", "system": {"omega_m": 1e5},
         "env": {"control_max": 100.0, "steps_per_episode": 150}, "train": {"episodes": 300}},
    ))
    return {x.name: x for x in r}


RECIPES = _build()


def get(name: str) -> Recipe:
    try:
        return RECIPES[name]
    except KeyError:
        raise KeyError(f"unknown recipe {name!r}; see `magnocool recipes list`") from None
