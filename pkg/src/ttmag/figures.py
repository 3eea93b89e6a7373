"""Tables behind the reference figures, one function per figure."""

from __future__ import annotations

import dataclasses
from typing import Any, Callable


from . import machine, metrology
from .machine import MachineConfig
from .protocol import parallel_map

Table = tuple[list[str], list[list[Any]]]

FIG2_LEFT_OMEGA_K = (2.0, 3.0)
FIG2_LEFT_TAU_U = tuple(float(t) for t in range(1, 21))
FIG2_RIGHT_OMEGA_K = tuple(0.25 * i for i in range(1, 21))
FIG3_X = (0.0, 0.5, 1.0)
FIG3_Y = tuple(round(0.01 * i, 2) for i in range(1, 301))
FIG4_X = tuple(round(0.001 * i, 3) for i in range(1, 5001))


def fig2_left(cfg: MachineConfig) -> Table:
    """Heats against the unitary-stroke duration, one value of omega_k on each side of the transition."""
    jobs = [(w, t) for w in FIG2_LEFT_OMEGA_K for t in FIG2_LEFT_TAU_U]
    res = parallel_map(
        lambda job: machine.run_cycle(dataclasses.replace(cfg.with_omega_k(job[0]), tau_U=job[1])), jobs
    )
    return ["omega_k", "tau_U", "q_h", "q_c"], [[w, t, r.q_h, r.q_c] for (w, t), r in zip(jobs, res)]


def fig2_right(cfg: MachineConfig) -> Table:
    """Closed-form and master-equation heats against omega_k."""

    def both(w: float):
        c = cfg.with_omega_k(w)
        return machine.analytic_cycle(c), machine.run_cycle(c)

    res = parallel_map(both, FIG2_RIGHT_OMEGA_K)
    header = ["omega_k", "q_h_analytic", "q_c_analytic", "q_h_master", "q_c_master"]
    return header, [[w, a.q_h, a.q_c, m.q_h, m.q_c] for w, (a, m) in zip(FIG2_RIGHT_OMEGA_K, res)]


def fig3(cfg: MachineConfig | None = None) -> Table:
    """Inverse transfer factor ``1/f2(x, y)`` against ``y`` for a few detunings ``x``."""
    rows = [[x, y, 1.0 / metrology.f2(x, y)] for x in FIG3_X for y in FIG3_Y]
    return ["x", "y", "inv_f2"], rows


def fig4(cfg: MachineConfig | None = None) -> Table:
    """Reduced sensitivity coefficient against ``omega_un / T_c``."""
    return ["x", "alpha_bar_h"], [[x, metrology.alpha_bar_h(x, 1.0)] for x in FIG4_X]


FIGURES: dict[str, Callable[[MachineConfig], Table]] = {
    "fig2-left": fig2_left,
    "fig2-right": fig2_right,
    "fig3": fig3,
    "fig4": fig4,
}
