"""
heat_flow.py
------------
Explicit Euler discretisation of the harmonic map heat flow d(phi)/dt = tau(phi) on a
periodic flat-torus grid.

Node updates within one step depend only on the previous state; steps are sequential and
the trajectory (step, time, energy, sup|tau|) is accumulated by a single writer.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from flow.state import FlowConfig, FlowState, discrete_energy, initial_state, place_in_charts, state_fields
from maps.models import MapModel
from utils.errors import DomainError, FlowBlowUpError, FlowInstabilityError
from utils.logger_config import get_logger

logger = get_logger(__name__)

# Relative energy increase tolerated before the monitor flags a step.
ENERGY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class FlowResult:
    trajectory: pd.DataFrame  # step, time, energy, sup_tau
    final_state: FlowState
    converged: bool
    energy_monotone: bool
    config: FlowConfig
    warnings: List[str] = field(default_factory=list)

    @property
    def final_sup_tau(self) -> float:
        return float(self.trajectory["sup_tau"].iloc[-1])


def flow_step(state: FlowState, config: FlowConfig, tension: Optional[np.ndarray] = None) -> FlowState:
    """Advance every node by dt * tau(phi); sphere nodes leaving their chart are re-expressed."""
    if tension is None:
        tension = state_fields(state)["tension"]
    values = state.values + config.dt * tension
    if not np.all(np.isfinite(values)):
        raise FlowInstabilityError(f"Non-finite node values at step {state.step_count + 1}")
    n = values.shape[-1]
    try:
        placed, charts = place_in_charts(state.target, values.reshape(-1, n), state.charts.reshape(-1))
    except DomainError as e:
        raise FlowBlowUpError(f"Flow left the target at step {state.step_count + 1}: {e}") from e
    return state.advance(placed.reshape(values.shape), charts.reshape(state.charts.shape), config.dt)


def run_flow(phi: MapModel, config: FlowConfig) -> FlowResult:
    """Flow from the sampled initial map until sup|tau|_h <= tau_tol or max_steps is reached."""
    state = initial_state(phi, config)
    rows = []
    warnings: List[str] = []
    energy_monotone = True
    previous = None

    while True:
        fields = state_fields(state)
        sup_tau = float(np.max(fields["tension_norm"]))
        energy = discrete_energy(state) if config.energy_monitor or state.step_count == 0 else np.nan
        rows.append({"step": state.step_count, "time": state.time, "energy": energy, "sup_tau": sup_tau})

        if config.energy_monitor and previous is not None and energy > previous * (1.0 + ENERGY_SLACK) + ENERGY_SLACK:
            energy_monotone = False
            message = f"Energy increased at step {state.step_count}: {previous:.17g} -> {energy:.17g}"
            logger.warning(message)
            warnings.append(message)
        previous = energy

        if sup_tau <= config.tau_tol:
            converged = True
            break
        if state.step_count >= config.max_steps:
            converged = False
            break
        state = flow_step(state, config, fields["tension"])

    trajectory = pd.DataFrame(rows, columns=["step", "time", "energy", "sup_tau"])
    if converged:
        logger.info(f"Flow of {phi.name} converged after {state.step_count} steps "
                    f"(t={state.time:.4g}, sup|tau|={sup_tau:.3e})")
    else:
        message = f"Flow of {phi.name} did not converge in {config.max_steps} steps (sup|tau|={sup_tau:.3e})"
        logger.warning(message)
        warnings.append(message)
    return FlowResult(trajectory=trajectory, final_state=state, converged=converged,
                      energy_monotone=energy_monotone, config=config, warnings=warnings)
