"""Battery performance indicators computed from trajectory snapshots.

Energy is Tr[rho_B H_B] with H_B the battery's bare Hamiltonian; ergotropy
is the energy above the passive state (descending populations paired with
ascending energy levels).  The fluctuation is the change of the standard
deviation of H_B relative to the start of charging, and the average power
divides ergotropy by elapsed time.  Because a two-level battery charged
through the waveguide from a bare excited charger never develops 0-1
coherence, an energy-based power E/t is also recorded; the published
transient-power figures for the dissipative working points correspond to
that quantity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrator import ChargingTrajectory


@dataclass(frozen=True)
class BatteryState:
    """Reduced 2x2 state of the battery atom.

    ``p`` is the excited-state population, ``c`` the coherence <e|rho_B|g>.
    """

    rho: np.ndarray
    p: float
    c: complex


@dataclass(frozen=True)
class MetricsRecord:
    """Per-snapshot indicators, all in units of the transition frequency."""

    t: float
    E: float
    ergotropy: float
    sigma: float
    power: float
    energy_power: float
    p_a: float
    p_b: float
    purity: float


def partial_trace_battery(rho: np.ndarray) -> BatteryState:
    """Trace out the charger: sum of the two diagonal 2x2 blocks."""
    rho = np.asarray(rho)
    rb = rho[0:2, 0:2] + rho[2:4, 2:4]
    return BatteryState(rho=rb, p=float(rb[1, 1].real), c=complex(rb[1, 0]))


def charger_population(rho: np.ndarray) -> float:
    """Excited-state population of the charger atom."""
    return float(rho[2, 2].real + rho[3, 3].real)


def charger_state(rho: np.ndarray) -> np.ndarray:
    """Reduced 2x2 state of the charger (trace over the battery)."""
    rho = np.asarray(rho)
    out = np.empty((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            out[i, j] = rho[2 * i, 2 * j] + rho[2 * i + 1, 2 * j + 1]
    return out


def energy(b: BatteryState, omega0: float = 1.0) -> float:
    """Stored energy Tr[rho_B H_B] = omega0 * p."""
    return omega0 * b.p


def ergotropy(b: BatteryState, omega0: float = 1.0) -> float:
    """Maximal unitarily extractable work, via the passive state (eigen path)."""
    evals = np.linalg.eigvalsh(0.5 * (b.rho + b.rho.conj().T))  # ascending
    # descending populations paired with ascending levels (0, omega0)
    passive = float(evals[0]) * omega0
    value = omega0 * b.p - passive
    return max(0.0, value)


def ergotropy_closed_form(b: BatteryState, omega0: float = 1.0) -> float:
    """Qubit closed form omega0 (p - 1/2 + sqrt((p - 1/2)^2 + |c|^2))."""
    half = b.p - 0.5
    return max(0.0, omega0 * (half + math.sqrt(half * half + abs(b.c) ** 2)))


def fluctuation(b_t: BatteryState, b_0: BatteryState, omega0: float = 1.0) -> float:
    """Change of the H_B standard deviation between start and time t.

    May be negative if the initial state had the larger variance.
    """

    def std(b):
        h1 = omega0 * b.p                 # <H_B>
        h2 = omega0 * omega0 * b.p        # <H_B^2>; H_B^2 = omega0 * H_B for a qubit
        return math.sqrt(max(0.0, h2 - h1 * h1))

    return std(b_t) - std(b_0)


def average_power(ergotropy_t: float, t: float) -> float:
    """Ergotropy divided by elapsed time; defined as 0 at t = 0."""
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if t == 0.0:
        return 0.0
    return ergotropy_t / t


def purity(rho: np.ndarray) -> float:
    return float(np.trace(rho @ rho).real)


def compute_records(traj: ChargingTrajectory, omega0: float = 1.0) -> list[MetricsRecord]:
    """Fill traj.records with per-snapshot MetricsRecord entries."""
    b0 = partial_trace_battery(traj.states[0])
    records = []
    t0 = traj.times[0]
    for t, rho in zip(traj.times, traj.states):
        b = partial_trace_battery(rho)
        E = energy(b, omega0)
        erg = ergotropy(b, omega0)
        elapsed = t - t0
        records.append(
            MetricsRecord(
                t=float(t),
                E=E,
                ergotropy=erg,
                sigma=fluctuation(b, b0, omega0),
                power=average_power(erg, elapsed),
                energy_power=E / elapsed if elapsed > 0.0 else 0.0,
                p_a=charger_population(rho),
                p_b=b.p,
                purity=purity(rho),
            )
        )
    traj.records = records
    return records
