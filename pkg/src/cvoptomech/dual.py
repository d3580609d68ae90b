"""One mirror, one cavity, two driven modes: a cooling laser (A) and a heating laser (B).

State vector ``u = (dq, dp, dX_A, dY_A, dX_B, dY_B)``; CMs in the vacuum-half
convention.  Both cavity modes share the decay rate ``kappa``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import FixedPointDiverged, NonPositiveInput
from .filters import FilterSpec, default_omega_max, filtered_output_cm
from .numerics import QuadratureSpec, eigenvalues, solve_lyapunov
from .optomech import (
    C_LIGHT,
    FIXED_POINT_DAMPING,
    FIXED_POINT_MAX_ITER,
    FIXED_POINT_RTOL,
    DetuningMode,
    bare_coupling,
    cavity_decay,
    coth_kernel,
    thermal_cutoff,
    drive_amplitude,
    thermal_occupation,
)

BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class DualConfig:
    """Mirror and cavity geometry plus one set of drive parameters per laser.

    Detunings are in rad/s and read as effective or bare according to
    ``detuning_mode``.  ``wavelength_b`` defaults to ``wavelength_a``.
    """

    omega_m: float
    Q: float
    mass: float
    length: float
    finesse: float
    temperature: float
    power_a: float
    power_b: float
    detuning_a: float
    detuning_b: float
    wavelength_a: float
    wavelength_b: Optional[float] = None
    detuning_mode: DetuningMode = DetuningMode.EFFECTIVE

    def __post_init__(self):
        object.__setattr__(self, "detuning_mode", DetuningMode(self.detuning_mode))
        if self.wavelength_b is None:
            object.__setattr__(self, "wavelength_b", self.wavelength_a)
        for name in ("omega_m", "Q", "mass", "length", "finesse", "temperature",
                     "wavelength_a", "wavelength_b"):
            if not getattr(self, name) > 0:
                raise NonPositiveInput(f"{name} must be positive")
        if not (self.power_a >= 0 and self.power_b >= 0):
            raise NonPositiveInput("powers must be non-negative")

    @property
    def gamma_m(self) -> float:
        return self.omega_m / self.Q


@dataclass(frozen=True)
class DualSteadyState:
    """Phase-fixed stationary amplitudes and the resulting linearized rates."""

    a_s: float
    b_s: float
    q_s: float
    Delta_A: float
    Delta_B: float
    G_A: float
    G_B: float
    G0_A: float
    G0_B: float
    E_A: float
    E_B: float
    omega_m: float
    gamma_m: float
    kappa: float
    nbar: float
    temperature: float = 0.0
    Delta0_A: Optional[float] = None
    Delta0_B: Optional[float] = None

    @classmethod
    def from_rates(cls, omega_m, gamma_m, kappa, Delta_A, Delta_B, G_A, G_B, nbar,
                   temperature=0.0) -> "DualSteadyState":
        nan = float("nan")
        return cls(nan, nan, nan, Delta_A, Delta_B, G_A, G_B, nan, nan, nan, nan,
                   omega_m, gamma_m, kappa, nbar, temperature)


def steady_state_dual(cfg: DualConfig) -> DualSteadyState:
    """Stationary mean fields for both drives.

    Raises:
        FixedPointDiverged: bare-detuning iteration did not settle.
    """
    kappa = cavity_decay(cfg.length, cfg.finesse)
    wc_a = 2 * np.pi * C_LIGHT / cfg.wavelength_a
    wc_b = 2 * np.pi * C_LIGHT / cfg.wavelength_b
    G0a = bare_coupling(wc_a, cfg.length, cfg.mass, cfg.omega_m)
    G0b = bare_coupling(wc_b, cfg.length, cfg.mass, cfg.omega_m)
    Ea = drive_amplitude(cfg.power_a, kappa, wc_a - cfg.detuning_a)
    Eb = drive_amplitude(cfg.power_b, kappa, wc_b - cfg.detuning_b)
    w = cfg.omega_m

    def position(Da, Db):
        return (G0a * Ea**2 / (kappa**2 + Da**2) + G0b * Eb**2 / (kappa**2 + Db**2)) / w

    d0a = d0b = None
    if cfg.detuning_mode is DetuningMode.EFFECTIVE:
        Da, Db = float(cfg.detuning_a), float(cfg.detuning_b)
    else:
        d0a, d0b = float(cfg.detuning_a), float(cfg.detuning_b)
        Da, Db = d0a, d0b
        scale = max(abs(d0a), abs(d0b), w, kappa)
        for _ in range(FIXED_POINT_MAX_ITER):
            q = position(Da, Db)
            na = (1 - FIXED_POINT_DAMPING) * Da + FIXED_POINT_DAMPING * (d0a - G0a * q)
            nb = (1 - FIXED_POINT_DAMPING) * Db + FIXED_POINT_DAMPING * (d0b - G0b * q)
            if not (np.isfinite(na) and np.isfinite(nb)):
                break
            done = max(abs(na - Da), abs(nb - Db)) <= FIXED_POINT_RTOL * max(abs(na), abs(nb), scale)
            Da, Db = na, nb
            if done:
                break
        else:
            raise FixedPointDiverged("coupled detuning iteration did not converge")
        if not (np.isfinite(Da) and np.isfinite(Db)):
            raise FixedPointDiverged("coupled detuning iteration diverged")
    a = Ea / np.hypot(kappa, Da)
    b = Eb / np.hypot(kappa, Db)
    return DualSteadyState(
        a_s=float(a), b_s=float(b), q_s=float(position(Da, Db)),
        Delta_A=Da, Delta_B=Db,
        G_A=float(G0a * a * np.sqrt(2)), G_B=float(G0b * b * np.sqrt(2)),
        G0_A=G0a, G0_B=G0b, E_A=Ea, E_B=Eb,
        omega_m=w, gamma_m=cfg.gamma_m, kappa=kappa,
        nbar=thermal_occupation(w, cfg.temperature), temperature=cfg.temperature,
        Delta0_A=d0a, Delta0_B=d0b,
    )


def steady_state_residuals(ss: DualSteadyState) -> np.ndarray:
    """Relative residuals of the mean-field equations (amplitudes, position, detunings)."""
    k, w = ss.kappa, ss.omega_m
    ra = abs(ss.a_s * abs(complex(k, ss.Delta_A)) - ss.E_A) / max(ss.E_A, 1e-300)
    rb = abs(ss.b_s * abs(complex(k, ss.Delta_B)) - ss.E_B) / max(ss.E_B, 1e-300)
    q = (ss.G0_A * ss.a_s**2 + ss.G0_B * ss.b_s**2) / w
    rq = abs(ss.q_s - q) / max(abs(q), 1e-300)
    out = [ra if ss.E_A > 0 else 0.0, rb if ss.E_B > 0 else 0.0, rq if q > 0 else abs(ss.q_s)]
    if ss.Delta0_A is not None:
        scale = max(abs(ss.Delta0_A), abs(ss.Delta0_B), w, k)
        out.append(abs(ss.Delta0_A - ss.G0_A * q - ss.Delta_A) / scale)
        out.append(abs(ss.Delta0_B - ss.G0_B * q - ss.Delta_B) / scale)
    return np.array(out)


class CharPolyCoeffs(NamedTuple):
    """Coefficients of ``det(lambda I - A) = lambda^6 + c1 lambda^5 + ... + c6``."""

    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float


def char_poly_coeffs(omega_m, gamma_m, kappa, Delta_A, Delta_B, G_A, G_B) -> CharPolyCoeffs:
    w, g, k, Da, Db = omega_m, gamma_m, kappa, Delta_A, Delta_B
    a2, b2, k2, w2 = Da**2, Db**2, k**2, w**2
    drive = G_A**2 * Da + G_B**2 * Db
    c1 = g + 4 * k
    c2 = a2 + b2 + 4 * g * k + 6 * k2 + w2
    c3 = g * (a2 + b2 + 6 * k2) + 2 * k * (a2 + b2 + 2 * (k2 + w2))
    c4 = (k**4 + 2 * g * k * (b2 + 2 * k2) + 6 * k2 * w2 + b2 * (k2 + w2)
          + a2 * (b2 + 2 * g * k + k2 + w2) - w * drive)
    c5 = g * (a2 + k2) * (b2 + k2) + 2 * k * w2 * (a2 + b2 + 2 * k2) - 2 * k * w * drive
    c6 = w2 * (a2 + k2) * (b2 + k2) - w * (G_B**2 * Db * (a2 + k2) + G_A**2 * Da * (b2 + k2))
    return CharPolyCoeffs(*(float(c) for c in (c1, c2, c3, c4, c5, c6)))


def drift_matrix_dual(ss: DualSteadyState) -> tuple[np.ndarray, CharPolyCoeffs]:
    w, g, k = ss.omega_m, ss.gamma_m, ss.kappa
    Da, Db, Ga, Gb = ss.Delta_A, ss.Delta_B, ss.G_A, ss.G_B
    A = np.array([
        [0.0, w, 0.0, 0.0, 0.0, 0.0],
        [-w, -g, Ga, 0.0, Gb, 0.0],
        [0.0, 0.0, -k, Da, 0.0, 0.0],
        [Ga, 0.0, -Da, -k, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -k, Db],
        [Gb, 0.0, 0.0, 0.0, -Db, -k],
    ])
    return A, char_poly_coeffs(w, g, k, Da, Db, Ga, Gb)


def diffusion_dual(ss: DualSteadyState) -> np.ndarray:
    k = ss.kappa
    return np.diag([0.0, ss.gamma_m * (2 * ss.nbar + 1), k, k, k, k])


def assess_stability_dual(ss: DualSteadyState) -> dict:
    """``{stable, balance, max_re}``; ``balance`` flags equal couplings and mirrored detunings."""
    A, _ = drift_matrix_dual(ss)
    max_re = float(np.max(eigenvalues(A).real))
    scale_g = max(abs(ss.G_A), abs(ss.G_B), 1e-300)
    scale_d = max(abs(ss.Delta_A), abs(ss.Delta_B), 1e-300)
    balance = (abs(abs(ss.G_A) - abs(ss.G_B)) <= BALANCE_TOL * scale_g
               and abs(ss.Delta_A + ss.Delta_B) <= BALANCE_TOL * scale_d)
    return {"stable": bool(max_re < 0), "balance": bool(balance), "max_re": max_re}


def steady_cm_dual(ss: DualSteadyState) -> np.ndarray:
    """Intracavity 6x6 CM from the Lyapunov equation (Markov mirror noise)."""
    A, _ = drift_matrix_dual(ss)
    return solve_lyapunov(A, diffusion_dual(ss))


def make_exp_filters(omega_a: float, omega_b: float, gamma: float) -> tuple[FilterSpec, FilterSpec]:
    """Two exponential filters of common rate ``gamma`` centred at ``omega_a``, ``omega_b``."""
    if not gamma > 0:
        raise NonPositiveInput("filter rate must be positive")
    return (FilterSpec("exponential", omega_a, gamma), FilterSpec("exponential", omega_b, gamma))


def output_cm_dual(
    ss: DualSteadyState,
    filters: Sequence[FilterSpec],
    thermal: str = "markov",
    quad: Optional[QuadratureSpec] = None,
) -> np.ndarray:
    """6x6 CM of the mirror, the filtered output of mode A and that of mode B.

    Args:
        ss: stationary state.
        filters: ``(filter_A, filter_B)``.
        thermal: ``markov`` or ``exact`` kernel for the mirror noise.
    """
    f_a, f_b = filters
    A, _ = drift_matrix_dual(ss)
    Dm = diffusion_dual(ss)
    def coth_excess(w):
        D = np.zeros((len(w), 6, 6))
        D[:, 1, 1] = ss.gamma_m / ss.omega_m * coth_kernel(w, ss.temperature) - Dm[1, 1]
        return D

    excess, cutoff = None, None
    if thermal == "exact":
        excess = coth_excess
        rates = (ss.omega_m, ss.kappa, abs(ss.Delta_A), abs(ss.Delta_B), abs(ss.G_A), abs(ss.G_B))
        cutoff = thermal_cutoff(ss.temperature, default_omega_max(*rates))
    elif thermal != "markov":
        raise ValueError(f"unknown thermal kernel {thermal!r}")
    return filtered_output_cm(A, lambda w: np.broadcast_to(Dm, (len(w), 6, 6)), ss.kappa,
                              (0, 1), (2, 3, 4, 5),
                              [(f_a, (2, 3)), (f_b, (4, 5))], quad, excess, cutoff)
