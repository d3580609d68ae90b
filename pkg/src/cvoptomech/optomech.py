"""A driven cavity mode coupled to one vibrating mirror by radiation pressure.

Fluctuation vector ``u = (dq, dp, dX, dY)``; all CMs returned here are in the
vacuum-half convention (vacuum variance 1/2), as is customary in the
optomechanics literature.  Frequencies and rates are angular (rad/s).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import constants as sc

from .errors import DomainError, FixedPointDiverged, NonPositiveInput, Unphysical
from .filters import (
    FilterSpec,
    default_omega_max,
    filtered_output_cm,
    pole_points,
)
from .gaussian import Convention, GaussianState, log_negativity, symplectic_form
from .numerics import (
    QuadratureSpec,
    eigenvalues,
    hermitian_spectrum,
    integrate_matrix,
    solve_lyapunov,
)

C_LIGHT = sc.c
HBAR = sc.hbar
K_B = sc.k

FIXED_POINT_DAMPING = 0.5
FIXED_POINT_MAX_ITER = 10_000
FIXED_POINT_RTOL = 1e-10


class DetuningMode(enum.Enum):
    EFFECTIVE = "effective"
    BARE = "bare"


@dataclass(frozen=True)
class OptomechConfig:
    """Physical parameters of a single driven cavity with a movable mirror.

    Attributes:
        omega_m: mechanical angular frequency (rad/s).
        Q: mechanical quality factor, ``gamma_m = omega_m / Q``.
        mass: effective mirror mass (kg).
        length: cavity length (m).
        finesse: cavity finesse.
        wavelength: laser wavelength (m).
        power: input power (W).
        detuning: effective or bare detuning (rad/s), see ``detuning_mode``.
        temperature: mirror bath temperature (K).
    """

    omega_m: float
    Q: float
    mass: float
    length: float
    finesse: float
    wavelength: float
    power: float
    detuning: float
    temperature: float
    detuning_mode: DetuningMode = DetuningMode.EFFECTIVE

    def __post_init__(self):
        object.__setattr__(self, "detuning_mode", DetuningMode(self.detuning_mode))
        for name in ("omega_m", "Q", "mass", "length", "finesse", "wavelength", "temperature"):
            if not getattr(self, name) > 0:
                raise NonPositiveInput(f"{name} must be positive")
        if not self.power >= 0:
            raise NonPositiveInput("power must be non-negative")
        if not np.isfinite(self.detuning):
            raise NonPositiveInput("detuning must be finite")

    @property
    def gamma_m(self) -> float:
        return self.omega_m / self.Q

    @property
    def free_spectral_range(self) -> float:
        return np.pi * C_LIGHT / self.length


@dataclass(frozen=True)
class DerivedParams:
    """Rates entering the linearized dynamics (all rad/s except ``alpha_s``, ``nbar``)."""

    omega_m: float
    gamma_m: float
    kappa: float
    G0: float
    E: float
    alpha_s: float
    Delta: float
    G: float
    nbar: float
    temperature: float = 0.0
    Delta0: Optional[float] = None

    @classmethod
    def from_rates(cls, omega_m, gamma_m, kappa, Delta, G, nbar, temperature=0.0):
        """Build parameters directly from the effective rates (no optical constants)."""
        return cls(omega_m, gamma_m, kappa, np.nan, np.nan, np.nan, Delta, G, nbar, temperature)


def thermal_occupation(omega, temperature) -> float:
    if temperature <= 0:
        return 0.0
    return float(1.0 / np.expm1(HBAR * omega / (K_B * temperature)))


def cavity_decay(length, finesse) -> float:
    """Amplitude decay rate ``pi c / (L F)``."""
    return np.pi * C_LIGHT / (length * finesse)


def bare_coupling(omega_c, length, mass, omega_m) -> float:
    """Single-photon coupling ``(omega_c / L) sqrt(hbar / (m omega_m))``."""
    return omega_c / length * np.sqrt(HBAR / (mass * omega_m))


def drive_amplitude(power, kappa, omega_0) -> float:
    """``|E| = sqrt(2 P kappa / (hbar omega_0))``."""
    return np.sqrt(2 * power * kappa / (HBAR * omega_0))


def solve_detuning(Delta0, E, kappa, G0, omega_m) -> float:
    """Effective detuning from the bare one, ``Delta = Delta0 - G0^2 |alpha_s(Delta)|^2 / omega_m``.

    Damped fixed-point iteration; bistable parameters usually fail to converge.

    Raises:
        FixedPointDiverged: after ``FIXED_POINT_MAX_ITER`` iterations.
    """
    shift = G0**2 * E**2 / omega_m
    Delta = Delta0
    scale = max(abs(Delta0), omega_m, kappa)
    for _ in range(FIXED_POINT_MAX_ITER):
        target = Delta0 - shift / (kappa**2 + Delta**2)
        new = (1 - FIXED_POINT_DAMPING) * Delta + FIXED_POINT_DAMPING * target
        if not np.isfinite(new):
            break
        if abs(new - Delta) <= FIXED_POINT_RTOL * max(abs(new), scale):
            return float(new)
        Delta = new
    raise FixedPointDiverged(f"effective detuning did not converge from Delta0={Delta0:.6g}")


def derive_params(cfg: OptomechConfig) -> DerivedParams:
    kappa = cavity_decay(cfg.length, cfg.finesse)
    omega_c = 2 * np.pi * C_LIGHT / cfg.wavelength
    G0 = bare_coupling(omega_c, cfg.length, cfg.mass, cfg.omega_m)
    Delta0 = None
    if cfg.detuning_mode is DetuningMode.EFFECTIVE:
        Delta = float(cfg.detuning)
        E = drive_amplitude(cfg.power, kappa, omega_c - Delta)
    else:
        Delta0 = float(cfg.detuning)
        E = drive_amplitude(cfg.power, kappa, omega_c - Delta0)
        Delta = solve_detuning(Delta0, E, kappa, G0, cfg.omega_m)
    alpha = E / np.hypot(kappa, Delta)
    return DerivedParams(
        omega_m=cfg.omega_m,
        gamma_m=cfg.gamma_m,
        kappa=kappa,
        G0=G0,
        E=E,
        alpha_s=alpha,
        Delta=Delta,
        G=G0 * alpha * np.sqrt(2),
        nbar=thermal_occupation(cfg.omega_m, cfg.temperature),
        temperature=cfg.temperature,
        Delta0=Delta0,
    )


# -- linearized dynamics ------------------------------------------------------


def coth_kernel(omega, temperature) -> np.ndarray:
    """``omega coth(hbar omega / 2 k_B T)``, finite at ``omega = 0``."""
    omega = np.asarray(omega, dtype=float)
    if temperature <= 0:
        return np.abs(omega)
    scale = 2 * K_B * temperature / HBAR
    x = omega / scale
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    val = np.where(small, 1 + x**2 / 3, xs / np.tanh(xs))
    return scale * val


@dataclass(frozen=True, eq=False)
class DriftModel:
    A: np.ndarray
    D_markov: np.ndarray
    params: DerivedParams

    def D_exact(self, omega) -> np.ndarray:
        """Diffusion matrices with the quantum Brownian kernel, shape ``(k, 4, 4)``."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        p = self.params
        D = np.broadcast_to(self.D_markov, omega.shape + (4, 4)).copy()
        D[:, 1, 1] = p.gamma_m / p.omega_m * coth_kernel(omega, p.temperature)
        return D

    @property
    def rates(self) -> list:
        p = self.params
        return [p.omega_m, p.kappa, abs(p.Delta)]


def drift_matrix(dp: DerivedParams, gamma_m: Optional[float] = None) -> DriftModel:
    g = dp.gamma_m if gamma_m is None else gamma_m
    if gamma_m is not None:
        dp = replace(dp, gamma_m=g)
    w, k, D, G = dp.omega_m, dp.kappa, dp.Delta, dp.G
    A = np.array([
        [0.0, w, 0.0, 0.0],
        [-w, -g, G, 0.0],
        [0.0, 0.0, -k, D],
        [G, 0.0, -D, -k],
    ])
    Dm = np.diag([0.0, g * (2 * dp.nbar + 1), k, k])
    return DriftModel(A, Dm, dp)


class StabilityReport(dict):
    """``{s1, s2, stable, max_re, eigen_stable}``."""


def routh_hurwitz(dp: DerivedParams) -> tuple[float, float]:
    g, k, w, D, G = dp.gamma_m, dp.kappa, dp.omega_m, dp.Delta, dp.G
    s1 = (2 * g * k * ((k**2 + (w - D) ** 2) * (k**2 + (w + D) ** 2)
                       + g * ((g + 2 * k) * (k**2 + D**2) + 2 * k * w**2))
          + D * w * G**2 * (g + 2 * k) ** 2)
    s2 = w * (k**2 + D**2) - G**2 * D
    return float(s1), float(s2)


def assess_stability(dp: DerivedParams, gamma_m: Optional[float] = None) -> StabilityReport:
    model = drift_matrix(dp, gamma_m)
    s1, s2 = routh_hurwitz(model.params)
    max_re = float(np.max(eigenvalues(model.A).real))
    return StabilityReport(s1=s1, s2=s2, stable=bool(s1 > 0 and s2 > 0),
                           max_re=max_re, eigen_stable=bool(max_re < 0))


# -- steady state ---------------------------------------------------------------


class SteadyMethod(enum.Enum):
    LYAPUNOV = "lyapunov"
    SPECTRAL_MARKOV = "spectral_markov"
    SPECTRAL_EXACT = "spectral_exact"


def _resolvent(A, omega):
    n = A.shape[0]
    return np.linalg.inv(1j * omega[:, None, None] * np.eye(n) + A)


def spectral_cm(A, diffusion, quad: QuadratureSpec) -> np.ndarray:
    """``int dw/(2 pi) M(w) D(w) M(w)^dagger`` with ``M = (i w + A)^{-1}``."""

    def integrand(w):
        M = _resolvent(A, w)
        return M @ diffusion(w) @ np.conj(np.swapaxes(M, -1, -2)) / (2 * np.pi)

    V = integrate_matrix(integrand, quad).real
    return 0.5 * (V + V.T)


def _default_quad(model: DriftModel, quad: Optional[QuadratureSpec], **extra) -> QuadratureSpec:
    pts = tuple(pole_points(model.A))
    if quad is None:
        quad = QuadratureSpec(omega_max=default_omega_max(*model.rates), **extra)
    return replace(quad, points=tuple(quad.points) + pts)


def thermal_cutoff(temperature: float, floor: float) -> float:
    """Upper frequency for the coth correction: ten thermal frequencies."""
    return max(10 * K_B * temperature / HBAR, floor)


def steady_cm(
    model: DriftModel,
    method: str | SteadyMethod = SteadyMethod.LYAPUNOV,
    quad: Optional[QuadratureSpec] = None,
    cutoff: Optional[float] = None,
) -> np.ndarray:
    """Stationary 4x4 CM (vacuum-half convention).

    Args:
        model: drift and diffusion.
        method: ``lyapunov``, ``spectral_markov`` or ``spectral_exact``.
        quad: quadrature settings for the spectral methods.
        cutoff: for ``spectral_exact``, the frequency beyond which the coth
            correction is dropped (the correction to the momentum variance
            grows logarithmically with it).  Defaults to
            :func:`thermal_cutoff`.

    Raises:
        UnstableDrift: the drift matrix is not Hurwitz.
    """
    method = SteadyMethod(method)
    V_lyap = solve_lyapunov(model.A, model.D_markov)
    if method is SteadyMethod.LYAPUNOV:
        return V_lyap
    if method is SteadyMethod.SPECTRAL_MARKOV:
        q = _default_quad(model, quad)
        Dm = model.D_markov
        return spectral_cm(model.A, lambda w: np.broadcast_to(Dm, (len(w), 4, 4)), q)
    return V_lyap + thermal_correction(model, quad, cutoff)


def thermal_correction(model: DriftModel, quad: Optional[QuadratureSpec] = None,
                       cutoff: Optional[float] = None) -> np.ndarray:
    """Difference between the coth-kernel CM and the Markov CM, integrated up to ``cutoff``."""
    floor = default_omega_max(*model.rates)
    W = thermal_cutoff(model.params.temperature, floor) if cutoff is None else float(cutoff)
    q = _default_quad(model, quad)
    q = replace(q, omega_max=W, include_tails=False, points=tuple(q.points) + (0.0,))
    Dm = model.D_markov
    return spectral_cm(model.A, lambda w: model.D_exact(w) - Dm, q)


def rwa_cm(dp: DerivedParams, blue: bool) -> np.ndarray:
    """Approximate stationary CM valid for ``omega_m >> G, kappa`` and ``Delta = -+omega_m``.

    ``blue=True`` is the heating (parametric-amplifier) sideband, ``Delta = -omega_m``.
    """
    g, k, G, n = dp.gamma_m, dp.kappa, dp.G, dp.nbar
    s = 1.0 if blue else -1.0
    den = (g + 2 * k) * (2 * g * k - s * G**2)
    V11 = n + 0.5 + 2 * G**2 * k * (0.5 + s * (n + 0.5)) / den
    V33 = 0.5 + G**2 * g * (n + 0.5 + s * 0.5) / den
    V14 = 2 * G * g * k * (n + 0.5 + s * 0.5) / den
    return np.array([
        [V11, 0.0, 0.0, V14],
        [0.0, V11, s * V14, 0.0],
        [0.0, s * V14, V33, 0.0],
        [V14, 0.0, 0.0, V33],
    ])


def rwa_negativity_bound(dp: DerivedParams) -> float:
    """Upper bound on intracavity ``E_N`` in the blue-detuned RWA regime."""
    return float(np.log((1 + dp.G / np.sqrt(2 * dp.kappa * dp.gamma_m)) / (1 + dp.nbar)))


def scattering_rates(dp: DerivedParams) -> tuple[float, float]:
    """Anti-Stokes and Stokes rates ``A_-``, ``A_+``."""
    c = dp.G**2 * dp.kappa / 2
    A_minus = c / (dp.kappa**2 + (dp.Delta - dp.omega_m) ** 2)
    A_plus = c / (dp.kappa**2 + (dp.Delta + dp.omega_m) ** 2)
    return float(A_minus), float(A_plus)


def intracavity_report(V, dp: DerivedParams) -> dict:
    """Entanglement and cooling figures of a stationary intracavity CM.

    Args:
        V: 4x4 CM in the vacuum-half convention.
        dp: the parameters that produced it.

    Returns:
        dict with ``E_N``, ``n_eff``, ``A_plus``, ``A_minus``, ``Gamma`` and
        ``n_eff_perturbative``.
    """
    V = np.asarray(V, dtype=float)
    neg = log_negativity(GaussianState(V, convention=Convention.HALF))
    A_minus, A_plus = scattering_rates(dp)
    Gamma = A_minus - A_plus
    return {
        "E_N": neg.E_N,
        "n_eff": float((V[0, 0] + V[1, 1] - 1) / 2),
        "A_plus": A_plus,
        "A_minus": A_minus,
        "Gamma": Gamma,
        "n_eff_perturbative": float((dp.gamma_m * dp.nbar + A_plus) / (dp.gamma_m + Gamma)),
    }


# -- output field ---------------------------------------------------------------


def output_cm(model: DriftModel, filters: Sequence[FilterSpec], thermal: str = "markov",
              quad: Optional[QuadratureSpec] = None) -> np.ndarray:
    """CM of the mirror plus ``N`` filtered output modes, size ``2N+2``.

    Args:
        model: single-cavity drift model.
        filters: causal filters, all acting on the one cavity output.
        thermal: ``markov`` or ``exact`` kernel for the mirror noise.  The
            exact kernel is integrated up to :func:`thermal_cutoff`.
    """
    Dm = model.D_markov

    def coth_excess(w):
        return model.D_exact(w) - Dm

    excess, cutoff = None, None
    if thermal == "exact":
        excess = coth_excess
        cutoff = thermal_cutoff(model.params.temperature, default_omega_max(*model.rates))
    elif thermal != "markov":
        raise ValueError(f"unknown thermal kernel {thermal!r}")
    return filtered_output_cm(model.A, lambda w: np.broadcast_to(Dm, (len(w),) + Dm.shape),
                              model.params.kappa, (0, 1), (2, 3),
                              [(f, (2, 3)) for f in filters], quad, excess, cutoff)


def output_spectrum(model: DriftModel, omega) -> np.ndarray:
    """Photon-number fluctuation spectrum of the cavity field.

    Normalized so that ``int dw/(2 pi) S(w)`` is the stationary
    ``<da^dagger da>``.  Optical input noise is the vacuum (normally
    ordered); the mirror noise is taken in its symmetrized Markov form.

    Raises:
        UnstableDrift: the drift matrix is not Hurwitz.
    """
    from .errors import UnstableDrift

    if np.max(eigenvalues(model.A).real) >= 0:
        raise UnstableDrift("drift matrix is not stable")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    p = model.params
    # <n(w) n(w')^T> = N delta(w + w'); the optical block encodes <a_in a_in^dagger> = 1
    N = np.zeros((4, 4), dtype=complex)
    N[1, 1] = model.D_markov[1, 1]
    N[2:, 2:] = p.kappa * np.array([[1, 1j], [-1j, 1]])
    c = np.array([0, 0, 1, 1j]) / np.sqrt(2)
    M = _resolvent(model.A, omega)
    x = np.swapaxes(M, -1, -2) @ c
    S = np.einsum("ki,ij,kj->k", np.conj(x), N, x).real
    return np.maximum(S, 0.0)


# -- tripartite classification ---------------------------------------------


def tripartite_test(V, convention: Convention = Convention.HALF) -> np.ndarray:
    """Minimum eigenvalue of ``Lambda_j V Lambda_j + i Omega`` for each single-mode bipartition.

    ``V`` is a 6x6 CM; the test runs in the vacuum-one convention.  A negative
    entry ``j`` means mode ``j`` is inseparable from the other two.

    Raises:
        Unphysical: ``V + i Omega`` itself is not positive semidefinite.
    """
    V = GaussianState(V, convention=Convention(convention)).cm_one()
    if V.shape != (6, 6):
        raise ValueError("tripartite test needs a three-mode CM")
    Om = symplectic_form(3)
    if hermitian_spectrum(V + 1j * Om)[0] < -1e-8:
        raise Unphysical("CM violates the uncertainty principle")
    out = np.empty(3)
    for j in range(3):
        L = np.eye(6)
        L[2 * j + 1, 2 * j + 1] = -1.0
        out[j] = hermitian_spectrum(L @ V @ L + 1j * Om)[0]
    return out


# -- membrane in the middle ----------------------------------------------------


@dataclass(frozen=True)
class MembraneSpec:
    """Partially reflecting membrane inside a cavity of length ``2L``.

    ``q0`` is measured from the cavity centre; mode ``n`` has
    ``k_n = n pi / L``.
    """

    half_length: float
    q0: float
    R: float
    T: float
    n: int

    def __post_init__(self):
        if not self.half_length > 0:
            raise NonPositiveInput("half_length must be positive")
        if not (0 <= self.R < 1 and self.T >= 0 and self.R + self.T <= 1 + 1e-12):
            raise DomainError("need 0 <= R < 1, T >= 0 and R + T <= 1")
        if self.n < 1:
            raise DomainError("mode index must be positive")

    @property
    def k_n(self) -> float:
        return self.n * np.pi / self.half_length

    @property
    def omega_n(self) -> float:
        return C_LIGHT * self.k_n


def membrane_split(spec: MembraneSpec) -> dict:
    """Frequencies of the split mode pair and their linear position sensitivity.

    The split formulas assume a lossless membrane, ``T = 1 - R``.

    Returns:
        dict with ``omega_minus``, ``omega_plus``, ``delta_minus``,
        ``delta_plus`` (rad/s) and the dimensionless slope ``f``; a
        displacement ``q`` shifts the pair by ``-+ f omega_n q / L``.

    Raises:
        DomainError: ``1/R - cos^2(2 k_n q0) <= 0``.
    """
    R, L = spec.R, spec.half_length
    c2 = np.cos(2 * spec.k_n * spec.q0)
    disc = 1 / R - c2**2 if R > 0 else np.inf
    if not disc > 0:
        raise DomainError("1/R - cos^2(2 k_n q0) must be positive")
    sr = np.sqrt(R)
    a = np.arcsin(sr * c2)
    b = np.arcsin(sr)
    unit = C_LIGHT / (2 * L)
    delta_minus = unit * (b - a)
    delta_plus = unit * (np.pi - a - b)
    f = np.sin(2 * spec.k_n * spec.q0) / np.sqrt(disc)
    return {
        "omega_minus": spec.omega_n - delta_minus,
        "omega_plus": spec.omega_n + delta_plus,
        "delta_minus": float(delta_minus),
        "delta_plus": float(delta_plus),
        "f": float(f),
    }


def membrane_phase_residual(spec: MembraneSpec, omega) -> np.ndarray:
    """Residual of the exact mode condition, written as
    ``sqrt(T) sin 2kL + sqrt(R) (cos 2kL - cos 2kq0)``; zero on a cavity mode.
    """
    k = np.asarray(omega, dtype=float) / C_LIGHT
    L, q0 = spec.half_length, spec.q0
    return np.sqrt(spec.T) * np.sin(2 * k * L) + np.sqrt(spec.R) * (np.cos(2 * k * L) - np.cos(2 * k * q0))
