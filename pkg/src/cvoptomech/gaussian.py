"""Gaussian states on N bosonic modes: physicality, symplectic analysis,
channels, entanglement measures and phase-space functions.

Quadratures are ordered ``(x_1, p_1, x_2, p_2, ...)``.  Two normalizations of
the covariance matrix (CM) coexist:

* ``Convention.ONE``: vacuum CM is the identity, physical iff ``V + i Omega >= 0``.
* ``Convention.HALF``: vacuum CM is ``I/2`` (used by the optomechanical
  models), physical iff ``2V + i Omega >= 0``.

Every function that compares against a threshold converts to ``ONE`` first.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import schur

from .errors import (
    DimensionMismatch,
    InvalidChannel,
    NegativeDiscriminant,
    NotPositiveDefinite,
    NotSymmetric,
    SingularCM,
    SingularResolvent,
    Unphysical,
)
from .numerics import hermitian_spectrum

POSITIVITY_TOL = 1e-10

Z = np.diag([1.0, -1.0])


class Convention(enum.Enum):
    ONE = "one"
    HALF = "half"

    @property
    def scale(self) -> float:
        """Factor taking a CM in this convention to the vacuum-one convention."""
        return 1.0 if self is Convention.ONE else 2.0


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def pt_mask(n_modes: int, modes: Sequence[int]) -> np.ndarray:
    """Diagonal +-1 matrix flipping the momenta of ``modes`` (partial transpose)."""
    diag = np.ones(2 * n_modes)
    for k in modes:
        if not 0 <= k < n_modes:
            raise DimensionMismatch(f"mode index {k} out of range for {n_modes} modes")
        diag[2 * k + 1] = -1.0
    return np.diag(diag)


@dataclass(frozen=True, eq=False)
class GaussianState:
    cm: np.ndarray
    d: Optional[np.ndarray] = None
    convention: Convention = Convention.ONE

    def __post_init__(self):
        cm = np.array(self.cm, dtype=float)
        if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] % 2:
            raise DimensionMismatch(f"CM must be 2N x 2N, got {cm.shape}")
        if not np.allclose(cm, cm.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cm).max())):
            raise NotSymmetric("CM is not symmetric")
        cm = 0.5 * (cm + cm.T)
        d = np.zeros(cm.shape[0]) if self.d is None else np.array(self.d, dtype=float)
        if d.shape != (cm.shape[0],):
            raise DimensionMismatch("displacement length must match the CM")
        cm.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "cm", cm)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "convention", Convention(self.convention))

    @property
    def modes(self) -> int:
        return self.cm.shape[0] // 2

    def cm_one(self) -> np.ndarray:
        """CM in the vacuum-one convention."""
        return self.convention.scale * self.cm

    def to(self, convention: Convention) -> "GaussianState":
        convention = Convention(convention)
        factor = self.convention.scale / convention.scale
        return GaussianState(self.cm * factor, self.d, convention)

    def blocks(self) -> "TwoModeBlocks":
        if self.modes != 2:
            raise DimensionMismatch("block form needs a two-mode state")
        return TwoModeBlocks.from_cm(self.cm_one())


class TwoModeBlocks(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @classmethod
    def from_cm(cls, V) -> "TwoModeBlocks":
        V = np.asarray(V, dtype=float)
        if V.shape != (4, 4):
            raise DimensionMismatch("two-mode CM must be 4x4")
        return cls(V[:2, :2].copy(), V[2:, 2:].copy(), V[:2, 2:].copy())

    def cm(self) -> np.ndarray:
        return np.block([[self.A, self.C], [self.C.T, self.B]])


def _cm_of(state) -> np.ndarray:
    if isinstance(state, GaussianState):
        return state.cm_one()
    V = np.asarray(state, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2:
        raise DimensionMismatch(f"CM must be 2N x 2N, got {V.shape}")
    return V


# -- standard states (vacuum-one convention) --------------------------------


def vacuum(n_modes: int = 1) -> GaussianState:
    return GaussianState(np.eye(2 * n_modes))


def thermal(nbar: Sequence[float]) -> GaussianState:
    nbar = np.atleast_1d(np.asarray(nbar, dtype=float))
    return GaussianState(np.diag(np.repeat(2 * nbar + 1, 2)))


def two_mode_squeezed_cm(r: float) -> np.ndarray:
    ch, sh = np.cosh(r), np.sinh(r)
    return np.block([[ch * np.eye(2), -sh * Z], [-sh * Z, ch * np.eye(2)]])


def two_mode_squeezed(r: float) -> GaussianState:
    return GaussianState(two_mode_squeezed_cm(r))


def single_mode_squeezer(r: float, phi: float = 0.0) -> np.ndarray:
    """Symplectic matrix squeezing ``x`` by ``e^{-r}`` along angle ``phi``."""
    c, s = np.cos(phi), np.sin(phi)
    R = np.array([[c, -s], [s, c]])
    return R @ np.diag([np.exp(-r), np.exp(r)]) @ R.T


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def beam_splitter(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.block([[c * np.eye(2), s * np.eye(2)], [-s * np.eye(2), c * np.eye(2)]])


def two_mode_squeezer(r: float) -> np.ndarray:
    ch, sh = np.cosh(r / 2), np.sinh(r / 2)
    # S S^T reproduces two_mode_squeezed_cm(r)
    return np.block([[ch * np.eye(2), -sh * Z], [-sh * Z, ch * np.eye(2)]])


def direct_sum(*blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


# -- physicality and symplectic analysis ------------------------------------


def is_physical(state) -> tuple[bool, float]:
    """Bona fide test ``V + i Omega >= 0``.

    Returns:
        ``(physical, min_eig)`` with the smallest eigenvalue of ``V + i Omega``.
    """
    V = _cm_of(state)
    Om = symplectic_form(V.shape[0] // 2)
    lo = float(hermitian_spectrum(V + 1j * Om)[0])
    return lo >= -POSITIVITY_TOL, lo


def _check_pd(V):
    w = np.linalg.eigvalsh(0.5 * (V + V.T))
    if w[0] <= 0:
        raise NotPositiveDefinite(f"CM has eigenvalue {w[0]:.3e}")


def symplectic_spectrum(state) -> np.ndarray:
    """Ascending symplectic eigenvalues ``|eig(i Omega V)|`` (vacuum-one units)."""
    V = _cm_of(state)
    _check_pd(V)
    n = V.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ V))
    # eigenvalues come in +-s pairs; keep one of each
    return np.sort(ev)[::2]


def pt_symplectic_spectrum(state, modes: Sequence[int] = (0,)) -> np.ndarray:
    V = _cm_of(state)
    L = pt_mask(V.shape[0] // 2, modes)
    return symplectic_spectrum(L @ V @ L)


class WilliamsonResult(NamedTuple):
    S: np.ndarray
    values: np.ndarray
    degenerate: bool


def williamson_transform(V, degeneracy_tol: float = 1e-8) -> WilliamsonResult:
    """Symplectic ``S`` with ``S V S^T = diag(s_1, s_1, ..., s_N, s_N)``.

    The values are ascending.  Construction: the antisymmetric matrix
    ``K = V^{-1/2} Omega V^{-1/2}`` has a real Schur form made of 2x2 blocks
    ``[[0, 1/s_k], [-1/s_k, 0]]``; with ``K = O T O^T`` the matrix
    ``S = D^{1/2} O^T V^{-1/2}`` does the job.
    """
    V = np.asarray(V, dtype=float)
    _check_pd(V)
    n = V.shape[0] // 2
    Om = symplectic_form(n)
    w, U = np.linalg.eigh(0.5 * (V + V.T))
    Vmh = U @ np.diag(w ** -0.5) @ U.T
    K = Vmh @ Om @ Vmh
    K = 0.5 * (K - K.T)
    T, O = schur(K, output="real")
    inv_s = np.empty(n)
    perm = np.arange(2 * n)
    for k in range(n):
        b = T[2 * k, 2 * k + 1]
        if b < 0:
            # swapping the two basis vectors flips the block orientation
            perm[2 * k], perm[2 * k + 1] = 2 * k + 1, 2 * k
        inv_s[k] = abs(b)
    O = O[:, perm]
    s = 1.0 / inv_s
    order = np.argsort(s, kind="stable")
    cols = np.ravel([[2 * k, 2 * k + 1] for k in order])
    O = O[:, cols]
    s = s[order]
    Dh = np.diag(np.repeat(np.sqrt(s), 2))
    S = Dh @ O.T @ Vmh
    degenerate = bool(n > 1 and np.min(np.diff(s)) < degeneracy_tol * max(1.0, s[-1]))
    return WilliamsonResult(S, s, degenerate)


# -- channels ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TgcpChannel:
    """Trace-preserving Gaussian channel ``V -> S V S^T + G`` (vacuum-one units)."""

    S: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        G = np.array(self.G, dtype=float)
        if S.shape != G.shape or S.shape[0] != S.shape[1] or S.shape[0] % 2:
            raise DimensionMismatch("S and G must be equal-size 2N x 2N matrices")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "G", 0.5 * (G + G.T))

    def complete_positivity_margin(self) -> float:
        Om = symplectic_form(self.S.shape[0] // 2)
        M = self.G + 1j * Om - 1j * self.S @ Om @ self.S.T
        return float(hermitian_spectrum(0.5 * (M + M.conj().T))[0])

    def is_valid(self) -> bool:
        return self.complete_positivity_margin() >= -POSITIVITY_TOL * max(1.0, np.abs(self.G).max())


def attenuation_channel(tau: float, n_modes: int = 1) -> TgcpChannel:
    """Beam splitter of amplitude transmissivity ``tau`` mixing in vacuum."""
    eye = np.eye(2 * n_modes)
    return TgcpChannel(tau * eye, (1 - tau**2) * eye)


def apply_tgcp(state: GaussianState, ch: TgcpChannel) -> GaussianState:
    V = state.cm_one()
    if ch.S.shape != V.shape:
        raise DimensionMismatch("channel and state dimensions differ")
    if not ch.is_valid():
        raise InvalidChannel(
            f"G + i Omega - i S Omega S^T has eigenvalue {ch.complete_positivity_margin():.3e}"
        )
    out = GaussianState(ch.S @ V @ ch.S.T + ch.G, ch.S @ state.d, Convention.ONE)
    return out.to(state.convention)


@dataclass(frozen=True, eq=False)
class GcpChannel:
    """General Gaussian operation given by its doubled-space CM blocks."""

    gamma1: np.ndarray
    gamma12: np.ndarray
    gamma2: np.ndarray

    def __post_init__(self):
        g1 = np.array(self.gamma1, dtype=float)
        g12 = np.array(self.gamma12, dtype=float)
        g2 = np.array(self.gamma2, dtype=float)
        if g12.shape != (g1.shape[0], g2.shape[0]):
            raise DimensionMismatch("gamma12 must be (dim gamma1) x (dim gamma2)")
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "gamma12", g12)
        object.__setattr__(self, "gamma2", g2)

    def joint_cm(self) -> np.ndarray:
        return np.block([[self.gamma1, self.gamma12], [self.gamma12.T, self.gamma2]])


def vacuum_projection_channel(r: float) -> GcpChannel:
    """Projection of the second mode of a two-mode state onto the vacuum.

    Exact only as ``r -> infinity``; the output then tends to
    ``A - C (B + I)^{-1} C^T``.
    """
    ch, sh = np.cosh(r), np.sinh(r)
    g12 = np.zeros((2, 4))
    g12[0, 0] = sh
    g12[1, 1] = -sh
    return GcpChannel(ch * np.eye(2), g12, np.diag([ch, ch, 1.0, 1.0]))


def apply_gcp(state: GaussianState, ch: GcpChannel) -> GaussianState:
    V = state.cm_one()
    if ch.gamma2.shape != V.shape:
        raise DimensionMismatch("gamma2 and state dimensions differ")
    L = np.diag(np.tile([1.0, -1.0], V.shape[0] // 2))
    R = L @ ch.gamma2 @ L + V
    if np.linalg.cond(R) > 1e13:
        raise SingularResolvent("Lambda Gamma2 Lambda + V is singular")
    X = L @ ch.gamma12.T
    out = ch.gamma1 - X.T @ np.linalg.solve(R, X)
    return GaussianState(0.5 * (out + out.T), None, Convention.ONE).to(state.convention)


# -- two-mode entanglement ----------------------------------------------------


def _two_mode_cm(state) -> np.ndarray:
    V = _cm_of(state)
    if V.shape != (4, 4):
        raise DimensionMismatch("a two-mode state is required")
    return V


def pt_eigenvalues(state) -> tuple[float, float]:
    """Both symplectic eigenvalues of the partially transposed two-mode CM."""
    V = _two_mode_cm(state)
    A, B, C = TwoModeBlocks.from_cm(V)
    sigma = np.linalg.det(A) + np.linalg.det(B) - 2 * np.linalg.det(C)
    det = np.linalg.det(V)
    disc = sigma**2 - 4 * det
    if disc < 0:
        if disc < -1e-10 * max(1.0, sigma**2):
            raise NegativeDiscriminant(f"Sigma^2 - 4 det V = {disc:.3e}")
        disc = 0.0
    root = np.sqrt(disc)
    lo = (sigma - root) / 2
    if lo < 0:
        raise NegativeDiscriminant(f"negative squared PT eigenvalue {lo:.3e}")
    return float(np.sqrt(lo)), float(np.sqrt((sigma + root) / 2))


def nu_min_pt(state) -> float:
    """Smallest symplectic eigenvalue of the partial transpose (vacuum-one units)."""
    return pt_eigenvalues(state)[0]


class Negativity(NamedTuple):
    E_N: float
    negativity: float
    nu: float


def log_negativity(state) -> Negativity:
    nu_lo, nu_hi = pt_eigenvalues(state)
    if nu_hi < 1 - 1e-9:
        raise Unphysical("both PT symplectic eigenvalues are below one")
    E_N = max(0.0, -np.log(nu_lo)) if nu_lo > 0 else np.inf
    neg = max(0.0, (1 / nu_lo - 1) / 2) if nu_lo > 0 else np.inf
    return Negativity(E_N, neg, nu_lo)


DEFAULT_A_GRID = np.logspace(-1, 1, 61)


class SeparabilityReport(NamedTuple):
    simon_entangled: bool
    simon_min_eig: float
    duan_violation: float
    duan_a: float
    mancini_violation: float
    mancini_a: float


def separability_report(state, a_grid=None, extra_a: Sequence[float] = ()) -> SeparabilityReport:
    """Simon test plus Duan and Mancini witnesses over a grid of ``a``.

    A positive violation witnesses entanglement.  Duan and Mancini variances
    use the canonical ``[x, p] = i`` normalization (half the vacuum-one CM).
    """
    V = _two_mode_cm(state)
    L = pt_mask(2, [1])
    lo = float(hermitian_spectrum(L @ V @ L + 1j * symplectic_form(2))[0])
    grid = np.concatenate([DEFAULT_A_GRID if a_grid is None else np.asarray(a_grid, float),
                           np.asarray(extra_a, float)])
    if np.any(grid == 0):
        raise ValueError("a must be non-zero")
    Vh = V / 2
    aa = np.abs(grid)
    uL = np.stack([aa, np.zeros_like(aa), 1 / grid, np.zeros_like(aa)], axis=1)
    uM = np.stack([np.zeros_like(aa), aa, np.zeros_like(aa), -1 / grid], axis=1)
    varL = np.einsum("ki,ij,kj->k", uL, Vh, uL)
    varM = np.einsum("ki,ij,kj->k", uM, Vh, uM)
    bound = grid**2 + grid**-2
    duan = bound - (varL + varM)
    mancini = 0.25 * bound**2 - varL * varM
    i, j = int(np.argmax(duan)), int(np.argmax(mancini))
    return SeparabilityReport(lo < -POSITIVITY_TOL, lo, float(duan[i]), float(grid[i]),
                              float(mancini[j]), float(grid[j]))


def eof_symmetric(state, tol: float = 1e-8) -> float:
    """Entanglement of formation of a symmetric two-mode Gaussian state (nats).

    Uses the pure two-mode squeezed state with the same log-negativity,
    summing its Schmidt series ``c_n = tanh^n r / cosh r`` with ``r = E_N / 2``.
    """
    A, B, _ = TwoModeBlocks.from_cm(_two_mode_cm(state))
    dA, dB = np.linalg.det(A), np.linalg.det(B)
    if abs(dA - dB) > tol * max(1.0, abs(dA)):
        raise NotSymmetric(f"det A = {dA:.6g} differs from det B = {dB:.6g}")
    E_N = log_negativity(state).E_N
    if E_N == 0:
        return 0.0
    r = E_N / 2
    t2 = np.tanh(r) ** 2
    total, n = 0.0, 0
    p0 = 1 / np.cosh(r) ** 2
    while True:
        p = p0 * t2**n
        total -= p * np.log(p)
        # remaining tail: sum_{k>n} p_k |ln p_k| is bounded by a geometric series
        tail = p * t2 / (1 - t2) * (abs(np.log(p)) + abs(np.log(t2)) / (1 - t2))
        if tail < 1e-12:
            return float(total)
        n += 1


# -- phase-space functions ----------------------------------------------------


def characteristic(state: GaussianState, eta) -> complex:
    V = state.cm_one()
    eta = np.asarray(eta, dtype=float)
    y = symplectic_form(state.modes) @ eta
    return complex(np.exp(-0.25 * y @ V @ y + 1j * state.d @ y))


def wigner(state: GaussianState, xi) -> float:
    V = state.cm_one()
    det = np.linalg.det(V)
    if det <= 0 or np.linalg.cond(V) > 1e14:
        raise SingularCM("Wigner function needs an invertible CM")
    Om = symplectic_form(state.modes)
    y = Om @ (np.asarray(xi, dtype=float) - state.d)
    return float(np.pi ** -state.modes / np.sqrt(det) * np.exp(-y @ np.linalg.solve(V, y)))


def eval_phase_space(state: GaussianState, point, which: str = "wigner"):
    if which == "characteristic":
        return characteristic(state, point)
    if which == "wigner":
        return wigner(state, point)
    raise ValueError(f"unknown phase-space function {which!r}")

