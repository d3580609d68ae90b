"""Small dense linear algebra, matrix-valued quadrature and scalar root finding.

Matrices here are tiny (at most 16x16), so the routines favour direct,
transparent formulations over clever ones.  LAPACK (through numpy) does the
factorizations; the quadrature is a vectorized adaptive Gauss-Kronrod rule
written here because the integrands are cheap to evaluate in batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    NoBracket,
    NoConvergence,
    NotHermitian,
    SingularSystem,
    ToleranceNotMet,
    UnstableDrift,
)

MAX_DIM = 16


def _as_square(M, name="matrix") -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a real square matrix (Hessenberg + shifted QR via LAPACK).

    Args:
        M: real ``n x n`` array with ``n <= 16``.

    Returns:
        complex array of the ``n`` eigenvalues, unordered.
    """
    M = _as_square(M)
    if M.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {M.shape[0]} exceeds {MAX_DIM}")
    try:
        return np.linalg.eigvals(M).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc


def max_real_part(M) -> float:
    return float(np.max(eigenvalues(M).real))


def hermitian_spectrum(M, rtol: float = 1e-12) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix.

    Raises:
        NotHermitian: if ``||M - M^dagger|| > rtol * ||M||``.
    """
    M = _as_square(M)
    scale = np.linalg.norm(M)
    if np.linalg.norm(M - M.conj().T) > rtol * max(scale, 1e-300):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    try:
        return np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc


def solve_lyapunov(A, D, check_stability: bool = True) -> np.ndarray:
    """Solve ``A V + V A^T = -D`` for the symmetric steady-state matrix ``V``.

    The equation is vectorized into an ``n^2 x n^2`` system
    ``(I kron A + A kron I) vec(V) = -vec(D)`` and solved by LU with partial
    pivoting.  Fine for the n <= 8 drift matrices met in practice.
    """
    A = np.asarray(_as_square(A, "A"), dtype=float)
    D = np.asarray(_as_square(D, "D"), dtype=float)
    n = A.shape[0]
    if D.shape != (n, n):
        raise ValueError("A and D must have the same shape")
    if check_stability:
        lead = max_real_part(A)
        if lead >= 0:
            raise UnstableDrift(f"drift matrix has eigenvalue with real part {lead:.3e}")
    eye = np.eye(n)
    K = np.kron(eye, A) + np.kron(A, eye)
    # column-major vec so that vec(A V) = (I kron A) vec(V)
    rhs = -D.reshape(-1, order="F")
    if np.linalg.cond(K) > 1e14:
        raise SingularSystem("vectorized Lyapunov operator is numerically singular")
    v = np.linalg.solve(K, rhs)
    V = v.reshape(n, n, order="F")
    return 0.5 * (V + V.T)


def lyapunov_residual(A, V, D) -> float:
    A, V, D = (np.asarray(x, dtype=float) for x in (A, V, D))
    return float(np.linalg.norm(A @ V + V @ A.T + D))


# Gauss-Kronrod 7/15 nodes and weights on [-1, 1] (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (x[1], x[3], x[5], x[7]=0)
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _GWEIGHTS[_i] = _w
    _GWEIGHTS[14 - _i] = _w
_GWEIGHTS[7] = _WG[3]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and domain layout for :func:`integrate_matrix`.

    ``omega_max`` splits the real line into a core ``[-omega_max, omega_max]``
    and two tails.  With ``include_tails`` the tails are integrated through
    the substitution ``omega = omega_max / t``; without it the integral is
    truncated at ``+-omega_max``.
    """

    abs_tol: float = 1e-8
    rel_tol: float = 1e-10
    omega_max: float = 1.0
    max_subdivisions: int = 20000
    include_tails: bool = True
    points: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.omega_max > 0:
            raise ValueError("omega_max must be positive")


def _panel_nodes(a, b):
    """Kronrod nodes for a batch of panels ``[a_i, b_i]`` plus half-widths."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    return x, half


def integrate_matrix(
    f: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec,
    vectorized: bool = True,
) -> np.ndarray:
    """Adaptive quadrature of a matrix-valued function over the real line.

    Args:
        f: integrand.  With ``vectorized=True`` it receives a 1-D array of
            frequencies and must return an array of shape ``(k, n, m)``;
            otherwise it is called once per frequency.
        spec: tolerances and domain layout.

    Returns:
        the ``n x m`` integral (complex if the integrand is).

    Raises:
        ToleranceNotMet: when ``spec.max_subdivisions`` panels do not reach
            ``max(abs_tol, rel_tol * max|I|)`` on the summed error estimate.
    """
    if vectorized:
        feval = f
    else:
        def feval(w):
            return np.stack([np.asarray(f(x)) for x in w])

    W = float(spec.omega_max)
    cuts = sorted({-W, W, *(float(p) for p in spec.points if -W < p < W)})
    kinds = [0] * (len(cuts) - 1)
    lo = cuts[:-1]
    hi = cuts[1:]
    if spec.include_tails:
        kinds += [1, 2]
        lo += [0.0, 0.0]
        hi += [1.0, 1.0]
    kinds = np.array(kinds)
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)

    # kind 0: plain panel; kind 1: right tail in t with omega = W/t;
    # kind 2: left tail with omega = -W/t
    def evaluate(kinds, lo, hi):
        t, half = _panel_nodes(lo, hi)
        omega = t.copy()
        jac = np.ones_like(t)
        right = kinds == 1
        left = kinds == 2
        if right.any() or left.any():
            tail = right | left
            tt = t[tail]
            omega[tail] = W / tt
            jac[tail] = W / tt**2
            omega[left] = -omega[left]
        vals = np.asarray(feval(omega.reshape(-1)))
        vals = vals.reshape(t.shape + vals.shape[1:])
        vals = vals * jac.reshape(jac.shape + (1,) * (vals.ndim - 2))
        k = np.einsum("q,pq...->p...", _KWEIGHTS, vals) * half.reshape((-1,) + (1,) * (vals.ndim - 2))
        g = np.einsum("q,pq...->p...", _GWEIGHTS, vals) * half.reshape((-1,) + (1,) * (vals.ndim - 2))
        err = np.abs(k - g).reshape(len(lo), -1).max(axis=1)
        return k, err

    est, err = evaluate(kinds, lo, hi)
    while True:
        total = est.sum(axis=0)
        tol = max(spec.abs_tol, spec.rel_tol * float(np.max(np.abs(total))))
        if err.sum() <= tol:
            return total
        if len(lo) >= spec.max_subdivisions:
            raise ToleranceNotMet(
                f"error estimate {err.sum():.3e} above tolerance {tol:.3e} "
                f"after {len(lo)} panels"
            )
        split = err > tol / (2 * len(lo))
        if not split.any():
            split = err >= err.max()
        mid = 0.5 * (lo[split] + hi[split])
        new_kinds = np.concatenate([kinds[split], kinds[split]])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_est, new_err = evaluate(new_kinds, new_lo, new_hi)
        keep = ~split
        kinds = np.concatenate([kinds[keep], new_kinds])
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        est = np.concatenate([est[keep], new_est])
        err = np.concatenate([err[keep], new_err])


def find_root(
    f: Callable[[float], float],
    bracket: Optional[Sequence[float]] = None,
    seed: Optional[float] = None,
    tol: float = 1e-12,
    grow: float = 2.0,
    max_grow: int = 200,
) -> float:
    """Root of a scalar function by Brent's method.

    Either pass a sign-changing ``bracket`` or a ``seed``; in the latter case
    the bracket ``[seed, seed * grow**k]`` is grown geometrically until the
    sign flips (the seed's sign sets the search direction).

    Raises:
        NoBracket: no sign change found.
        NoConvergence: Brent's method failed to meet ``|f(root)| <= tol``.
    """
    if bracket is None:
        if seed is None or seed == 0:
            raise NoBracket("need a bracket or a non-zero seed")
        a = float(seed)
        fa = f(a)
        b = a
        for _ in range(max_grow):
            b = a * grow
            fb = f(b)
            if np.sign(fb) != np.sign(fa):
                break
            a, fa = b, fb
        else:
            raise NoBracket(f"no sign change found growing from {seed}")
        bracket = (a, b)
    a, b = (float(x) for x in bracket)
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise NoBracket(f"f does not change sign on [{a}, {b}]")
    try:
        root, info = brentq(f, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                            maxiter=500, full_output=True)
    except RuntimeError as exc:
        raise NoConvergence(str(exc)) from exc
    if not info.converged:
        raise NoConvergence(info.flag)
    if abs(f(root)) > tol:
        # Brent converged in x; the function may be steep there
        step = max(abs(root) * 4 * np.finfo(float).eps, 1e-300)
        if np.sign(f(root - step)) == np.sign(f(root + step)):
            raise NoConvergence(f"|f(root)|={abs(f(root)):.3e} exceeds {tol}")
    return float(root)
