"""Causal filters selecting traveling modes of a cavity output field, and the
steady-state CM of the filtered modes together with the mirror.

Fourier convention: ``f~(w) = (2 pi)^{-1/2} int dt f(t) e^{i w t}``.  With it the
filtered-mode CM is

    V_out = int dw T~(w) [M(w) + P/(2 kappa)] D(w) [M(w) + P/(2 kappa)]^dagger T~(w)^dagger

where ``M(w) = (i w + A)^{-1}`` and ``P`` projects onto the optical quadratures.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NotOrthogonal, UnstableDrift
from .numerics import QuadratureSpec, eigenvalues, integrate_matrix

ORTHOGONALITY_TOL = 1e-8


class FilterShape(enum.Enum):
    STEP = "step"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class FilterSpec:
    """A normalized filter ``g(t)`` centred at ``center`` (rad/s, rotating frame).

    ``width`` is the duration ``tau`` (s) for a step filter and the decay
    rate ``gamma`` (rad/s) for an exponential one.
    """

    shape: FilterShape
    center: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "shape", FilterShape(self.shape))
        if not self.width > 0:
            raise ValueError("filter width must be positive")

    @classmethod
    def step(cls, center: float, epsilon: float, omega_m: float) -> "FilterSpec":
        """Step filter of duration ``tau = epsilon / omega_m``."""
        return cls(FilterShape.STEP, center, epsilon / omega_m)

    @classmethod
    def exponential(cls, center: float, epsilon: float, omega_m: float) -> "FilterSpec":
        """Exponential filter with rate ``gamma = omega_m / epsilon``."""
        return cls(FilterShape.EXPONENTIAL, center, omega_m / epsilon)

    def epsilon(self, omega_m: float) -> float:
        if self.shape is FilterShape.STEP:
            return omega_m * self.width
        return omega_m / self.width

    @property
    def bandwidth(self) -> float:
        """Characteristic spectral width in rad/s."""
        if self.shape is FilterShape.STEP:
            return 2 * np.pi / self.width
        return self.width

    def time_domain(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.shape is FilterShape.STEP:
            inside = (t >= 0) & (t < self.width)
            return np.where(inside, np.exp(-1j * self.center * t) / np.sqrt(self.width), 0.0)
        g = self.width
        tt = np.maximum(t, 0.0)
        return np.where(t >= 0, np.sqrt(2 * g) * np.exp(-(g + 1j * self.center) * tt), 0.0)

    def transform(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if self.shape is FilterShape.STEP:
            tau = self.width
            x = (w - self.center) * tau / 2
            return np.sqrt(tau / (2 * np.pi)) * np.exp(1j * x) * np.sinc(x / np.pi)
        g = self.width
        return np.sqrt(g / np.pi) / (g + 1j * (self.center - w))


def overlap(f: FilterSpec, g: FilterSpec) -> complex:
    """Analytic ``int dt f(t)^* g(t)``."""
    if f.shape is FilterShape.EXPONENTIAL and g.shape is FilterShape.EXPONENTIAL:
        return 2 * np.sqrt(f.width * g.width) / (f.width + g.width + 1j * (g.center - f.center))
    if f.shape is FilterShape.STEP and g.shape is FilterShape.STEP:
        T = min(f.width, g.width)
        k = f.center - g.center
        return _phase_integral(k, T) / np.sqrt(f.width * g.width)
    if f.shape is FilterShape.EXPONENTIAL:
        return np.conj(overlap(g, f))
    # step f against exponential g
    tau, gam = f.width, g.width
    z = gam + 1j * (g.center - f.center)
    return np.sqrt(2 * gam / tau) * (1 - np.exp(-z * tau)) / z


def _phase_integral(k, T):
    # int_0^T e^{i k t} dt, stable for k -> 0
    x = k * T / 2
    return T * np.exp(1j * x) * np.sinc(x / np.pi)


@dataclass(frozen=True, eq=False)
class FilterSet:
    filters: tuple
    overlaps: np.ndarray

    @property
    def orthonormal(self) -> bool:
        off = self.overlaps - np.diag(np.diag(self.overlaps))
        return bool(np.abs(off).max(initial=0.0) <= ORTHOGONALITY_TOL)


def make_filters(specs: Sequence[FilterSpec], require_orthogonal: bool = True) -> FilterSet:
    """Validate a set of filters and compute their Gram matrix.

    Raises:
        NotOrthogonal: if two filters overlap by more than 1e-8 and
            ``require_orthogonal`` is set.
    """
    specs = tuple(specs)
    n = len(specs)
    gram = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            gram[i, j] = overlap(specs[i], specs[j])
    out = FilterSet(specs, gram)
    if require_orthogonal and not out.orthonormal:
        off = np.abs(gram - np.diag(np.diag(gram))).max()
        raise NotOrthogonal(f"filters overlap by {off:.3e}")
    return out


_QPLUS = 0.5 * np.array([[1, 1j], [-1j, 1]])   # (I - i J')/2, J' = [[0,-1],[1,0]]
_QMINUS = 0.5 * np.array([[1, -1j], [1j, 1]])


def filter_block(spec: FilterSpec, w: np.ndarray) -> np.ndarray:
    """Fourier transform of the real 2x2 quadrature filter ``[[Re g, -Im g], [Im g, Re g]]``.

    Returns an array of shape ``(len(w), 2, 2)``.
    """
    gp = spec.transform(w)
    gm = np.conj(spec.transform(-w))
    return gp[:, None, None] * _QPLUS + gm[:, None, None] * _QMINUS


def default_omega_max(*rates: float) -> float:
    return 50.0 * max(abs(r) for r in rates)


def pole_points(A, spread=(0.0, 1.0, 10.0)) -> list:
    """Frequencies around the resonances of ``(i w + A)^{-1}``, for quadrature breakpoints."""
    pts = []
    for lam in eigenvalues(A):
        c, h = -lam.imag, abs(lam.real)
        pts += [c + s * h for s in spread] + [c - s * h for s in spread[1:]]
    return pts


def filter_points(spec: FilterSpec, spread=(0.0, 1.0, 5.0)) -> list:
    b = spec.bandwidth
    pts = []
    for c in (spec.center, -spec.center):
        pts += [c + s * b for s in spread] + [c - s * b for s in spread[1:]]
    return pts


def filtered_output_cm(
    A: np.ndarray,
    diffusion: Callable[[np.ndarray], np.ndarray],
    kappa: float,
    mirror: Sequence[int],
    optical: Sequence[int],
    filters: Sequence[tuple],
    quad: Optional[QuadratureSpec] = None,
    excess: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    cutoff: Optional[float] = None,
) -> np.ndarray:
    """CM (vacuum-half convention) of the mirror plus a set of filtered output modes.

    Args:
        A: drift matrix of the intracavity fluctuations.
        diffusion: maps a frequency array to diffusion matrices ``(k, n, n)``.
        kappa: cavity amplitude decay rate shared by all optical modes.
        mirror: indices of ``(q, p)`` in the state vector.
        optical: indices of all optical quadratures (the output projector).
        filters: pairs ``(spec, (ix, iy))`` naming the filter and the
            quadrature indices of the cavity mode it acts on.
        quad: quadrature settings; ``omega_max`` defaults to 50 times the
            largest rate in the problem.
        excess: optional extra diffusion ``(k, n, n)`` acting on the
            intracavity quadratures only (the non-Markov part of the mirror
            noise).  It is integrated over ``[-cutoff, cutoff]`` without tails,
            since a coth kernel makes the full-line integral diverge.
        cutoff: integration limit for ``excess``; required with it.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if np.max(eigenvalues(A).real) >= 0:
        raise UnstableDrift("drift matrix is not stable")
    P = np.zeros((n, n))
    for i in optical:
        P[i, i] = 1.0
    m = 2 + 2 * len(filters)
    E = np.zeros((m, n))
    E[0, mirror[0]] = E[1, mirror[1]] = 1.0
    for k, (_, (ix, iy)) in enumerate(filters):
        E[2 + 2 * k, ix] = E[3 + 2 * k, iy] = 1.0
    pts = pole_points(A)
    for spec, _ in filters:
        pts += filter_points(spec)
    if quad is None:
        rates = [abs(x) for x in pts] + [kappa]
        quad = QuadratureSpec(omega_max=default_omega_max(*rates))
    quad = QuadratureSpec(quad.abs_tol, quad.rel_tol, quad.omega_max, quad.max_subdivisions,
                          quad.include_tails, tuple(quad.points) + tuple(pts))
    scale = np.sqrt(2 * kappa)
    eye = np.eye(n)
    specs = [spec for spec, _ in filters]
    D0 = np.asarray(diffusion(np.zeros(1)))[0]

    def transfer(w):
        T = np.zeros((len(w), m, m), dtype=complex)
        T[:, 0, 0] = T[:, 1, 1] = 1 / np.sqrt(2 * np.pi)
        for k, spec in enumerate(specs):
            T[:, 2 + 2 * k:4 + 2 * k, 2 + 2 * k:4 + 2 * k] = scale * filter_block(spec, w)
        return T

    # The input-noise term T E P D P E^T T^dagger / (4 kappa^2) decays only like
    # |g~|^2 and oscillates for step filters; it is integrated in closed form and
    # subtracted, leaving an integrand that falls off faster than 1/w^2.
    TEP = E @ P / (2 * kappa)

    def integrand(w):
        M = np.linalg.inv(1j * w[:, None, None] * eye + A)
        T = transfer(w)
        X = T @ (E @ M + TEP)
        Y = T @ TEP
        Dw = diffusion(w)
        return (X @ Dw @ np.conj(np.swapaxes(X, -1, -2))
                - Y @ Dw @ np.conj(np.swapaxes(Y, -1, -2)))

    V = integrate_matrix(integrand, quad).real
    V = V + _input_noise_term(specs, [idx for _, idx in filters], D0, kappa)
    if excess is not None:
        if not (cutoff is not None and cutoff > 0):
            raise ValueError("excess diffusion needs a positive cutoff")

        def excess_integrand(w):
            X = transfer(w) @ (E @ np.linalg.inv(1j * w[:, None, None] * eye + A))
            return X @ excess(w) @ np.conj(np.swapaxes(X, -1, -2))

        inner = tuple(p for p in quad.points if abs(p) < cutoff) + (0.0,)
        q = replace(quad, omega_max=float(cutoff), include_tails=False, points=inner)
        V = V + integrate_matrix(excess_integrand, q).real
    return 0.5 * (V + V.T)


def _input_noise_term(specs, indices, D, kappa) -> np.ndarray:
    """Closed form of ``int dw T~ E P D P E^T T~^dagger / (4 kappa^2)``.

    Each filter pair ``(j, k)`` contributes ``(D_jk / 2 kappa) [conj(o) Q+ + o Q-]``
    with ``o`` the filter overlap, provided the optical noise blocks are
    multiples of the identity.
    """
    m = 2 + 2 * len(specs)
    V = np.zeros((m, m))
    for j, (fj, (xj, yj)) in enumerate(zip(specs, indices)):
        for k, (fk, (xk, yk)) in enumerate(zip(specs, indices)):
            blk = D[np.ix_((xj, yj), (xk, yk))]
            d = blk[0, 0]
            if not np.allclose(blk, d * np.eye(2), rtol=0, atol=1e-12 * max(abs(d), 1.0)):
                raise ValueError("optical diffusion blocks must be multiples of the identity")
            if d == 0:
                continue
            o = overlap(fj, fk)
            V[2 + 2 * j:4 + 2 * j, 2 + 2 * k:4 + 2 * k] = (
                d / (2 * kappa) * (np.conj(o) * _QPLUS + o * _QMINUS)).real
    return V


def projector_identity(
    filters: Sequence[FilterSpec], kappa: float, lobes: int = 20000
) -> np.ndarray:
    """Numerical ``int dw T~ P D P T~^dagger / (4 kappa^2)`` over the filtered modes only.

    Equals ``I/2`` for orthonormal filters.  This is the frequency-domain
    check of the closed form used by :func:`filtered_output_cm`.  Step
    filters have sinc^2 tails with no convergent change of variables, so for
    them the integral is truncated after ``lobes`` sinc lobes on each side;
    the omitted weight is below ``1 / (pi^2 lobes)``.
    """
    m = 2 * len(filters)
    steps = [f for f in filters if f.shape is FilterShape.STEP]
    reach = max(abs(f.center) for f in filters)
    if steps:
        tau = min(f.width for f in steps)
        W = reach + 2 * np.pi * lobes / tau
        n_panels = int(np.ceil(2 * W / (np.pi / tau)))
        quad = QuadratureSpec(omega_max=W, include_tails=False,
                              max_subdivisions=4 * n_panels,
                              points=tuple(np.linspace(-W, W, n_panels + 1)[1:-1]))
    else:
        pts = []
        for spec in filters:
            pts += filter_points(spec)
        quad = QuadratureSpec(omega_max=default_omega_max(*[abs(p) for p in pts]),
                              points=tuple(pts))
    scale = np.sqrt(2 * kappa)
    # every filtered mode sees the same input noise: D has kappa in all optical blocks
    D = kappa * np.kron(np.ones((len(filters), len(filters))), np.eye(2))

    def integrand(w):
        T = np.zeros((len(w), m, m), dtype=complex)
        for k, spec in enumerate(filters):
            T[:, 2 * k:2 * k + 2, 2 * k:2 * k + 2] = scale * filter_block(spec, w)
        return T @ D @ np.conj(np.swapaxes(T, -1, -2)) / (4 * kappa**2)

    V = integrate_matrix(integrand, quad).real
    return 0.5 * (V + V.T)
