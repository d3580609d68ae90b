"""Continuous-variable teleportation of Gaussian states on the CM level.

Everything is in the vacuum-one convention.  The shared two-mode CM has
blocks ``A`` (Alice), ``B`` (Bob) and ``C``; the protocol adds the noise
``N = Z A Z + Z C + C^T Z + B`` to the input CM.

The optimizer follows a constructive route: bring the shared state to a
one-parameter family of normal forms ``V_eta`` by local squeezing, optionally
attenuate one mode with transmissivity ``eta``, and pick the best candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NoRoot, NotEntangled, Unphysical
from .gaussian import (
    TwoModeBlocks,
    Z,
    _two_mode_cm,
    direct_sum,
    nu_min_pt,
    rotation,
    williamson_transform,
)
from .numerics import find_root

ETA_GRID_POINTS = 400


def noise_matrix(V) -> np.ndarray:
    A, B, C = TwoModeBlocks.from_cm(_two_mode_cm(V))
    N = Z @ A @ Z + Z @ C + C.T @ Z + B
    return 0.5 * (N + N.T)


def coherent_fidelity(N) -> float:
    """Fidelity for a coherent input given the added noise ``N``."""
    N = np.asarray(N, dtype=float)
    return float(2.0 / np.sqrt(4 + 2 * np.trace(N) + np.linalg.det(N)))


class TeleportResult(NamedTuple):
    V_out: np.ndarray
    fidelity: float
    swap_fidelity: float


def teleport(V_in, V) -> TeleportResult:
    """Teleport a pure single-mode Gaussian input through the shared state ``V``.

    ``swap_fidelity`` is ``inf`` when ``det N = 0`` (ideal channel).
    """
    V_in = np.asarray(V_in, dtype=float)
    if V_in.shape != (2, 2):
        raise ValueError("input must be a single-mode CM")
    if abs(np.linalg.det(V_in) - 1) > 1e-9:
        raise Unphysical("input state is not pure (det V_in != 1)")
    N = noise_matrix(V)
    F = 2.0 / np.sqrt(np.linalg.det(2 * V_in + N))
    detN = np.linalg.det(N)
    F_swap = 2.0 / np.sqrt(detN) if detN > 0 else np.inf
    return TeleportResult(V_in + N, float(F), float(F_swap))


def fidelity_bounds(nu: float) -> tuple[float, float]:
    """Lower and upper bounds on the optimal coherent-state fidelity."""
    if not 0 < nu <= 1:
        raise DomainError(f"nu must lie in (0, 1], got {nu}")
    return (1 + nu) / (1 + 3 * nu), 1 / (1 + nu)


# -- normal forms -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StandardFormI:
    """``V_N`` with ``A = aI``, ``B = bI``, ``C = diag(-c1, c2)``.

    ``c1 >= c2``.  For states with ``det C > 0`` (always separable) the
    second entry is returned negative so that ``C`` is still ``diag(-c1, c2)``.
    """

    a: float
    b: float
    c1: float
    c2: float
    Sa: np.ndarray
    Sb: np.ndarray

    @property
    def cm(self) -> np.ndarray:
        return standard_cm(self.a, self.a, self.b, self.b, self.c1, self.c2)


def standard_cm(n1, n2, m1, m2, d1, d2) -> np.ndarray:
    V = np.diag([n1, n2, m1, m2]).astype(float)
    V[0, 2] = V[2, 0] = -d1
    V[1, 3] = V[3, 1] = d2
    return V


def _local_normalizer(M):
    # (det M)^{1/4} M^{-1/2}: symplectic and maps M to sqrt(det M) * I
    w, U = np.linalg.eigh(M)
    return np.prod(w) ** 0.25 * (U @ np.diag(w ** -0.5) @ U.T)


def _proper_svd(C):
    U, s, Wt = np.linalg.svd(C)
    W = Wt.T
    s = s.copy()
    if np.linalg.det(U) < 0:
        U[:, 1] *= -1
        s[1] *= -1
    if np.linalg.det(W) < 0:
        W[:, 1] *= -1
        s[1] *= -1
    return U, s, W


def standard_form_I(V) -> StandardFormI:
    """Local symplectics bringing ``V`` to the tridiagonal standard form."""
    A, B, C = TwoModeBlocks.from_cm(_two_mode_cm(V))
    Na, Nb = _local_normalizer(A), _local_normalizer(B)
    a, b = np.sqrt(np.linalg.det(A)), np.sqrt(np.linalg.det(B))
    U, s, W = _proper_svd(Na @ C @ Nb.T)
    # rotations U^T, W^T diagonalize the correlation block to diag(s0, s1)
    Sa, Sb = U.T @ Na, W.T @ Nb
    s0, s1 = s
    if s0 > 0:
        Sa = rotation(np.pi) @ Sa
        s0, s1 = -s0, -s1
    c1, c2 = -s0, s1
    if abs(c2) > c1:
        # pi/2 rotations on both modes exchange the diagonal entries
        q = rotation(np.pi / 2)
        Sa, Sb = rotation(np.pi) @ q @ Sa, q @ Sb
        c1, c2 = abs(c2), np.copysign(c1, c2)
    return StandardFormI(float(a), float(b), float(c1), float(c2), Sa, Sb)


def _squeeze_ratio(lam, scale):
    x = lam / (2 * scale)
    return x + np.sqrt(1 + x * x)


@dataclass(frozen=True, eq=False)
class EtaForm:
    n: float
    m: float
    d: float
    lam: float
    eta: float
    Sa: np.ndarray
    Sb: np.ndarray

    @property
    def cm(self) -> np.ndarray:
        e, l = self.eta, self.lam
        return standard_cm(self.n + l, self.n, self.m + l / e**2, self.m, self.d + l / e, self.d)


def _eta_form_from(sf: StandardFormI, lam: float, eta: float) -> EtaForm:
    ra = _squeeze_ratio(lam, sf.a)
    rb = _squeeze_ratio(lam / eta**2, sf.b)
    Sa = np.diag([np.sqrt(ra), 1 / np.sqrt(ra)]) @ sf.Sa
    Sb = np.diag([np.sqrt(rb), 1 / np.sqrt(rb)]) @ sf.Sb
    return EtaForm(sf.a / ra, sf.b / rb, sf.c2 / np.sqrt(ra * rb), lam, eta, Sa, Sb)


def normal_form_eta(V, eta: float = 1.0) -> EtaForm:
    """Local squeezings taking ``V`` to the normal form ``V_eta``.

    The constraint ``n1 - n2 = eta (d1 - d2) = eta^2 (m1 - m2) = lambda`` is met
    by solving ``c1 sqrt(r_a r_b) - c2 / sqrt(r_a r_b) = lambda / eta``.  The
    root has the sign of ``c1 - c2`` and is bracketed by geometric growth.
    """
    if not 0 < eta <= 1:
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    sf = standard_form_I(V)
    scale = max(sf.a, sf.b)

    def g(lam):
        rr = np.sqrt(_squeeze_ratio(lam, sf.a) * _squeeze_ratio(lam / eta**2, sf.b))
        return sf.c1 * rr - sf.c2 / rr - lam / eta

    gap = sf.c1 - sf.c2
    if gap <= 1e-14 * scale:
        return _eta_form_from(sf, 0.0, eta)
    try:
        lam = find_root(g, seed=1e-6 * scale, tol=1e-10 * scale)
    except Exception as exc:  # the existence argument says this cannot happen
        raise NoRoot(f"no normal-form root for eta={eta}: {exc}") from exc
    return _eta_form_from(sf, lam, eta)


# -- optimal local map --------------------------------------------------------


class Invariants(NamedTuple):
    a: float
    b: float
    c: float
    v: float


def local_invariants(V) -> Invariants:
    A, B, C = TwoModeBlocks.from_cm(_two_mode_cm(V))
    return Invariants(
        float(np.sqrt(np.linalg.det(A))),
        float(np.sqrt(np.linalg.det(B))),
        float(np.sqrt(abs(np.linalg.det(C)))),
        float(np.linalg.det(V)),
    )


def _nmd(lam, eta, a, b, c):
    n = -lam / 2 + np.sqrt(a**2 + (lam / 2) ** 2)
    m = -lam / (2 * eta**2) + np.sqrt(b**2 + (lam / (2 * eta**2)) ** 2)
    d = -lam / (2 * eta) + np.sqrt(c**2 + (lam / (2 * eta)) ** 2)
    return n, m, d


def _det_factors(lam, eta, a, b, c):
    n, m, d = _nmd(lam, eta, a, b, c)
    fx = (n + lam) * (m + lam / eta**2) - (d + lam / eta) ** 2
    fp = n * m - d**2
    return fx, fp


def _candidate_fidelity(lam, eta, a, b, c):
    alpha = (
        np.sqrt(a**2 + lam**2 / 4)
        + np.sqrt(b**2 * eta**4 + lam**2 / 4)
        - 2 * np.sqrt(c**2 * eta**2 + lam**2 / 4)
        + 1
        - eta**2
    )
    return 2.0 / (2.0 + alpha)


def _stationarity(lam, eta, a, b, c):
    _, m, d = _nmd(lam, eta, a, b, c)
    return eta * (m - 1) - d


class _Branches:
    """Roots in ``lambda`` of ``det V_eta(lambda, eta) = v`` for many ``eta``."""

    def __init__(self, inv: Invariants, n_lam: int = 241):
        self.a, self.b, self.c, self.v = inv
        self.scale = s = max(inv.a, inv.b, inv.c)
        mags = s * np.logspace(-7, 4, n_lam // 2)
        self.lam_grid = np.concatenate([-mags[::-1], [0.0], mags])

    def _resid(self, lam, eta):
        fx, fp = _det_factors(lam, eta, self.a, self.b, self.c)
        return fx * fp - self.v

    def roots(self, etas):
        """Physically valid roots for each ``eta``.

        Returns:
            ``(R, counts)`` where row ``i`` of ``R`` holds the ``counts[i]``
            ascending roots for ``etas[i]``, padded with NaN.
        """
        etas = np.atleast_1d(np.asarray(etas, dtype=float))
        L, E = np.meshgrid(self.lam_grid, etas)
        R = self._resid(L, E)
        sgn = np.sign(R)
        rows, cols = np.nonzero(sgn[:, :-1] * sgn[:, 1:] < 0)
        lo = self.lam_grid[cols].copy()
        hi = self.lam_grid[cols + 1].copy()
        eta_b = etas[rows]
        rlo = self._resid(lo, eta_b)
        for _ in range(56):
            mid = 0.5 * (lo + hi)
            rm = self._resid(mid, eta_b)
            left = np.sign(rm) == np.sign(rlo)
            lo = np.where(left, mid, lo)
            rlo = np.where(left, rm, rlo)
            hi = np.where(left, hi, mid)
        lam = 0.5 * (lo + hi)
        # symmetric states have a double root at lambda = 0 with no sign change
        if abs(self._resid(0.0, 1.0)) <= 1e-12 * max(1.0, self.v):
            rows = np.concatenate([rows, np.arange(len(etas))])
            lam = np.concatenate([lam, np.zeros(len(etas))])
        eta_b = etas[rows]
        fx, fp = _det_factors(lam, eta_b, self.a, self.b, self.c)
        ok = (fx > 0) & (fp > 0)
        ok &= np.abs(self._resid(lam, eta_b)) <= 1e-8 * max(1.0, self.v)
        rows, lam = rows[ok], lam[ok]
        order = np.lexsort((lam, rows))
        rows, lam = rows[order], lam[order]
        dup = np.zeros(len(rows), dtype=bool)
        dup[1:] = (rows[1:] == rows[:-1]) & (np.abs(np.diff(lam)) <= 1e-12 * self.scale)
        rows, lam = rows[~dup], lam[~dup]
        counts = np.bincount(rows, minlength=len(etas))
        K = max(1, int(counts.max(initial=0)))
        out = np.full((len(etas), K), np.nan)
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        rank = np.arange(len(rows)) - start[rows]
        out[rows, rank] = lam
        return out, counts


@dataclass(frozen=True)
class Candidate:
    lam: float
    eta: float
    fidelity: float
    side: str


@dataclass(frozen=True, eq=False)
class OptimalMapResult:
    F_opt: float
    nu: float
    bounds: tuple
    Sa: np.ndarray
    Sb: np.ndarray
    side: str
    tau: float
    lam: float
    n: float
    m: float
    d: float
    candidates: tuple = field(default_factory=tuple)

    def channel(self):
        """Local map as ``(S, G)`` acting on the shared CM."""
        S = direct_sum(self.Sa, self.Sb)
        G = np.zeros((4, 4))
        if self.side != "none":
            t = self.tau
            k = 0 if self.side == "alice" else 2
            S[k:k + 2, :] *= t
            G[k:k + 2, k:k + 2] = (1 - t**2) * np.eye(2)
        return S, G

    def apply(self, V) -> np.ndarray:
        S, G = self.channel()
        return S @ np.asarray(V, float) @ S.T + G


def _swap_modes(V):
    P = np.zeros((4, 4))
    P[0, 2] = P[1, 3] = P[2, 0] = P[3, 1] = 1
    return P @ V @ P.T


def _side_candidates(inv: Invariants, side: str, n_eta: int) -> list:
    a, b, c, _ = inv
    br = _Branches(inv)
    cands = []
    R1, n1 = br.roots([1.0])
    for lam in R1[0, :n1[0]]:
        cands.append(Candidate(float(lam), 1.0, float(_candidate_fidelity(lam, 1.0, a, b, c)), "none"))
    etas = np.arange(1, n_eta + 1) / (n_eta + 1)
    roots, counts = br.roots(etas)
    with np.errstate(invalid="ignore"):
        hs = _stationarity(roots, etas[:, None], a, b, c)
    same = (counts[:-1] == counts[1:]) & (counts[:-1] > 0)
    flips = same[:, None] & (np.sign(hs[:-1]) * np.sign(hs[1:]) <= 0)

    def local_root(eta, ref):
        f = lambda lam: br._resid(lam, eta)
        step = 1e-3 * (abs(ref) + br.scale)
        f0 = f(ref)
        for _ in range(60):
            lo, hi = ref - step, ref + step
            flo, fhi = f(lo), f(hi)
            if np.sign(flo) != np.sign(f0):
                return brentq(f, lo, ref, xtol=1e-15 * br.scale, rtol=1e-15)
            if np.sign(fhi) != np.sign(f0):
                return brentq(f, ref, hi, xtol=1e-15 * br.scale, rtol=1e-15)
            step *= 2
        return None

    for i, k in zip(*np.nonzero(flips)):
        e0, e1, l0, l1 = etas[i], etas[i + 1], roots[i, k], roots[i + 1, k]

        def H(eta):
            ref = l0 + (l1 - l0) * (eta - e0) / (e1 - e0)
            lam = local_root(eta, ref)
            return np.nan if lam is None else _stationarity(lam, eta, a, b, c)

        try:
            eta_star = brentq(H, e0, e1, xtol=1e-15, rtol=1e-14)
        except ValueError:
            continue
        ref = l0 + (l1 - l0) * (eta_star - e0) / (e1 - e0)
        lam_star = local_root(eta_star, ref)
        if lam_star is None:
            continue
        fx, fp = _det_factors(lam_star, eta_star, a, b, c)
        if fx <= 0 or fp <= 0:
            continue
        if abs(_stationarity(lam_star, eta_star, a, b, c)) < 1e-8 * max(1.0, b):
            F = _candidate_fidelity(lam_star, eta_star, a, b, c)
            cands.append(Candidate(float(lam_star), float(eta_star), float(F), side))
    return cands


def _realize(V, cand: Candidate) -> Optional[tuple]:
    """Local symplectics turning ``V`` into the ``V_eta`` matching ``cand``.

    Returns ``(Sa, Sb, form)`` in the original mode order, or ``None``.
    """
    W = _swap_modes(V) if cand.side == "alice" else V
    sf = standard_form_I(W)
    inv = local_invariants(W)
    n, m, d = _nmd(cand.lam, cand.eta, inv.a, inv.b, inv.c)
    target = standard_cm(n + cand.lam, n, m + cand.lam / cand.eta**2, m,
                         d + cand.lam / cand.eta, d)
    q = rotation(np.pi / 2)
    variants = [sf, StandardFormI(sf.a, sf.b, sf.c2, sf.c1,
                                  rotation(np.pi) @ q @ sf.Sa, q @ sf.Sb)]
    for form in variants:
        ef = _eta_form_from(form, cand.lam, cand.eta)
        got = direct_sum(ef.Sa, ef.Sb) @ W @ direct_sum(ef.Sa, ef.Sb).T
        if np.abs(got - target).max() <= 1e-7 * max(1.0, np.abs(target).max()):
            Sa, Sb = ef.Sa, ef.Sb
            if cand.side == "alice":
                Sa, Sb = Sb, Sa
            return Sa, Sb, ef
    return None


def optimal_tgcp(V, n_eta: int = ETA_GRID_POINTS) -> OptimalMapResult:
    """Optimal local trace-preserving map for coherent-state teleportation.

    Candidates are the roots of ``det V_eta = v`` together with the
    stationarity condition ``eta (m - 1) = d`` for ``0 < eta < 1`` (attenuation
    on Bob; the mirrored problem covers Alice), plus every root at ``eta = 1``.
    The best candidate is realized as explicit local symplectics.

    Raises:
        NotEntangled: for ``nu >= 1``; the optimum is then the classical 1/2.
        NoRoot: if no candidate could be found or realized.
    """
    V = _two_mode_cm(V)
    nu = nu_min_pt(V)
    if nu >= 1:
        raise NotEntangled(nu)
    inv = local_invariants(V)
    cands = _side_candidates(inv, "bob", n_eta)
    mirrored = Invariants(inv.b, inv.a, inv.c, inv.v)
    cands += [c for c in _side_candidates(mirrored, "alice", n_eta) if c.side == "alice"]
    if not cands:
        raise NoRoot("no candidate normal form found")
    for cand in sorted(cands, key=lambda c: -c.fidelity):
        real = _realize(V, cand)
        if real is None:
            continue
        Sa, Sb, ef = real
        side = cand.side if cand.eta < 1 else "none"
        return OptimalMapResult(
            F_opt=cand.fidelity,
            nu=nu,
            bounds=fidelity_bounds(nu),
            Sa=Sa,
            Sb=Sb,
            side=side,
            tau=cand.eta if side != "none" else 1.0,
            lam=cand.lam,
            n=float(ef.n),
            m=float(ef.m),
            d=float(ef.d),
            candidates=tuple(cands),
        )
    raise NoRoot("no candidate could be realized by local symplectics")


# -- lower-bound construction and swapping ----------------------------------


@dataclass(frozen=True, eq=False)
class OmegaTheta:
    Sa: np.ndarray
    Sb: np.ndarray
    Ga: np.ndarray
    Gb: np.ndarray
    theta: float
    eps: float
    fidelity: float
    noise: np.ndarray

    def apply(self, V) -> np.ndarray:
        S = direct_sum(self.Sa, self.Sb)
        return S @ np.asarray(V, float) @ S.T + direct_sum(self.Ga, self.Gb)


def build_omega_theta(V) -> OmegaTheta:
    """Local map making the teleportation noise isotropic, from the Williamson
    transform of the partially transposed CM.

    The achieved fidelity ``(1 + |eps|) / (1 + nu + 2|eps|)`` never falls below
    ``(1 + nu) / (1 + 3 nu)``.
    """
    V = _two_mode_cm(V)
    L = direct_sum(Z, np.eye(2))
    S = williamson_transform(L @ V @ L).S
    Wa, Wb = S[:2, :2], S[:2, 2:]
    det_a, det_b = np.linalg.det(Wa), np.linalg.det(Wb)
    eps = float(det_b - det_a)
    theta = float(np.arctan(np.sqrt((1 - eps) / (1 + eps))))
    if theta <= np.pi / 4:
        k = np.cos(theta)
        Ga, Gb = (1 - np.tan(theta) ** 2) * np.eye(2), np.zeros((2, 2))
    else:
        k = np.sin(theta)
        Ga, Gb = np.zeros((2, 2)), (1 - 1 / np.tan(theta) ** 2) * np.eye(2)
    Sa, Sb = Z @ Wa @ Z / k, Wb / k
    out = OmegaTheta(Sa, Sb, Ga, Gb, theta, eps, 0.0, np.zeros((2, 2)))
    N = noise_matrix(out.apply(V))
    nu = nu_min_pt(V)
    F = (1 + abs(eps)) / (1 + nu + 2 * abs(eps))
    return OmegaTheta(Sa, Sb, Ga, Gb, theta, eps, float(F), N)


def swap_cm(n: float, r: float) -> tuple[np.ndarray, float]:
    """CM after swapping with a two-mode squeezed resource and its PT eigenvalue."""
    if n < 0 or r < 0:
        raise DomainError("n and r must be non-negative")
    ch, sh = np.cosh(r), np.sinh(r)
    W = np.block([[ch * np.eye(2), -sh * Z], [-sh * Z, (2 * n + ch) * np.eye(2)]])
    return W, nu_min_pt(W)
