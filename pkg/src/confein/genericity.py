"""Pointwise genericity classification of the Weyl curvature.

Three nested open conditions on a metric, each decided numerically at
sample points by ranks of small dense matrices built from the sampled Weyl
tensor:

* weakly generic: V |-> C_abcd V^d is injective,
* Lambda2-generic: the operator 2-forms -> 2-forms, W_ab |-> C_ab^cd W_cd,
  has nonzero determinant ||C|| (numerically: full rank),
* generic: the skew system C_abcd F^ab = 0, the trace-free symmetric system
  C_abcd H^bd = 0 and its volume-form dual all have only the zero solution.

The adjugate of the 2-form operator packages as the tensor Ct_ef^ab with
Ct_ef^ab C_ab^cd = ||C|| delta^[c_[e delta^d]_f], and the operator
L^a_b = C^acde C_bcde with its adjugate gives the canonical inverses of the
Weyl tensor used by the obstruction invariants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from . import linalg
from .config import DEFAULT_TOLERANCES
from .curvature import CurvaturePack, CurvatureSamples
from .geometry import permutation_sign

__all__ = [
    "WeylOperator",
    "LOperator",
    "DualCandidate",
    "PointGenericity",
    "GenericityReport",
    "PolicyError",
    "pair_basis",
    "weyl_operator",
    "l_operator",
    "weyl_operator_at",
    "l_operator_at",
    "dual_candidate",
    "classify_genericity",
    "epsilon_values",
    "dim4_scalars",
]

POLICIES = ("from-L", "from-C", "dim4-C3")


class PolicyError(ArithmeticError):
    """A dual-candidate policy's nonvanishing precondition failed."""


def pair_basis(n):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def _pair_matrix(t4):
    """Ranked-pair matrix of a 4-index array antisymmetric in both pairs:
    M[(ab),(cd)] = 2 * t4[a,b,c,d]."""
    n = t4.shape[0]
    pairs = pair_basis(n)
    m = np.empty((len(pairs), len(pairs)))
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            m[i, j] = 2.0 * t4[a, b, c, d]
    return m


def _pair_tensor(m, n):
    """Inverse of _pair_matrix: antisymmetric extension with the 1/2."""
    pairs = pair_basis(n)
    t = np.zeros((n, n, n, n))
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            v = 0.5 * m[i, j]
            t[a, b, c, d] = v
            t[b, a, c, d] = -v
            t[a, b, d, c] = -v
            t[b, a, d, c] = v
    return t


@dataclass
class WeylOperator:
    """The 2-form endomorphism of the Weyl tensor at one point."""

    matrix: np.ndarray        # (N, N), N = n(n-1)/2
    det: float                # ||C||
    adjugate: np.ndarray      # (N, N)
    adjugate_tensor: np.ndarray  # Ct_ef^ab, shape (n, n, n, n)
    n: int

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass
class LOperator:
    """L^a_b = C^acde C_bcde at one point."""

    matrix: np.ndarray    # (n, n)
    det: float            # ||L||
    adjugate: np.ndarray  # Lt^a_b


@dataclass
class DualCandidate:
    """Per-point left inverses Dt of the Weyl tensor in the canonical
    placement (up, up, down, up): Dt^ac_d^e C_bc^d_e = -delta^a_b."""

    comps: np.ndarray  # (P, n, n, n, n), fully raised Dt^acde
    provenance: str
    dets: np.ndarray   # the determinant each policy divided by, per point

    def defining_residual(self, samples):
        """Max deviation of Dt^acde C_bcde from -identity, per point."""
        C = samples["C"]
        contr = np.einsum("pacde,pbcde->pab", self.comps, C)
        eye = np.eye(C.shape[1])[None]
        return np.max(np.abs(contr + eye).reshape(C.shape[0], -1), axis=1)


def _samples_for(pack_or_samples, points):
    if isinstance(pack_or_samples, CurvatureSamples):
        return pack_or_samples
    if points is None:
        raise ValueError("points are required when passing a pack")
    return pack_or_samples.samples(points)


def weyl_operator_at(samples: CurvatureSamples, p: int) -> WeylOperator:
    cuu = samples.raised("C", (0, 0, 1, 1))[p]
    n = cuu.shape[0]
    m = _pair_matrix(cuu)
    d = linalg.det(m)
    adj = linalg.adjugate(m)
    return WeylOperator(m, d, adj, _pair_tensor(adj, n), n)


def l_operator_at(samples: CurvatureSamples, p: int) -> LOperator:
    call = samples.raised("C", (1, 1, 1, 1))[p]
    clow = samples["C"][p]
    m = np.einsum("acde,bcde->ab", call, clow)
    return LOperator(m, linalg.det(m), linalg.adjugate(m))


def weyl_operator(pack: CurvaturePack, point) -> WeylOperator:
    """Spec-level convenience: operator at a single point."""
    return weyl_operator_at(pack.samples([point]), 0)


def l_operator(pack: CurvaturePack, point) -> LOperator:
    return l_operator_at(pack.samples([point]), 0)


def dual_candidate(pack_or_samples, policy="from-L", points=None,
                   tolerances=None, user_comps=None):
    """Left inverse of the Weyl tensor, per sample point.

    policy 'from-L' divides by ||L||, 'from-C' by ||C||, 'dim4-C3' (n = 4)
    by the cubic scalar contraction; 'user' takes components as given.
    Raises PolicyError naming the first point where the required determinant
    vanishes."""
    tol = tolerances or DEFAULT_TOLERANCES
    s = _samples_for(pack_or_samples, points)
    npts = len(s.points)
    n = s.n
    if policy == "user":
        if user_comps is None:
            raise ValueError("user policy needs user_comps")
        return DualCandidate(np.asarray(user_comps, dtype=float), "user-supplied",
                             np.ones(npts))

    C = s["C"]
    cmax = np.max(np.abs(C.reshape(npts, -1)), axis=1)
    scale = s.scale()
    out = np.empty((npts, n, n, n, n))
    dets = np.empty(npts)

    def check(det, mat, policy_name, label, p):
        # a numerically vanishing Weyl tensor makes every policy divide by
        # noise; otherwise the matrix must be numerically invertible
        if cmax[p] <= tol.rank_tol * scale[p] or \
                linalg.rank(mat, tol.rank_tol) < mat.shape[1]:
            raise PolicyError(
                f"policy {policy_name}: {label} = {det:.3e} vanishes at "
                f"point {s.points[p]}")

    if policy == "from-L":
        call = s.raised("C", (1, 1, 1, 1))
        for p in range(npts):
            L = np.einsum("acde,bcde->ab", call[p], C[p])
            dL = linalg.det(L)
            dets[p] = dL
            check(dL, L, "from-L", "||L||", p)
            out[p] = -np.einsum("ab,bcde->acde", linalg.adjugate(L), call[p]) / dL
        return DualCandidate(out, "from-L", dets)
    if policy == "from-C":
        gi = s["ginv"]
        cuu = s.raised("C", (0, 0, 1, 1))
        for p in range(npts):
            m = _pair_matrix(cuu[p])
            dC = linalg.det(m)
            dets[p] = dC
            check(dC, m, "from-C", "||C||", p)
            ct = _pair_tensor(linalg.adjugate(m), n)  # Ct_xy^de
            ctup = np.einsum("xa,yc,xyde->acde", gi[p], gi[p], ct)
            out[p] = (2.0 / (1.0 - n)) * ctup / dC
        return DualCandidate(out, "from-C", dets)
    if policy == "dim4-C3":
        if n != 4:
            raise PolicyError("policy dim4-C3 needs dimension 4")
        cmix = s.raised("C", (0, 0, 1, 1))   # C_ab^cd
        cup2 = s.raised("C", (1, 1, 0, 0))   # C^ab_cd
        call = s.raised("C", (1, 1, 1, 1))
        for p in range(npts):
            c3 = np.einsum("abcd,cdef,efab->", cmix[p], cmix[p], cmix[p])
            dets[p] = c3
            cscale = max(float(np.max(np.abs(cmix[p]))), 1e-300)
            if cmax[p] <= tol.rank_tol * scale[p] or \
                    abs(c3) <= tol.rank_tol * cscale ** 3:
                raise PolicyError(
                    f"policy dim4-C3: C^3 = {c3:.3e} vanishes at point "
                    f"{s.points[p]}")
            # 4 C^de_fg C^fgca / C3; the factor 4 normalizes the defining
            # contraction to exactly -identity
            cc = np.einsum("defg,fgca->deca", cup2[p], call[p])
            out[p] = 4.0 * np.transpose(cc, (3, 2, 0, 1)) / c3
        return DualCandidate(out, "dim4-C3", dets)
    raise ValueError(f"unknown policy {policy!r}; expected one of "
                     f"{POLICIES + ('user',)}")


# ---------------------------------------------------------------------------
# genericity systems


def epsilon_values(samples, orientation=1):
    """Numeric volume form at the sample points."""
    g = samples["g"]
    npts, n = g.shape[0], g.shape[1]
    root = np.sqrt(np.abs(np.linalg.det(g)))
    eps = np.zeros((npts,) + (n,) * n)
    for perm in permutations(range(n)):
        eps[(slice(None),) + perm] = orientation * permutation_sign(perm) * root
    return eps


def _skew_system(C):
    """(c3)-type matrix at a point: rows (cd) ranked, columns (ab) ranked."""
    n = C.shape[0]
    pairs = pair_basis(n)
    m = np.empty((len(pairs), len(pairs)))
    for i, (c, d) in enumerate(pairs):
        for j, (a, b) in enumerate(pairs):
            m[i, j] = 2.0 * C[a, b, c, d]
    return m


def _sym_pairs(n):
    return [(b, d) for b in range(n) for d in range(b, n)]


def _symmetric_system(C, g):
    """Rows (a,c) plus one trace row; columns over symmetric pairs (b<=d)."""
    n = C.shape[0]
    cols = _sym_pairs(n)
    rows = []
    for a in range(n):
        for c in range(n):
            row = np.empty(len(cols))
            for k, (b, d) in enumerate(cols):
                row[k] = C[a, b, c, d] + (C[a, d, c, b] if b != d else 0.0)
            rows.append(row)
    trace = np.array([(2.0 if b != d else 1.0) * g[b, d] for b, d in cols])
    rows.append(trace)
    return np.asarray(rows)


def _dual_symmetric_system(Cstar, g):
    """Same unknowns as the symmetric system, for the volume-form dualized
    Weyl tensor Cstar_{b1..b_{n-2} c d}, contracted on (b1, d)."""
    n = g.shape[0]
    cols = _sym_pairs(n)
    shape = Cstar.shape  # (n,)*(n-2) + (n, n)
    free_axes = shape[1:-2]
    rows = []
    for rest in np.ndindex(*free_axes):
        for c in range(n):
            row = np.empty(len(cols))
            for k, (b1, d) in enumerate(cols):
                v = Cstar[(b1,) + rest + (c, d)]
                if b1 != d:
                    v += Cstar[(d,) + rest + (c, b1)]
                row[k] = v
            rows.append(row)
    trace = np.array([(2.0 if b != d else 1.0) * g[b, d] for b, d in cols])
    rows.append(trace)
    return np.asarray(rows)


def dim4_scalars(samples, p):
    """(C^3, *C^3) at point p of a 4-dimensional sample batch."""
    cmix = samples.raised("C", (0, 0, 1, 1))[p]
    cup2 = samples.raised("C", (1, 1, 0, 0))[p]
    c3 = float(np.einsum("abcd,cdef,efab->", cmix, cmix, cmix))
    eps = epsilon_values(samples)[p]
    cstar = np.einsum("abef,efcd->abcd", eps, cup2)
    gi = samples["ginv"][p]
    cstar_mix = np.einsum("abcd,ce,df->abef", cstar, gi, gi)
    c3s = float(np.einsum("abcd,cdef,efab->", cstar_mix, cstar_mix, cstar_mix))
    return c3, c3s


@dataclass
class PointGenericity:
    point: dict
    weakly_generic: bool
    weak_kernel: np.ndarray       # (n, k) basis of {V : C V = 0}
    lambda2_generic: bool
    weyl_det: float
    skew_kernel_dim: int
    sym_kernel_dim: int
    dual_kernel_dim: int
    generic: bool
    c3: float | None = None
    c3_star: float | None = None


@dataclass
class GenericityReport:
    per_point: list
    weakly_generic: bool
    lambda2_generic: bool
    generic: bool
    all_agree: bool

    def kernel_contains(self, vector, tol=1e-10):
        """True when `vector` lies in the weak-genericity kernel at every
        point (residual of the projection below tol)."""
        v = np.asarray(vector, dtype=float)
        v = v / np.linalg.norm(v)
        for pg in self.per_point:
            k = pg.weak_kernel
            if k.size == 0:
                return False
            resid = v - k @ (k.T @ v)
            if np.linalg.norm(resid) > tol:
                return False
        return True


def _rank_null_floored(mat, tol, floor):
    """Rank and kernel with the pivot cutoff floored at tol * floor, so a
    matrix that is pure roundoff relative to the ambient curvature scale
    counts as zero."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    top = np.max(np.abs(mat)) if mat.size else 0.0
    if top <= tol * floor:
        n = mat.shape[1]
        return 0, np.eye(n)
    return linalg.rank_nullspace(mat, max(tol, tol * floor / top))


def classify_genericity(pack_or_samples, points=None, tolerances=None,
                        orientation=1):
    """Classify each sample point and aggregate.

    The chained flags are enforced logically: generic implies
    Lambda2-generic implies weakly generic."""
    tol = tolerances or DEFAULT_TOLERANCES
    s = _samples_for(pack_or_samples, points)
    n = s.n
    C = s["C"]
    g, gi = s["g"], s["ginv"]
    npts = len(s.points)
    scale = s.scale()
    eps = epsilon_values(s, orientation)
    cup2 = s.raised("C", (1, 1, 0, 0))
    per = []
    for p in range(npts):
        floor = scale[p]
        # weak system: C_abcd V^d = 0
        weak_mat = C[p].reshape(n ** 3, n)
        wrank, wkernel = _rank_null_floored(weak_mat, tol.rank_tol, floor)
        weak = wkernel.shape[1] == 0

        skew = _skew_system(C[p])
        skew_rank, _ = _rank_null_floored(skew, tol.rank_tol, floor)
        skew_dim = skew.shape[1] - skew_rank
        wop = _pair_matrix(s.raised("C", (0, 0, 1, 1))[p])
        det = linalg.det(wop)
        lam2 = skew_dim == 0

        # the appended trace row absorbs the pure-trace direction, so the
        # reported dimensions count genuine trace-free solutions
        sym = _symmetric_system(C[p], g[p])
        sym_dim = sym.shape[1] - _rank_null_floored(sym, tol.rank_tol,
                                                    floor)[0]

        cstar = _cstar(C[p], eps[p], gi[p], n)
        dual = _dual_symmetric_system(cstar, g[p])
        dual_dim = dual.shape[1] - _rank_null_floored(dual, tol.rank_tol,
                                                      floor)[0]

        generic = lam2 and sym_dim == 0 and dual_dim == 0
        weak = weak or lam2  # enforce the implication chain
        c3 = c3s = None
        if n == 4:
            c3, c3s = dim4_scalars(s, p)
        per.append(PointGenericity(
            point=s.points[p], weakly_generic=weak, weak_kernel=wkernel,
            lambda2_generic=lam2, weyl_det=float(det),
            skew_kernel_dim=int(skew_dim), sym_kernel_dim=int(sym_dim),
            dual_kernel_dim=int(dual_dim), generic=generic,
            c3=c3, c3_star=c3s))
    flags = [(pg.weakly_generic, pg.lambda2_generic, pg.generic) for pg in per]
    agree = len(set(flags)) == 1
    return GenericityReport(
        per_point=per,
        weakly_generic=all(f[0] for f in flags),
        lambda2_generic=all(f[1] for f in flags),
        generic=all(f[2] for f in flags),
        all_agree=agree)


def _cstar(C, eps, gi, n):
    """Cstar_{b1..b_{n-2} c d} = eps_{b1..b_{n-2}}^{a1 a2} C_{a1 a2 c d}."""
    cup = np.einsum("abcd,ae,bf->efcd", C, gi, gi)
    eps_flat = eps.reshape((n,) * (n - 2) + (n * n,))
    cup_flat = cup.reshape((n * n, n, n))
    return np.tensordot(eps_flat, cup_flat, axes=([-1], [0]))
