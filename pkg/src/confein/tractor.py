"""Standard tractor calculus: the rank n+2 bundle, its invariant metric and
connection, curvature, the second-order D operator, and the connection-rank
characterization of conformally Einstein metrics.

Concrete storage, in a fixed scale g on a chart of dimension n: a tractor
slot is an axis of size n+2 ordered [Y-part, Z-parts (n), X-part].

* an UP slot holds (alpha, m^a, tau) where the splitting triple is
  (alpha, mu_a, tau) and m^a = g^{ab} mu_b;
* a DOWN slot holds the h-lowered tuple, so that up-down contraction is a
  plain sum and lowering is multiplication by the block matrix
  [[0,0,1],[0,g_ab,0],[1,0,0]].

With this storage the projector triple is X^A = e_{n+1}, Y^A = e_0 (up),
X_A = e_0, Y_A = e_{n+1} (down), Z with metric blocks, reproducing the
standard inner-product table."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .config import DEFAULT_TOLERANCES
from .curvature import CurvaturePack, CurvatureSamples
from .evaluate import compile_batch
from .expressions import ZERO, ONE, Expr, add, diff, func, mul, neg, rational
from .genericity import classify_genericity, pair_basis
from .geometry import (
    DOWN,
    UP,
    MetricField,
    TensorField,
    conformal_rescale,
    evaluate_components,
    sym_einsum,
)

__all__ = [
    "TUP",
    "TDOWN",
    "TractorField",
    "TractorTensor",
    "tractor_metric_matrix",
    "tractor_metric_inverse",
    "connection_matrices",
    "tractor_connection",
    "change_scale",
    "tractor_d",
    "einstein_candidate",
    "omega",
    "omega_values",
    "cov_omega_values",
    "div_omega_values",
    "div_omega_closed",
    "w_tensor_values",
    "theta_values",
    "parallel_tractor_check",
    "annihilation_check",
    "rank_obstruction",
    "RankReport",
    "change_scale_matrix_values",
]

TUP = "U"
TDOWN = "D"

_TENSOR_SLOTS = (UP, DOWN)
_TRACTOR_SLOTS = (TUP, TDOWN)


@dataclass(eq=False)
class TractorField:
    """A standard tractor V^A in the splitting of the scale `g`:
    components (alpha, mu_a, tau) of weights (1, 1, -1)."""

    g: MetricField
    alpha: Expr
    mu: TensorField       # one down slot
    tau: Expr

    def __post_init__(self):
        if self.mu.variance != (DOWN,):
            raise ValueError("mu must have a single down slot")

    def to_tensor(self):
        n = self.g.dim
        comps = np.empty(n + 2, dtype=object)
        comps[0] = self.alpha
        mup = sym_einsum("ab,b->a", self.g.inverse_comps(), self.mu.comps)
        for i in range(n):
            comps[1 + i] = mup[i]
        comps[n + 1] = self.tau
        return TractorTensor(self.g, (TUP,), comps)

    @classmethod
    def from_tensor(cls, t):
        if t.slots != (TUP,):
            raise ValueError("expected a single up tractor slot")
        n = t.g.dim
        mu = sym_einsum("ab,b->a", t.g.comps, t.comps[1:n + 1])
        return cls(t.g, t.comps[0],
                   TensorField(t.g.chart, (DOWN,), mu, weight=1),
                   t.comps[n + 1])


@dataclass(eq=False)
class TractorTensor:
    """Mixed tensor-tractor components in a fixed scale.

    slots entries: 'u'/'d' tensor, 'U'/'D' tractor; comps is an object array
    with an axis of size n per tensor slot and n+2 per tractor slot."""

    g: MetricField
    slots: tuple
    comps: np.ndarray
    weight: int = 0

    def __post_init__(self):
        n = self.g.dim
        expected = tuple(n if s in _TENSOR_SLOTS else n + 2 for s in self.slots)
        if self.comps.shape != expected:
            raise ValueError(f"shape {self.comps.shape} != {expected}")

    @property
    def chart(self):
        return self.g.chart

    def map(self, fn):
        out = np.empty_like(self.comps)
        for idx in np.ndindex(*self.comps.shape):
            out[idx] = fn(self.comps[idx])
        return TractorTensor(self.g, self.slots, out, self.weight)

    def values_at(self, points):
        return evaluate_components(self.comps,
                                   [self.g.point_bindings(p) for p in points])


def tractor_metric_matrix(g):
    """The invariant metric on stored tuples: lowering matrix
    [[0,0,1],[0,g_ab,0],[1,0,0]]."""
    n = g.dim
    h = np.full((n + 2, n + 2), ZERO, dtype=object)
    h[0, n + 1] = ONE
    h[n + 1, 0] = ONE
    h[1:n + 1, 1:n + 1] = g.comps
    return h


def tractor_metric_inverse(g):
    n = g.dim
    h = np.full((n + 2, n + 2), ZERO, dtype=object)
    h[0, n + 1] = ONE
    h[n + 1, 0] = ONE
    h[1:n + 1, 1:n + 1] = g.inverse_comps()
    return h


def lower_tractor_slot(t: TractorTensor, slot):
    return _apply_tractor_matrix(t, slot, tractor_metric_matrix(t.g), TUP, TDOWN)


def raise_tractor_slot(t: TractorTensor, slot):
    return _apply_tractor_matrix(t, slot, tractor_metric_inverse(t.g), TDOWN, TUP)


def _apply_tractor_matrix(t, slot, mat, want, new):
    if t.slots[slot] != want:
        raise ValueError(f"slot {slot} is {t.slots[slot]}, expected {want}")
    comps = np.moveaxis(t.comps, slot, -1)
    shape = comps.shape
    flat = comps.reshape(-1, shape[-1])
    out = np.empty_like(flat)
    for i in range(flat.shape[0]):
        out[i] = sym_einsum("IJ,J->I", mat, flat[i])
    comps = np.moveaxis(out.reshape(shape), -1, slot)
    slots = list(t.slots)
    slots[slot] = new
    return TractorTensor(t.g, tuple(slots), comps, t.weight)


def contract_tractor(t: TractorTensor, s1, s2):
    """Plain-sum contraction of an up/down tractor slot pair."""
    kinds = {t.slots[s1], t.slots[s2]}
    if kinds != {TUP, TDOWN}:
        raise ValueError("need one up and one down tractor slot")
    comps = _object_trace(t.comps, s1, s2)
    slots = tuple(s for i, s in enumerate(t.slots) if i not in (s1, s2))
    return TractorTensor(t.g, slots, comps, t.weight)


def _object_trace(comps, s1, s2):
    moved = np.moveaxis(comps, (s1, s2), (-2, -1))
    shape = moved.shape[:-2]
    out = np.empty(shape, dtype=object)
    k = moved.shape[-1]
    for idx in np.ndindex(*shape):
        out[idx] = add(*[moved[idx + (i, i)] for i in range(k)])
    return out


# ---------------------------------------------------------------------------
# connection


def connection_matrices(g, pack=None):
    """Symbolic tractor-connection matrices Theta_a acting on stored up
    tuples: (nabla_a v)_I = d_a v_I + Theta[a, I, J] v_J."""
    n = g.dim
    gamma = g.christoffel().comps
    pack = pack or CurvaturePack(g)
    P = pack.schouten.comps
    gi = g.inverse_comps()
    pmix = sym_einsum("ax,xb->ab", P, gi)  # P_a^b
    th = np.full((n, n + 2, n + 2), ZERO, dtype=object)
    for a in range(n):
        for j in range(n):
            th[a, 0, 1 + j] = neg(g.comps[a, j])
            th[a, n + 1, 1 + j] = neg(P[a, j])
        for b in range(n):
            th[a, 1 + b, 0] = pmix[a, b]
            th[a, 1 + b, n + 1] = ONE if a == b else ZERO
            for j in range(n):
                th[a, 1 + b, 1 + j] = gamma[b, a, j]
    return th


def tractor_connection(t, theta=None):
    """Coupled Levi-Civita tractor derivative; adds a down tensor slot
    leftmost.  Accepts a TractorField or TractorTensor."""
    if isinstance(t, TractorField):
        t = t.to_tensor()
    g = t.g
    n = g.dim
    coords = g.chart.coords
    gamma = g.christoffel().comps
    if theta is None:
        theta = connection_matrices(g)
    shape = t.comps.shape
    out = np.empty((n,) + shape, dtype=object)
    for idx in np.ndindex(*shape):
        e = t.comps[idx]
        for a in range(n):
            out[(a,) + idx] = diff(e, coords[a])
    # slot corrections
    for s, kind in enumerate(t.slots):
        dim = n if kind in _TENSOR_SLOTS else n + 2
        moved = np.moveaxis(t.comps, s, -1)  # (..., dim)
        corr = np.empty((n,) + moved.shape, dtype=object)
        for idx in np.ndindex(*moved.shape[:-1]):
            for a in range(n):
                for i in range(dim):
                    terms = []
                    for e in range(dim):
                        v = moved[idx + (e,)]
                        if v is ZERO:
                            continue
                        if kind == UP:
                            coef = gamma[i, a, e]
                        elif kind == DOWN:
                            coef = neg(gamma[e, a, i])
                        elif kind == TUP:
                            coef = theta[a, i, e]
                        else:
                            coef = neg(theta[a, e, i])
                        if coef is ZERO:
                            continue
                        terms.append(mul(coef, v))
                    corr[(a,) + idx + (i,)] = add(*terms) if terms else ZERO
        # fold the correction back into out
        corr = np.moveaxis(corr, -1, s + 1)
        for idx in np.ndindex(*out.shape):
            if corr[idx] is not ZERO:
                out[idx] = add(out[idx], corr[idx])
    return TractorTensor(g, (DOWN,) + tuple(t.slots), out, t.weight)


# ---------------------------------------------------------------------------
# change of scale


def change_scale_matrices(g, upsilon):
    """(M_up, M_down): symbolic matrices mapping stored tuples in the scale
    g to stored tuples in e^{2 upsilon} g."""
    n = g.dim
    coords = g.chart.coords
    du = np.asarray([diff(upsilon, c) for c in coords], dtype=object)
    gi = g.inverse_comps()
    duu = sym_einsum("ab,b->a", gi, du)
    usq = sym_einsum("a,a->", du, duu)
    ep = func("exp", upsilon)
    em = func("exp", neg(upsilon))
    m_up = np.full((n + 2, n + 2), ZERO, dtype=object)
    m_up[0, 0] = ep
    for a in range(n):
        m_up[1 + a, 0] = mul(em, duu[a])
        m_up[1 + a, 1 + a] = em
        m_up[n + 1, 1 + a] = neg(mul(em, du[a]))
    m_up[n + 1, 0] = mul(rational(-1, 2), em, usq)
    m_up[n + 1, n + 1] = em
    # down version: conjugate by the lowering matrices of the two scales
    ghat = conformal_rescale(g, upsilon)
    hhat = tractor_metric_matrix(ghat)
    hinv = tractor_metric_inverse(g)
    m_down = sym_einsum("IK,KL,LJ->IJ", hhat, m_up, hinv)
    return m_up, m_down


def change_scale(t, upsilon):
    """Components of t in the rescaled scale e^{2 upsilon} g, including the
    density factor e^{w upsilon} of the object's weight."""
    if isinstance(t, TractorField):
        alpha = mul(func("exp", upsilon), t.alpha)
        du = np.asarray([diff(upsilon, c) for c in t.g.chart.coords],
                        dtype=object)
        n = t.g.dim
        mu = np.empty(n, dtype=object)
        for a in range(n):
            mu[a] = mul(func("exp", upsilon),
                        add(t.mu.comps[a], mul(du[a], t.alpha)))
        gi = t.g.inverse_comps()
        duu = sym_einsum("ab,b->a", gi, du)
        usq = sym_einsum("a,a->", du, duu)
        tau = mul(func("exp", neg(upsilon)),
                  add(t.tau, neg(sym_einsum("a,a->", duu, t.mu.comps)),
                      mul(rational(-1, 2), usq, t.alpha)))
        ghat = conformal_rescale(t.g, upsilon)
        return TractorField(ghat, alpha,
                            TensorField(t.g.chart, (DOWN,), mu, weight=1), tau)
    m_up, m_down = change_scale_matrices(t.g, upsilon)
    ghat = conformal_rescale(t.g, upsilon)
    comps = t.comps
    for s, kind in enumerate(t.slots):
        if kind in _TENSOR_SLOTS:
            continue
        mat = m_up if kind == TUP else m_down
        moved = np.moveaxis(comps, s, -1)
        shape = moved.shape
        flat = moved.reshape(-1, shape[-1])
        out = np.empty_like(flat)
        for i in range(flat.shape[0]):
            out[i] = sym_einsum("IJ,J->I", mat, flat[i])
        comps = np.moveaxis(out.reshape(shape), -1, s)
    if t.weight:
        f = func("exp", mul(rational(t.weight), upsilon))
        flat = comps.reshape(-1)
        comps = np.asarray([mul(f, e) for e in flat],
                           dtype=object).reshape(comps.shape)
    return TractorTensor(ghat, t.slots, comps, t.weight)


# ---------------------------------------------------------------------------
# the D operator


def tractor_d(f, w, g, pack=None):
    """D applied to a weight-w scalar: the down-slot tractor with stored
    tuple (-box f, (n+2w-2) d_a f, (n+2w-2) w f), box f = Laplacian + w J."""
    pack = pack or CurvaturePack(g)
    n = g.dim
    coords = g.chart.coords
    df = np.asarray([diff(f, c) for c in coords], dtype=object)
    gi = g.inverse_comps()
    gamma = g.christoffel().comps
    ddf = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            ddf[a, b] = diff(df[a], coords[b])
    lap_terms = []
    for a in range(n):
        for b in range(n):
            if gi[a, b] is ZERO:
                continue
            corr = add(*[mul(neg(gamma[c, a, b]), df[c]) for c in range(n)
                         if gamma[c, a, b] is not ZERO and df[c] is not ZERO]) \
                if n else ZERO
            lap_terms.append(mul(gi[a, b], add(ddf[a, b], corr)))
    lap = add(*lap_terms) if lap_terms else ZERO
    box = add(lap, mul(rational(w), pack.schouten_trace, f))
    c = n + 2 * w - 2
    comps = np.empty(n + 2, dtype=object)
    comps[0] = neg(box)
    for a in range(n):
        comps[1 + a] = mul(rational(c), df[a])
    comps[n + 1] = mul(rational(c * w), f)
    return TractorTensor(g, (TDOWN,), comps, weight=w - 1)


def einstein_candidate(g, sigma, pack=None):
    """I = (1/n) D sigma as an up tractor; parallel iff sigma^(-2) g is
    Einstein."""
    d = tractor_d(sigma, 1, g, pack)
    d = d.map(lambda e: mul(rational(1, g.dim), e))
    return raise_tractor_slot(d, 0)


# ---------------------------------------------------------------------------
# tractor curvature: symbolic assembly and numeric batches


def omega(pack: CurvaturePack):
    """Tractor curvature Omega_ab[C,D] assembled from the Weyl and Cotton
    tensors; both tractor slots down."""
    g = pack.g
    n = pack.n
    C = pack.weyl.comps
    A = pack.cotton.comps
    comps = np.full((n, n, n + 2, n + 2), ZERO, dtype=object)
    for a in range(n):
        for b in range(n):
            for i in range(n):
                for j in range(n):
                    comps[a, b, 1 + i, 1 + j] = C[a, b, i, j]
                comps[a, b, 0, 1 + i] = neg(A[i, a, b])
                comps[a, b, 1 + i, 0] = A[i, a, b]
    return TractorTensor(g, (DOWN, DOWN, TDOWN, TDOWN), comps, weight=0)


def theta_values(s: CurvatureSamples):
    """Numeric connection matrices (P, n, n+2, n+2)."""
    npts, n = len(s.points), s.n
    th = np.zeros((npts, n, n + 2, n + 2))
    g, gamma, P = s["g"], s["gamma"], s["P"]
    pmix = np.einsum("pax,pxb->pab", P, s["ginv"])
    th[:, :, 0, 1:n + 1] = -g
    th[:, :, n + 1, 1:n + 1] = -P
    for a in range(n):
        th[:, a, 1:n + 1, 0] = pmix[:, a, :]
        th[:, a, 1 + a, n + 1] = 1.0
        th[:, a, 1:n + 1, 1:n + 1] = gamma[:, :, a, :]
    return th


def omega_values(s: CurvatureSamples):
    """Stored blocks: middle-middle C_abij, X-row/column the Cotton tensor."""
    npts, n = len(s.points), s.n
    om = np.zeros((npts, n, n, n + 2, n + 2))
    om[:, :, :, 1:n + 1, 1:n + 1] = s["C"]
    A = s["A"]
    om[:, :, :, 0, 1:n + 1] = -np.transpose(A, (0, 2, 3, 1))
    om[:, :, :, 1:n + 1, 0] = np.transpose(A, (0, 2, 3, 1))
    return om


def d_omega_values(s: CurvatureSamples):
    """Coordinate partials of the stored Omega blocks: (P, z, a, b, I, J)."""
    npts, n = len(s.points), s.n
    dom = np.zeros((npts, n, n, n, n + 2, n + 2))
    dom[:, :, :, :, 1:n + 1, 1:n + 1] = s["dC"]
    dA = s["dA"]
    dom[:, :, :, :, 0, 1:n + 1] = -np.transpose(dA, (0, 1, 3, 4, 2))
    dom[:, :, :, :, 1:n + 1, 0] = np.transpose(dA, (0, 1, 3, 4, 2))
    return dom


def cov_omega_values(s: CurvatureSamples):
    """nabla_z Omega_ab[I,J] by the coupled connection: (P, z, a, b, I, J)."""
    om = omega_values(s)
    out = d_omega_values(s).copy()
    gamma = s["gamma"]
    out -= np.einsum("peza,pebIJ->pzabIJ", gamma, om)
    out -= np.einsum("pezb,paeIJ->pzabIJ", gamma, om)
    th = theta_values(s)
    out -= np.einsum("pzKI,pabKJ->pzabIJ", th, om)
    out -= np.einsum("pzKJ,pabIK->pzabIJ", th, om)
    return out


def div_omega_values(s: CurvatureSamples, cov=None):
    """nabla^a Omega_ab[I,J] from the coupled-connection derivative."""
    cov = cov_omega_values(s) if cov is None else cov
    return np.einsum("pza,pzabIJ->pbIJ", s["ginv"], cov)


def div_omega_closed(s: CurvatureSamples):
    """The closed form: (n-4) Z Z A - X Z B + X Z B pattern on stored
    blocks."""
    npts, n = len(s.points), s.n
    out = np.zeros((npts, n, n + 2, n + 2))
    A, B = s["A"], s["B"]
    # A_cde with c the free tensor slot and (d, e) the middle blocks
    out[:, :, 1:n + 1, 1:n + 1] = (n - 4) * A
    out[:, :, 0, 1:n + 1] = -np.transpose(B, (0, 2, 1))
    out[:, :, 1:n + 1, 0] = np.transpose(B, (0, 2, 1))
    return out


def w_tensor_values(s: CurvatureSamples, cov=None):
    """W[A,B,C,E] = (n-4) ZZ Omega - 2 X_[A Z_B]^b div-Omega, all slots
    down: (P, n+2, n+2, n+2, n+2)."""
    npts, n = len(s.points), s.n
    om = omega_values(s)
    dv = div_omega_values(s, cov)
    w = np.zeros((npts, n + 2, n + 2, n + 2, n + 2))
    w[:, 1:n + 1, 1:n + 1] = (n - 4) * om
    w[:, 0, 1:n + 1] += -dv
    w[:, 1:n + 1, 0] += dv
    return w


# ---------------------------------------------------------------------------
# checks and verdicts


def parallel_tractor_check(g, sigma, points, pack=None, tolerances=None):
    """Is sigma an Einstein scale?  Builds I = (1/n) D sigma, reports
    max |nabla I| at the points, h(I, I), and the trace-free Schouten
    residual of the rescaled metric sigma^{-2} g as the converse datum."""
    tol = tolerances or DEFAULT_TOLERANCES
    pack = pack or CurvaturePack(g)
    n = g.dim
    sig_vals = evaluate_components(sigma, [g.point_bindings(p) for p in points])
    if np.any(np.abs(sig_vals) < 1e-12):
        bad = points[int(np.argmin(np.abs(sig_vals)))]
        raise ArithmeticError(f"sigma vanishes at the sample point {bad} "
                              "(conformal singularity)")
    cand = einstein_candidate(g, sigma, pack)
    s = pack.samples(points)
    ivals = cand.values_at(points)              # (P, n+2)
    divals = evaluate_components(
        _partials_of(cand), [g.point_bindings(p) for p in points])
    th = theta_values(s)
    grad = divals + np.einsum("pzIJ,pJ->pzI", th, ivals)
    resid = np.max(np.abs(grad.reshape(len(points), -1)), axis=1)
    scale = np.maximum(1.0, np.max(np.abs(ivals), axis=1))

    hii = 2 * ivals[:, 0] * ivals[:, n + 1] + np.einsum(
        "pab,pa,pb->p", s["g"], ivals[:, 1:n + 1], ivals[:, 1:n + 1])
    expected = -(2.0 / n) * sig_vals ** 2 * s["J"]

    ghat = conformal_rescale(g, neg(func("log", sigma)))
    from .curvature import einstein_residual
    tfp, tfp_scale = einstein_residual(CurvaturePack(ghat), points)

    ok = bool(np.all(resid < tol.tol_rel * scale + tol.tol_abs))
    return {
        "is_einstein_scale": ok,
        "parallel_residual": float(np.max(resid)),
        "scale": float(np.max(scale)),
        "h_ii": hii,
        "h_ii_expected": expected,
        "rescaled_trace_free_schouten": tfp,
        "rescaled_scale": tfp_scale,
    }


def _partials_of(t: TractorTensor):
    n = t.g.dim
    coords = t.g.chart.coords
    out = np.empty((n,) + t.comps.shape, dtype=object)
    for idx in np.ndindex(*t.comps.shape):
        for a in range(n):
            out[(a,) + idx] = diff(t.comps[idx], coords[a])
    return out


def annihilation_check(pack_or_samples, tractor, points=None):
    """Residuals of Omega.I, (nabla Omega).I, (div Omega).I and W.I for a
    candidate tractor, plus the X.I values and the Z-coefficient expansion
    (the C-space combination sigma A + mu.C)."""
    s = pack_or_samples if isinstance(pack_or_samples, CurvatureSamples) \
        else pack_or_samples.samples(points)
    n = s.n
    if isinstance(tractor, (TractorField, TractorTensor)):
        tt = tractor.to_tensor() if isinstance(tractor, TractorField) else tractor
        ivals = tt.values_at(s.points)
    else:
        ivals = np.asarray(tractor, dtype=float)
    om = omega_values(s)
    cov = cov_omega_values(s)
    dv = div_omega_values(s, cov)
    w = w_tensor_values(s, cov)
    scale_om = max(float(np.max(np.abs(om))), 1e-300) * \
        max(float(np.max(np.abs(ivals))), 1e-300)
    r_om = np.einsum("pabIJ,pJ->pabI", om, ivals)
    r_cov = np.einsum("pzabIJ,pJ->pzabI", cov, ivals)
    r_div = np.einsum("pbIJ,pJ->pbI", dv, ivals)
    r_w = np.einsum("pABIJ,pJ->pABI", w, ivals)
    # Z-coefficient of Omega.I: rows 1..n of the remaining slot
    zcoef = r_om[:, :, :, 1:n + 1]
    return {
        "omega": float(np.max(np.abs(r_om))),
        "cov_omega": float(np.max(np.abs(r_cov))),
        "div_omega": float(np.max(np.abs(r_div))),
        "w": float(np.max(np.abs(r_w))),
        "scale": scale_om,
        "x_dot_i": ivals[:, 0],
        "z_coefficient": zcoef,
    }


@dataclass
class RankReport:
    ranks: list
    max_rank: int
    verdict: str
    kernel_alignment: float | None
    weakly_generic: bool
    notes: list = field(default_factory=list)


def rank_obstruction(pack_or_g, points, tolerances=None, sigma=None,
                     genericity=None):
    """Theorem-level rank test: stack the rows Omega_bc[D, .] and
    nabla_a Omega_bc[D, .] as functionals on tractors; the metric is
    conformally Einstein iff the rank is at most n+1 at every point
    (given weak genericity).  When a kernel exists and sigma is supplied,
    reports the cosine alignment of the kernel with (1/n) D sigma."""
    tol = (tolerances or DEFAULT_TOLERANCES).validate()
    pack = pack_or_g if isinstance(pack_or_g, CurvaturePack) \
        else CurvaturePack(pack_or_g)
    n = pack.n
    s = pack.samples(points)
    gen = genericity or classify_genericity(s, tolerances=tol)
    om = omega_values(s)
    cov = cov_omega_values(s)
    pairs = pair_basis(n)
    scale = s.scale()
    from .genericity import _rank_null_floored
    ranks = []
    kernels = []
    for p in range(len(points)):
        rows = []
        for (b, c) in pairs:
            rows.append(om[p, b, c])                 # (n+2, n+2) rows over D
        for a in range(n):
            for (b, c) in pairs:
                rows.append(cov[p, a, b, c])
        mat = np.concatenate(rows, axis=0)           # (~, n+2)
        rank, kernel = _rank_null_floored(mat, tol.rank_tol, scale[p])
        ranks.append(int(rank))
        kernels.append(kernel)
    max_rank = max(ranks)
    notes = []
    if not gen.weakly_generic:
        verdict = "inconclusive"
        notes.append("not weakly generic; the rank test is silent")
    elif max_rank <= n + 1:
        verdict = "conformally-einstein"
    else:
        verdict = "not"
    alignment = None
    if sigma is not None and verdict == "conformally-einstein":
        cand = einstein_candidate(pack.g, sigma, pack)
        ivals = cand.values_at(points)
        cs = []
        for p, kernel in enumerate(kernels):
            if kernel.shape[1] == 0:
                continue
            v = ivals[p] / np.linalg.norm(ivals[p])
            proj = kernel @ (kernel.T @ v)
            cs.append(np.linalg.norm(proj))
        alignment = float(min(cs)) if cs else None
    return RankReport(ranks, max_rank, verdict, alignment,
                      gen.weakly_generic, notes)


def change_scale_matrix_values(s: CurvatureSamples, upsilon):
    """Numeric (M_up, M_down) at the sample points for a symbolic factor."""
    n = s.n
    coords = s.pack.chart.coords
    exprs = [upsilon] + [diff(upsilon, c) for c in coords]
    prog = compile_batch(exprs)
    batch = {nm: np.array([float(b[nm]) for b in s.bindings])
             for nm in prog.sym_slots}
    if batch:
        vals = np.asarray(prog.run(batch), dtype=float)
    else:
        vv = np.asarray(prog.run({}), dtype=float).reshape(-1)
        vals = np.repeat(vv[:, None], len(s.bindings), axis=1)
    u = vals[0]
    du = vals[1:].T                        # (P, n)
    g, gi = s["g"], s["ginv"]
    duu = np.einsum("pab,pb->pa", gi, du)
    usq = np.einsum("pa,pa->p", du, duu)
    npts = len(s.points)
    ep, em = np.exp(u), np.exp(-u)
    m_up = np.zeros((npts, n + 2, n + 2))
    m_up[:, 0, 0] = ep
    for a in range(n):
        m_up[:, 1 + a, 0] = em * duu[:, a]
        m_up[:, 1 + a, 1 + a] = em
        m_up[:, n + 1, 1 + a] = -em * du[:, a]
    m_up[:, n + 1, 0] = -0.5 * em * usq
    m_up[:, n + 1, n + 1] = em
    hhat = np.zeros((npts, n + 2, n + 2))
    hhat[:, 0, n + 1] = 1.0
    hhat[:, n + 1, 0] = 1.0
    hhat[:, 1:n + 1, 1:n + 1] = np.exp(2 * u)[:, None, None] * g
    hinv = np.zeros((npts, n + 2, n + 2))
    hinv[:, 0, n + 1] = 1.0
    hinv[:, n + 1, 0] = 1.0
    hinv[:, 1:n + 1, 1:n + 1] = gi
    m_down = np.einsum("pIK,pKL,pLJ->pIJ", hhat, m_up, hinv)
    return m_up, m_down, u
