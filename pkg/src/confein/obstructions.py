"""Sharp obstruction invariants and the conformally-Einstein decision
pipeline at the tensor level.

Everything here is pointwise numerics on sampled curvature.  Quantities
built from adjugates and determinants of the Weyl operators carry exact
first derivatives through a small forward-mode jet algebra (value plus
coordinate partials), so covariant derivatives of e.g. K_b = Dt_bcde A^cde
need no finite differencing and no symbolic adjugates.

Invariants:

* cspace residual   A_abc + K^d C_dabc                      (condition [C])
* bach residual     B_ab + (n-4) K^d K^c C_dabc             (condition [B])
* F1, F2            the determinant-cleared forms of [C], [B]
* E                 trace-free[P - nabla K + K (x) K], K = Dt.A
* G, Gbar           ||L||^2 E and (1-n)^2 ||C||^2 E, also via their
                    expanded natural displays (cross-checked)
* dim-4 invariant   the |C|^2-cleared form of E in dimension 4
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLERANCES
from .curvature import CurvaturePack, CurvatureSamples, antisym_axes
from .genericity import (
    GenericityReport,
    PolicyError,
    classify_genericity,
    pair_basis,
    _pair_matrix,
    _pair_tensor,
)
from .geometry import DOWN, TensorField, evaluate_components, partial_derivative

__all__ = [
    "Jet",
    "jet_einsum",
    "KField",
    "Residual",
    "ObstructionReport",
    "Verdict",
    "THEOREM_IDS",
    "k_field",
    "cspace_residual",
    "bach_residual",
    "f1",
    "f2",
    "e_tensor",
    "g_tensor",
    "gbar_tensor",
    "dim4_invariant",
    "cotton_rl2_invariant",
    "conformal_einstein_tensor_verdict",
    "cotton_scale_verdict",
    "reconstruct_potential",
    "covariance_exponent",
]

# identifiers for the deciding criteria, documented in the README
THEOREM_IDS = {
    "cotton3": "cotton-flat-3d",
    "E": "trace-free-e-obstruction",
    "lam2": "lambda2-obstruction",
    "F": "bach-cotton-system",
    "rank": "tractor-rank",
    "scale": "einstein-scale",
}


# ---------------------------------------------------------------------------
# forward-mode jets over sample batches


class Jet:
    """Batched value with exact first coordinate partials.

    val: (P, ...);  d: (P, n, ...) with the derivative axis right after P."""

    __slots__ = ("val", "d")

    def __init__(self, val, d):
        self.val = np.asarray(val, dtype=float)
        self.d = np.asarray(d, dtype=float)

    @classmethod
    def constant(cls, val, n):
        val = np.asarray(val, dtype=float)
        return cls(val, np.zeros(val.shape[:1] + (n,) + val.shape[1:]))

    def __add__(self, other):
        return Jet(self.val + other.val, self.d + other.d)

    def __sub__(self, other):
        return Jet(self.val - other.val, self.d - other.d)

    def __neg__(self):
        return Jet(-self.val, -self.d)

    def scaled(self, c):
        return Jet(c * self.val, c * self.d)


def jet_einsum(spec, *ops):
    """einsum over jets/arrays; every subscript starts with the batch axis
    'p' and must not use the letter 'z' (reserved for the derivative)."""
    lhs, out = spec.split("->")
    terms = lhs.split(",")
    if "z" in spec:
        raise ValueError("subscript letter 'z' is reserved")
    vals = [o.val if isinstance(o, Jet) else np.asarray(o, dtype=float)
            for o in ops]
    val = np.einsum(spec, *vals)
    d = None
    for i, o in enumerate(ops):
        if not isinstance(o, Jet):
            continue
        subs = list(terms)
        subs[i] = "pz" + terms[i][1:]
        dspec = ",".join(subs) + "->pz" + out[1:]
        args = list(vals)
        args[i] = o.d
        part = np.einsum(dspec, *args)
        d = part if d is None else d + part
    if d is None:
        raise ValueError("at least one operand must be a Jet")
    return Jet(val, d)


def jet_reciprocal(s: Jet) -> Jet:
    inv = 1.0 / s.val
    return Jet(inv, -s.d * (inv ** 2)[:, None])


def jet_inverse_matrix(m: Jet) -> Jet:
    """Inverse of a batch of matrices (P, k, k) with derivative; the
    matrices must be invertible (callers gate on the policy checks)."""
    inv = np.linalg.inv(m.val)
    d = -np.einsum("pab,pzbc,pcd->pzad", inv, m.d, inv)
    return Jet(inv, d)


def jet_det(m: Jet) -> Jet:
    """Determinant with derivative d(det) = tr(adj . dM); defined for
    singular matrices too (cofactor adjugate)."""
    from . import linalg
    det = np.linalg.det(m.val)
    adj = np.stack([linalg.adjugate(m.val[p]) for p in range(m.val.shape[0])])
    d = np.einsum("pab,pzba->pz", adj, m.d)
    return Jet(det, d)


def jet_adjugate(m: Jet) -> Jet:
    det = jet_det(m)
    inv = jet_inverse_matrix(m)
    return jet_einsum("p,pab->pab", det, inv)


class _JetBag:
    """Jets of the sampled curvature of one batch, built lazily."""

    def __init__(self, samples: CurvatureSamples):
        self.s = samples
        self.n = samples.n
        self._cache = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def g(self):
        return self._get("g", lambda: Jet(self.s["g"], self.s["dg"]))

    @property
    def ginv(self):
        def build():
            gi = self.s["ginv"]
            d = -np.einsum("pab,pzbc,pcd->pzad", gi, self.s["dg"], gi)
            return Jet(gi, d)
        return self._get("ginv", build)

    @property
    def C(self):
        return self._get("C", lambda: Jet(self.s["C"], self.s["dC"]))

    @property
    def A(self):
        return self._get("A", lambda: Jet(self.s["A"], self.s["dA"]))

    @property
    def P(self):
        return self._get("P", lambda: Jet(self.s["P"], self.s["dP"]))

    def _raise_all(self, t: Jet, k: int) -> Jet:
        gi = self.ginv
        out = t
        for s in range(k):
            letters = "abcdefgh"[:k]
            src = letters[:s] + "x" + letters[s + 1:]
            spec = f"px{letters[s]},p{src}->p{letters}"
            out = jet_einsum(spec, gi, out)
        return out

    @property
    def C_allup(self):
        return self._get("C_allup", lambda: self._raise_all(self.C, 4))

    @property
    def L(self):
        """L^a_b = C^acde C_bcde with derivative."""
        return self._get("L", lambda: jet_einsum(
            "pacde,pbcde->pab", self.C_allup, self.C))

    @property
    def weyl_operator_matrix(self):
        """Ranked-pair matrix of C_ab^cd as a jet."""
        def build():
            cuu = self._raise_all_last2(self.C)
            n = self.n
            pairs = pair_basis(n)
            idx_a = [a for a, b in pairs]
            idx_b = [b for a, b in pairs]
            val = 2.0 * cuu.val[:, idx_a, idx_b][:, :, idx_a, idx_b]
            d = 2.0 * cuu.d[:, :, idx_a, idx_b][:, :, :, idx_a, idx_b]
            return Jet(val, d)
        return self._get("wop", build)

    def _raise_all_last2(self, t: Jet) -> Jet:
        gi = self.ginv
        out = jet_einsum("pxc,pabxd->pabcd", gi, t)
        return jet_einsum("pxd,pabcx->pabcd", gi, out)


def dual_candidate_jet(bag: _JetBag, policy, tolerances=None) -> Jet:
    """Fully raised Dt^acde with exact first derivatives.  Policies as in
    genericity.dual_candidate; preconditions enforced the same way."""
    tol = tolerances or DEFAULT_TOLERANCES
    n = bag.n
    _require_nonzero_weyl(bag.s, tol, policy)
    if policy == "from-L":
        L = bag.L
        detL = jet_det(L)
        _check_policy_matrix(L.val, detL.val, tol, "from-L",
                             "||L||", bag.s.points)
        adjL = jet_adjugate(L)
        inv_det = jet_reciprocal(detL)
        d = jet_einsum("pab,pbcde->pacde", adjL, bag.C_allup)
        return jet_einsum("p,pacde->pacde", inv_det, d).scaled(-1.0)
    if policy == "from-C":
        M = bag.weyl_operator_matrix
        detC = jet_det(M)
        _check_policy_matrix(M.val, detC.val, tol, "from-C", "||C||",
                             bag.s.points)
        adj = jet_adjugate(M)
        ct = _pair_tensor_jet(adj, n)           # Ct_xy^de
        gi = bag.ginv
        ctup = jet_einsum("pxa,pyc,pxyde->pacde", gi, gi, ct)
        inv_det = jet_reciprocal(detC)
        return jet_einsum("p,pacde->pacde", inv_det, ctup).scaled(2.0 / (1.0 - n))
    if policy == "dim4-C3":
        if n != 4:
            raise PolicyError("policy dim4-C3 needs dimension 4")
        cmix = bag._raise_all_last2(bag.C)
        c3 = jet_einsum("pabcd,pcdef,pefab->p", cmix, cmix, cmix)
        _check_policy_scalar(c3.val, np.max(np.abs(cmix.val),
                                            axis=(1, 2, 3, 4)),
                             3, tol, "dim4-C3", "C^3", bag.s.points)
        cup2 = _lower_last2(bag, bag.C_allup)
        cc = jet_einsum("pdefg,pfgca->pdeca", cup2, bag.C_allup)
        perm = Jet(np.transpose(cc.val, (0, 4, 3, 1, 2)),
                   np.transpose(cc.d, (0, 1, 5, 4, 2, 3)))
        return jet_einsum("p,pacde->pacde", jet_reciprocal(c3), perm).scaled(4.0)
    raise ValueError(f"unknown policy {policy!r}")


def _lower_last2(bag, t: Jet) -> Jet:
    g = bag.g
    out = jet_einsum("pxc,pabxd->pabcd", g, t)
    return jet_einsum("pxd,pabcx->pabcd", g, out)


def _pair_tensor_jet(m: Jet, n) -> Jet:
    pairs = pair_basis(n)
    npts = m.val.shape[0]
    val = np.zeros((npts, n, n, n, n))
    d = np.zeros((npts, n, n, n, n, n))
    for i, (a, b) in enumerate(pairs):
        for j, (c, dd) in enumerate(pairs):
            v = 0.5 * m.val[:, i, j]
            w = 0.5 * m.d[:, :, i, j]
            for (x, y, sx) in ((a, b, 1.0), (b, a, -1.0)):
                for (u, v2, sy) in ((c, dd, 1.0), (dd, c, -1.0)):
                    val[:, x, y, u, v2] = sx * sy * v
                    d[:, :, x, y, u, v2] = sx * sy * w
    return Jet(val, d)


def _require_nonzero_weyl(samples, tol, policy):
    """Every policy divides by a Weyl-built determinant; if the Weyl tensor
    itself is numerically zero the division is meaningless."""
    c = samples["C"]
    npts = c.shape[0]
    cmax = np.max(np.abs(c.reshape(npts, -1)), axis=1)
    bad = np.nonzero(cmax <= tol.rank_tol * samples.scale())[0]
    if bad.size:
        p = int(bad[0])
        raise PolicyError(
            f"policy {policy}: the Weyl tensor vanishes numerically at "
            f"point {samples.points[p]} (max |C| = {cmax[p]:.3e})")


def _check_policy_matrix(mats, dets, tol, policy, name, points):
    """The policy's matrix must be numerically invertible (full rank at the
    pivot tolerance, relative to its largest entry)."""
    from . import linalg
    k = mats.shape[1]
    for p in range(mats.shape[0]):
        if linalg.rank(mats[p], tol.rank_tol) < k:
            raise PolicyError(
                f"policy {policy}: {name} = {dets[p]:.3e} vanishes "
                f"at point {points[p]}")


def _check_policy_scalar(vals, entry_scale, power, tol, policy,
                         name, points):
    rel = np.abs(vals) <= tol.rank_tol * np.maximum(entry_scale,
                                                    1e-300) ** power
    bad = np.nonzero(rel)[0]
    if bad.size:
        p = int(bad[0])
        raise PolicyError(f"policy {policy}: {name} = {vals[p]:.3e} vanishes "
                          f"at point {points[p]}")


# ---------------------------------------------------------------------------
# K and the invariants


@dataclass
class KField:
    """The unique candidate gradient direction K of the C-space equation."""

    lowered: np.ndarray        # (P, n) K_a
    d_lowered: np.ndarray      # (P, n, n) exact partials d_z K_a
    provenance: str

    def closedness(self):
        """Per-point max |d_[a K_b]| (vanishes iff K is locally a gradient)."""
        skew = 0.5 * (self.d_lowered - np.transpose(self.d_lowered, (0, 2, 1)))
        return np.max(np.abs(skew), axis=(1, 2))

    def raised(self, samples):
        return np.einsum("pab,pb->pa", samples["ginv"], self.lowered)


def k_field(samples: CurvatureSamples, policy="from-L", tolerances=None,
            bag=None) -> KField:
    """K_a = Dt_a^{bcd} A_bcd for the chosen left-inverse policy."""
    bag = bag or _JetBag(samples)
    dt = dual_candidate_jet(bag, policy, tolerances)
    kup = jet_einsum("pfabc,pabc->pf", dt, bag.A)
    kl = jet_einsum("pab,pb->pa", bag.g, kup)
    return KField(kl.val, kl.d, policy)


def k_field_from_tensor(k_tensor: TensorField, samples: CurvatureSamples,
                        provenance="user-supplied") -> KField:
    """Wrap a symbolic one-form K (e.g. a closed-form gradient) as a KField
    at the sample points."""
    if k_tensor.variance != (DOWN,):
        raise ValueError("K must be a one-form (single down slot)")
    vals = evaluate_components(k_tensor.comps, samples.bindings)
    dvals = evaluate_components(partial_derivative(k_tensor),
                                samples.bindings)
    return KField(vals, dvals, provenance)


@dataclass
class Residual:
    """A named per-point residual with the magnitude it is measured
    against."""

    name: str
    values: np.ndarray   # (P, ...) componentwise residual
    scale: np.ndarray    # (P,)

    @property
    def per_point(self):
        flat = self.values.reshape(self.values.shape[0], -1)
        return np.max(np.abs(flat), axis=1)

    @property
    def max(self):
        return float(np.max(self.per_point))

    @property
    def max_scale(self):
        return float(np.max(self.scale))

    def passes(self, tol):
        return bool(np.all(self.per_point <
                           tol.tol_rel * self.scale + tol.tol_abs))

    def decisively_fails(self, tol):
        return bool(np.any(self.per_point > tol.decisive * self.scale))


def _scale_of(*arrays, floor=1.0):
    npts = arrays[0].shape[0]
    s = np.full(npts, floor)
    for a in arrays:
        s = np.maximum(s, np.max(np.abs(a.reshape(npts, -1)), axis=1))
    return s


def cspace_residual(samples: CurvatureSamples, k: KField) -> Residual:
    """A_abc + K^d C_dabc."""
    kup = k.raised(samples)
    term = np.einsum("pd,pdabc->pabc", kup, samples["C"])
    return Residual("cspace", samples["A"] + term,
                    _scale_of(samples["A"], term))


def bach_residual(samples: CurvatureSamples, k: KField) -> Residual:
    """B_ab + (n-4) K^d K^c C_dabc; equals the Bach tensor alone in n=4."""
    n = samples.n
    kup = k.raised(samples)
    term = (n - 4) * np.einsum("pd,pc,pdabc->pab", kup, kup, samples["C"])
    return Residual("bach", samples["B"] + term,
                    _scale_of(samples["B"], term))


def f1(samples: CurvatureSamples, bag=None) -> Residual:
    """(1-n)||C|| A_abc + 2 C_dabc Ct^defg A_efg  (n >= 4)."""
    _need_dim4plus(samples)
    bag = bag or _JetBag(samples)
    n = samples.n
    detC, ctup = _weyl_adjugate_raised(bag)
    v = np.einsum("pdefg,pefg->pd", ctup, samples["A"])
    t1 = (1 - n) * detC[:, None, None, None] * samples["A"]
    t2 = 2 * np.einsum("pd,pdabc->pabc", v, samples["C"])
    return Residual("F1", t1 + t2, _scale_of(t1, t2))


def f2(samples: CurvatureSamples, bag=None) -> Residual:
    """(n-1)^2 ||C||^2 B_ab + 4(n-4) Ct^defg C_dabc Ct^chkl A_efg A_hkl."""
    _need_dim4plus(samples)
    bag = bag or _JetBag(samples)
    n = samples.n
    detC, ctup = _weyl_adjugate_raised(bag)
    v = np.einsum("pdefg,pefg->pd", ctup, samples["A"])
    t1 = (n - 1) ** 2 * (detC ** 2)[:, None, None] * samples["B"]
    t2 = 4 * (n - 4) * np.einsum("pd,pdabc,pc->pab", v, samples["C"], v)
    return Residual("F2", t1 + t2, _scale_of(t1, t2))


def _weyl_adjugate_raised(bag):
    """(||C||, Ct^acde) without derivatives; works for singular operators."""
    from . import linalg
    cuu = bag.s.raised("C", (0, 0, 1, 1))
    gi = bag.s["ginv"]
    npts, n = cuu.shape[0], bag.n
    dets = np.empty(npts)
    ctup = np.empty((npts, n, n, n, n))
    for p in range(npts):
        m = _pair_matrix(cuu[p])
        dets[p] = linalg.det(m)
        ct = _pair_tensor(linalg.adjugate(m), n)
        ctup[p] = np.einsum("xa,yc,xyde->acde", gi[p], gi[p], ct)
    return dets, ctup


def _need_dim4plus(samples):
    if samples.n == 3:
        raise ValueError("this invariant needs dimension n >= 4")


def _trace_free(t, samples):
    g, gi = samples["g"], samples["ginv"]
    n = samples.n
    tr = np.einsum("pab,pab->p", gi, t)
    return t - g * (tr / n)[:, None, None]


def e_tensor(samples: CurvatureSamples, dt: Jet, bag=None) -> Residual:
    """Trace-free[ P_ab - nabla_a K_b + K_a K_b ] with K_b = Dt_bcde A^cde.

    Conformally invariant (weight 0) when Dt is canonical."""
    bag = bag or _JetBag(samples)
    kup = jet_einsum("pfabc,pabc->pf", dt, bag.A)
    kl = jet_einsum("pab,pb->pa", bag.g, kup)
    covk = kl.d - np.einsum("pcab,pc->pab", samples["gamma"], kl.val)
    core = samples["P"] - covk + np.einsum("pa,pb->pab", kl.val, kl.val)
    tf = _trace_free(core, samples)
    return Residual("E", tf, _scale_of(samples["P"], covk,
                                       np.einsum("pa,pb->pab", kl.val, kl.val)))


def g_tensor(samples: CurvatureSamples, bag=None, cross_check=True):
    """The ||L||-cleared natural display of E (weight -8n); returns
    (Residual, cross-check relative error vs ||L||^2 E)."""
    _need_dim4plus(samples)
    bag = bag or _JetBag(samples)
    L = bag.L
    detL = jet_det(L)
    _require_nonzero_weyl(bag.s, DEFAULT_TOLERANCES, "from-L")
    _check_policy_matrix(L.val, detL.val, DEFAULT_TOLERANCES, "from-L",
                         "||L||", bag.s.points)
    adjL = jet_adjugate(L)
    dmix = jet_einsum("pab,pbcde->pacde", adjL, bag.C_allup).scaled(-1.0)
    dmix = _lower_first(bag, dmix)           # D_b^cde (first slot lowered)
    q = jet_einsum("pbcde,pcde->pb", dmix, bag.A)
    covq = q.d - np.einsum("pcab,pc->pab", samples["gamma"], q.val)
    t1 = (detL.val ** 2)[:, None, None] * samples["P"]
    t2 = -detL.val[:, None, None] * covq
    t3 = np.einsum("pa,pb->pab", detL.d, q.val)
    t4 = np.einsum("pa,pb->pab", q.val, q.val)
    disp = _trace_free(t1 + t2 + t3 + t4, samples)
    res = Residual("G", disp, _scale_of(t1, t2, t3, t4))
    if not cross_check:
        return res, None
    dt = dual_candidate_jet(bag, "from-L")
    e = e_tensor(samples, dt, bag)
    ref = (detL.val ** 2)[:, None, None] * e.values
    denom = max(np.max(np.abs(ref)), 1e-300)
    return res, float(np.max(np.abs(disp - ref)) / denom)


def _lower_first(bag, t: Jet) -> Jet:
    return jet_einsum("pxa,pxcde->pacde", bag.g, t)


def gbar_tensor(samples: CurvatureSamples, bag=None, cross_check=True):
    """The ||C||-cleared display (weight 2n(1-n)); cross-checked against
    (1-n)^2 ||C||^2 E with the Lambda2 left inverse."""
    _need_dim4plus(samples)
    bag = bag or _JetBag(samples)
    n = samples.n
    M = bag.weyl_operator_matrix
    detC = jet_det(M)
    _require_nonzero_weyl(bag.s, DEFAULT_TOLERANCES, "from-C")
    _check_policy_matrix(M.val, detC.val, DEFAULT_TOLERANCES, "from-C",
                         "||C||", bag.s.points)
    adj = jet_adjugate(M)
    ct = _pair_tensor_jet(adj, n)            # Ct_bc^de (pairs (bc),(de))
    ctlow = _lower_last2(bag, ct)            # Ct_bcde
    aup = bag._raise_all(bag.A, 3)
    q = jet_einsum("pbcde,pcde->pb", ctlow, aup)
    covq = q.d - np.einsum("pcab,pc->pab", samples["gamma"], q.val)
    t1 = (1 - n) ** 2 * (detC.val ** 2)[:, None, None] * samples["P"]
    t2 = -2 * (1 - n) * detC.val[:, None, None] * covq
    t3 = 2 * (1 - n) * np.einsum("pa,pb->pab", detC.d, q.val)
    t4 = 4 * np.einsum("pa,pb->pab", q.val, q.val)
    disp = _trace_free(t1 + t2 + t3 + t4, samples)
    res = Residual("Gbar", disp, _scale_of(t1, t2, t3, t4))
    if not cross_check:
        return res, None
    dt = dual_candidate_jet(bag, "from-C")
    e = e_tensor(samples, dt, bag)
    ref = (1 - n) ** 2 * (detC.val ** 2)[:, None, None] * e.values
    denom = max(np.max(np.abs(ref)), 1e-300)
    return res, float(np.max(np.abs(disp - ref)) / denom)


def dim4_invariant(samples: CurvatureSamples, bag=None) -> Residual:
    """Trace-free[(|C|^2)^2 P + 4|C|^2 nabla(C.A) - 4(C.A) nabla|C|^2
    + 16 (C.A)(x)(C.A)], the weight -8 obstruction in dimension 4."""
    if samples.n != 4:
        raise ValueError("dim4_invariant needs dimension 4")
    bag = bag or _JetBag(samples)
    c2 = jet_einsum("pabcd,pabcd->p", bag.C_allup, bag.C)
    aup = bag._raise_all(bag.A, 3)
    q = jet_einsum("pbcde,pcde->pb", bag.C, aup)   # C_bcde A^cde
    covq = q.d - np.einsum("pcab,pc->pab", samples["gamma"], q.val)
    t1 = (c2.val ** 2)[:, None, None] * samples["P"]
    t2 = 4 * c2.val[:, None, None] * covq
    t3 = -4 * np.einsum("pb,pa->pab", q.val, c2.d)
    t4 = 16 * np.einsum("pa,pb->pab", q.val, q.val)
    disp = _trace_free(t1 + t2 + t3 + t4, samples)
    return Residual("dim4", disp, _scale_of(t1, t2, t3, t4))


def cotton_rl2_invariant(samples: CurvatureSamples, bag=None):
    """The Riemannian-signature replacement for F1:
    ||L|| A_abc - C^efgh A_fgh Lt^d_e C_dabc, plus (in n = 4) the simpler
    |C|^2 A_abc - 4 C^defg A_efg C_dabc."""
    bag = bag or _JetBag(samples)
    L = bag.L.val
    detL = np.linalg.det(L)
    from . import linalg
    adjL = np.stack([linalg.adjugate(L[p]) for p in range(L.shape[0])])
    t = np.einsum("pefgh,pfgh->pe", bag.C_allup.val, samples["A"])
    w = np.einsum("pde,pe->pd", adjL, t)
    r1 = detL[:, None, None, None] * samples["A"] \
        - np.einsum("pd,pdabc->pabc", w, samples["C"])
    out = {"rl2-cotton": Residual(
        "rl2-cotton", r1,
        _scale_of(detL[:, None, None, None] * samples["A"],
                  np.einsum("pd,pdabc->pabc", w, samples["C"])))}
    if samples.n == 4:
        c2 = np.einsum("pabcd,pabcd->p", bag.C_allup.val, samples["C"])
        v = np.einsum("pdefg,pefg->pd", bag.C_allup.val, samples["A"])
        r2 = c2[:, None, None, None] * samples["A"] \
            - 4 * np.einsum("pd,pdabc->pabc", v, samples["C"])
        out["dim4-cotton"] = Residual(
            "dim4-cotton", r2,
            _scale_of(c2[:, None, None, None] * samples["A"],
                      4 * np.einsum("pd,pdabc->pabc", v, samples["C"])))
    return out


# ---------------------------------------------------------------------------
# potential reconstruction


def reconstruct_potential(pack: CurvaturePack, points, policy="from-L",
                          tolerances=None, steps=64):
    """Integrate K along axis-parallel segments from the first point to each
    other point (composite Simpson, `steps` intervals per segment).
    Correctness is gated by the closedness of K, not by this integral."""
    if steps % 2:
        raise ValueError("steps must be even for Simpson integration")
    coords = pack.chart.coords
    base = points[0]
    values = [0.0]
    for target in points[1:]:
        total = 0.0
        current = dict(base)
        for ci, c in enumerate(coords):
            a, b = current[c], target[c]
            if a == b:
                continue
            ts = np.linspace(a, b, steps + 1)
            nodes = []
            for t in ts:
                q = dict(current)
                q[c] = float(t)
                nodes.append(q)
            s = pack.samples(nodes)
            k = k_field(s, policy, tolerances)
            comp = k.lowered[:, ci]
            h = (b - a) / steps
            total += h / 3.0 * (comp[0] + comp[-1]
                                + 4 * np.sum(comp[1:-1:2])
                                + 2 * np.sum(comp[2:-1:2]))
            current[c] = b
        values.append(float(total))
    return np.asarray(values)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    theorem: str        # identifier from THEOREM_IDS
    outcome: str        # 'conformally-einstein' | 'not' | 'inconclusive'
    precondition: str
    detail: str = ""


@dataclass
class ObstructionReport:
    n: int
    points: list
    genericity: GenericityReport | None
    residuals: dict = field(default_factory=dict)   # name -> Residual
    verdicts: list = field(default_factory=list)
    k_provenance: str | None = None
    k_closedness: float | None = None
    potential: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def outcome(self):
        outs = {v.outcome for v in self.verdicts}
        if "conflict" in outs:
            return "conflict"
        if "not" in outs and "conformally-einstein" in outs:
            return "conflict"
        if "conformally-einstein" in outs:
            return "conformally-einstein"
        if "not" in outs:
            return "not"
        return "inconclusive"

    def residual_table(self):
        return {name: {"max": r.max, "scale": r.max_scale}
                for name, r in self.residuals.items()}


def conformal_einstein_tensor_verdict(pack_or_g, points, policy="auto",
                                      tolerances=None) -> ObstructionReport:
    """Tensor-level decision pipeline.

    Dimension 3 is decided by the Cotton tensor alone.  Otherwise the
    strongest applicable obstruction is used: the trace-free E tensor with
    the from-L inverse where ||L|| is invertible, the Lambda2 route where
    ||C|| is, with the determinant-cleared F system as a cross-check on
    generic metrics.  A negative verdict needs a decisively large residual;
    small-but-not-tiny residuals are reported as inconclusive."""
    tol = (tolerances or DEFAULT_TOLERANCES).validate()
    pack = pack_or_g if isinstance(pack_or_g, CurvaturePack) \
        else CurvaturePack(pack_or_g)
    n = pack.n
    samples = pack.samples(points)
    report = ObstructionReport(n=n, points=list(points), genericity=None)

    if n == 3:
        a = samples["A"]
        res = Residual("cotton", a, samples.scale())
        report.residuals["cotton"] = res
        if res.passes(tol):
            out = "conformally-einstein"
        elif res.decisively_fails(tol):
            out = "not"
        else:
            out = "inconclusive"
        report.verdicts.append(Verdict(
            THEOREM_IDS["cotton3"], out,
            "dimension 3: conformally Einstein iff conformally flat",
            f"max |A| = {res.max:.3e}"))
        return report

    gen = classify_genericity(samples, tolerances=tol)
    report.genericity = gen
    bag = _JetBag(samples)

    chosen = None
    if policy == "auto":
        for cand in ("from-L", "from-C") + (("dim4-C3",) if n == 4 else ()):
            try:
                dt = dual_candidate_jet(bag, cand, tol)
                chosen = cand
                break
            except PolicyError as exc:
                report.notes.append(str(exc))
    else:
        dt = dual_candidate_jet(bag, policy, tol)
        chosen = policy

    if chosen is None:
        weyl_norm = float(np.max(np.abs(samples["C"])))
        note = "no left-inverse policy applies"
        if not gen.weakly_generic:
            note = "not weakly generic"
        if weyl_norm < tol.tol_rel * np.max(samples.scale()):
            cotton_norm = float(np.max(np.abs(samples["A"])))
            report.notes.append(
                f"Weyl tensor vanishes at the sample points (max |C| = "
                f"{weyl_norm:.3e}); max |A| = {cotton_norm:.3e}")
        report.verdicts.append(Verdict(
            THEOREM_IDS["E"], "inconclusive", note,
            "; ".join(report.notes[-2:])))
        return report

    k = k_field(samples, chosen, tol, bag)
    report.k_provenance = chosen
    report.residuals["cspace"] = cspace_residual(samples, k)
    report.residuals["bach"] = bach_residual(samples, k)
    e = e_tensor(samples, dt, bag)
    report.residuals["E"] = e
    closed = k.closedness()
    report.k_closedness = float(np.max(closed))

    theorem = THEOREM_IDS["E"] if chosen == "from-L" else THEOREM_IDS["lam2"]
    precond = {"from-L": "weakly generic with ||L|| invertible",
               "from-C": "Lambda2-generic",
               "dim4-C3": "dimension 4 with nonzero cubic Weyl scalar"}[chosen]
    if e.passes(tol):
        out = "conformally-einstein"
    elif e.decisively_fails(tol):
        out = "not"
    else:
        out = "inconclusive"
    report.verdicts.append(Verdict(theorem, out, precond,
                                   f"max |E| = {e.max:.3e} at scale "
                                   f"{e.max_scale:.3e}"))

    if gen.generic:
        r1, r2 = f1(samples, bag), f2(samples, bag)
        report.residuals["F1"] = r1
        report.residuals["F2"] = r2
        if r1.passes(tol) and r2.passes(tol):
            fout = "conformally-einstein"
        elif r1.decisively_fails(tol) or r2.decisively_fails(tol):
            fout = "not"
        else:
            fout = "inconclusive"
        report.verdicts.append(Verdict(
            THEOREM_IDS["F"], fout, "generic",
            f"max |F1| = {r1.max:.3e}, max |F2| = {r2.max:.3e}"))
        if {out, fout} == {"conformally-einstein", "not"}:
            report.verdicts.append(Verdict(
                "internal-consistency", "conflict", "generic",
                "the E and F routes disagree beyond tolerance"))

    if n == 4:
        report.residuals["dim4"] = dim4_invariant(samples, bag)

    if report.outcome == "conformally-einstein":
        scale0 = np.max(samples.scale())
        if report.k_closedness > tol.tol_rel * scale0 + tol.tol_abs:
            report.notes.append(
                f"K fails to close: max |d[a K b]| = {report.k_closedness:.3e}")
        try:
            report.potential = reconstruct_potential(pack, points, chosen, tol)
        except Exception as exc:  # singular integration path
            report.notes.append(f"potential reconstruction failed: {exc}")
    return report


def cotton_scale_verdict(pack_or_g, points, policy="from-L",
                         tolerances=None) -> ObstructionReport:
    """Decides whether the metric is conformal to one with vanishing Cotton
    tensor: the C-space residual must vanish and K must be closed."""
    tol = (tolerances or DEFAULT_TOLERANCES).validate()
    pack = pack_or_g if isinstance(pack_or_g, CurvaturePack) \
        else CurvaturePack(pack_or_g)
    samples = pack.samples(points)
    report = ObstructionReport(n=pack.n, points=list(points),
                               genericity=classify_genericity(samples,
                                                              tolerances=tol))
    bag = _JetBag(samples)
    try:
        k = k_field(samples, policy, tol, bag)
    except PolicyError as exc:
        report.verdicts.append(Verdict(
            THEOREM_IDS["lam2"], "inconclusive", "left inverse unavailable",
            str(exc)))
        return report
    report.k_provenance = policy
    res = cspace_residual(samples, k)
    report.residuals["cspace"] = res
    closed = float(np.max(k.closedness()))
    report.k_closedness = closed
    report.residuals.update(cotton_rl2_invariant(samples, bag))
    scale0 = np.max(samples.scale())
    is_closed = closed <= tol.tol_rel * scale0 + tol.tol_abs
    if res.passes(tol) and is_closed:
        out = "cotton-scale-exists"
    elif res.decisively_fails(tol):
        out = "not"
    else:
        out = "inconclusive"
    report.verdicts.append(Verdict(
        THEOREM_IDS["lam2"] if policy == "from-C" else THEOREM_IDS["E"],
        out, "weakly generic with a valid left inverse",
        f"cspace max = {res.max:.3e}, closedness = {closed:.3e}"))
    return report


# ---------------------------------------------------------------------------
# conformal covariance measurement


def covariance_exponent(values, hat_values, upsilon_at, tol_floor=1e-9):
    """Fitted exponent w with hat_values = e^{w upsilon} values, and its
    spread across components and points.  Returns (w, spread)."""
    v = values.reshape(values.shape[0], -1)
    vh = hat_values.reshape(hat_values.shape[0], -1)
    u = np.asarray(upsilon_at, dtype=float)
    ws = []
    for p in range(v.shape[0]):
        if abs(u[p]) < 1e-12:
            continue
        scale = np.max(np.abs(v[p]))
        mask = (np.abs(v[p]) > tol_floor * scale) & \
               (np.abs(vh[p]) > 0)
        if not np.any(mask):
            continue
        ratio = vh[p][mask] / v[p][mask]
        if np.any(ratio <= 0):
            # componentwise proportionality with a positive factor
            ratio = np.abs(ratio)
        ws.append(np.log(ratio) / u[p])
    if not ws:
        return float("nan"), float("nan")
    allw = np.concatenate(ws)
    return float(np.mean(allw)), float(np.max(allw) - np.min(allw))
