import numpy as np
import pytest

from confein import genericity as GN
from confein.config import Tolerances
from confein.expressions import parse
from conftest import entry, maxabs, pack, points, samples

TOL = Tolerances()


class TestWeylOperator:
    def test_conformally_flat_operator_vanishes(self):
        s = samples("constant-curvature4", 4)
        w = GN.weyl_operator_at(s, 0)
        l = GN.l_operator_at(s, 0)
        assert maxabs(w.matrix) < 1e-12 and w.det == 0.0
        assert maxabs(l.matrix) < 1e-12 and l.det == 0.0

    def test_adjugate_identity_on_two_form_space(self):
        s = samples("rt5-quartic", 4)
        for p in range(3):
            w = GN.weyl_operator_at(s, p)
            resid = w.adjugate @ w.matrix - w.det * np.eye(w.dim)
            assert maxabs(resid) <= 1e-8 * max(1.0, abs(w.det))

    def test_weyl_det_conformal_rescale_exponent(self):
        from confein.curvature import CurvaturePack
        from confein.geometry import conformal_rescale, evaluate_components
        e = entry("rt5-quartic")
        pts = points("rt5-quartic", 3)
        s = pack("rt5-quartic").samples(pts)
        ups = parse("log(r)")
        sh = CurvaturePack(conformal_rescale(e.metric, ups)).samples(pts)
        uvals = evaluate_components(ups, s.bindings)[:, ]
        n = 5
        for p in range(3):
            d0 = GN.weyl_operator_at(s, p).det
            d1 = GN.weyl_operator_at(sh, p).det
            w = np.log(d1 / d0) / uvals[p]
            assert abs(w - (-n * (n - 1))) < 1e-6

    def test_l_operator_symmetric_when_lowered(self):
        s = samples("rt5-quartic", 3)
        for p in range(3):
            l = GN.l_operator_at(s, p)
            low = np.einsum("ab,bc->ac", s["g"][p], l.matrix)
            assert maxabs(low - low.T) < 1e-9 * max(1, maxabs(low))

    def test_hyperkahler_l_is_quarter_weyl_norm_identity(self):
        s = samples("hyperkahler4", 4)
        call = s.raised("C", (1, 1, 1, 1))
        c2 = np.einsum("pabcd,pabcd->p", call, s["C"])
        for p in range(4):
            l = GN.l_operator_at(s, p)
            assert maxabs(l.matrix - (c2[p] / 4) * np.eye(4)) < 1e-10 * c2[p]
            assert GN.weyl_operator_at(s, p).det == pytest.approx(0.0,
                                                                  abs=1e-8)

    def test_dimension4_weyl_contraction_identity(self):
        s = samples("rt4-quartic", 4)
        call = s.raised("C", (1, 1, 1, 1))
        c2 = np.einsum("pabcd,pabcd->p", call, s["C"])
        lhs = 4 * np.einsum("pabcd,pabce->pde", call, s["C"])
        resid = lhs - c2[:, None, None] * np.eye(4)[None]
        assert maxabs(resid) < 1e-9 * np.max(np.abs(c2))


class TestDualCandidates:
    @pytest.mark.parametrize("policy", ["from-L", "from-C"])
    def test_defining_property(self, policy):
        s = samples("rt5-quartic", 4)
        d = GN.dual_candidate(s, policy)
        assert np.max(d.defining_residual(s)) < 1e-7

    def test_dim4_policy_defining_property(self):
        s = samples("rt4-quartic", 4)
        d = GN.dual_candidate(s, "dim4-C3")
        assert np.max(d.defining_residual(s)) < 1e-7

    def test_schwarzschild_from_l_succeeds(self):
        s = samples("schwarzschild4", 4)
        d = GN.dual_candidate(s, "from-L")
        assert np.max(d.defining_residual(s)) < 1e-7
        assert np.all(np.abs(d.dets) > 0)

    def test_pp_wave_all_policies_fail(self):
        s = samples("pp-wave4", 4)
        for policy in ("from-L", "from-C", "dim4-C3"):
            with pytest.raises(GN.PolicyError):
                GN.dual_candidate(s, policy)

    def test_policies_agree_on_k(self):
        s = samples("rt5-quartic", 4)
        a = GN.dual_candidate(s, "from-L")
        c = GN.dual_candidate(s, "from-C")
        ka = np.einsum("pfabc,pabc->pf", a.comps, s["A"])
        kc = np.einsum("pfabc,pabc->pf", c.comps, s["A"])
        assert maxabs(ka - kc) < 1e-7 * max(1, maxabs(ka))

    def test_user_policy_passthrough(self):
        s = samples("rt5-quartic", 2)
        base = GN.dual_candidate(s, "from-L")
        d = GN.dual_candidate(s, "user", user_comps=base.comps)
        assert d.provenance == "user-supplied"
        assert np.max(d.defining_residual(s)) < 1e-7

    def test_canonical_placement_is_conformally_invariant(self):
        from confein.curvature import CurvaturePack
        from confein.geometry import conformal_rescale
        e = entry("rt5-quartic")
        pts = points("rt5-quartic", 3)
        s = pack("rt5-quartic").samples(pts)
        sh = CurvaturePack(conformal_rescale(e.metric,
                                             parse("log(r)"))).samples(pts)
        d = GN.dual_candidate(s, "from-L")
        dh = GN.dual_candidate(sh, "from-L")
        can = np.einsum("pxd,pacxe->pacde", s["g"], d.comps)
        canh = np.einsum("pxd,pacxe->pacde", sh["g"], dh.comps)
        assert maxabs(can - canh) < 1e-7 * maxabs(can)


class TestClassification:
    def test_rt_quartic_lambda2_generic_with_recorded_dual_kernel(self):
        # the skew and plain symmetric systems are trivial; the
        # volume-form-dualized system genuinely admits solutions for this
        # family (recorded, not assumed -- see the catalog entry note)
        rep = GN.classify_genericity(samples("rt5-quartic", 6))
        assert rep.lambda2_generic and rep.weakly_generic
        assert rep.all_agree
        for pg in rep.per_point:
            assert pg.skew_kernel_dim == 0
            assert pg.sym_kernel_dim == 0
            assert pg.dual_kernel_dim > 0
        assert not rep.generic

    def test_random_cubic_perturbation_is_fully_generic(self):
        # almost all metrics are generic: all three kernel systems trivial
        from conftest import perturbed_flat_metric
        from confein.curvature import CurvaturePack
        from confein.geometry import sample_points
        g = perturbed_flat_metric(seed=3)
        s = CurvaturePack(g).samples(
            sample_points(g.chart, n=3, seed=4))
        rep = GN.classify_genericity(s)
        assert rep.generic
        for pg in rep.per_point:
            assert (pg.skew_kernel_dim, pg.sym_kernel_dim,
                    pg.dual_kernel_dim) == (0, 0, 0)

    def test_pp_wave_kernel_contains_r_direction(self):
        rep = GN.classify_genericity(samples("pp-wave4", 6))
        assert not rep.weakly_generic
        er = np.zeros(4)
        er[1] = 1.0  # coordinates are (u, r, x1, x2)
        assert rep.kernel_contains(er, tol=1e-10)

    def test_pp_wave_invertible_hessian_kernel_is_exactly_r(self):
        # h = x1^2 - x2^2 has invertible trace-free transverse Hessian
        rep = GN.classify_genericity(samples("pp-wave4-ricci-flat", 6))
        for pg in rep.per_point:
            assert pg.weak_kernel.shape[1] == 1

    def test_hyperkahler_weakly_but_not_lambda2(self):
        rep = GN.classify_genericity(samples("hyperkahler4", 6))
        assert rep.weakly_generic
        assert not rep.lambda2_generic
        for pg in rep.per_point:
            assert pg.skew_kernel_dim >= 3

    def test_conformally_flat_everything_degenerate(self):
        rep = GN.classify_genericity(samples("constant-curvature4", 4))
        assert not rep.weakly_generic
        for pg in rep.per_point:
            assert abs(pg.weyl_det) < 1e-30
            assert pg.weak_kernel.shape[1] == 4  # everything is annihilated

    @pytest.mark.parametrize("name", ["flat4", "constant-curvature4",
                                      "pp-wave4", "hyperkahler4",
                                      "rt4-quartic", "rt5-quartic",
                                      "schwarzschild4"])
    def test_implication_chain(self, name):
        rep = GN.classify_genericity(samples(name, 5))
        for pg in rep.per_point:
            if pg.generic:
                assert pg.lambda2_generic
            if pg.lambda2_generic:
                assert pg.weakly_generic

    def test_rt4_cubic_scalars_nonzero(self):
        rep = GN.classify_genericity(samples("rt4-quartic", 5))
        for pg in rep.per_point:
            assert max(abs(pg.c3), abs(pg.c3_star)) > 1e-6

    def test_spec_level_point_wrappers(self):
        p = pack("rt4-quartic")
        pt = points("rt4-quartic", 1)[0]
        w = GN.weyl_operator(p, pt)
        l = GN.l_operator(p, pt)
        assert w.dim == 6
        assert l.matrix.shape == (4, 4)
