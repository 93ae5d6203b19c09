import math

import numpy as np
import pytest

from confein import geometry as G
from confein.expressions import ONE, ZERO, diff, func, is_zero, neg, parse, to_text
from confein.geometry import DOWN, UP
from conftest import entry, maxabs, pack, points


def _binds(name, pts):
    g = entry(name).metric
    return [g.point_bindings(p) for p in pts]


class TestMetricInverse:
    def test_euclidean_identity(self):
        g = entry("flat4").metric
        gi = g.inverse_comps()
        for i in range(4):
            for j in range(4):
                assert gi[i, j] is (ONE if i == j else ZERO)

    def test_rt_null_block_inverse_by_hand(self):
        e = entry("schwarzschild4")
        gi = e.metric.inverse_comps()
        h = e.extras["h"]
        assert gi[0, 1] is ONE
        assert gi[0, 0] is ZERO
        # g^rr = -2h
        assert is_zero(gi[1, 1] + 2 * h)

    def test_product_is_identity_symbolically(self):
        g = entry("rt5-quartic").metric
        prod = G.sym_einsum("ac,cb->ab", g.inverse_comps(), g.comps)
        for i in range(5):
            for j in range(5):
                assert is_zero(prod[i, j] - (ONE if i == j else ZERO))

    def test_numeric_identity_at_points(self):
        for name in ("hyperkahler4", "rt5-quartic"):
            g = entry(name).metric
            pts = points(name, 5)
            b = _binds(name, pts)
            gv = G.evaluate_components(g.comps, b)
            giv = G.evaluate_components(g.inverse_comps(), b)
            delta = np.einsum("pac,pcb->pab", giv, gv)
            assert maxabs(delta - np.eye(g.dim)[None]) < 1e-10

    def test_degenerate_metric_rejected(self):
        ch = G.Chart(("x", "y", "z"))
        comps = np.diag([ONE, ZERO, ONE]).astype(object)
        comps[comps == 0] = ZERO
        g = G.MetricField(ch, comps)
        with pytest.raises(G.SingularMetricError):
            g.inverse_comps()


class TestRaiseLower:
    def test_lower_on_euclidean(self):
        g = entry("flat4").metric
        v = G.tensor_from(g.chart, (UP,), lambda i: ONE if i == 0 else ZERO)
        low = G.lower_index(v, 0, g)
        assert [low.comps[i] for i in range(4)] == [ONE, ZERO, ZERO, ZERO]
        assert low.weight == 2

    def test_round_trip(self):
        g = entry("rt4-quartic").metric
        t = G.tensor_from(g.chart, (DOWN, UP),
                          lambda i, j: parse(f"r^{i} + {j}*u"))
        rt = G.lower_index(G.raise_index(t, 0, g), 0, g)
        for idx in np.ndindex(4, 4):
            assert is_zero(rt.comps[idx] - t.comps[idx])
        assert rt.weight == t.weight

    def test_weight_bookkeeping(self):
        g = entry("flat4").metric
        t = G.zeros(g.chart, (DOWN, DOWN), weight=2)
        assert G.raise_index(t, 0, g).weight == 0
        assert G.raise_index(G.raise_index(t, 0, g), 1, g).weight == -2


class TestEpsilon:
    def test_euclidean3(self):
        e = entry("constant-curvature3")
        g = G.MetricField(e.metric.chart,
                          np.diag([ONE] * 3).astype(object) + ZERO,
                          reference_point=e.metric.reference_point)
        eps = G.epsilon(g)
        assert eps.comps[0, 1, 2] is ONE
        assert eps.comps[1, 0, 2] is neg(ONE)
        assert eps.weight == 3

    def test_block_scaling(self):
        ch = G.Chart(("x1", "x2", "x3", "x4"))
        comps = np.diag([parse("4"), parse("4"), ONE, ONE]).astype(object)
        comps[comps == 0] = ZERO
        g = G.MetricField(ch, comps,
                          reference_point={f"x{i}": 1.0 for i in range(1, 5)})
        eps = G.epsilon(g)
        assert eps.comps[0, 1, 2, 3] is parse("4")

    @pytest.mark.parametrize("name", ["schwarzschild4", "rt5-quartic",
                                      "hyperkahler4"])
    def test_double_contraction_is_signed_factorial(self, name):
        g = entry(name).metric
        n = g.dim
        pts = points(name, 3)
        b = _binds(name, pts)
        ev = G.evaluate_components(G.epsilon(g).comps, b)
        giv = G.evaluate_components(g.inverse_comps(), b)
        lo, hi = "abcdef"[:n], "stuvwx"[:n]
        spec = ("p" + lo + ","
                + ",".join(f"p{a}{b2}" for a, b2 in zip(lo, hi))
                + ",p" + hi + "->p")
        val = np.einsum(spec, ev, *([giv] * n), ev)
        want = g.det_sign() * math.factorial(n)
        assert np.allclose(val, want, rtol=1e-9)


class TestProjections:
    def test_antisymmetrize_kills_symmetric(self):
        g = entry("flat4").metric
        t = G.tensor_from(g.chart, (DOWN, DOWN),
                          lambda i, j: parse(f"x1^{i + j}"))
        s = G.symmetrize(t, (0, 1))
        a = G.antisymmetrize(s, (0, 1))
        assert all(is_zero(a.comps[idx]) for idx in np.ndindex(4, 4))

    def test_idempotent(self):
        g = entry("rt4-quartic").metric
        t = G.tensor_from(g.chart, (DOWN, DOWN, DOWN),
                          lambda i, j, k: parse(f"u^{i}*r^{j} + {k}"))
        a1 = G.antisymmetrize(t, (0, 2))
        a2 = G.antisymmetrize(a1, (0, 2))
        assert all(is_zero(a1.comps[idx] - a2.comps[idx])
                   for idx in np.ndindex(4, 4, 4))

    def test_pair_antisymmetrization_is_difference(self):
        # 2 antisym over two slots reproduces the explicit difference
        g = entry("schwarzschild4").metric
        p = pack("schwarzschild4")
        dp = G.covariant_derivative(p.schouten, g)  # (x, b, c)
        t = G.TensorField(g.chart, (DOWN, DOWN, DOWN), dp.comps)
        a = G.antisymmetrize(t, (0, 1))
        for idx in np.ndindex(4, 4, 4):
            i, j, k = idx
            want = dp.comps[i, j, k] - dp.comps[j, i, k]
            assert is_zero(2 * a.comps[idx] - want)

    def test_mixed_variance_rejected(self):
        g = entry("flat4").metric
        t = G.zeros(g.chart, (UP, DOWN))
        with pytest.raises(ValueError):
            G.antisymmetrize(t, (0, 1))


class TestChristoffelAndDerivative:
    def test_flat_gamma_zero(self):
        gam = entry("flat4").metric.christoffel()
        assert all(gam.comps[idx] is ZERO for idx in np.ndindex(4, 4, 4))

    def test_symmetry_in_lower_slots(self):
        gam = pack("hyperkahler4").gamma
        for idx in np.ndindex(4, 4, 4):
            a, b, c = idx
            assert gam.comps[a, b, c] is gam.comps[a, c, b]

    def test_metricity_symbolic(self):
        for name in ("schwarzschild4", "rt5-quartic"):
            g = entry(name).metric
            cg = G.covariant_derivative(g.field, g)
            assert all(is_zero(cg.comps[idx])
                       for idx in np.ndindex(*cg.comps.shape))

    def test_scalar_derivative_is_partial(self):
        g = entry("schwarzschild4").metric
        f = parse("u*r^2")
        t = G.TensorField(g.chart, (), np.asarray(f, dtype=object))
        d = G.covariant_derivative(t, g)
        for a, c in enumerate(g.chart.coords):
            assert d.comps[a] is diff(f, c)

    def test_constant_scalar_derivative_zero(self):
        g = entry("schwarzschild4").metric
        t = G.TensorField(g.chart, (), np.asarray(ONE, dtype=object))
        d = G.covariant_derivative(t, g)
        assert all(d.comps[a] is ZERO for a in range(4))

    def test_rt_connection_oneforms_in_coframe(self):
        # the null-coframe connection coefficients of the RT family
        e = entry("rt4-quartic")
        g = e.metric
        n = 4
        gam = g.christoffel().comps
        theta = e.extras["coframe"]
        frame = G._symbolic_inverse(theta)          # e[mu, A]
        dtheta = np.empty((n, n, n), dtype=object)  # d_mu theta^A_nu
        for A in range(n):
            for mu in range(n):
                for nu in range(n):
                    dtheta[mu, A, nu] = diff(theta[A, nu], g.chart.coords[mu])
        # Gamma^A_BC = theta^A_mu e^nu_B e^rho_C Gamma^mu_nu rho
        #            + theta^A_mu e^rho_C d_rho e^mu_B
        de = np.empty((n, n, n), dtype=object)
        for mu in range(n):
            for B in range(n):
                for rho in range(n):
                    de[rho, mu, B] = diff(frame[mu, B], g.chart.coords[rho])
        gf = G.sym_einsum("Am,nB,rC,mnr->ABC", theta, frame, frame, gam)
        gf2 = G.sym_einsum("Am,rC,rmB->ABC", theta, frame, de)
        # lower the first label with the constant coframe metric
        eta = np.full((n, n), ZERO, dtype=object)
        eta[0, 1] = eta[1, 0] = ONE
        eta[2, 2] = eta[3, 3] = ONE
        low = G.sym_einsum("AD,DBC->ABC", eta, _addarr(gf, gf2))
        pts = points("rt4-quartic", 4)
        b = _binds("rt4-quartic", pts)
        vals = G.evaluate_components(low, b)
        rv = np.array([[bb["r"]] for bb in b])[:, 0]
        hv = G.evaluate_components(e.extras["h"], b)
        hp = G.evaluate_components(diff(e.extras["h"], "r"), b)
        # Gamma_{-j} = -theta_j / r: component Gamma_{(-)(j)(j)} = -1/r
        assert np.allclose(vals[:, 1, 2, 2], -1 / rv, rtol=1e-9)
        # Gamma_{+j} = (h/r) theta^j
        assert np.allclose(vals[:, 0, 2, 2], hv / rv, rtol=1e-9)
        # Gamma_{+-} = h' theta^+
        assert np.allclose(vals[:, 0, 1, 0], hp, rtol=1e-9)
        # kappa-dependent transverse part: Gamma_{ij} =
        # kappa (x_i theta_j - x_j theta_i) / (2r)
        x1 = np.array([bb["x1"] for bb in b])
        x2 = np.array([bb["x2"] for bb in b])
        assert np.allclose(vals[:, 2, 3, 3], x1 / (2 * rv), rtol=1e-9)
        assert np.allclose(vals[:, 2, 3, 2], -x2 / (2 * rv), rtol=1e-9)


def _addarr(a, b):
    from confein.expressions import add
    out = np.empty_like(a)
    for idx in np.ndindex(*a.shape):
        out[idx] = add(a[idx], b[idx])
    return out


class TestConformalRescale:
    def test_identity_factor(self):
        g = entry("schwarzschild4").metric
        gh = G.conformal_rescale(g, ZERO)
        assert all(is_zero(gh.comps[idx] - g.comps[idx])
                   for idx in np.ndindex(4, 4))

    def test_constant_factor_scales(self):
        g = entry("flat4").metric
        gh = G.conformal_rescale(g, parse("1/2"))
        pts = points("flat4", 2)
        v = G.evaluate_components(gh.comps, pts)
        assert np.allclose(v, math.e * np.eye(4)[None], rtol=1e-12)

    def test_signature_preserved(self):
        g = entry("rt5-quartic").metric
        gh = G.conformal_rescale(g, parse("log(r)"))
        assert gh.signature() == g.signature()

    def test_stereographic_factor_gives_constant_curvature_metric(self):
        flat = entry("flat4").metric
        ups = neg(func("log", parse("1 + (x1^2+x2^2+x3^2+x4^2)/4")))
        gh = G.conformal_rescale(flat, ups)
        cc = entry("constant-curvature4").metric
        pts = points("constant-curvature4", 4)
        va = G.evaluate_components(gh.comps, pts)
        vb = G.evaluate_components(cc.comps, pts)
        assert maxabs(va - vb) < 1e-12


class TestCoframe:
    def test_identity_coframe(self):
        g = entry("schwarzschild4").metric
        theta = np.diag([ONE] * 4).astype(object)
        theta[theta == 0] = ZERO
        c = G.coframe_components(g.field, theta)
        assert all(is_zero(c[idx] - g.comps[idx]) for idx in np.ndindex(4, 4))

    def test_rt_metric_constant_null_block(self):
        e = entry("rt5-quartic")
        c = G.coframe_components(e.metric.field, e.extras["coframe"])
        n = 5
        want = np.full((n, n), ZERO, dtype=object)
        want[0, 1] = want[1, 0] = ONE
        for i in range(2, n):
            want[i, i] = ONE
        assert all(is_zero(c[idx] - want[idx]) for idx in np.ndindex(n, n))

    def test_singular_coframe_rejected(self):
        g = entry("flat4").metric
        theta = np.full((4, 4), ZERO, dtype=object)
        with pytest.raises(G.SingularMetricError):
            G.coframe_components(g.field, theta)


class TestSampling:
    def test_rejects_singular_loci(self):
        e = entry("rt5-quartic")
        pts = e.points(20, seed=3)
        assert len(pts) == 20
        for p in pts:
            assert abs(p["r"]) > 1e-9
            assert 1.5 <= p["r"] <= 3.0

    def test_deterministic_for_seed(self):
        e = entry("schwarzschild4")
        assert e.points(5, seed=9) == e.points(5, seed=9)
        assert e.points(5, seed=9) != e.points(5, seed=10)

    def test_default_box(self):
        ch = G.Chart(("x", "y", "z"))
        pts = G.sample_points(ch, n=8, seed=0)
        for p in pts:
            for v in p.values():
                assert 0.5 <= v <= 1.5
