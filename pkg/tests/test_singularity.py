import numpy as np
import pytest

from scipy.optimize import brentq

import _netgen
from netsing import (CubicNegative, EquilibriumProblem, solve_full, Linear, TanhNegative, classify_bifurcation,
                     detect_singularity, load_fig1, ls_coefficients_closed_form,
                     ls_coefficients_fd, ultrasensitivity_gain)
from netsing.errors import AmbiguousKernel, HypothesesViolated, InconsistentCertificate
from netsing.network import NetworkModel, laplacian_at
from netsing.singularity import (BifurcationKind, LSCoefficients, Source, gain_path,
                                 ls_function_full, ls_function_reduced, parameter_path)

V_FIG1 = np.array([-2, 3, 3, -7, 3]) / np.sqrt(80)


def _report(net):
    return detect_singularity(net, np.zeros(net.n_nodes))


def test_fig1_detect():
    rep = _report(load_fig1())
    assert abs(rep.v @ V_FIG1) == pytest.approx(1, abs=1e-12)
    # oracle: dense eigendecomposition of the k = 1/2 Laplacian
    lam, U = np.linalg.eigh(laplacian_at(load_fig1(), np.zeros(5)))
    kernel = U[:, np.abs(lam) < 1e-9]
    assert np.linalg.norm(kernel @ (kernel.T @ rep.v) - rep.v) < 1e-12
    v_hat_ref = np.array([-2, 1, 1]) / np.sqrt(6)
    assert abs(rep.v_hat @ v_hat_ref) == pytest.approx(1, abs=1e-12)
    np.testing.assert_allclose(rep.a + rep.a_B * rep.v_hat, rep.v[:3], atol=1e-14)
    assert np.linalg.norm(laplacian_at(load_fig1(), rep.z_star) @ rep.v) <= 1e-8


def test_fig1_regular_below_critical_gain():
    assert detect_singularity(load_fig1().with_parameters(k=0.3), np.zeros(5)) is None


def test_ambiguous_kernel():
    # two disjoint critical pairs sharing the hub: corank 3
    edges = ((0, 1), (0, 2), (0, 1), (0, 2))
    models = (Linear(1.0), Linear(1.0), CubicNegative(1.0, 0.0), CubicNegative(1.0, 0.0))
    net = NetworkModel(3, edges, models, (0, 1, 2))
    with pytest.raises(AmbiguousKernel):
        detect_singularity(net, np.zeros(3))


def test_boundary_part_of_critical_vector_not_constant():
    rng = np.random.default_rng(21)
    for _ in range(15):
        rep = _report(_netgen.random_single_negative_network(rng))
        assert rep.a_B > 1e-8
        assert abs(rep.v_hat.sum()) < 1e-12 and np.linalg.norm(rep.v_hat) == pytest.approx(1)


def test_ls_function_vanishes_with_zero_slope():
    net = load_fig1()
    rep = _report(net)
    assert ls_function_full(net, rep, 0.0) == pytest.approx(0, abs=1e-14)
    assert ls_function_reduced(net, rep, 0.0) == pytest.approx(0, abs=1e-14)
    h = 1e-4
    fx = (ls_function_full(net, rep, h) - ls_function_full(net, rep, -h)) / (2 * h)
    assert abs(fx) < 1e-6


def test_orthogonal_inputs_are_filtered_to_first_order():
    net = load_fig1()
    rep = _report(net)
    perp = np.array([0.0, 1.0, -1.0]) / np.sqrt(2)
    vals = [ls_function_full(net, rep, 0.0, u_B=eps * perp) for eps in (1e-3, 1e-2, 1e-1)]
    # no linear response: f(0, eps u) = O(eps^2)
    np.testing.assert_allclose(np.array(vals) / np.array([1e-6, 1e-4, 1e-2]), vals[0] / 1e-6, rtol=0.02)
    assert abs(vals[0]) < 1e-7


def test_orthogonal_input_shifts_the_reduced_function():
    # the orthogonal input displaces every equilibrium by the same linear response,
    # which leaves the tanh edge untouched; f is translated along x by v . delta
    net = load_fig1()
    rep = _report(net)
    u = 0.3 * np.array([0.0, 1.0, -1.0]) / np.sqrt(2)
    delta = solve_full(EquilibriumProblem(net.with_parameters(k=0.3), u)).z
    assert abs(delta[1] - delta[3]) < 1e-12
    shift = float(rep.v @ delta)
    for x in (-0.02, 0.01, 0.05):
        assert ls_function_full(net, rep, x, u_B=u) == pytest.approx(
            ls_function_full(net, rep, x - shift), abs=1e-10)


@pytest.mark.parametrize("beta", [-1.0, -0.3, 0.0, 0.3, 0.5, 1.0])
def test_fd_matches_closed_form(beta):
    net = load_fig1().with_parameters(beta=beta)
    fd = ls_coefficients_fd(net, _report(net), gain_path(net))
    cf = ls_coefficients_closed_form(net)
    assert cf.f_lambdax == pytest.approx(-4.0)
    assert cf.f_xx == pytest.approx(-4 * np.tanh(beta), abs=1e-14)
    assert fd.f_lambdax == pytest.approx(cf.f_lambdax, rel=1e-3)
    if beta == 0.0:
        assert abs(fd.f_xx) <= 1e-4
        assert fd.f_xxx == pytest.approx(cf.f_xxx, rel=1e-3) and cf.f_xxx == pytest.approx(4.0)
    else:
        assert fd.f_xx == pytest.approx(cf.f_xx, rel=1e-3)
    assert abs(fd.f) < 1e-10 and abs(fd.f_x) < 1e-6 and abs(fd.f_lambda) < 1e-6


def test_fd_matches_closed_form_random_networks():
    rng = np.random.default_rng(31)
    for beta in (-1.0, -0.3, 0.3, 1.0):
        net = _netgen.random_single_negative_network(rng, beta=beta)
        fd = ls_coefficients_fd(net, _report(net), gain_path(net))
        cf = ls_coefficients_closed_form(net)
        assert fd.f_xx == pytest.approx(cf.f_xx, rel=1e-3)
        assert fd.f_lambdax == pytest.approx(cf.f_lambdax, rel=1e-3)


def test_reduced_equations_give_same_quadratic_coefficients():
    net = load_fig1()
    rep = _report(net)
    full = ls_coefficients_fd(net, rep, gain_path(net))
    red = ls_coefficients_fd(net, rep, gain_path(net), source=Source.KronReducedEquations)
    assert red.f_xx == pytest.approx(full.f_xx, rel=1e-3)
    assert red.f_lambdax == pytest.approx(full.f_lambdax, rel=1e-3)
    assert classify_bifurcation(red).kind == classify_bifurcation(full).kind


def test_full_and_reduced_share_zero_set():
    # at fixed lambda the nontrivial zero of f and of the reduced function sit at the
    # same boundary displacement
    net = load_fig1()
    rep = _report(net)
    alpha = {"k": 0.52}
    x_full = brentq(lambda x: ls_function_full(net, rep, x, alpha=alpha), 0.1, 0.2)
    x_red = brentq(lambda x: ls_function_reduced(net, rep, x, alpha=alpha, scale=rep.a_B),
                   0.1, 0.2)
    assert x_red == pytest.approx(x_full, rel=1e-6)


def test_linear_negative_edge_has_vanishing_nonlinear_terms():
    net = load_fig1().with_edge_model(2, CubicNegative(0.5, 0.0))
    fd = ls_coefficients_fd(net, _report(net), gain_path(net))
    assert abs(fd.f_xx) < 1e-6 and abs(fd.f_xxx) < 1e-4


def test_cubic_closed_form_sign():
    net = load_fig1().with_edge_model(2, CubicNegative(0.5, 0.8))
    cf = ls_coefficients_closed_form(net)
    assert cf.f_xx == 0.0
    g3 = -6 * 0.8
    assert np.sign(cf.f_xxx) == -np.sign(g3)


def test_closed_form_hypotheses():
    net = load_fig1()
    two_neg = NetworkModel(5, net.edges + ((0, 2),), net.models + (TanhNegative(0.1, 0.0),),
                           net.terminals, net.parameters)
    with pytest.raises(HypothesesViolated):
        ls_coefficients_closed_form(two_neg)
    nonlinear_pos = net.with_edge_model(0, TanhNegative(0.1, 0.0))
    with pytest.raises(HypothesesViolated):
        ls_coefficients_closed_form(nonlinear_pos)


def test_classification_rules():
    def c(**kw):
        base = dict(f_x=0.0, f_lambda=0.0, f_xx=0.0, f_lambdax=0.0, f_xxx=0.0,
                    source=Source.FullEquations)
        return LSCoefficients(**{**base, **kw})

    assert classify_bifurcation(c()).kind == BifurcationKind.HighCodimension
    assert classify_bifurcation(c(f_xx=-1.8, f_lambdax=-4)).kind == BifurcationKind.Transcritical
    assert classify_bifurcation(c(f_xxx=4, f_lambdax=-4)).kind == \
        BifurcationKind.PitchforkSupercritical
    assert classify_bifurcation(c(f_xxx=-4, f_lambdax=-4)).kind == \
        BifurcationKind.PitchforkSubcritical
    # flipping the critical vector flips f_x-odd terms together
    assert classify_bifurcation(c(f_xx=1.8, f_lambdax=-4)).kind == BifurcationKind.Transcritical
    assert classify_bifurcation(c(f_xxx=4, f_lambdax=-4)).kind == \
        classify_bifurcation(c(f_xxx=4, f_lambdax=-4)).kind
    with pytest.raises(InconsistentCertificate):
        classify_bifurcation(c(f_x=0.1))


@pytest.mark.parametrize("beta,kind", [(0.5, BifurcationKind.Transcritical),
                                       (0.0, BifurcationKind.PitchforkSupercritical)])
def test_fig1_classification(beta, kind):
    net = load_fig1().with_parameters(beta=beta)
    assert classify_bifurcation(ls_coefficients_fd(net, _report(net))).kind == kind


def test_parameter_path_moves_named_parameter():
    net = load_fig1()
    u, moved = parameter_path(net, "beta", u_direction=[1, -1, 0])(0.25)
    assert moved.parameters["beta"] == pytest.approx(0.75)
    np.testing.assert_allclose(u, [0.25, -0.25, 0])


def test_ultrasensitivity():
    rng = np.random.default_rng(2)
    n = 5
    pairs = _netgen.random_tree_plus(rng, n)
    lin = NetworkModel(n, tuple(pairs), tuple(Linear(1.0) for _ in pairs), (0, 1, 2))
    u = np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    g0 = ultrasensitivity_gain(lin, np.zeros(n), u)
    assert ultrasensitivity_gain(lin, rng.normal(size=n), u) == pytest.approx(g0)
    net = load_fig1()
    v_hat = _report(net).v_hat
    perp = np.array([0.0, 1.0, -1.0]) / np.sqrt(2)
    ks = 0.5 - np.logspace(-2, -5, 4)
    par = [ultrasensitivity_gain(net.with_parameters(k=k), np.zeros(5), v_hat) for k in ks]
    assert np.all(np.diff(par) > 0)
    # eigenvalue oracle: the critical eigenvalue vanishes linearly in k
    gaps = [np.linalg.eigvalsh(laplacian_at(net.with_parameters(k=k), np.zeros(5)))[1] for k in ks]
    np.testing.assert_allclose(np.array(par) * gaps, par[0] * gaps[0], rtol=0.02)
    through = [ultrasensitivity_gain(net.with_parameters(k=k), np.zeros(5), perp)
               for k in (0.4, 0.5, 0.6)]
    assert max(through) < 10
