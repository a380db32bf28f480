import numpy as np
import pytest

from lmopt.linalg import derive_seed, rng_gaussian
from lmopt.norms import (
    LayerNorms,
    ModelNormSpec,
    NormKind,
    NormSpec,
    composite_norm,
    lmo,
)
from lmopt.optim import (
    Algo,
    AlphaKind,
    GammaKind,
    OptimizerState,
    ScheduleSpec,
    almond_step,
    alpha_at,
    gamma_at,
    momentum_update,
    muon_step,
    scg_step,
    scion_light_update,
    ssd_step,
    theory_gamma,
    uscg_step,
    uscg_wd_step,
)


def mixed_spec():
    """One atom of every matrix kind plus a vector atom, various radii."""
    return ModelNormSpec(
        layers=(
            LayerNorms(NormSpec(NormKind.SPECTRAL, 1.0, 6, 4)),
            LayerNorms(NormSpec(NormKind.SIGN, 0.5, 3, 5)),
            LayerNorms(NormSpec(NormKind.COL_NORM, 2.0, 4, 3)),
            LayerNorms(NormSpec(NormKind.ROW_NORM, 1.5, 3, 4)),
            LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 7, radius=1.0)),
        )
    )


def random_params(spec, seed, scale=1.0):
    out = []
    for i, atom in enumerate(spec.atoms()):
        if atom.is_vector:
            out.append(scale * rng_gaussian(atom.d_out, 1, derive_seed(seed, i))[:, 0])
        else:
            out.append(scale * rng_gaussian(atom.d_out, atom.d_in, derive_seed(seed, i)))
    return out


def gradient_stream(spec, seed, steps):
    return [random_params(spec, derive_seed(seed, 1000 + k)) for k in range(steps)]


def boundary_params(spec, seed):
    from lmopt.norms import model_lmo

    return model_lmo(random_params(spec, seed), spec)


def assert_close_lists(a, b, tol=1e-10):
    assert len(a) == len(b)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=tol, rtol=0.0)


class TestMomentumUpdate:
    def test_alpha_one_returns_gradient(self):
        d = [np.array([5.0, -2.0])]
        g = [np.array([1.0, 1.0])]
        assert_close_lists(momentum_update(d, g, 1.0), g, tol=0.0)

    def test_convex_combination(self):
        d = [np.array([1.0, 1.0])]
        g = [np.array([0.0, 2.0])]
        np.testing.assert_allclose(momentum_update(d, g, 0.1)[0], [0.9, 1.1])

    def test_fixed_point(self):
        g = [np.array([2.0, -1.0])]
        assert_close_lists(momentum_update(g, g, 0.5), g, tol=0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            momentum_update([np.zeros(2)], [np.zeros(3)], 0.5)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            momentum_update([np.zeros(2)], [np.zeros(2)], 0.0)


class TestUscg:
    def test_single_sign_layer(self):
        spec = ModelNormSpec(layers=(LayerNorms(NormSpec(NormKind.SIGN, 1.0, 1, 2)),))
        x = [np.zeros((1, 2))]
        state = OptimizerState.init(x)
        g = [np.array([[2.0, -3.0]])]
        x = uscg_step(x, state, g, gamma=0.5, alpha=1.0, spec=spec)
        np.testing.assert_allclose(x[0], [[-0.5, 0.5]])

    def test_zero_gradient_freezes(self):
        spec = mixed_spec()
        x = random_params(spec, 1)
        state = OptimizerState.init(x)
        zeros = [np.zeros_like(p) for p in x]
        x2 = uscg_step(x, state, zeros, gamma=0.3, alpha=0.5, spec=spec)
        assert_close_lists(x2, x, tol=0.0)

    def test_displacement_bound_500_steps(self):
        spec = mixed_spec()
        x0 = random_params(spec, 3)
        x = [p.copy() for p in x0]
        state = OptimizerState.init(x)
        schedule = ScheduleSpec(
            horizon=500, gamma_kind=GammaKind.LINEAR_DECAY, gamma0=0.05, alpha0=0.2
        )
        total = 0.0
        for k, g in enumerate(gradient_stream(spec, 17, 500), start=1):
            gamma = gamma_at(schedule, k)
            x = uscg_step(x, state, g, gamma, alpha_at(schedule, k), spec)
            total += gamma
        disp = [xi - x0i for xi, x0i in zip(x, x0)]
        assert composite_norm(disp, spec) <= total + 1e-8

    def test_gradient_scale_invariance_of_trajectory(self):
        spec = mixed_spec()
        stream = gradient_stream(spec, 23, 60)
        results = []
        for c in (1.0, 7.3):
            x = random_params(spec, 5)
            state = OptimizerState.init(x)
            for k, g in enumerate(stream, start=1):
                scaled = [c * gi for gi in g]
                x = uscg_step(x, state, scaled, 0.02, 0.1, spec)
            results.append(x)
        assert_close_lists(results[0], results[1], tol=1e-10)

    def test_scg_trajectory_also_scale_invariant(self):
        spec = mixed_spec()
        stream = gradient_stream(spec, 24, 60)
        results = []
        for c in (1.0, 7.3):
            x = boundary_params(spec, 5)
            state = OptimizerState.init(x, algo=Algo.SCG)
            for g in stream:
                scaled = [c * gi for gi in g]
                x = scg_step(x, state, scaled, 0.05, 0.2, spec)
            results.append(x)
        assert_close_lists(results[0], results[1], tol=1e-10)


class TestScg:
    def test_convex_combination_example(self):
        spec = ModelNormSpec(
            layers=(LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 2)),)
        )
        x = [np.array([1.0, 0.0])]
        state = OptimizerState.init(x, algo=Algo.SCG)
        # gradient pointing along +x so lmo(d) = [-1, 0]
        g = [np.array([1.0, 0.0])]
        x = scg_step(x, state, g, gamma=0.5, alpha=1.0, spec=spec)
        np.testing.assert_allclose(x[0], [0.0, 0.0], atol=1e-15)

    def test_gamma_one_lands_on_boundary(self):
        spec = ModelNormSpec(
            layers=(LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 3, radius=2.0)),)
        )
        x = [np.zeros(3)]
        state = OptimizerState.init(x, algo=Algo.SCG)
        g = [np.array([1.0, 2.0, -2.0])]
        x = scg_step(x, state, g, gamma=1.0, alpha=1.0, spec=spec)
        assert composite_norm(x, spec) == pytest.approx(1.0)
        np.testing.assert_allclose(x[0], lmo(g[0], spec.atoms()[0]))

    def test_feasibility_500_steps(self):
        spec = mixed_spec()
        x = boundary_params(spec, 11)
        assert composite_norm(x, spec) == pytest.approx(1.0, abs=1e-9)
        state = OptimizerState.init(x, algo=Algo.SCG)
        for k, g in enumerate(gradient_stream(spec, 29, 500), start=1):
            x = scg_step(x, state, g, 0.05, 0.3, spec)
            assert composite_norm(x, spec) <= 1.0 + 1e-8

    def test_infeasible_start_rejected(self):
        spec = mixed_spec()
        x = [3.0 * p for p in boundary_params(spec, 13)]
        state = OptimizerState.init(x, algo=Algo.SCG)
        g = random_params(spec, 14)
        with pytest.raises(ValueError, match="feasible"):
            scg_step(x, state, g, 0.1, 0.5, spec)


class TestWeightDecay:
    def test_mu_zero_equals_uscg(self):
        spec = mixed_spec()
        stream = gradient_stream(spec, 31, 40)
        xa = random_params(spec, 6)
        xb = [p.copy() for p in xa]
        sa, sb = OptimizerState.init(xa), OptimizerState.init(xb)
        for g in stream:
            xa = uscg_step(xa, sa, g, 0.03, 0.2, spec)
            xb = uscg_wd_step(xb, sb, g, 0.03, 0.2, 0.0, spec)
        assert_close_lists(xa, xb, tol=0.0)

    def test_mu_one_equals_scg(self):
        spec = mixed_spec()
        stream = gradient_stream(spec, 37, 40)
        xa = boundary_params(spec, 7)
        xb = [p.copy() for p in xa]
        sa = OptimizerState.init(xa, algo=Algo.SCG)
        sb = OptimizerState.init(xb, algo=Algo.USCG_WD, wd_mu=1.0)
        for g in stream:
            xa = scg_step(xa, sa, g, 0.05, 0.2, spec)
            xb = uscg_wd_step(xb, sb, g, 0.05, 0.2, 1.0, spec)
        assert_close_lists(xa, xb, tol=1e-12)

    def test_interpolation_matches_rescaled_constrained_run(self):
        # decay mu on the unit ball == constrained method on the ball of radius 1/mu
        # with stepsize gamma * mu, over 100 steps from the same start
        mu, gamma = 0.5, 0.01
        base = mixed_spec()
        inflated = ModelNormSpec(
            layers=tuple(
                LayerNorms(
                    NormSpec(
                        kind=ln.weight.kind,
                        radius=ln.weight.radius / mu,
                        d_out=ln.weight.d_out,
                        d_in=ln.weight.d_in,
                    )
                )
                for ln in base.layers
            )
        )
        stream = gradient_stream(base, 41, 100)
        xa = random_params(base, 8, scale=0.05)
        xb = [p.copy() for p in xa]
        sa = OptimizerState.init(xa, algo=Algo.USCG_WD, wd_mu=mu)
        sb = OptimizerState.init(xb, algo=Algo.SCG)
        for g in stream:
            xa = uscg_wd_step(xa, sa, g, gamma, 0.15, mu, base)
            xb = scg_step(xb, sb, g, gamma * mu, 0.15, inflated)
        assert_close_lists(xa, xb, tol=1e-10)


class TestAlmond:
    def test_first_step(self):
        spec = ModelNormSpec(layers=(LayerNorms(NormSpec(NormKind.SIGN, 1.0, 1, 2)),))
        x = [np.zeros((1, 2))]
        state = OptimizerState.init(x, algo=Algo.ALMOND)
        g = [np.array([[2.0, -3.0]])]
        x = almond_step(x, state, g, gamma=0.1, alpha=0.5, spec=spec)
        np.testing.assert_allclose(state.d[0], [[-0.5, 0.5]])
        np.testing.assert_allclose(x[0], 0.1 * state.d[0])

    def test_direction_stays_in_ball(self):
        spec = mixed_spec()
        x = random_params(spec, 9)
        state = OptimizerState.init(x, algo=Algo.ALMOND)
        for g in gradient_stream(spec, 43, 120):
            x = almond_step(x, state, g, 0.05, 0.3, spec)
            assert composite_norm(state.d, spec) <= 1.0 + 1e-9

    def test_direction_decays_geometrically_without_gradient(self):
        spec = ModelNormSpec(
            layers=(LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 3)),)
        )
        x = [np.zeros(3)]
        state = OptimizerState.init(x, algo=Algo.ALMOND)
        g = [np.array([1.0, 2.0, 2.0])]
        x = almond_step(x, state, g, 0.1, 0.25, spec)
        d0 = np.linalg.norm(state.d[0])
        zeros = [np.zeros(3)]
        for k in range(1, 6):
            x = almond_step(x, state, zeros, 0.1, 0.25, spec)
            assert np.linalg.norm(state.d[0]) == pytest.approx(d0 * 0.75**k)


class TestMuon:
    def test_plain_equals_uscg_with_matching_alpha(self):
        spec = mixed_spec()
        beta = 0.9
        stream = gradient_stream(spec, 47, 120)
        xa = random_params(spec, 10)
        xb = [p.copy() for p in xa]
        sa = OptimizerState.init(xa, algo=Algo.USCG)
        sb = OptimizerState.init(xb, algo=Algo.MUON_PLAIN)
        for g in stream:
            xa = uscg_step(xa, sa, g, 0.02, 1.0 - beta, spec)
            xb = muon_step(xb, sb, g, 0.02, beta, False, spec)
        assert_close_lists(xa, xb, tol=1e-10)

    def test_beta_zero_is_lmo_of_fresh_gradient(self):
        spec = mixed_spec()
        stream = gradient_stream(spec, 53, 10)
        for nesterov in (False, True):
            x = random_params(spec, 11)
            state = OptimizerState.init(x, algo=Algo.MUON_PLAIN)
            xref = [p.copy() for p in x]
            for g in stream:
                x = muon_step(x, state, g, 0.05, 0.0, nesterov, spec)
                from lmopt.norms import model_lmo

                xref = [xi + 0.05 * li for xi, li in zip(xref, model_lmo(g, spec))]
            assert_close_lists(x, xref, tol=1e-12)

    def test_nesterov_differs_from_plain_on_scripted_gradients(self):
        # hand-rolled recursions on two fixed gradients
        spec = ModelNormSpec(
            layers=(LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 2)),)
        )
        g1, g2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        beta = 0.9

        def norm1(v):
            return v / np.linalg.norm(v)

        # plain: steps along G1 = g1, G2 = g2 + beta g1
        plain = -0.1 * (norm1(g1) + norm1(g2 + beta * g1))
        # nesterov: steps along g1 + beta*G1, then g2 + beta*G2
        nest = -0.1 * (norm1(g1 + beta * g1) + norm1(g2 + beta * (g2 + beta * g1)))
        for nesterov, expected in ((False, plain), (True, nest)):
            x = [np.zeros(2)]
            state = OptimizerState.init(x)
            x = muon_step(x, state, [g1], 0.1, beta, nesterov, spec)
            x = muon_step(x, state, [g2], 0.1, beta, nesterov, spec)
            np.testing.assert_allclose(x[0], expected, atol=1e-14)
        assert np.linalg.norm(plain - nest) > 1e-3


class TestSsd:
    def test_euclidean_reduces_to_gradient_descent(self):
        spec = ModelNormSpec(
            layers=(LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 3, radius=2.5)),)
        )
        x = [np.array([1.0, -1.0, 2.0])]
        g = [np.array([0.5, 0.25, -1.0])]
        out = ssd_step(x, g, 0.1, spec)
        np.testing.assert_allclose(out[0], x[0] - 0.1 * g[0], atol=1e-14)

    def test_maxvec_reduces_to_scaled_sign(self):
        spec = ModelNormSpec(layers=(LayerNorms(NormSpec.vector(NormKind.MAX_VEC, 2)),))
        x = [np.array([1.0, 1.0])]
        g = [np.array([2.0, -1.0])]
        out = ssd_step(x, g, 0.1, spec)
        np.testing.assert_allclose(out[0], x[0] - 0.1 * 3.0 * np.sign(g[0]))

    def test_zero_gradient(self):
        spec = mixed_spec()
        x = random_params(spec, 12)
        out = ssd_step(x, [np.zeros_like(p) for p in x], 0.1, spec)
        assert_close_lists(out, x, tol=0.0)

    def test_trajectory_scales_with_gradients(self):
        # the contrast with the lmo methods: scaling the stream scales the motion
        spec = ModelNormSpec(
            layers=(LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 4)),)
        )
        stream = gradient_stream(spec, 59, 20)
        base = [np.zeros(4)]
        scaled = [np.zeros(4)]
        for g in stream:
            base = ssd_step(base, g, 0.05, spec)
            scaled = ssd_step(scaled, [3.0 * gi for gi in g], 0.05, spec)
        np.testing.assert_allclose(scaled[0], 3.0 * base[0], atol=1e-12)
        assert np.linalg.norm(base[0]) > 0


class TestScionLight:
    def test_matches_uscg_over_50_steps(self):
        spec = mixed_spec()
        alpha = 0.1
        stream = gradient_stream(spec, 61, 50)
        xa = random_params(spec, 13)
        xb = [p.copy() for p in xa]
        state = OptimizerState.init(xa)
        gbuf = [np.zeros_like(p) for p in xb]
        for g in stream:
            xa = uscg_step(xa, state, g, 0.03, alpha, spec)
            for bi, gi in zip(gbuf, g):
                bi += gi
            xb, gbuf = scion_light_update(xb, gbuf, 0.03, alpha, spec)
        assert_close_lists(xa, xb, tol=1e-10)

    def test_alpha_one_zeroes_buffer(self):
        spec = ModelNormSpec(
            layers=(LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 3)),)
        )
        x = [np.zeros(3)]
        gbuf = [np.array([1.0, 2.0, -1.0])]
        x, gbuf = scion_light_update(x, gbuf, 0.1, 1.0, spec)
        np.testing.assert_array_equal(gbuf[0], np.zeros(3))

    def test_buffer_mutated_in_place(self):
        # structural claim: the only auxiliary state is the one gradient-shaped buffer
        spec = ModelNormSpec(
            layers=(LayerNorms(NormSpec.vector(NormKind.EUCLIDEAN_VEC, 3)),)
        )
        x = [np.zeros(3)]
        gbuf = [np.array([1.0, 2.0, -1.0])]
        before = gbuf[0]
        _, gbuf_out = scion_light_update(x, gbuf, 0.1, 0.25, spec)
        assert gbuf_out[0] is before
        np.testing.assert_allclose(before, 0.75 * np.array([1.0, 2.0, -1.0]))


class TestSchedules:
    def test_linear_decay_example(self):
        s = ScheduleSpec(horizon=10, gamma_kind=GammaKind.LINEAR_DECAY, gamma0=0.1)
        assert gamma_at(s, 5) == pytest.approx(0.05)
        assert gamma_at(s, 10) == 0.0

    def test_constant_then_linear(self):
        s = ScheduleSpec(
            horizon=100, gamma_kind=GammaKind.CONSTANT_THEN_LINEAR, gamma0=0.2, warmdown=20
        )
        assert gamma_at(s, 50) == 0.2
        assert gamma_at(s, 79) == 0.2
        assert gamma_at(s, 90) == pytest.approx(0.2 * 10 / 20)
        assert gamma_at(s, 100) == 0.0

    def test_vanishing_alpha(self):
        s = ScheduleSpec(horizon=10, alpha_kind=AlphaKind.VANISHING)
        assert alpha_at(s, 1) == 1.0
        assert alpha_at(s, 4) == pytest.approx(0.5)

    def test_out_of_range_step(self):
        s = ScheduleSpec(horizon=10)
        with pytest.raises(ValueError):
            gamma_at(s, 0)
        with pytest.raises(ValueError):
            alpha_at(s, 11)

    def test_theory_gamma_interval(self):
        g = theory_gamma(256)
        assert g == pytest.approx(0.75 / 64)
        assert 1.0 / (2 * 64) < g < 1.0 / 64
        for n in (100, 400, 1600, 6400):
            assert 1.0 / (2 * n**0.75) < theory_gamma(n) < 1.0 / n**0.75

    def test_values_clamped_to_range(self):
        s = ScheduleSpec(
            horizon=50, gamma_kind=GammaKind.LINEAR_DECAY, gamma0=0.3, alpha_kind=AlphaKind.VANISHING
        )
        for k in range(1, 51):
            assert 0.0 <= gamma_at(s, k) <= 0.3
            assert 0.0 < alpha_at(s, k) <= 1.0


class TestStateBookkeeping:
    def test_step_counter_increments(self):
        spec = mixed_spec()
        x = random_params(spec, 14)
        state = OptimizerState.init(x)
        for k, g in enumerate(gradient_stream(spec, 67, 5), start=1):
            x = uscg_step(x, state, g, 0.1, 0.5, spec)
            assert state.step == k

    def test_direction_shapes_mirror_params(self):
        spec = mixed_spec()
        x = random_params(spec, 15)
        state = OptimizerState.init(x)
        uscg_step(x, state, random_params(spec, 16), 0.1, 0.5, spec)
        for di, xi in zip(state.d, x):
            assert di.shape == xi.shape
