"""Tests for the RLS receive-filter update and the recursive channel estimator.

Oracles: the recursions are checked step by step against direct batch solves of
the exponentially-windowed, delta-regularized least-squares problems they are
derived from (regularization term lambda^i * delta * I included).
"""

import numpy as np
import pytest

from mudlink import (
    channel_estimate_update,
    init_channel_estimator,
    init_receiver,
    rls_update,
)


def batch_rls_weights(xs, refs, lam, delta):
    """Direct matrix-inversion solution of the windowed regularized LS problem."""
    dim = xs[0].size
    n = len(xs)
    phi = delta * lam**n * np.eye(dim, dtype=complex)
    p = np.zeros(dim, dtype=complex)
    for tau, (x, d) in enumerate(zip(xs, refs), start=1):
        w = lam ** (n - tau)
        phi += w * np.outer(x, x.conj())
        p += w * x * np.conj(d)
    return np.linalg.solve(phi, p)


def batch_channel_estimate(rs, ss, lam, delta):
    """Direct evaluation of the windowed LS channel estimate."""
    n_rx, k = rs[0].size, ss[0].size
    n = len(rs)
    d = np.zeros((n_rx, k), dtype=complex)
    phi = delta * lam**n * np.eye(k, dtype=complex)
    for tau, (r, s) in enumerate(zip(rs, ss), start=1):
        w = lam ** (n - tau)
        d += w * np.outer(r, s.conj())
        phi += w * np.outer(s, s.conj())
    return d @ np.linalg.inv(phi)


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


class TestInitReceiver:
    def test_sdf_first_user_is_forward_only(self):
        states = init_receiver(4, 4, "sdf")
        assert states[0].dim == 4

    def test_sdf_backward_grows_with_position(self):
        states = init_receiver(4, 6, "sdf")
        assert [s.dim for s in states] == [6, 7, 8, 9]

    def test_pdf_dimensions(self):
        states = init_receiver(4, 4, "pdf")
        assert all(s.dim == 7 for s in states)

    def test_delta_sets_inverse_diagonal(self):
        state = init_receiver(2, 2, "pdf", delta=100.0)[0]
        np.testing.assert_allclose(np.diag(state.inv_corr), 0.01)

    def test_zero_weights(self):
        for state in init_receiver(3, 4, "pdf"):
            assert np.all(state.weights == 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            init_receiver(5, 4, "pdf")
        with pytest.raises(ValueError):
            init_receiver(2, 4, "zf")


class TestRlsUpdate:
    @pytest.mark.parametrize("lam", [0.95, 0.998, 1.0])
    def test_matches_batch_solution_every_step(self, lam, rng):
        delta = 0.01
        state = init_receiver(1, 6, "pdf", delta=delta, forgetting=lam)[0]
        xs, refs = [], []
        for _ in range(200):
            x = random_complex(rng, state.dim)
            d = complex(random_complex(rng))
            rls_update(state, x, d)
            xs.append(x)
            refs.append(d)
            expected = batch_rls_weights(xs, refs, lam, delta)
            np.testing.assert_allclose(state.weights, expected, atol=1e-8)

    def test_converges_to_unregularized_ls(self, rng):
        # Tiny delta: after full-rank training the plain LS solution is reached.
        lam, delta = 1.0, 1e-8
        state = init_receiver(1, 5, "pdf", delta=delta, forgetting=lam)[0]
        xs, refs = [], []
        for _ in range(30):
            x = random_complex(rng, state.dim)
            d = complex(random_complex(rng))
            rls_update(state, x, d)
            xs.append(x)
            refs.append(d)
        phi = sum(np.outer(x, x.conj()) for x in xs)
        p = sum(x * np.conj(d) for x, d in zip(xs, refs))
        np.testing.assert_allclose(state.weights, np.linalg.solve(phi, p), atol=1e-8)

    def test_zero_error_leaves_weights_unchanged(self, rng):
        state = init_receiver(1, 4, "pdf")[0]
        state.weights = random_complex(rng, 4)
        before = state.weights.copy()
        x = random_complex(rng, 4)
        ref = complex(state.weights.conj() @ x)  # perfect prediction
        out = rls_update(state, x, ref)
        assert out == pytest.approx(ref)
        np.testing.assert_allclose(state.weights, before, atol=1e-12)

    def test_scalar_static_channel_hand_recursion(self):
        # K = 1, N_R = 1, h = 1, noiseless: the closed form is w[i] = i/(i+delta)
        # and the a-priori error magnitude delta/(i-1+delta) shrinks monotonically.
        delta = 0.01
        state = init_receiver(1, 1, "pdf", delta=delta, forgetting=1.0)[0]
        rng = np.random.default_rng(3)
        errors = []
        for i in range(1, 20):
            s = np.exp(2j * np.pi * rng.integers(0, 4) / 4)
            out = rls_update(state, np.array([s]), complex(s))
            errors.append(abs(s - out))
            assert state.weights[0] == pytest.approx(i / (i + delta))
        assert all(a > b for a, b in zip(errors, errors[1:]))
        assert errors[-1] < 1e-2

    def test_inverse_stays_hermitian(self, rng):
        state = init_receiver(1, 5, "pdf", forgetting=0.95)[0]
        for _ in range(300):
            rls_update(state, random_complex(rng, 5), complex(random_complex(rng)))
        drift = np.max(np.abs(state.inv_corr - state.inv_corr.conj().T))
        assert drift < 1e-10

    def test_dimension_mismatch(self, rng):
        state = init_receiver(1, 4, "pdf")[0]
        with pytest.raises(ValueError):
            rls_update(state, random_complex(rng, 5), 0j)


class TestChannelEstimator:
    def test_initial_state(self):
        state = init_channel_estimator(3, 4, delta=0.5)
        assert np.all(state.cross_corr == 0)
        np.testing.assert_allclose(state.inv_corr, 2.0 * np.eye(3))

    def test_zero_received_gives_zero_estimate(self, rng):
        state = init_channel_estimator(2, 3)
        for _ in range(10):
            h_hat = channel_estimate_update(
                state, np.zeros(3, dtype=complex), random_complex(rng, 2)
            )
        assert np.all(h_hat == 0)

    def test_noiseless_static_channel_recovered(self, rng):
        # Negligible regularization: K independent pilots pin the channel down.
        k, n_rx = 4, 4
        h = random_complex(rng, n_rx, k)
        state = init_channel_estimator(k, n_rx, delta=1e-8, forgetting=1.0)
        for _ in range(k):
            s = random_complex(rng, k)
            h_hat = channel_estimate_update(state, h @ s, s)
        np.testing.assert_allclose(h_hat, h, atol=1e-6)

    def test_matches_batch_formula_every_step(self, rng):
        lam, delta = 0.998, 0.01
        k, n_rx = 3, 4
        state = init_channel_estimator(k, n_rx, delta=delta, forgetting=lam)
        rs, ss = [], []
        for _ in range(100):
            r = random_complex(rng, n_rx)
            s = random_complex(rng, k)
            h_hat = channel_estimate_update(state, r, s)
            rs.append(r)
            ss.append(s)
            np.testing.assert_allclose(
                h_hat, batch_channel_estimate(rs, ss, lam, delta), atol=1e-8
            )

    def test_inverse_stays_hermitian(self, rng):
        state = init_channel_estimator(4, 4, forgetting=0.95)
        for _ in range(200):
            channel_estimate_update(
                state, random_complex(rng, 4), random_complex(rng, 4)
            )
        drift = np.max(np.abs(state.inv_corr - state.inv_corr.conj().T))
        assert drift < 1e-10
