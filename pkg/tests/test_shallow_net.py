import numpy as np
import pytest
from hypothesis import given, strategies as st

from mirrorbias.densities import BiasDensity
from mirrorbias.shallow_net import (Activation, Dataset, InitSpec, NetParams, forward,
                                    init_params, jacobian, loss, loss_grad, predict,
                                    read_params_csv, write_params_csv)


def one_unit(act="relu"):
    return NetParams.from_blocks([[1.0]], [0.0], [2.0], 1.0, Activation(act))


def random_net(rng, n=5, d=1, act="relu"):
    W = rng.standard_normal((n, d))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    return NetParams.from_blocks(W, rng.uniform(-1, 1, n), rng.standard_normal(n),
                                 rng.standard_normal(), Activation(act))


def test_forward_examples():
    assert forward(one_unit(), 3.0) == 7.0
    assert forward(one_unit(), -3.0) == 1.0
    assert forward(one_unit("abs"), -3.0) == 7.0


def test_forward_rejects_batches():
    with pytest.raises(ValueError):
        forward(one_unit(), np.array([1.0, 2.0]))


def test_zero_output_init_is_zero_function():
    for act in ("relu", "abs"):
        net = init_params(50, 1, InitSpec(seed=4), Activation(act))
        assert np.all(predict(net, np.linspace(-3, 3, 41)) == 0.0)


def test_init_sign_balance_and_support():
    n = 10_000
    net = init_params(n, 1, InitSpec(seed=11))
    w = net.W[:, 0]
    assert set(np.unique(w)) <= {-1.0, 1.0}
    # independent count of the fair bits
    plus = int(np.count_nonzero(w == 1.0))
    assert abs((2 * plus - n) / n) <= 3 / np.sqrt(n)
    assert np.all(np.abs(net.b) <= 1.0)


def test_init_truncgauss_support():
    net = init_params(2000, 1, InitSpec(bias_density=BiasDensity.truncgauss(1.0, 0.5), seed=2))
    assert np.all(np.abs(net.b) <= 0.5)


@pytest.mark.parametrize("d", [1, 2, 5])
def test_init_unit_rows_and_determinism(d):
    spec = InitSpec(a_scale=1.0, seed=99)
    a = init_params(40, d, spec)
    b = init_params(40, d, spec)
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_array_equal(a.anchor, a.theta)
    assert np.max(np.abs(np.linalg.norm(a.W, axis=1) - 1.0)) <= 1e-12
    assert a.size == 40 * (d + 2) + 1
    c = init_params(40, d, InitSpec(a_scale=1.0, seed=100))
    assert not np.array_equal(a.theta, c.theta)


def test_netparams_validation():
    with pytest.raises(ValueError):
        NetParams(np.zeros(5), np.zeros(5), 2, 1, Activation.RELU)
    with pytest.raises(ValueError):
        init_params(0, 1, InitSpec())
    net = init_params(3, 1, InitSpec())
    with pytest.raises(ValueError):
        net.anchor[0] = 1.0


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([0.0, 0.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        Dataset(np.array([0.0, 1.0]), np.array([1.0]))


def test_loss_examples(fig1):
    net = init_params(8, 1, InitSpec(seed=1))
    data = Dataset(np.array([0.3, -0.4]), np.array([1.0, -1.0]))
    assert loss(net, data) == 0.5
    fitted = Dataset(fig1.xs, predict(random_net(np.random.default_rng(0)), fig1.xs))
    net2 = random_net(np.random.default_rng(0))
    assert loss(net2, fitted) == 0.0
    assert np.all(loss_grad(net2, fitted) == 0.0)


@pytest.mark.parametrize("act", ["relu", "abs"])
def test_jacobian_structure_and_fd(act, rng):
    net = random_net(rng, n=5, d=2, act=act)
    data = Dataset(rng.uniform(-1, 1, (6, 2)), rng.standard_normal(6))
    J = jacobian(net, data)
    assert J.shape == (6, net.size)
    np.testing.assert_array_equal(J[:, -1], 1.0)
    Z = data.xs @ net.W.T - net.b
    S = np.maximum(Z, 0) if act == "relu" else np.abs(Z)
    np.testing.assert_allclose(J[:, net.blocks()["a"]], S, rtol=0, atol=0)
    h = 1e-6
    for q in range(net.size):
        e = np.zeros(net.size)
        e[q] = h
        fd = (predict(net.with_theta(net.theta + e), data.xs)
              - predict(net.with_theta(net.theta - e), data.xs)) / (2 * h)
        np.testing.assert_allclose(J[:, q], fd, rtol=1e-6, atol=1e-8)


def test_jacobian_zero_at_kink():
    net = NetParams.from_blocks([[1.0]], [0.5], [3.0], 0.0)
    J = jacobian(net, Dataset(np.array([0.5]), np.array([0.0])))
    assert J[0, 0] == 0.0 and J[0, 1] == 0.0


@pytest.mark.parametrize("act", ["relu", "abs"])
def test_loss_grad_matches_jacobian_and_fd(act, rng):
    net = random_net(rng, n=7, act=act)
    data = Dataset(rng.uniform(-1, 1, 4), rng.standard_normal(4))
    r = predict(net, data.xs) - data.ys
    np.testing.assert_allclose(loss_grad(net, data), jacobian(net, data).T @ r / data.m,
                               rtol=1e-13, atol=1e-15)
    g = loss_grad(net, data)
    for q in range(net.size):
        h = 1e-6
        e = np.zeros(net.size)
        e[q] = h
        fd = (loss(net.with_theta(net.theta + e), data)
              - loss(net.with_theta(net.theta - e), data)) / (2 * h)
        assert abs(fd - g[q]) <= 1e-6 * max(abs(g[q]), 1e-3)


@given(c=st.floats(-100, 100), seed=st.integers(0, 10_000))
def test_output_bias_shifts_all_outputs(c, seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng)
    x = np.linspace(-2, 2, 9)
    th = net.theta.copy()
    th[-1] += c
    shifted = predict(net.with_theta(th), x)
    np.testing.assert_allclose(shifted - predict(net, x), c, rtol=0, atol=1e-12 * (1 + abs(c)))


@given(seed=st.integers(0, 10_000))
def test_linear_in_output_weights(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, n=6)
    data = Dataset(np.linspace(-1, 1, 5), np.zeros(5))
    delta = np.zeros(net.size)
    delta[net.blocks()["a"]] = rng.standard_normal(6)
    change = predict(net.with_theta(net.theta + delta), data.xs) - predict(net, data.xs)
    np.testing.assert_allclose(jacobian(net, data) @ delta, change, atol=1e-12)


@given(seed=st.integers(0, 10_000))
def test_piecewise_linear_in_x(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, n=4, act="abs")
    knots = np.sort(net.b * net.W[:, 0])
    lo, hi = knots[0] + 0.1, knots[0] + 0.2
    if len(knots) > 1 and knots[1] < hi + 1e-9:
        return
    x = np.array([lo, 0.5 * (lo + hi), hi])
    f = predict(net, x)
    assert abs(f[1] - 0.5 * (f[0] + f[2])) <= 1e-12 * (1 + np.max(np.abs(f)))


def test_params_csv_roundtrip(tmp_path, rng):
    net = random_net(rng, n=5, d=3)
    path = tmp_path / "p.csv"
    write_params_csv(net, path)
    back = read_params_csv(path)
    np.testing.assert_array_equal(back, net.theta)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,block,value"
    assert lines[1].split(",")[1] == "W" and lines[-1].split(",")[1] == "d"
    assert len(lines) == net.size + 1
