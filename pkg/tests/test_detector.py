import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import qp_oracle, rbf_matrix
from txembed.detector import (
    GaussianNB,
    IsolationForest,
    Kernel,
    LogisticRegression,
    OcsvmModel,
    SingleClassError,
    baseline_fit_predict,
    kkt_violation,
    ocsvm_fit,
    ocsvm_predict,
)


def test_identical_pair_is_symmetric():
    x = np.ones((2, 3))
    with pytest.warns(UserWarning):
        m = ocsvm_fit(x, nu=1.0)
    assert m.alpha.tolist() == [0.5, 0.5]


def test_matches_qp_oracle_on_gaussian_fixture():
    x = np.random.default_rng(0).normal(size=(30, 2))
    m = ocsvm_fit(x, nu=0.1, kernel=Kernel("rbf", 0.5))
    _, ref = qp_oracle(rbf_matrix(x, 0.5), m.upper)
    assert abs(m.dual_objective() - ref) / ref < 1e-6


def test_dual_feasibility_and_kkt():
    x = np.random.default_rng(1).normal(size=(80, 5))
    m = ocsvm_fit(x, nu=0.2)
    assert abs(m.alpha.sum() - 1) < 1e-12
    assert np.all(m.alpha >= 0) and np.all(m.alpha <= m.upper + 1e-15)
    assert kkt_violation(m, x) < 1e-3
    free = (m.alpha > 1e-12) & (m.alpha < m.upper - 1e-12)
    assert free.any()
    assert np.all(np.abs(m.decision_function(m.support_vectors[free])) < 1e-3)


def test_nu_property_example():
    fracs = []
    for seed in range(20):
        x = np.random.default_rng(seed).normal(size=(200, 2))
        m = ocsvm_fit(x, nu=0.2)
        fracs.append(np.mean(m.decision_function(x) < 0))
        assert len(m.alpha) / 200 >= 0.2 - 0.05
    assert all(0.15 <= f <= 0.25 for f in fracs), fracs


def test_centroid_inside_far_point_outside():
    rng = np.random.default_rng(2)
    x = rng.normal(scale=0.1, size=(50, 3))
    m = ocsvm_fit(x, nu=0.1, kernel=Kernel("rbf", 1.0))
    assert m.predict(x.mean(axis=0, keepdims=True))[0] == 1
    far = np.full((1, 3), 10.0)
    assert np.isclose(m.decision_function(far)[0], -m.rho, atol=1e-12)
    assert m.predict(far)[0] == -1


def test_zero_score_maps_to_target():
    x = np.random.default_rng(3).normal(size=(20, 2))
    m = ocsvm_fit(x, nu=0.5, kernel="linear")
    shifted = OcsvmModel(m.support_vectors, m.alpha, m.support, 0.0, m.kernel, m.nu, m.n_train)
    assert shifted.predict(np.zeros((1, 2)))[0] == 1
    preds = ocsvm_predict(shifted, np.zeros((1, 2)), ["z"])
    assert preds[0].label == 1 and preds[0].score == 0.0 and preds[0].node_id == "z"


def test_row_order_invariance():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(60, 3))
    test = rng.normal(size=(200, 3)) * 1.5
    a = ocsvm_fit(x, nu=0.1)
    b = ocsvm_fit(x[rng.permutation(60)], nu=0.1)
    sa, sb = a.decision_function(test), b.decision_function(test)
    np.testing.assert_allclose(sa, sb, atol=1e-4)
    clear = np.abs(sa) > 1e-3
    assert np.array_equal(a.predict(test)[clear], b.predict(test)[clear])


def test_model_round_trip(tmp_path):
    x = np.random.default_rng(5).normal(size=(40, 4))
    m = ocsvm_fit(x, nu=0.3, kernel=Kernel("rbf", 0.7))
    m.save(tmp_path / "m.npz")
    back = OcsvmModel.load(tmp_path / "m.npz")
    assert back.rho == m.rho and back.kernel == m.kernel and back.nu == m.nu
    np.testing.assert_array_equal(back.decision_function(x), m.decision_function(x))


@pytest.mark.parametrize("nu", [0.0, -0.1, 1.5])
def test_bad_nu(nu):
    with pytest.raises(ValueError):
        ocsvm_fit(np.random.default_rng(0).normal(size=(5, 2)), nu=nu)


def test_bad_inputs():
    with pytest.raises(ValueError):
        ocsvm_fit(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        Kernel("poly")
    with pytest.raises(ValueError):
        Kernel("rbf", -1.0)
    m = ocsvm_fit(np.random.default_rng(0).normal(size=(10, 2)))
    with pytest.raises(ValueError):
        m.decision_function(np.zeros((1, 3)))


def test_default_gamma_is_inverse_dimension():
    m = ocsvm_fit(np.random.default_rng(0).normal(size=(10, 8)))
    assert m.kernel.gamma == 1 / 8


def test_logreg_separable():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(-3, 0.5, size=(40, 2)), rng.normal(3, 0.5, size=(40, 2))])
    y = np.r_[-np.ones(40), np.ones(40)]
    m = LogisticRegression().fit(x, y)
    assert np.all(m.predict(x) == y) and m.grad_norm_ < 1e-6


def test_logreg_optimality_against_scipy():
    from scipy.optimize import minimize
    rng = np.random.default_rng(1)
    x = rng.normal(size=(60, 3))
    y = np.where(x @ [1.0, -2.0, 0.5] + rng.normal(size=60) > 0, 1.0, -1.0)
    m = LogisticRegression(l2=0.5).fit(x, y)
    xb = np.hstack([x, np.ones((60, 1))])
    ref = minimize(lambda t: m._objective(t, xb, y), np.zeros(4), method="BFGS", tol=1e-10).x
    np.testing.assert_allclose(m.coef_, ref, atol=1e-5)


def test_gnb_midpoint_symmetry():
    rng = np.random.default_rng(2)
    base = rng.normal(size=(50, 2))
    x = np.vstack([base + [-2, 0], -base + [2, 0]])
    y = np.r_[-np.ones(50), np.ones(50)]
    m = GaussianNB().fit(x, y)
    assert abs(m.decision_function([[0.0, 0.0]])[0]) < 1e-9
    assert m.predict([[1e-3, 0]])[0] == 1 and m.predict([[-1e-3, 0]])[0] == -1


def test_supervised_baselines_need_two_classes():
    with pytest.raises(SingleClassError):
        LogisticRegression().fit(np.zeros((3, 2)), np.ones(3))
    with pytest.raises(SingleClassError):
        GaussianNB().fit(np.zeros((3, 2)), np.ones(3))


def test_iforest_far_point_scores_highest():
    rng = np.random.default_rng(3)
    x = np.vstack([rng.normal(size=(99, 2)), [[12.0, 12.0]]])
    f = IsolationForest(contamination=0.01, seed=0).fit(x)
    s = f.score_samples(x)
    assert int(np.argmax(s)) == 99 and np.all(s[:99] < s[99])
    assert f.predict(x[99:])[0] == -1


def test_baseline_dispatch():
    rng = np.random.default_rng(4)
    x = np.vstack([rng.normal(-2, 1, size=(30, 2)), rng.normal(2, 1, size=(30, 2))])
    y = np.r_[-np.ones(30), np.ones(30)]
    for which in ("logreg", "gnb"):
        labels, scores = baseline_fit_predict(x, y, x, which)
        assert np.mean(labels == y) > 0.9
        assert np.array_equal(labels, np.where(scores >= 0, 1, -1))
    labels, scores = baseline_fit_predict(x, y, x, "iforest", seed=1)
    assert set(np.unique(labels)) <= {-1, 1} and scores.shape == (60,)
    with pytest.raises(ValueError):
        baseline_fit_predict(x, y, x, "svm")


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.sampled_from([0.1, 0.3, 0.5, 1.0]), st.integers(0, 2**32),
       st.floats(0.05, 2.0))
def test_ocsvm_matches_oracle_property(n, nu, seed, gamma):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    m = ocsvm_fit(x, nu=nu, kernel=Kernel("rbf", gamma))
    assert abs(m.alpha.sum() - 1) < 1e-12 and np.all(m.alpha <= m.upper + 1e-15)
    assert kkt_violation(m, x) < 1e-3
    _, ref = qp_oracle(rbf_matrix(x, gamma), m.upper, iters=4000)
    assert m.dual_objective() <= ref * (1 + 1e-6) + 1e-12
