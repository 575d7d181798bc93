import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from spectral_umap import UMAP, CoarseUMAP, SpectralCoarsener, generate_synthetic, umap_embed


@pytest.fixture(scope="module")
def moons():
    return generate_synthetic("two_moons", 400, 0.05, 11)


def test_coarsener_attributes(moons):
    c = SpectralCoarsener(ratio=4).fit(moons.values, moons.labels)
    assert c.cluster_centers_.shape[1] == 2
    assert c.sizes_.sum() == 400
    assert 3.6 <= c.achieved_ratio_ <= 4.4
    assert c.coarse_labels_.shape == (c.cluster_centers_.shape[0],)
    np.testing.assert_allclose(c.transform(moons.values), c.cluster_centers_)


def test_coarsener_transform_averages_other_features(moons):
    c = SpectralCoarsener(ratio=4).fit(moons.values)
    extra = np.arange(400.0)[:, None]
    means = c.transform(extra)
    for j in range(3):
        assert means[j, 0] == pytest.approx(extra[c.assignment_ == j].mean())
    with pytest.raises(ValueError):
        c.transform(extra[:10])


def test_unfitted_raises(moons):
    with pytest.raises(NotFittedError):
        SpectralCoarsener().transform(moons.values)


def test_params_round_trip():
    c = SpectralCoarsener(ratio=3, sweeps=4)
    assert c.get_params()["sweeps"] == 4
    c2 = clone(c).set_params(ratio=7)
    assert c2.ratio == 7 and c.ratio == 3
    u = UMAP(n_neighbors=8, min_dist=0.2)
    assert clone(u).get_params() == u.get_params()


def test_umap_estimator_matches_function(moons):
    est = UMAP(n_epochs=100, random_state=4).fit(moons.values)
    direct = umap_embed(moons, n_epochs=100, seed=4)
    np.testing.assert_array_equal(est.embedding_, direct)
    assert est.a_ == pytest.approx(1.577, abs=0.01)
    assert est.graph_.shape == (400, 400)


def test_coarse_umap_lifts_to_all_samples(moons):
    model = CoarseUMAP(SpectralCoarsener(ratio=5), UMAP(n_epochs=100))
    Y = model.fit_transform(moons.values, moons.labels)
    assert Y.shape == (400, 2)
    np.testing.assert_array_equal(Y, model.coarse_embedding_[model.map_.assignment])
    assert set(model.timings_) == {"compress", "embed"}
    # nested parameters address the sub-estimators
    model.set_params(coarsener__ratio=2)
    assert model.coarsener.ratio == 2


def test_inside_sklearn_pipeline(moons):
    pipe = make_pipeline(StandardScaler(), CoarseUMAP(SpectralCoarsener(ratio=4), UMAP(n_epochs=50)))
    Y = pipe.fit_transform(moons.values)
    assert Y.shape == (400, 2) and np.isfinite(Y).all()


def test_validation_rejects_nan():
    X = np.ones((10, 2))
    X[3, 1] = np.nan
    with pytest.raises(ValueError):
        SpectralCoarsener().fit(X)
    with pytest.raises(ValueError):
        UMAP(n_neighbors=20).fit(np.random.default_rng(0).normal(size=(10, 2)))
