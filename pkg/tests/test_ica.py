"""Infomax ICA, component features, rule-based classification."""
import warnings

import numpy as np
import pytest

from tmsclean import ica, montage
from tmsclean.errors import DataError

from conftest import make_epochs


def three_source_epochs(seed, n=10_000):
    """Known 3x3 mixture: super-Gaussian, sub-Gaussian, periodic."""
    r = np.random.default_rng(seed)
    s = np.vstack([
        r.laplace(size=n),
        r.uniform(-np.sqrt(3), np.sqrt(3), size=n),
        np.sign(np.sin(2 * np.pi * 7 * np.arange(n) / 1000.0 + r.uniform(0, np.pi))),
    ])
    a = r.normal(size=(3, 3)) + 3 * np.eye(3)
    ep = make_epochs((a @ s)[None], fs=1000.0, t0=0.0,
                     channels=montage.standard_montage(3))
    return ep, a


def test_amari_distance_properties(rng):
    a = rng.normal(size=(4, 4))
    # invariant to permutation and scaling; zero iff same up to those
    perm = np.eye(4)[[2, 0, 3, 1]]
    scale = np.diag([2.0, -0.5, 3.0, 1.0])
    assert ica.amari_distance(a, a @ perm @ scale) < 1e-12
    b = rng.normal(size=(4, 4))
    assert ica.amari_distance(a, b) > 0.1


def test_infomax_recovers_mixture():
    ep, a = three_source_epochs(0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = ica.fit_infomax(ep, n_components=3, seed=0)
    assert ica.amari_distance(a, d.mixing) < 0.05


def test_infomax_deterministic_per_seed():
    ep, _ = three_source_epochs(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d1 = ica.fit_infomax(ep, n_components=3, seed=7)
        d2 = ica.fit_infomax(ep, n_components=3, seed=7)
    np.testing.assert_array_equal(d1.unmixing, d2.unmixing)
    np.testing.assert_array_equal(d1.mixing, d2.mixing)


def test_infomax_rejects_too_many_components(rng):
    ep = make_epochs(rng.standard_normal((2, 4, 500)), t0=0.0)
    with pytest.raises(DataError):
        ica.fit_infomax(ep, n_components=10)


def test_unmixing_mixing_are_pseudo_inverses():
    ep, _ = three_source_epochs(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = ica.fit_infomax(ep, n_components=3, seed=0)
    np.testing.assert_allclose(d.unmixing @ d.mixing, np.eye(3), atol=1e-8)


def test_project_out_removes_contribution():
    ep, _ = three_source_epochs(3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = ica.fit_infomax(ep, n_components=3, seed=0)
    out = ica.project_out(ep, d, [0, 1, 2])
    # removing everything leaves only the channel means
    resid = out.data[0] - d.mean[:, None]
    assert np.abs(resid).max() < 1e-6 * np.abs(ep.data).max()
    # empty removal is the identity
    same = ica.project_out(ep, d, [])
    np.testing.assert_array_equal(same.data, ep.data)


def test_project_out_validates_indices():
    ep, _ = three_source_epochs(4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = ica.fit_infomax(ep, n_components=3, seed=0)
    with pytest.raises(DataError):
        ica.project_out(ep, d, [5])


def synth_features(kind, seed, fs=1000.0, n_ch=30, n=20_000):
    """One synthetic component activation + topography per artifact class."""
    r = np.random.default_rng(seed)
    t = np.arange(n) / fs
    chs = montage.standard_montage(n_ch)
    pos = montage.positions(chs)
    frontal = montage.frontal_mask(chs)
    smooth_topo = np.exp(-np.linalg.norm(pos - pos[5], axis=1) ** 2)
    if kind == "Eye":
        act = np.zeros(n)
        for s0 in range(500, n - 500, 2000):
            act[s0:s0 + 300] += np.sin(np.pi * np.arange(300) / 300) ** 2
        act = 50 * act + 0.1 * r.standard_normal(n)
        topo = np.where(frontal, 1.0, 0.05) * (1 + 0.05 * r.standard_normal(n_ch))
    elif kind == "LineNoise":
        act = np.sin(2 * np.pi * 50.0 * t) + 0.05 * r.standard_normal(n)
        topo = smooth_topo
    elif kind == "ChannelNoise":
        act = r.standard_normal(n)
        topo = np.full(n_ch, 0.02)
        topo[7] = 1.0
    elif kind == "Muscle":
        from scipy import signal
        act = signal.sosfiltfilt(
            signal.butter(4, [110, 140], btype="band", fs=fs, output="sos"),
            r.standard_normal(n))
        act /= act.std()
        topo = np.exp(-np.linalg.norm(pos - pos[5], axis=1) ** 2 / 0.4)
    elif kind == "Heart":
        act = 0.05 * r.standard_normal(n)
        for s0 in range(200, n - 200, 950):  # ~63 bpm
            act[s0:s0 + 40] += 10 * np.hanning(40)
        topo = smooth_topo
    else:  # Brain: 1/f with alpha peak, distributed topo
        from scipy import signal
        w = r.standard_normal(n)
        b, a = signal.butter(1, 8.0, fs=fs)
        pink = signal.lfilter(b, a, w)
        alpha = np.sin(2 * np.pi * 10.0 * t) * (1 + 0.3 * np.sin(2 * np.pi * 0.2 * t))
        act = 3 * pink / pink.std() + 2.0 * alpha
        topo = smooth_topo
    return ica.features_from_component(act, topo, fs, frontal)


@pytest.mark.parametrize("kind", ["Eye", "LineNoise", "ChannelNoise", "Muscle", "Heart", "Brain"])
def test_classifier_labels_synthetic_components(kind):
    feat = synth_features(kind, seed=0)
    assert ica.classify(feat).label == kind


def test_classifier_scores_argmax_is_label():
    for kind in ["Eye", "LineNoise", "ChannelNoise", "Muscle", "Brain"]:
        lab = ica.classify(synth_features(kind, seed=1))
        assert max(lab.scores, key=lab.scores.get) == lab.label
        assert lab.scores[lab.label] == 1.0
        assert all(v <= 1.0 for v in lab.scores.values())


def test_classify_all_override_replaces_suggestion():
    ep, _ = three_source_epochs(5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = ica.fit_infomax(ep, n_components=3, seed=0)
    _, sel = ica.classify_all(d, ep, override=[2, 0, 2])
    assert sel == [0, 2]
