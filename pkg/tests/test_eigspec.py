"""Test the feature covariance eigenspectrum."""
import numpy as np
import pandas as pd
import pytest

from ptx.errors import EmptyInput, MalformedCsv
from ptx.harness.eigspec import covariance_spectrum, load_features, run_eigspec, top_k_mass


def jacobi_eigenvalues(a, sweeps=100):
    """Cyclic Jacobi rotations, as an independent symmetric eigensolver."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(a**2) - np.sum(np.diag(a) ** 2))
        if off < 1e-14 * np.linalg.norm(a):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1))
                if theta == 0:
                    t = 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))[::-1]


def write_features(path, features, header=True):
    pd.DataFrame(features).to_csv(path, index=False, header=header)
    return str(path)


def test_identity_covariance(tmp_path):
    rng = np.random.default_rng(0)
    eig = covariance_spectrum(rng.standard_normal((100_000, 32)))
    assert np.all((eig >= 0.8) & (eig <= 1.2))

    features = rng.standard_normal((2000, 32))
    eig = run_eigspec(write_features(tmp_path / "f.csv", features), str(tmp_path / "eig.csv"))
    assert np.all(np.diff(eig) <= 0)
    written = pd.read_csv(tmp_path / "eig.csv", float_precision="round_trip")
    np.testing.assert_allclose(written["eigenvalue"].to_numpy(), eig, rtol=1e-15)


def test_low_rank_features():
    rng = np.random.default_rng(1)
    features = rng.standard_normal((2000, 5)) @ rng.standard_normal((5, 32))
    eig = covariance_spectrum(features)
    assert np.all(eig[:5] > 1e-3)
    assert np.all(np.abs(eig[5:]) < 1e-10)
    assert top_k_mass(eig, 5) == pytest.approx(1.0, abs=1e-10)


def test_matches_jacobi_solver():
    rng = np.random.default_rng(2)
    features = rng.standard_normal((500, 10)) @ rng.standard_normal((10, 10))
    centered = features - features.mean(axis=0)
    cov = centered.T @ centered / (len(features) - 1)
    np.testing.assert_allclose(covariance_spectrum(features), jacobi_eigenvalues(cov), rtol=1e-8)


def test_uncentered_second_moment():
    features = np.array([[1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(covariance_spectrum(features, center=False), [1.0, 0.0])
    np.testing.assert_allclose(covariance_spectrum(features, center=True), [0.0, 0.0])
    with pytest.raises(EmptyInput):
        covariance_spectrum(np.ones((1, 3)))


def test_headerless_input(tmp_path):
    features = np.random.default_rng(3).standard_normal((20, 3))
    path = write_features(tmp_path / "f.csv", features, header=False)
    np.testing.assert_array_equal(load_features(path, header=False), features)
    # the first row is taken as a header otherwise
    assert load_features(path).shape == (19, 3)


def test_bad_inputs(tmp_path):
    text = tmp_path / "text.csv"
    text.write_text("a,b\n1,x\n2,3\n")
    with pytest.raises(MalformedCsv):
        load_features(str(text))

    missing = tmp_path / "missing.csv"
    missing.write_text("a,b\n1,\n2,3\n")
    with pytest.raises(MalformedCsv):
        load_features(str(missing))

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(EmptyInput):
        load_features(str(empty))

    header_only = tmp_path / "header.csv"
    header_only.write_text("a,b\n")
    with pytest.raises(EmptyInput):
        load_features(str(header_only))
