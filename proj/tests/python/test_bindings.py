"""Smoke tests of the Python module."""

import json
import math
import os
from pathlib import Path

import pytest

np = pytest.importorskip("numpy")
slm = pytest.importorskip("scatterlm")

SOURCE = Path(os.environ.get("SCATTERLM_SOURCE_DIR", Path(__file__).resolve().parents[2]))


@pytest.fixture(scope="module")
def model():
    return slm.ForwardModel(SOURCE / "configs" / "structures" / "si_grating.json", SOURCE / "data" / "materials")


@pytest.fixture(scope="module")
def incidence():
    return slm.Incidence(slm.Incidence.grid(200, 800, 100), truncation_order=3, staircase_slices=4)


def test_jones_to_mueller_of_an_isotropic_reflector():
    m = slm.jones_to_mueller(0.5 + 0.0j, 0.5 + 0.0j)
    assert m.shape == (4, 4)
    # equal reflection coefficients leave the polarisation state unchanged
    assert np.allclose(m, np.eye(4))


def test_simulate_returns_normalised_mueller_matrices(model, incidence):
    assert sorted(model.parameter_names) == ["BCD", "Hgt", "TCD"]
    sig = model.simulate({"TCD": 350, "Hgt": 472, "BCD": 383}, incidence)
    assert len(sig) == 7
    assert list(sig.wavelengths) == [200, 300, 400, 500, 600, 700, 800]
    mm = sig.mueller
    assert mm.shape == (7, 4, 4)
    assert np.allclose(mm[:, 0, 0], 1.0)
    assert sig.features().shape == (7 * 15,)
    again = slm.Signature(sig.wavelengths, mm)
    assert again == sig


def test_signature_file_round_trip(model, incidence, tmp_path):
    sig = model.simulate({"TCD": 350, "Hgt": 472, "BCD": 383}, incidence)
    sig.save(tmp_path / "s.txt")
    assert slm.Signature.load(tmp_path / "s.txt") == sig


def test_seeded_error_injection(model, incidence):
    sig = model.simulate({"TCD": 350, "Hgt": 472, "BCD": 383}, incidence)
    a = slm.inject_errors(sig, 0.05, 0.05, 7)
    b = slm.inject_errors(sig, 0.05, 0.05, 7)
    assert a == b
    assert not a == sig
    assert np.allclose(a.mueller[:, 0, 0], 1.0)


def test_errors_surface_as_exceptions(model, incidence):
    with pytest.raises(slm.ScatterlmError):
        model.simulate({"TCD": 350}, incidence)
    with pytest.raises(slm.ScatterlmError):
        slm.kernel("linear", 1.0, [0.0], [0.0])


def test_kernels():
    assert slm.kernel("rbf", 1.0, [1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)
    assert slm.kernel("rbf", 2.0, [0.0], [2.0]) == pytest.approx(math.exp(-1.0))
    assert slm.kernel("rbf", 2.0, [0.0], [2.0], rbf_squared=True) == pytest.approx(math.exp(-2.0))
    assert slm.kernel("polynomial", 2.0, [1.0, 2.0], [3.0, 4.0]) == pytest.approx(11.0**2)


def test_svm_separates_three_clusters(tmp_path):
    rng = np.random.default_rng(4)
    centers = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    x = np.concatenate([c + 0.3 * rng.standard_normal((20, 2)) for c in centers])
    y = [c for c in range(3) for _ in range(20)]
    svm = slm.train_svm(x, y, "rbf", 1.0)
    assert svm.class_labels == [0, 1, 2]
    assert svm.predict(x) == y
    svm.save(tmp_path / "m.txt")
    assert slm.SvmModel.load(tmp_path / "m.txt").predict(centers) == [0, 1, 2]


def test_lm_minimize_with_a_python_residual():
    out = slm.lm_minimize(lambda p: [1 - p[0], 10 * (p[1] - p[0] ** 2)], [-1.2, 1.0], [-5, -5], [5, 5],
                          cost_tolerance=1e-20, step_tolerance=1e-14, fd_step=1e-7)
    assert out["converged"]
    assert out["params"] == pytest.approx([1.0, 1.0], abs=1e-6)


def test_config_train_and_reconstruct(tmp_path):
    cfg = json.loads((SOURCE / "configs" / "si_grating.json").read_text())
    cfg["structure"] = str(SOURCE / "configs" / "structures" / "si_grating.json")
    cfg["materials"] = str(SOURCE / "data" / "materials")
    for p in cfg["parameters"]:
        p["samples_per_subrange"] = 3
        p["samples_full_range"] = 3
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    config = slm.RunConfig.load(path, ["incidence.wavelength_step=100", "incidence.truncation_order=3",
                                       "incidence.staircase_slices=4", "k_points=3"])
    assert config.parameter_names == ["TCD", "Hgt", "BCD"]
    assert config.rough_ranges[1] == (300, 600)
    bundle = slm.train_bundle(config, workers=1)
    slm.save_bundle(bundle, tmp_path / "bundle")
    bundle = slm.Bundle.load(tmp_path / "bundle")
    target = config.model().simulate({"TCD": 350, "Hgt": 472, "BCD": 383}, config.incidence)
    mapping = bundle.map(target)
    assert [m["name"] for m in mapping] == ["TCD", "Hgt", "BCD"]
    rec = slm.reconstruct(config, target, bundle)
    assert set(rec["init"]) == {"TCD", "Hgt", "BCD"}
    assert rec["params"]["TCD"] == pytest.approx(350, abs=0.5)
    fit = slm.lm_fit(config, target, {"TCD": 362.5, "Hgt": 487.5, "BCD": 362.5})
    assert fit.converged
    assert "param TCD" in fit.report()
