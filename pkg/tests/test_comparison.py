import numpy as np
import pytest

from effdiff.comparison import (TransientSettings, discrepancy, homogenized_field,
                                transient_comparison)
from effdiff.grid import StructuredGrid, TensorField
from effdiff.masks import SynthLayerSpec, ingest_mask, layer_profile, synth_layered_mask
from effdiff.solver import EstimationBC, capacity_mass
from effdiff.tensors import harmonic_mean_profile


def test_discrepancy():
    assert discrepancy([1.0, 2.0], [1.0, 2.0]) == (0.0, 0.0)
    l2, mx = discrepancy([3.0, 4.0], [3.0, 4.5])
    assert l2 == pytest.approx(0.1) and mx == pytest.approx(0.125)
    assert discrepancy([0.0, 0.0], [0.0, 0.0]) == (0.0, 0.0)
    assert discrepancy([0.0], [1.0])[0] == np.inf


def test_homogeneous_medium_matches_itself():
    fld = TensorField.constant(StructuredGrid.unit(2, 8), 2.0)
    settings = TransientSettings(0.2, 0.02, EstimationBC(1.0, 0.0, 1.0))
    cmp_ = transient_comparison(fld, 2.0, settings)
    assert cmp_.relative_l2 <= 1e-9
    np.testing.assert_allclose(cmp_.detailed.flux, cmp_.homogenized.flux, rtol=1e-9)


def test_homogenized_initial_state_has_same_mass():
    mask = synth_layered_mask(SynthLayerSpec(0.25, 2, 32, 4), pixel_size=1 / 32)
    fld = ingest_mask(mask, 1.0, 1.0, 0.1)
    hom = homogenized_field(fld, 0.5)
    assert hom.sigma.mean() == pytest.approx(fld.capacity().mean())
    settings = TransientSettings(0.05, 0.01, None, amplitude=1.0, sharpness=5.0)
    cmp_ = transient_comparison(fld, 0.5, settings)
    m_det = capacity_mass(fld, cmp_.detailed.final)
    m_hom = capacity_mass(hom, cmp_.homogenized.final)
    assert m_det == pytest.approx(m_hom, rel=1e-9)


def test_layered_transient_agrees_with_harmonic_mean():
    nx = 128
    length = 4.359e-7
    mask = synth_layered_mask(SynthLayerSpec(0.1878, 8, nx, 8), length / nx)
    fld = ingest_mask(mask, 1e-14, np.diag([1e-12, 1e-10]), 1.0)
    d_eff = harmonic_mean_profile(layer_profile(mask, 1e-14, 1e-12))
    t_end = 2 * length**2 / d_eff
    bc = EstimationBC(1.0, 0.0, 0.5 * d_eff / length)
    cmp_ = transient_comparison(fld, d_eff, TransientSettings(t_end, t_end / 100, bc))
    assert cmp_.relative_l2 < 0.02


def test_rejects_non_positive_d_eff():
    fld = TensorField.constant(StructuredGrid.unit(2, 2), 1.0)
    with pytest.raises(ValueError):
        transient_comparison(fld, 0.0, TransientSettings(1.0, 0.5))
