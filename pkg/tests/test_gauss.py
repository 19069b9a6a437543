import json

import numpy as np
import pytest

from mmsqueeze.errors import DomainError, InvalidParameterError
from mmsqueeze.gauss import (
    GaussianState,
    apply_loss,
    check_physicality,
    dB_to_variance,
    make_squeezed_vacuum,
    r_from_dB,
    squeezing_report,
    squeezing_table,
    symplectic_form,
    transform_state,
    variance_to_dB,
)


def test_vacuum_from_zero_squeezing():
    s = make_squeezed_vacuum([0, 0])
    assert np.array_equal(s.Vqq, np.eye(2))
    assert np.array_equal(s.Vpp, np.eye(2))


def test_hg0_squeezing_parameter():
    s = make_squeezed_vacuum([0.0541])
    assert s.Vqq[0, 0] == pytest.approx(0.8974, abs=1e-4)
    assert variance_to_dB(s.Vqq[0, 0]) == pytest.approx(-0.47, abs=1e-3)
    assert r_from_dB(-0.47) == pytest.approx(0.0541, abs=1e-4)


def test_unit_squeezing_definition():
    s = make_squeezed_vacuum([1.0])
    assert s.Vqq[0, 0] == pytest.approx(np.exp(-2))
    assert s.Vpp[0, 0] == pytest.approx(np.exp(2))


@pytest.mark.parametrize("bad", [[np.nan], [np.inf, 0.0], []])
def test_squeezed_vacuum_rejects_bad_input(bad):
    with pytest.raises(InvalidParameterError):
        make_squeezed_vacuum(bad)


def test_loss_limits_and_arithmetic():
    s = make_squeezed_vacuum([1.0, 0.3])
    same = apply_loss(s, 1.0)
    assert np.array_equal(same.Vqq, s.Vqq)
    vac = apply_loss(s, 0.0)
    assert np.allclose(vac.Vqq, np.eye(2)) and np.allclose(vac.Vpp, np.eye(2))
    half = apply_loss(make_squeezed_vacuum([1.0]), 0.5)
    assert half.Vqq[0, 0] == pytest.approx(0.5677, abs=1e-4)


@pytest.mark.parametrize("eta", [-0.1, 1.5, np.nan])
def test_loss_rejects_eta(eta):
    with pytest.raises(InvalidParameterError):
        apply_loss(GaussianState.vacuum(1), eta)


def test_dB_conversions():
    assert variance_to_dB(1.0) == 0.0
    assert variance_to_dB(0.8974) == pytest.approx(-0.470, abs=1e-3)
    assert variance_to_dB(1.135) == pytest.approx(0.55, abs=1e-2)
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            variance_to_dB(bad)
    x = np.linspace(-20, 20, 101)
    assert np.allclose(variance_to_dB(dB_to_variance(x)), x, atol=1e-12, rtol=0)


def test_symplectic_form_identities():
    j = symplectic_form(3)
    assert np.array_equal(j @ j, -np.eye(6))
    assert np.array_equal(j.T, -j)
    with pytest.raises(InvalidParameterError):
        symplectic_form(0)


def test_physicality_examples():
    vac = check_physicality(GaussianState.vacuum(3))
    assert vac.physical and vac.min_eigenvalue == pytest.approx(0.0, abs=1e-12)
    bad = check_physicality(GaussianState(0.5 * np.eye(2), 0.5 * np.eye(2)))
    assert not bad.physical
    assert bad.min_eigenvalue == pytest.approx(-0.5, abs=1e-12)
    lossy = apply_loss(make_squeezed_vacuum([0.4, -0.2, 1.1]), 0.3)
    assert check_physicality(lossy).physical


def test_minimum_uncertainty_product():
    s = make_squeezed_vacuum(np.linspace(-2, 2, 9))
    assert np.allclose(np.diag(s.Vqq) * np.diag(s.Vpp), 1.0, rtol=1e-14)


def test_state_validation():
    with pytest.raises(InvalidParameterError):
        GaussianState(np.eye(2), np.eye(3))
    with pytest.raises(InvalidParameterError):
        GaussianState([[1.0, 0.1], [0.0, 1.0]], np.eye(2))
    with pytest.raises(InvalidParameterError):
        GaussianState(np.zeros((0, 0)), np.zeros((0, 0)))
    s = GaussianState.vacuum(2)
    with pytest.raises(ValueError):
        s.Vqq[0, 0] = 3.0


def test_json_round_trip():
    s = transform_state(make_squeezed_vacuum([0.2, -0.1, 0.05]), np.linalg.qr(np.arange(9.0).reshape(3, 3) + np.eye(3))[0], "frexel")
    d = json.loads(s.to_json())
    assert set(d) == {"n_modes", "basis", "Vqq", "Vpp"}
    back = GaussianState.from_json(s.to_json())
    assert np.array_equal(back.Vqq, s.Vqq) and back.basis == "frexel"
    d["n_modes"] = 4
    with pytest.raises(InvalidParameterError):
        GaussianState.from_dict(d)


def test_reports():
    s = apply_loss(make_squeezed_vacuum([0.3, -0.3]), 0.7)
    rep = squeezing_report(s)
    assert rep[0].squeeze_dB < 0 < rep[1].squeeze_dB
    tab = squeezing_table(s)
    for e in tab:
        assert e.squeeze_dB <= 0 <= e.antisqueeze_dB
        assert abs(e.squeeze_dB) <= e.antisqueeze_dB
    assert tab[0].squeeze_dB == pytest.approx(tab[1].squeeze_dB)
