import dataclasses
import math

import numpy as np
import pytest

from fdquant.energy import (PowerModel, adc_power, dac_power, default_power_model, energy_efficiency,
                            load_power_model, total_power)
from fdquant.scenario import desk_defaults


def test_converter_power_examples():
    assert dac_power(8, 500e6) == pytest.approx(1.5e-5 * 256 + 9e-12 * 500e6 * 8)
    assert dac_power(8, 500e6) == pytest.approx(0.03984)
    assert adc_power(6, 500e6, 494e-15) == pytest.approx(0.015808)
    np.testing.assert_allclose(adc_power(np.array([1, 2]), 1.0, 1.0), [2.0, 4.0])


@pytest.mark.parametrize("fn", [lambda b: dac_power(b, 1e9), lambda b: adc_power(b, 1e9, 1e-15)])
def test_converter_power_domain(fn):
    with pytest.raises(ValueError):
        fn(math.inf)
    with pytest.raises(ValueError):
        fn(0)


def _zero_model(**kw):
    pm = default_power_model()
    zero = {f.name: 0.0 for f in dataclasses.fields(pm)}
    zero["kappa_pa"] = 1.0
    zero.update(kw)
    return PowerModel(**zero)


def test_amplifier_and_static_dac_term_without_circuits():
    # with every circuit constant zeroed, the AP keeps its amplifier and the
    # rate-independent part of the DAC model
    cfg = desk_defaults()
    p_ap, p_ue = total_power(cfg, _zero_model(kappa_pa=0.5))
    assert p_ap == pytest.approx(cfg.p_dl_w / 0.5 + 2 * cfg.n_tx * 1.5e-5 * 2**7)
    assert p_ue == pytest.approx(cfg.k_ul * cfg.p_ul_w / 0.5)


def test_per_antenna_increment():
    pm = default_power_model()
    small, big = desk_defaults(), desk_defaults(n_tx=9, n_rx=9)
    step = total_power(big, pm)[0] - total_power(small, pm)[0]
    chain = 2 * pm.p_lp + 2 * pm.p_m + pm.p_h
    conv = 2 * dac_power(7, pm.f_s) + 2 * adc_power(7, pm.f_r, pm.c_e)
    assert step == pytest.approx(2 * chain + pm.p_lna + 4 * pm.p_agc + conv)


def test_bit_increment():
    pm = default_power_model()
    cfg = desk_defaults()
    diff = total_power(cfg.with_bits(7), pm)[0] - total_power(cfg.with_bits(6), pm)[0]
    n = cfg.n_tx
    expected = 2 * n * (dac_power(7, pm.f_s) - dac_power(6, pm.f_s)) + 2 * n * (
        adc_power(7, pm.f_r, pm.c_e) - adc_power(6, pm.f_r, pm.c_e))
    assert diff == pytest.approx(expected)


def test_mixed_resolution_and_breakdown():
    pm = default_power_model()
    cfg = desk_defaults(b_adc="4,4,4,4,8,8,8,8", b_dac=6)
    br = total_power(cfg, pm, breakdown=True)
    assert br.p_ap == pytest.approx(total_power(cfg, pm)[0])
    assert br.p_ap_tx > 0 and br.p_ap_rx > 0
    assert br.total == pytest.approx(sum(total_power(cfg, pm)))
    hi = total_power(cfg.replace(b_adc=8), pm)[0]
    lo = total_power(cfg.replace(b_adc=4), pm)[0]
    assert lo < br.p_ap < hi


def test_infinite_resolution_has_no_power_figure():
    with pytest.raises(ValueError):
        total_power(desk_defaults().with_bits(math.inf), default_power_model())


def test_energy_efficiency():
    assert energy_efficiency(10.0, 3.0, 2.0) == pytest.approx(2.0)
    with pytest.raises(ZeroDivisionError):
        energy_efficiency(1.0, 0.0, 0.0)


def test_converter_power_dominates_at_high_resolution():
    pm = default_power_model()
    cfg = desk_defaults()
    p = [sum(total_power(cfg.with_bits(b), pm)) for b in range(1, 13)]
    assert all(a < b for a, b in zip(p, p[1:]))
    # doubling per extra bit eventually: the last step is close to twice the previous one
    assert (p[11] - p[10]) / (p[10] - p[9]) == pytest.approx(2.0, rel=0.05)


def test_profile_file_overrides(tmp_path):
    path = tmp_path / "hw.cfg"
    path.write_text("[power]\np_bb = 0.5\nkappa_pa = 0.35\n")
    pm = load_power_model(path)
    base = default_power_model()
    assert pm.p_bb == 0.5 and pm.kappa_pa == 0.35 and pm.p_lo == base.p_lo
    assert load_power_model() == base


@pytest.mark.parametrize("text,exc", [("[power]\np_bogus = 1\n", KeyError), ("[other]\nx = 1\n", KeyError),
                                      ("[power]\nkappa_pa = 0\n", ValueError)])
def test_profile_file_errors(tmp_path, text, exc):
    path = tmp_path / "hw.cfg"
    path.write_text(text)
    with pytest.raises(exc):
        load_power_model(path)
    with pytest.raises(FileNotFoundError):
        load_power_model(tmp_path / "missing.cfg")
