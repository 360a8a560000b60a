import numpy as np
import pytest
from numpy.testing import assert_allclose

from curlspec.errors import SpectrumLengthError
from curlspec.oracle import (
    ModeFamily, ModeIndex, box_dirichlet_spectrum, box_maxwell_spectrum, box_neumann_spectrum,
    box_te_tm_spectrum, convex_neumann_curl_check, counting_function, cube_integer_spectrum,
    enumerate_modes, interlace_check, oracle_spectrum, union_index_check, union_spectrum, weyl_estimate,
)

PI = np.pi


def test_cube_integer_spectra():
    assert cube_integer_spectrum(7, "maxwell") == [2, 2, 2, 3, 3, 5, 5]
    assert cube_integer_spectrum(11, "dirichlet") == [3, 6, 6, 6, 9, 9, 9, 11, 11, 11, 12]
    assert cube_integer_spectrum(11, "neumann") == [0, 1, 1, 1, 2, 2, 2, 3, 4, 4, 4]


def test_cube_values_are_exact_multiples():
    vals = box_maxwell_spectrum(PI, PI, PI, 40)
    assert_allclose(vals, np.round(vals), rtol=0, atol=1e-12)
    assert (np.diff(vals) >= 0).all()


def test_te_tm_union_equals_maxwell():
    a, b, c = 1.0, 1.3, 1.7
    assert_allclose(box_te_tm_spectrum(a, b, c, 40), box_maxwell_spectrum(a, b, c, 40), rtol=1e-14)


def test_anisotropic_dirichlet_lowest():
    a, b, c = 1.0, 2.0, 3.0
    first = box_dirichlet_spectrum(a, b, c, 1)[0]
    assert first == pytest.approx(PI ** 2 * (1.0 + 1.0 / 4.0 + 1.0 / 9.0))
    assert box_neumann_spectrum(a, b, c, 2)[1] == pytest.approx(PI ** 2 / 9.0)


def test_enumerate_modes_order():
    modes = enumerate_modes(PI, PI, PI, 3.0, "maxwell")
    assert [(m.l, m.m, m.n) for _, m in modes] == [(0, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, 1)]
    assert [m.multiplicity for _, m in modes] == [1, 1, 1, 2]


def test_mode_index_validation():
    assert ModeIndex(1, 1, 1, ModeFamily.MAXWELL).multiplicity == 2
    assert ModeIndex(1, 1, 0, ModeFamily.MAXWELL).multiplicity == 1
    assert ModeIndex(0, 0, 0, ModeFamily.NEUMANN).value(1.0, 1.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        ModeIndex(0, 0, 1, ModeFamily.MAXWELL)
    with pytest.raises(ValueError):
        ModeIndex(0, 1, 1, ModeFamily.DIRICHLET)
    with pytest.raises(ValueError):
        ModeIndex(-1, 1, 1, ModeFamily.NEUMANN)


def test_bad_arguments():
    with pytest.raises(ValueError):
        box_dirichlet_spectrum(0.0, 1.0, 1.0, 3)
    with pytest.raises(ValueError):
        box_dirichlet_spectrum(1.0, 1.0, 1.0, 0)


def test_oracle_spectrum_wrapper():
    spec = oracle_spectrum("maxwell", PI, PI, PI, 5)
    assert spec.operator == "oracle:maxwell"
    assert spec.multiplicities == [3, 2]
    assert spec.extra_kernel == 0


def test_oracle_interlace_holds_and_is_strict():
    kmax = 50
    alpha = box_maxwell_spectrum(PI, PI, PI, 2 * kmax + 1)
    lam = box_dirichlet_spectrum(PI, PI, PI, kmax)
    report = interlace_check(alpha, lam, kmax)
    assert report.passed
    assert all(r.strict for r in report.records)
    assert [round(r.margin) for r in report.records[:3]] == [1, 3, 1]
    assert report.violations == []


def test_negative_control_neumann_in_lambda_slot():
    alpha = box_maxwell_spectrum(PI, PI, PI, 7)
    mu = box_neumann_spectrum(PI, PI, PI, 3)
    report = interlace_check(alpha, mu, 3)
    assert report.passed is False
    assert report.violations[0].k == 1


def test_negative_control_dirichlet_twice():
    lam = box_dirichlet_spectrum(PI, PI, PI, 7)
    report = interlace_check(lam, lam, 3)
    assert not report.passed
    # α_3 = 6 > λ_1 = 3
    assert report.records[0].margin == pytest.approx(-3.0)


def test_unresolved_entry_fails_even_with_margin():
    alpha = box_maxwell_spectrum(PI, PI, PI, 7)
    lam = box_dirichlet_spectrum(PI, PI, PI, 3)
    report = interlace_check(alpha, lam, 3, resolved=[True, False, True])
    assert report.passed is False
    assert [r.verdict for r in report.records] == [True, False, True]
    assert report.records[1].resolved is False


def test_tolerance_rescues_small_violation():
    report = interlace_check([1.0, 1.0, 3.0 + 1e-9], [3.0], 1, tol=1e-6)
    assert report.passed
    assert not report.records[0].strict


def test_interlace_length_errors():
    with pytest.raises(SpectrumLengthError):
        interlace_check([1.0, 2.0], [3.0], 1)
    with pytest.raises(SpectrumLengthError):
        interlace_check([1.0, 2.0, 3.0, 4.0, 5.0], [3.0], 2)
    with pytest.raises(SpectrumLengthError):
        interlace_check([1.0, 2.0, 3.0], [3.0], 0)


def test_union_index_check_on_cube():
    kmax = 10
    rows = union_index_check(box_dirichlet_spectrum(PI, PI, PI, kmax + 64),
                             box_maxwell_spectrum(PI, PI, PI, 3 * kmax + 64), kmax)
    assert len(rows) == kmax
    assert all(r["verdict"] for r in rows)
    assert rows[0]["index"] == 4 and rows[0]["m_k"] == 1
    assert rows[1]["index"] == 9 and rows[1]["m_k"] == 3
    with pytest.raises(SpectrumLengthError):
        union_index_check([3.0], [2.0, 2.0], 2)


def test_union_spectrum_and_counting():
    d = box_dirichlet_spectrum(PI, PI, PI, 6)
    m = box_maxwell_spectrum(PI, PI, PI, 6)
    eta = union_spectrum(d, m)
    assert_allclose(eta[:6], [2, 2, 2, 3, 3, 3], atol=1e-12)
    assert counting_function(eta, 3.0) == 6
    assert counting_function(eta, 3.0) == counting_function(d, 3.0) + counting_function(m, 3.0)
    assert counting_function([1.0, 2.0, 2.0, 3.0], 2.0) == 3


def test_convex_neumann_curl_bound():
    mu2, a1, holds = convex_neumann_curl_check(box_neumann_spectrum(PI, PI, PI, 4), box_maxwell_spectrum(PI, PI, PI, 1))
    assert (round(mu2), round(a1), holds) == (1, 2, True)
    with pytest.raises(SpectrumLengthError):
        convex_neumann_curl_check([0.0], [2.0])


def test_weyl_estimate_tracks_counting():
    assert weyl_estimate(100.0, PI ** 3) == pytest.approx(1000.0 * PI / 6.0)
    d = box_dirichlet_spectrum(PI, PI, PI, 2000)
    ceiling = float(d[-1]) * 0.999
    ratio = counting_function(d, ceiling) / weyl_estimate(ceiling, PI ** 3)
    # 有边界修正项，主项只给出数量级
    assert 0.5 < ratio < 1.0


@pytest.mark.parametrize("family", ["dirichlet", "neumann", "maxwell"])
@pytest.mark.parametrize("s", [0.5, 2.0, 3.7])
def test_spectrum_scales_with_box_size(family, s):
    a, b, c = 1.0, 1.3, 1.7
    base = oracle_spectrum(family, a, b, c, 30).values
    scaled = oracle_spectrum(family, s * a, s * b, s * c, 30).values
    assert_allclose(scaled, base / s ** 2, rtol=1e-12, atol=0)


def _admissible_by_hand(l, m, n, family):
    zeros = (l, m, n).count(0)
    return {"dirichlet": zeros == 0, "neumann": True, "maxwell": zeros <= 1}[family]


@pytest.mark.parametrize("family", ["dirichlet", "neumann", "maxwell"])
def test_enumeration_misses_no_triple(family):
    a, b, c = 1.0, 1.3, 1.7
    ceiling = 200.0
    expected = set()
    for l in range(40):
        for m in range(40):
            for n in range(40):
                v = PI ** 2 * (l ** 2 / a ** 2 + m ** 2 / b ** 2 + n ** 2 / c ** 2)
                if v <= ceiling and _admissible_by_hand(l, m, n, family):
                    expected.add((l, m, n))
    got = enumerate_modes(a, b, c, ceiling, family)
    assert {(mi.l, mi.m, mi.n) for _, mi in got} == expected
    assert len(got) == len(expected)
    vals = [v for v, _ in got]
    assert vals == sorted(vals)
    assert max(vals) <= ceiling
