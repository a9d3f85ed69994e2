import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loqc_gates.errors import InsufficientDataError
from loqc_gates.fitting import (
    PUBLISHED_FITS,
    PUBLISHED_RATIOS,
    FrontierFit,
    fit_frontier,
    ordering_holds,
    ratio_report,
    report_csv,
    report_text,
)


def synthetic(s0, s1, s2, deltas):
    return [(d, s0 + s1 * np.sqrt(d) + s2 * d) for d in deltas]


@settings(max_examples=40, deadline=None)
@given(
    s0=st.floats(1e-3, 0.2),
    s1=st.floats(0, 0.5),
    s2=st.floats(-0.5, 0.5),
)
def test_exact_data_is_recovered(s0, s1, s2):
    fit = fit_frontier(synthetic(s0, s1, s2, np.geomspace(1e-4, 0.1, 12)))
    assert fit.s0 == pytest.approx(s0, abs=1e-9)
    assert fit.s1 == pytest.approx(s1, abs=1e-8)
    assert fit.s2 == pytest.approx(s2, abs=1e-7)
    assert fit.rms_residual < 1e-10


def test_window_excludes_points_beyond_delta_max():
    pts = synthetic(0.05, 0.08, 0.2, np.geomspace(1e-4, 0.03, 10))
    pts += [(0.05, 0.2), (0.1, 0.3)]
    fit = fit_frontier(pts, delta_max=0.03)
    assert fit.n_points == 10
    assert fit.ratio == pytest.approx(0.08 / 0.05)


def test_published_tables_are_consistent():
    for gate, (s0, s1, _) in PUBLISHED_FITS.items():
        assert s1 / s0 == pytest.approx(PUBLISHED_RATIOS[gate], abs=0.01)


def test_insufficient_data():
    with pytest.raises(InsufficientDataError, match="0.1"):
        fit_frontier(synthetic(0.07, 0.07, 0.02, [1e-3, 1e-2, 5e-2]))
    # points outside the window do not count
    with pytest.raises(InsufficientDataError):
        fit_frontier(synthetic(0.07, 0.07, 0.02, np.geomspace(0.2, 0.5, 10)))


def test_negative_delta_rejected():
    with pytest.raises(ValueError):
        fit_frontier([(-0.1, 0.1)] + synthetic(0.07, 0.07, 0.02, np.geomspace(1e-3, 0.1, 8)))


def _fit(s0, s1, s2=0.0):
    return FrontierFit(s0, s1, s2, 0.1, 0.0, 10)


def test_report_rows_and_ordering():
    fits = {g: _fit(*PUBLISHED_FITS[g]) for g in PUBLISHED_FITS}
    rows = ratio_report(fits)
    assert [r.gate for r in rows] == ["cnot", "cs90", "toffoli", "b"]
    assert ordering_holds(rows)
    tof = next(r for r in rows if r.gate == "toffoli")
    assert tof.reference_s0 == (0.0034, 0.0039)
    assert tof.closest_s0 == 0.0039
    swapped = dict(fits, b=_fit(0.0071, 0.001))
    assert not ordering_holds(ratio_report(swapped))


def test_report_formats():
    rows = ratio_report({"cnot": _fit(0.074, 0.0765), "toffoli": _fit(0.0035, 0.008)})
    csv_text = report_csv(rows)
    assert csv_text.splitlines()[0].startswith("gate,s0,s1")
    assert len(csv_text.splitlines()) == 3
    text = report_text(rows)
    assert "0.0034 *" in text
    assert "ordering" in text


def test_custom_gate_has_no_reference():
    rows = ratio_report({"mygate": _fit(0.01, 0.02)})
    assert rows[0].reference_ratio is None and rows[0].relative_deviation is None
