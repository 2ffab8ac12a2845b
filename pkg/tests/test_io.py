import math

import numpy as np
import pytest

from qbm_entanglement import io as qio
from qbm_entanglement import analysis as an
from qbm_entanglement.bath_kernels import BathSpec
from qbm_entanglement.dynamics import ChannelKind, ChannelModel, evolve, squeezed_initial_state


@pytest.fixture(scope="module")
def traj():
    m = ChannelModel(ChannelKind.MARKOVIAN_REFERENCE, BathSpec(0.3, 10.0, 1.0))
    return evolve(m, squeezed_initial_state(1.0), np.linspace(0, 3, 13))


def test_trajectory_header(traj, tmp_path):
    p = tmp_path / "t.csv"
    qio.write_trajectory_csv(traj, p)
    first = p.read_text().splitlines()[0]
    assert first.startswith("t,EN,S,mu,mu1,mu2,I,nu_tilde_minus,Vqq1,Vq1p1,")
    assert len(first.split(",")) == 18


def test_trajectory_round_trip_is_exact(traj, tmp_path):
    p = tmp_path / "t.csv"
    qio.write_trajectory_csv(traj, p)
    back = qio.read_trajectory_csv(p)
    assert np.array_equal(back.times, traj.times)
    for a, b in zip(back.states, traj.states):
        assert np.array_equal(a.v, b.v)
    for name in traj.diagnostics:
        assert np.array_equal(back[name], traj[name])


def test_numbers_carry_enough_digits(traj):
    body = qio.trajectory_csv_text(traj).splitlines()[1:]
    for line in body:
        for field in line.split(","):
            x = float(field)
            if x != 0.0 and math.isfinite(x):
                # shortest round-trip form: at least 9 digits unless the value is exactly shorter
                assert field == repr(x)


def test_format_number():
    assert qio.format_number(0.1) == "0.1"
    assert qio.format_number(float("inf")) == "inf"
    assert qio.format_number(float("nan")) == "nan"
    assert qio.format_number(True) == "true"
    assert qio.format_number(np.int64(3)) == "3"
    x = 1 / 3
    assert float(qio.format_number(x)) == x


def test_scan_csv_round_trip(tmp_path):
    rep = an.stationary_report(an.com_bath(2.0, 10.0, 0.25))
    rows = [qio.scan_row(2.0, 10.0, 0.25, rep), qio.scan_row(0.1, 10.0, 0.25, None)]
    p = tmp_path / "s.csv"
    qio.atomic_write_text(p, ",".join(qio.SCAN_HEADER) + "\n" + "\n".join(qio.format_row(r) for r in rows) + "\n")
    back = qio.read_scan_csv(p)
    assert back[0]["ERx"] == rep.e_rx and back[0]["entangled"] is True
    assert back[0]["ENinf"] == rep.e_n_inf
    assert back[1]["gamma"] == 0.1 and back[1]["r2"] is None


def test_wrong_headers_rejected(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        qio.read_scan_csv(p)
    with pytest.raises(ValueError):
        qio.read_trajectory_csv(p)


def test_json_text_spells_non_finite():
    txt = qio.json_text({"a": float("inf"), "b": np.float64(0.5), "c": np.bool_(True)})
    assert '"inf"' in txt and "0.5" in txt and "true" in txt
