import numpy as np
import pytest

from risota.channel import (
    DOWNLINK, UPLINK, ChannelConfig, GeometryConfig, build_topology, cascade,
    channel_rows, draw_round_channels, effective_channel, effective_channels, estimate_csi,
    link_cascades, path_loss_direct, path_loss_ris, path_loss_table,
)
from risota.rng import stream

C_LIGHT = 3e8
F_C = 915e6


def test_default_topology_box():
    topo = build_topology(GeometryConfig(), np.random.default_rng(7))
    assert topo.n_users == 10
    u = topo.user_positions
    assert np.all((u[:, 0] >= -20) & (u[:, 0] <= 0))
    assert np.all((u[:, 1] >= -30) & (u[:, 1] <= 30))
    assert np.all(u[:, 2] == 0)
    np.testing.assert_array_equal(topo.ps_position, [-50, 0, 10])
    np.testing.assert_array_equal(topo.ris_position, [0, 0, 10])


def test_pinned_user_distances():
    cfg = GeometryConfig(n_users=1, user_positions=((-20.0, 0.0, 0.0),))
    topo = build_topology(cfg, np.random.default_rng(0))
    assert topo.d_ur[0] == pytest.approx(np.sqrt(500))
    assert topo.d_rp == pytest.approx(50.0)
    # user/PS distance: (30, 0, 10)
    assert topo.d_up[0] == pytest.approx(np.sqrt(1000))


def test_pinned_distances_off_axis_ris():
    # RIS lifted so that RIS/PS distance matches sqrt(2600)
    cfg = GeometryConfig(n_users=1, user_positions=((-20.0, 0.0, 0.0),),
                         ris_position=(0.0, 0.0, 10.0), ps_position=(-50.0, 0.0, 0.0))
    topo = build_topology(cfg, np.random.default_rng(0))
    assert topo.d_ur[0] == pytest.approx(22.3607, abs=1e-4)
    assert topo.d_rp == pytest.approx(50.9902, abs=1e-4)


def test_topology_deterministic():
    a = build_topology(GeometryConfig(), np.random.default_rng(7))
    b = build_topology(GeometryConfig(), np.random.default_rng(7))
    np.testing.assert_array_equal(a.user_positions, b.user_positions)


def test_topology_rejects_coincident_positions():
    cfg = GeometryConfig(n_users=2, x_range=(0.0, 0.0), y_range=(0.0, 0.0),
                         ris_position=(0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        build_topology(cfg, np.random.default_rng(0))


def test_direct_path_loss_identity():
    d = C_LIGHT / (4 * np.pi * F_C)
    assert path_loss_direct(d, F_C, exponent=2, g_ps=1.0, g_u=1.0) == pytest.approx(1.0)


def test_direct_path_loss_calculator_value():
    # 10**0.5 * (3e8 / (4 pi 915e6 31.6228))**4, one-line calculator
    gain = path_loss_direct(31.6228, F_C, 4, 10**0.5, 1.0)
    assert gain == pytest.approx(1.465412531693246e-12, rel=1e-12)


def test_direct_path_loss_power_law():
    g1 = path_loss_direct(30.0, F_C, 4)
    g2 = path_loss_direct(60.0, F_C, 4)
    assert g1 / g2 == pytest.approx(16.0)


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_path_loss_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        path_loss_direct(bad, F_C)
    with pytest.raises(ValueError):
        path_loss_ris(bad, 50.0, 45, F_C)


def test_ris_path_loss_calculator_value():
    gain = path_loss_ris(22.3607, 50.9902, 45, F_C, g_ps=10**0.5, g_u=1.0, g_ris=10**0.5)
    assert gain == pytest.approx(9.07093087266116e-10, rel=1e-12)


def test_ris_path_loss_scaling():
    base = path_loss_ris(20.0, 50.0, 45, F_C)
    assert path_loss_ris(20.0, 50.0, 90, F_C) / base == pytest.approx(4.0)
    assert base / path_loss_ris(20.0, 100.0, 45, F_C) == pytest.approx(4.0)


@pytest.fixture(scope="module")
def table():
    topo = build_topology(GeometryConfig(n_users=4, n_elements=6), np.random.default_rng(1))
    return path_loss_table(topo, ChannelConfig())


def test_path_loss_table_direct_monotone():
    cfg = GeometryConfig(n_users=3, user_positions=((-20, 0, 0), (-10, 0, 0), (0, 0, 0)))
    topo = build_topology(cfg, np.random.default_rng(0))
    tab = path_loss_table(topo, ChannelConfig())
    order = np.argsort(topo.d_up)
    assert np.all(np.diff(tab.direct_gain[order]) < 0)
    assert np.all(tab.direct_gain > 0) and np.all(tab.cascade_gain > 0)


def test_cascade_split_reproduces_composite(table):
    per_element = table.user_ris_variance * table.ris_bs_variance
    np.testing.assert_allclose(per_element, table.cascade_gain / table.n_elements**2, rtol=1e-12)


def test_zero_fading_is_sqrt_gain(table):
    ch = draw_round_channels(table, 0, 0, fading=False)
    np.testing.assert_array_equal(ch.uplink.h_ub, np.sqrt(table.direct_gain))
    np.testing.assert_allclose(ch.uplink.h_rb, np.sqrt(table.ris_bs_variance))


def test_fading_second_moments():
    from risota.channel import PathLossTable
    n = 100_000
    gain = 2.5e-3
    tab = PathLossTable(np.full(n, gain), np.full(n, 40.0), 1, 1, 1, 4, 1, 1)
    ch = draw_round_channels(tab, 3, 0)
    for samples, expected in ((ch.uplink.h_ub, gain), (ch.downlink.h_ub, gain),
                              (ch.uplink.h_ur[:, 0], tab.user_ris_variance[0])):
        p = np.abs(samples) ** 2
        se = p.std(ddof=1) / np.sqrt(n)
        assert abs(p.mean() - expected) < 3 * se


def test_rounds_independent(table):
    n = 5_000
    a = np.array([draw_round_channels(table, 5, t).uplink.h_ub[1] for t in range(n)])
    b = np.array([draw_round_channels(table, 5, t + 1).uplink.h_ub[1] for t in range(n)])
    corr = np.corrcoef(a.real, b.real)[0, 1]
    assert abs(corr) < 3 / np.sqrt(n)


def test_channels_deterministic(table):
    a = draw_round_channels(table, 11, 4)
    b = draw_round_channels(table, 11, 4)
    for la, lb in ((a.uplink, b.uplink), (a.downlink, b.downlink)):
        for f in ("h_ub", "h_ur", "h_rb"):
            np.testing.assert_array_equal(getattr(la, f), getattr(lb, f))


def test_uplink_downlink_independent(table):
    ch = draw_round_channels(table, 2, 0)
    assert not np.allclose(ch.uplink.h_rb, ch.downlink.h_rb)


def test_perfect_csi_identity(table):
    ch = draw_round_channels(table, 0, 1)
    est = estimate_csi(ch, 0.0, np.random.default_rng(0))
    np.testing.assert_array_equal(est.uplink.h_ur, ch.uplink.h_ur)
    np.testing.assert_array_equal(est.downlink.h_ub, ch.downlink.h_ub)


def test_csi_error_statistics():
    from risota.channel import PathLossTable
    var = 0.1 * 0.01
    tab = PathLossTable(np.ones(1000), np.ones(1000), 1, 1, 1, 4, 1, 100)
    ch = draw_round_channels(tab, 0, 0)
    est = estimate_csi(ch, var, np.random.default_rng(9))
    delta = (est.uplink.h_ur - ch.uplink.h_ur).ravel()
    n = delta.size
    assert n == 100_000
    assert abs(delta.real.mean()) < 3 * delta.real.std() / np.sqrt(n)
    assert abs(delta.imag.mean()) < 3 * delta.imag.std() / np.sqrt(n)
    p = np.abs(delta) ** 2
    assert abs(p.mean() - var) < 3 * p.std(ddof=1) / np.sqrt(n)


def test_cascade_identity_phase():
    rng = np.random.default_rng(0)
    h_ur = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    h_rb = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    g = cascade(h_ur, h_rb)
    assert np.conj(g) @ np.ones(5) == pytest.approx(np.sum(np.conj(h_ur) * h_rb))


def test_cascade_matches_matrix_form_n2():
    h_ur = np.array([1 + 2j, -0.5 + 0.25j])
    h_rb = np.array([0.3 - 1j, 2 + 0.5j])
    theta = np.exp(1j * np.array([0.4, -1.3]))
    g = cascade(h_ur, h_rb)
    direct = h_ur.conj().T @ np.diag(theta) @ h_rb
    assert np.conj(g) @ theta == pytest.approx(direct, rel=1e-14)


def test_cascade_zero_and_mismatch():
    assert np.all(cascade(np.ones(3), np.zeros(3)) == 0)
    with pytest.raises(ValueError):
        cascade(np.ones(3), np.ones(4))


def test_effective_channel_cases():
    assert effective_channel(0.5 + 1j, np.zeros(4), np.ones(4)) == 0.5 + 1j
    rng = np.random.default_rng(3)
    h_ub = complex(rng.standard_normal(), rng.standard_normal())
    h_ur = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    h_rb = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    brute = h_ub + sum(np.conj(h_ur[n]) * theta[n] * h_rb[n] for n in range(3))
    assert effective_channel(h_ub, cascade(h_ur, h_rb), theta) == pytest.approx(brute)


def test_effective_channel_literal_expression_all_users(table):
    ch = draw_round_channels(table, 1, 2)
    theta = np.exp(1j * np.random.default_rng(0).uniform(0, 2 * np.pi, table.n_elements))
    up, down = effective_channels(ch, theta)
    Theta = np.diag(theta)
    for i in range(up.shape[0]):
        lit_up = ch.uplink.h_ub[i] + ch.uplink.h_ur[i].conj() @ Theta @ ch.uplink.h_rb
        lit_dn = ch.downlink.h_ub[i] + ch.downlink.h_rb.conj() @ Theta @ ch.downlink.h_ur[i]
        assert abs(up[i] - lit_up) <= 1e-12 * abs(lit_up)
        assert abs(down[i] - lit_dn) <= 1e-12 * abs(lit_dn)


def test_perfect_csi_effective_channels_equal(table):
    ch = draw_round_channels(table, 0, 0)
    est = estimate_csi(ch, 0.0, np.random.default_rng(0))
    theta = np.ones(table.n_elements)
    a = effective_channels(ch, theta)
    b = effective_channels(est, theta)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_channel_rows_count(table):
    ch = draw_round_channels(table, 0, 0)
    rows = list(channel_rows(ch))
    m, n = table.direct_gain.size, table.n_elements
    assert len(rows) == 2 * (m + m * n + n)
    assert rows[0][:4] == (0, 0, "uplink_ub", -1)


def test_link_cascades_directions(table):
    ch = draw_round_channels(table, 0, 0)
    up = link_cascades(ch.uplink, UPLINK)
    dn = link_cascades(ch.downlink, DOWNLINK)
    assert up.shape == dn.shape == (table.direct_gain.size, table.n_elements)
