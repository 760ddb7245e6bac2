"""Path loss over the placement geometry, plus per-round RIS channel draws.

Links are single-antenna.  For every round there is an uplink and a downlink
set of coefficients, drawn independently (no reciprocity):

* ``h_ub`` -- direct user/PS coefficient, shape ``(m,)``
* ``h_ur`` -- user/RIS coefficients, shape ``(m, N)``
* ``h_rb`` -- RIS/PS coefficients shared by all users, shape ``(N,)``

The uplink effective channel of user ``i`` is
``h_ub[i] + h_ur[i]^H diag(theta) h_rb`` and the downlink one is
``h_ub[i] + h_rb^H diag(theta) h_ur[i]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .rng import complex_normal, stream

SPEED_OF_LIGHT = 3e8


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class GeometryConfig:
    n_users: int = 10
    n_elements: int = 45
    carrier_hz: float = 915e6
    ps_position: tuple = (-50.0, 0.0, 10.0)
    ris_position: tuple = (0.0, 0.0, 10.0)
    x_range: tuple = (-20.0, 0.0)
    y_range: tuple = (-30.0, 30.0)
    # Pins every user; overrides the uniform draw when given.
    user_positions: Optional[tuple] = None


@dataclass(frozen=True)
class Topology:
    ps_position: np.ndarray
    ris_position: np.ndarray
    user_positions: np.ndarray
    n_elements: int
    carrier_hz: float

    @property
    def n_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def d_up(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.ps_position, axis=1)

    @property
    def d_ur(self) -> np.ndarray:
        return np.linalg.norm(self.user_positions - self.ris_position, axis=1)

    @property
    def d_rp(self) -> float:
        return float(np.linalg.norm(self.ris_position - self.ps_position))


def build_topology(config: GeometryConfig, rng: np.random.Generator) -> Topology:
    """Place the nodes; users are uniform over the configured x-y box at z=0."""
    if config.n_users < 1:
        raise ValueError("need at least one user")
    if config.n_elements < 1:
        raise ValueError("need at least one RIS element")
    if not config.carrier_hz > 0:
        raise ValueError("carrier frequency must be positive")
    ps = np.asarray(config.ps_position, dtype=float)
    ris = np.asarray(config.ris_position, dtype=float)
    if config.user_positions is not None:
        users = np.asarray(config.user_positions, dtype=float).reshape(-1, 3)
        if users.shape[0] != config.n_users:
            raise ValueError(
                f"user_positions holds {users.shape[0]} users, n_users is {config.n_users}"
            )
    else:
        (x0, x1), (y0, y1) = config.x_range, config.y_range
        if x1 < x0 or y1 < y0:
            raise ValueError("coordinate ranges must be ordered (low, high)")
        x = rng.uniform(x0, x1, config.n_users)
        y = rng.uniform(y0, y1, config.n_users)
        users = np.column_stack([x, y, np.zeros(config.n_users)])
    topo = Topology(ps, ris, users, int(config.n_elements), float(config.carrier_hz))
    if topo.d_rp <= 0 or np.any(topo.d_ur <= 0) or np.any(topo.d_up <= 0):
        raise ValueError("PS, RIS and user positions must be pairwise distinct")
    return topo


def _check_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} must be finite")


def path_loss_direct(d_up, carrier_hz, exponent=4.0, g_ps=db_to_linear(5), g_u=1.0):
    """Linear power gain ``G_PS G_U (c / (4 pi f_c d))^PL`` of the user/PS link."""
    _check_finite(d_up=d_up, carrier_hz=carrier_hz, exponent=exponent, g_ps=g_ps, g_u=g_u)
    d_up = np.asarray(d_up, dtype=float)
    if np.any(d_up <= 0) or carrier_hz <= 0:
        raise ValueError("distance and carrier frequency must be positive")
    return g_ps * g_u * (SPEED_OF_LIGHT / (4 * np.pi * carrier_hz * d_up)) ** exponent


def path_loss_ris(
    d_ur,
    d_rp,
    n_elements,
    carrier_hz,
    d_x=None,
    d_y=None,
    g_ps=db_to_linear(5),
    g_u=1.0,
    g_ris=db_to_linear(5),
):
    """Composite linear power gain of the user/RIS/PS link.

    ``G_PS G_U G_RIS N^2 d_x d_y lambda^2 / (64 pi^3 d_RP^2 d_UR^2)``, with the
    element size defaulting to ``d_x = d_y = (c / 10) / f_c``.
    """
    if d_x is None:
        d_x = SPEED_OF_LIGHT / 10 / carrier_hz
    if d_y is None:
        d_y = SPEED_OF_LIGHT / 10 / carrier_hz
    _check_finite(d_ur=d_ur, d_rp=d_rp, n=n_elements, carrier_hz=carrier_hz, d_x=d_x, d_y=d_y)
    d_ur = np.asarray(d_ur, dtype=float)
    if np.any(d_ur <= 0) or np.any(np.asarray(d_rp) <= 0) or carrier_hz <= 0:
        raise ValueError("distances and carrier frequency must be positive")
    wavelength = SPEED_OF_LIGHT / carrier_hz
    return (
        g_ps * g_u * g_ris * n_elements**2 * d_x * d_y * wavelength**2
        / (64 * np.pi**3 * np.asarray(d_rp) ** 2 * d_ur**2)
    )


@dataclass(frozen=True)
class ChannelConfig:
    path_loss_exponent: float = 4.0
    g_ps_dbi: float = 5.0
    g_u_dbi: float = 0.0
    g_ris_dbi: float = 5.0
    # Gains are divided by this reference before fading; transmit SNRs are
    # therefore quoted for a link of this power gain.
    reference_gain_db: float = -139.0
    # CSI error variance as a fraction of the uplink noise variance.
    csi_error_ratio: float = 0.1


@dataclass(frozen=True)
class PathLossTable:
    direct_gain: np.ndarray
    cascade_gain: np.ndarray
    g_ps: float
    g_u: float
    g_ris: float
    exponent: float
    reference_gain: float
    n_elements: int

    @property
    def ris_bs_variance(self) -> float:
        """Per-element E|h_RB,n|^2 (shared link, so it cannot depend on the user)."""
        c_bar = np.exp(np.mean(np.log(self.cascade_gain)))
        return float(np.sqrt(c_bar) / self.n_elements)

    @property
    def user_ris_variance(self) -> np.ndarray:
        """Per-element E|h_UR,i,n|^2 so that the product carries cascade/N^2."""
        return self.cascade_gain / (self.n_elements**2 * self.ris_bs_variance)


def path_loss_table(topology: Topology, config: ChannelConfig) -> PathLossTable:
    g_ps, g_u, g_ris = db_to_linear([config.g_ps_dbi, config.g_u_dbi, config.g_ris_dbi])
    ref = float(db_to_linear(config.reference_gain_db))
    direct = path_loss_direct(
        topology.d_up, topology.carrier_hz, config.path_loss_exponent, g_ps, g_u
    )
    cascade = path_loss_ris(
        topology.d_ur, topology.d_rp, topology.n_elements, topology.carrier_hz,
        g_ps=g_ps, g_u=g_u, g_ris=g_ris,
    )
    return PathLossTable(
        direct_gain=direct / ref,
        cascade_gain=cascade / ref,
        g_ps=float(g_ps),
        g_u=float(g_u),
        g_ris=float(g_ris),
        exponent=float(config.path_loss_exponent),
        reference_gain=ref,
        n_elements=topology.n_elements,
    )


@dataclass(frozen=True)
class LinkChannels:
    """All coefficients of one link direction."""

    h_ub: np.ndarray
    h_ur: np.ndarray
    h_rb: np.ndarray


@dataclass(frozen=True)
class ChannelRealization:
    uplink: LinkChannels
    downlink: LinkChannels
    round_index: int = 0


@dataclass(frozen=True)
class CsiRealization(ChannelRealization):
    estimation_variance: float = 0.0


UPLINK, DOWNLINK = 0, 1


def _draw_link(table, seed, t, direction, fading):
    m = table.direct_gain.shape[0]
    n = table.n_elements
    ur_var = table.user_ris_variance[:, None] * np.ones((1, n))
    rb_var = np.full(n, table.ris_bs_variance)
    if not fading:
        return LinkChannels(
            np.sqrt(table.direct_gain).astype(complex),
            np.sqrt(ur_var).astype(complex),
            np.sqrt(rb_var).astype(complex),
        )
    # Separate streams per path keep the direct draws identical across N.
    h_ub = complex_normal(stream(seed, "direct", t, direction), (m,), table.direct_gain)
    h_ur = complex_normal(stream(seed, "ris_user", t, direction), (m, n), ur_var)
    h_rb = complex_normal(stream(seed, "ris_bs", t, direction), (n,), rb_var)
    return LinkChannels(h_ub, h_ur, h_rb)


def draw_round_channels(
    table: PathLossTable, seed: int, t: int, fading: bool = True
) -> ChannelRealization:
    """Block-fading draw for round ``t``: Rayleigh coefficients scaled by sqrt(gain).

    ``fading=False`` is a test hook returning the deterministic ``sqrt(gain)``.
    """
    return ChannelRealization(
        uplink=_draw_link(table, seed, t, UPLINK, fading),
        downlink=_draw_link(table, seed, t, DOWNLINK, fading),
        round_index=int(t),
    )


def estimate_csi(
    channels: ChannelRealization, variance: float, rng: np.random.Generator
) -> CsiRealization:
    """Add i.i.d. complex Gaussian error of total variance ``variance`` to every path."""
    if variance < 0:
        raise ValueError("estimation variance must be nonnegative")

    def noisy(link: LinkChannels) -> LinkChannels:
        if variance == 0:
            return link
        return LinkChannels(
            link.h_ub + complex_normal(rng, link.h_ub.shape, variance),
            link.h_ur + complex_normal(rng, link.h_ur.shape, variance),
            link.h_rb + complex_normal(rng, link.h_rb.shape, variance),
        )

    return CsiRealization(
        uplink=noisy(channels.uplink),
        downlink=noisy(channels.downlink),
        round_index=channels.round_index,
        estimation_variance=float(variance),
    )


def perfect_csi(channels: ChannelRealization) -> CsiRealization:
    return CsiRealization(
        channels.uplink, channels.downlink, channels.round_index, estimation_variance=0.0
    )


def cascade(h_ur: np.ndarray, h_rb: np.ndarray) -> np.ndarray:
    """RIS-assisted link ``g = (h_ur^H diag(h_rb))^H`` so that ``g^H theta = h_ur^H Theta h_rb``.

    Broadcasts over a leading user axis of ``h_ur``.
    """
    h_ur = np.asarray(h_ur)
    h_rb = np.asarray(h_rb)
    if h_ur.shape[-1] != h_rb.shape[-1]:
        raise ValueError(f"length mismatch: {h_ur.shape[-1]} vs {h_rb.shape[-1]}")
    return h_ur * np.conj(h_rb)


def effective_channel(h_ub, g, theta) -> np.ndarray:
    """``h_ub + g^H theta``; vectorized over a leading user axis of ``g``."""
    g = np.asarray(g)
    theta = np.asarray(theta)
    if g.shape[-1] != theta.shape[-1]:
        raise ValueError(f"length mismatch: {g.shape[-1]} vs {theta.shape[-1]}")
    return np.asarray(h_ub) + np.conj(g) @ theta


def link_cascades(link: LinkChannels, direction: int) -> np.ndarray:
    """Per-user cascades ``(m, N)`` for one direction (downlink swaps the factor roles)."""
    if direction == UPLINK:
        return cascade(link.h_ur, link.h_rb)
    # h_rb^H Theta h_ur = cascade(h_rb, h_ur)^H theta
    return cascade(np.broadcast_to(link.h_rb, link.h_ur.shape), link.h_ur)


def effective_channels(realization: ChannelRealization, theta) -> tuple:
    """``(h_eff_uplink, h_eff_downlink)`` per user for the phase ``theta``."""
    up = effective_channel(
        realization.uplink.h_ub, link_cascades(realization.uplink, UPLINK), theta
    )
    down = effective_channel(
        realization.downlink.h_ub, link_cascades(realization.downlink, DOWNLINK), theta
    )
    return up, down


def channel_rows(realization: ChannelRealization):
    """Flatten a realization to ``(round, user, link, element, re, im)`` tuples.

    ``user`` is -1 for the shared RIS/PS link; ``element`` is -1 for direct links.
    """
    t = realization.round_index
    for name, link in (("uplink", realization.uplink), ("downlink", realization.downlink)):
        for i, h in enumerate(link.h_ub):
            yield (t, i, f"{name}_ub", -1, h.real, h.imag)
        for i, row in enumerate(link.h_ur):
            for n, h in enumerate(row):
                yield (t, i, f"{name}_ur", n, h.real, h.imag)
        for n, h in enumerate(link.h_rb):
            yield (t, -1, f"{name}_rb", n, h.real, h.imag)
