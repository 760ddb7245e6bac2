"""Round-by-round simulation of RIS-assisted over-the-air federated learning.

Each round: draw block-fading channels and CSI, design the RIS phase for the
anchor user, broadcast the global model over the noisy downlink, let every
reachable user pick its local-step count and train from its noisy copy, and
aggregate the channel-inverted updates over the air.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds
from .channel import (
    DOWNLINK, UPLINK, CsiRealization, build_topology, draw_round_channels,
    effective_channels, estimate_csi, link_cascades, path_loss_table, perfect_csi,
)
from .config import ExperimentConfig
from .data import load_bundled_mnist, load_mnist_idx, synth_dataset
from .learner import (
    CancellationTracker, Dataset, calibration_probes, choose_tau, estimate_G, evaluate,
    local_sgd, partition_one_class,
)
from .phase import (
    PhaseVector, ScaResult, build_phase_problem, objective, sca_solve, select_phase_user,
)
from .rng import stream
from .transport import (
    PowerPolicy, check_power, downlink_receive, downlink_scale, pc_factor, uplink_aggregate,
    uplink_scale,
)

log = logging.getLogger(__name__)


@dataclass
class RoundRecord:
    round: int
    phase_obj: float
    anchor: int
    sca_iters: int
    taus: np.ndarray
    feasible: np.ndarray
    transmitted: np.ndarray
    tx_power: np.ndarray
    h_up: np.ndarray
    h_up_hat: np.ndarray
    h_down: np.ndarray
    h_down_hat: np.ndarray
    beta_i: np.ndarray
    beta_d: float
    zero_model: bool
    train_loss: float
    test_acc: float
    test_loss: float
    h_ub_min: float
    h_ur_max: float
    h_rb_max: float
    g_min: float
    phi: np.ndarray = field(repr=False, default=None)
    sca_objectives: list = field(repr=False, default_factory=list)

    @property
    def mis_up(self) -> np.ndarray:
        return _misalign(self.h_up, self.h_up_hat)

    @property
    def mis_down(self) -> np.ndarray:
        return _misalign(self.h_down, self.h_down_hat)


def _misalign(h, h_hat):
    ok = np.abs(h_hat) > 0
    out = np.full(h.shape, np.nan)
    out[ok] = np.abs((h_hat[ok] - h[ok]) / h_hat[ok]) ** 2
    return out


@dataclass
class SimState:
    t: int
    w: np.ndarray
    phi: np.ndarray
    prev_taus: np.ndarray
    tracker: CancellationTracker
    prev_csi: Optional[CsiRealization] = None


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list
    log: bounds.RunLog
    diagnostics: dict
    G: float
    final_w: np.ndarray = field(repr=False, default=None)

    @property
    def final_accuracy(self) -> float:
        return self.records[-1].test_acc if self.records else float("nan")

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.test_acc for r in self.records])


def load_datasets(cfg: ExperimentConfig):
    d = cfg.data
    if d.source == "synthetic":
        rng = stream(cfg.seed, "dataset")
        full = synth_dataset(d.n_classes, d.per_class + d.test_per_class, d.n_features,
                             d.separation, rng)
        train_idx, test_idx = [], []
        for c in range(d.n_classes):
            idx = np.flatnonzero(full.labels == c)
            train_idx.append(idx[: d.per_class])
            test_idx.append(idx[d.per_class:])
        return full.subset(np.concatenate(train_idx)), full.subset(np.concatenate(test_idx))
    paths = (d.train_images, d.train_labels, d.test_images, d.test_labels)
    if all(p is None for p in paths):
        return load_bundled_mnist()
    if any(p is None for p in paths):
        raise ValueError("data: give all four IDX paths or none")
    return (
        load_mnist_idx(d.train_images, d.train_labels, d.n_classes),
        load_mnist_idx(d.test_images, d.test_labels, d.n_classes),
    )


class Experiment:
    """Static context of one run: topology, path loss, data, power policy and G."""

    def __init__(self, cfg: ExperimentConfig, datasets=None):
        self.cfg = cfg
        topo_seed = cfg.seed if cfg.topology_seed is None else cfg.topology_seed
        self.topology = build_topology(cfg.topology, stream(topo_seed, "topology"))
        self.table = path_loss_table(self.topology, cfg.channel)
        train, test = datasets if datasets is not None else load_datasets(cfg)
        self.train, self.test = train, test
        self.shards = partition_one_class(train, cfg.topology.n_users)
        self.alpha = np.array([s.alpha for s in self.shards])
        m = cfg.topology.n_users

        p = cfg.power
        p_up = np.broadcast_to(np.asarray(p.p_up, dtype=float), (m,)).copy()
        snr_u = np.inf if p.uplink_snr_db is None else p.uplink_snr_db
        snr_d = np.inf if p.downlink_snr_db is None else p.downlink_snr_db
        policy = PowerPolicy.from_snr(p_up, p.p_down, p.beta_u, snr_u, snr_d)
        if cfg.variant == "noiseless_downlink":
            policy = PowerPolicy(policy.p_up, policy.p_down, policy.beta_u, policy.sigma2_u, 0.0)
        self.policy = policy

        if cfg.variant == "perfect_csi":
            self.csi_variance = 0.0
        else:
            self.csi_variance = cfg.channel.csi_error_ratio * policy.sigma2_u

        lc = cfg.learning
        if lc.G == "auto":
            rng = stream(cfg.seed, "calibration")
            probes = calibration_probes(train.model_dim, rng)
            self.G = estimate_G(self.shards, probes, rng, lc.G_samples, lc.G_safety)
        else:
            self.G = float(lc.G)

        if lc.train_eval_samples is not None and lc.train_eval_samples < len(train):
            rng = stream(cfg.seed, "dataset", 1)
            idx = np.sort(rng.choice(len(train), lc.train_eval_samples, replace=False))
            self.train_eval = train.subset(idx)
        else:
            self.train_eval = train

        n = cfg.topology.n_elements
        self.static_phase = PhaseVector.random(n, stream(cfg.seed, "static_phase"))

    @property
    def m(self) -> int:
        return self.cfg.topology.n_users

    def initial_state(self) -> SimState:
        lc = self.cfg.learning
        n = self.cfg.topology.n_elements
        phi = self.static_phase.phi if self.cfg.variant == "static_phase" else np.zeros(n)
        return SimState(
            t=0,
            w=np.zeros(self.train.model_dim),
            phi=phi,
            prev_taus=np.full(self.m, lc.fixed_tau or lc.tau_max, dtype=int),
            tracker=CancellationTracker(self.m, lc.cancel_window),
        )

    def round_csi(self, channels):
        if self.csi_variance == 0:
            return perfect_csi(channels)
        csi = estimate_csi(channels, self.csi_variance,
                           stream(self.cfg.seed, "csi", channels.round_index))
        if self.cfg.variant == "noiseless_downlink":
            csi = CsiRealization(csi.uplink, channels.downlink, csi.round_index,
                                 csi.estimation_variance)
        return csi

    def design_phase(self, state: SimState, anchor: int, csi: CsiRealization):
        cfg, lc = self.cfg, self.cfg.learning
        if cfg.phase_csi == "stale" and state.prev_csi is not None:
            csi = state.prev_csi
        g_hat = link_cascades(csi.uplink, UPLINK)[anchor]
        problem = build_phase_problem(
            g_hat, csi.uplink.h_ub[anchor], self.policy.beta_u, self.alpha[anchor],
            lc.eta, self.G, self.policy.p_up[anchor],
        )
        if cfg.variant == "static_phase":
            return None, problem
        return sca_solve(problem, cfg.sca, state.phi), problem

    def _client(self, i, t, w, x_d, beta_d, h_down, h_down_hat, h_up_hat, ratio):
        """Downlink reception, tau choice, power check and local training for one user."""
        cfg, lc, pol = self.cfg, self.cfg.learning, self.policy
        out = {"tau": 1, "feasible": False, "report": None, "beta": np.nan + 0j}
        w_hat = downlink_receive(x_d, h_down[i], h_down_hat[i], beta_d, pol.sigma2_d,
                                 stream(cfg.seed, "downlink_noise", t, i))
        if w_hat is None:
            return out
        if lc.tau_schedule == "fixed":
            tau = lc.fixed_tau or lc.tau_max
            feasible = True
        else:
            choice = choose_tau(h_up_hat[i], pol.beta_u, self.alpha[i], lc.eta, self.G,
                                pol.p_up[i], lc.tau_max, ratio)
            tau, feasible = choice.tau, choice.feasible
        beta = pc_factor(pol.beta_u, self.alpha[i], tau, h_up_hat[i])
        out["tau"] = tau
        if beta is None:
            return out
        out["beta"] = beta
        feasible = feasible and check_power(beta, tau, lc.eta, self.G, pol.p_up[i])
        out["feasible"] = feasible
        if feasible:
            out["report"] = local_sgd(w_hat, self.shards[i], lc.eta, tau,
                                      stream(cfg.seed, "local_sgd", t, i))
        return out

    def run_round(self, state: SimState, pool: Optional[ThreadPoolExecutor] = None):
        cfg, lc, pol = self.cfg, self.cfg.learning, self.policy
        t, m = state.t, self.m
        channels = draw_round_channels(self.table, cfg.seed, t)
        csi = self.round_csi(channels)

        anchor = select_phase_user(state.prev_taus)
        sca, problem = self.design_phase(state, anchor, csi)
        if sca is None:
            phi, phase_obj, sca_iters, sca_objs = state.phi, float("nan"), 0, []
        else:
            phi, phase_obj = sca.phase.phi, sca.objective
            sca_iters, sca_objs = sca.n_iter, sca.objectives
        theta = np.exp(1j * phi)

        h_up, h_down = effective_channels(channels, theta)
        h_up_hat, h_down_hat = effective_channels(csi, theta)

        x_d, beta_d = downlink_scale(state.w, pol.p_down)
        zero_model = not np.any(state.w)
        ratios = [state.tracker.ratio(i) for i in range(m)]
        args = (t, state.w, x_d, beta_d, h_down, h_down_hat, h_up_hat)
        if pool is not None:
            outs = list(pool.map(lambda i: self._client(i, *args, ratios[i]), range(m)))
        else:
            outs = [self._client(i, *args, ratios[i]) for i in range(m)]

        taus = np.array([o["tau"] for o in outs], dtype=int)
        feasible = np.array([o["feasible"] for o in outs], dtype=bool)
        beta_i = np.array([o["beta"] for o in outs], dtype=complex)
        tx_power = np.zeros(m)
        transmitted = np.zeros(m, dtype=bool)
        signals = {}
        for i, o in enumerate(outs):
            rep = o["report"]
            if rep is None:
                continue
            state.tracker.update(i, float(np.linalg.norm(rep.delta)), lc.eta, rep.tau_used,
                                 self.G)
            x, power = uplink_scale(rep.delta, o["beta"])
            if power > pol.p_up[i]:
                # Realized update overshot the projected budget: stay silent.
                continue
            signals[i] = x
            tx_power[i] = power
            transmitted[i] = True

        w_next = uplink_aggregate(state.w, signals, h_up, pol.beta_u, pol.sigma2_u,
                                  stream(cfg.seed, "uplink_noise", t))
        test_acc, test_loss = evaluate(w_next, self.test)
        _, train_loss = evaluate(w_next, self.train_eval)

        up, down = channels.uplink, channels.downlink
        g_all = np.concatenate([np.abs(link_cascades(up, UPLINK)).ravel(),
                                np.abs(link_cascades(down, DOWNLINK)).ravel()])
        record = RoundRecord(
            round=t, phase_obj=phase_obj, anchor=anchor, sca_iters=sca_iters, taus=taus,
            feasible=feasible, transmitted=transmitted, tx_power=tx_power,
            h_up=h_up, h_up_hat=h_up_hat, h_down=h_down, h_down_hat=h_down_hat,
            beta_i=beta_i, beta_d=beta_d, zero_model=zero_model,
            train_loss=train_loss, test_acc=test_acc, test_loss=test_loss,
            h_ub_min=float(min(np.abs(up.h_ub).min(), np.abs(down.h_ub).min())),
            h_ur_max=float(max(np.abs(up.h_ur).max(), np.abs(down.h_ur).max())),
            h_rb_max=float(max(np.abs(up.h_rb).max(), np.abs(down.h_rb).max())),
            g_min=float(g_all.min()),
            phi=phi.copy(), sca_objectives=sca_objs,
        )
        new_state = SimState(t + 1, w_next, phi, taus, state.tracker, csi)
        return new_state, record

    def run_log(self, records, w0, loss_w0) -> bounds.RunLog:
        pol = self.policy
        T = len(records)
        return bounds.RunLog(
            alpha=self.alpha, p_up=pol.p_up, eta=self.cfg.learning.eta, G=self.G,
            n_elements=self.cfg.topology.n_elements, csi_variance=self.csi_variance,
            sigma2_u=pol.sigma2_u, sigma2_d=pol.sigma2_d,
            w0_norm2=float(w0 @ w0), loss_w0=loss_w0,
            losses=np.array([r.train_loss for r in records]),
            beta_u=np.full(T, pol.beta_u),
            beta_d=np.array([r.beta_d for r in records]),
            beta_i=np.array([r.beta_i for r in records]).reshape(T, self.m),
            h_up=np.array([r.h_up for r in records]).reshape(T, self.m),
            h_up_hat=np.array([r.h_up_hat for r in records]).reshape(T, self.m),
            h_down=np.array([r.h_down for r in records]).reshape(T, self.m),
            h_down_hat=np.array([r.h_down_hat for r in records]).reshape(T, self.m),
            h_ub_min=np.array([r.h_ub_min for r in records]),
            h_ur_max=np.array([r.h_ur_max for r in records]),
            h_rb_max=np.array([r.h_rb_max for r in records]),
            g_min=np.array([r.g_min for r in records]),
        )

    def run(self, rounds: Optional[int] = None, callback=None) -> RunResult:
        T = self.cfg.learning.rounds if rounds is None else rounds
        state = self.initial_state()
        w0 = state.w.copy()
        _, loss_w0 = evaluate(w0, self.train_eval)
        records = []
        pool = ThreadPoolExecutor(self.cfg.workers) if self.cfg.workers > 1 else None
        try:
            for _ in range(T):
                state, rec = self.run_round(state, pool)
                records.append(rec)
                if callback is not None:
                    callback(rec)
        finally:
            if pool is not None:
                pool.shutdown()
        run_log = self.run_log(records, w0, loss_w0)
        diag = bounds.diagnostics(run_log, self.cfg.bound_inputs(self.G), warn=False)
        return RunResult(self.cfg, records, run_log, diag, self.G, state.w)


def run_experiment(cfg: ExperimentConfig, datasets=None, rounds=None, callback=None) -> RunResult:
    return Experiment(cfg, datasets).run(rounds, callback)


def sweep_n(cfg: ExperimentConfig, n_values, seeds=None, datasets=None, rounds=None) -> dict:
    """Rerun the experiment for each RIS size; returns ``{N: [RunResult per seed]}``."""
    n_values = list(n_values)
    if not n_values:
        raise ValueError("n_values must be nonempty")
    seeds = [cfg.seed] if seeds is None else list(seeds)
    if datasets is None:
        datasets = load_datasets(cfg)
    out = {}
    for n in n_values:
        out[n] = [
            run_experiment(cfg.replace(**{"topology.n_elements": n, "seed": s}), datasets,
                           rounds)
            for s in seeds
        ]
    return out
