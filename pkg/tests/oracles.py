"""Independent reference computations used by several test modules.

Everything here is written with scalar loops over the raw logged arrays and
shares no code with the package beyond reading the log fields.
"""
import math

import numpy as np


def ratio(h, h_hat):
    return complex(h) / complex(h_hat)


def v_oracle(log, t):
    m = len(log.alpha)
    total = 2.0 * log.w0_norm2
    for l in range(t):
        total += log.sigma2_u / float(log.beta_u[l]) ** 2
    acc = 0.0
    for l in range(t):
        for i in range(m):
            h_hat = complex(log.h_up_hat[l, i])
            if h_hat == 0 or not np.isfinite(h_hat):
                continue
            acc += float(log.alpha[i]) ** 2 * abs(ratio(log.h_up[l, i], h_hat)) ** 2
    return total + 2.0 * t * m * log.G**2 * log.eta**2 * acc


def terms_oracle(log, L, sigma2, G, F_star):
    T = len(log.beta_u)
    m = len(log.alpha)
    eta = log.eta
    a = [float(x) for x in log.alpha]

    optimization = 2.0 * (log.loss_w0 - F_star) / (T * eta)
    inv_bar = sum(1.0 / float(b) ** 2 for b in log.beta_u) / T
    uplink_noise = L * log.sigma2_u * inv_bar / eta

    local = 0.0
    for i in range(m):
        vals = [1.0 / abs(complex(log.beta_i[t, i])) ** 2 for t in range(T)
                if np.isfinite(log.beta_i[t, i])]
        inv_bi = sum(vals) / len(vals) if vals else 0.0
        local += a[i] ** 2 * float(log.p_up[i]) ** 2 * inv_bi
    local *= 2.0 * m * L**2 / (9.0 * eta**2 * G**2)

    stat = up_est = down_est = down_noise = 0.0
    for t in range(T):
        v_t = v_oracle(log, t)
        for i in range(m):
            hu_hat = complex(log.h_up_hat[t, i])
            if hu_hat != 0 and np.isfinite(hu_hat):
                r = ratio(log.h_up[t, i], hu_hat)
                stat += a[i] ** 2 * abs(r) ** 2
                up_est += a[i] ** 2 * abs(1 - r) ** 2
            hd_hat = complex(log.h_down_hat[t, i])
            if hd_hat != 0 and np.isfinite(hd_hat):
                rd = ratio(log.h_down[t, i], hd_hat)
                down_est += a[i] ** 2 * abs(1 - rd) ** 2 * v_t
                down_noise += a[i] ** 2 * log.sigma2_d / (abs(hd_hat) ** 2 * float(log.beta_d[t]) ** 2)
    return {
        "optimization_error": optimization,
        "uplink_noise_error": uplink_noise,
        "local_update_error": local,
        "statistical_error": L * eta * sigma2 * stat / T,
        "uplink_estimation_error": 2.0 * m * G**2 * up_est / T,
        "downlink_estimation_error": 2.0 * m * L**2 * down_est / T,
        "downlink_noise_error": 2.0 * m * L**2 * down_noise / T,
    }


def close(a, b, rel):
    if a == b:
        return True
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0)


def weighted_average_oracle(w, deltas, alpha, taus):
    """``w + sum_i alpha_i delta_i / tau_i`` with no channel code involved."""
    out = np.array(w, dtype=float)
    for i in sorted(deltas):
        out = out + alpha[i] * deltas[i] / taus[i]
    return out


def local_sgd_oracle(w_start, features, labels, n_classes, eta, picks):
    """Plain-loop single-sample SGD on the stacked (weights, biases) vector."""
    d_f = features.shape[1]
    w = np.array(w_start, dtype=float)
    for j in picks:
        x = features[j]
        z = np.array([w[c * d_f:(c + 1) * d_f] @ x + w[n_classes * d_f + c]
                      for c in range(n_classes)])
        p = np.exp(z - z.max())
        p /= p.sum()
        p[labels[j]] -= 1.0
        for c in range(n_classes):
            w[c * d_f:(c + 1) * d_f] -= eta * p[c] * x
            w[n_classes * d_f + c] -= eta * p[c]
    return w - np.asarray(w_start, dtype=float)


def ota_round_case(case_seed):
    """One noiseless perfect-CSI round on a random small setup.

    Returns ``(relative error vs the weighted-average oracle, users that transmitted)``.
    """
    from risota.config import ExperimentConfig
    from risota.rng import stream
    from risota.simulation import Experiment

    r = np.random.default_rng(case_seed)
    m = int(r.integers(2, 6))
    d_f = int(r.integers(1, 50 // m))  # d = m (d_f + 1) <= 50
    variant = ("perfect_csi", "static_phase")[case_seed % 2]
    cfg = ExperimentConfig().replace(**{
        "topology.n_users": m, "topology.n_elements": int(r.integers(1, 20)),
        "data.source": "synthetic", "data.n_classes": m, "data.n_features": d_f,
        "data.per_class": int(r.integers(5, 30)), "data.test_per_class": 5,
        "power.uplink_snr_db": None, "power.downlink_snr_db": None,
        "power.beta_u": float(10 ** r.uniform(0, 2)), "learning.eta": 0.05,
        "variant": variant, "seed": case_seed,
    })
    exp = Experiment(cfg)
    state = exp.initial_state()
    state.w = r.standard_normal(exp.train.model_dim)
    state.phi = r.uniform(0, 2 * np.pi, cfg.topology.n_elements)
    w_t = state.w.copy()
    new, rec = exp.run_round(state)
    deltas = {}
    for i in np.flatnonzero(rec.transmitted):
        shard = exp.shards[i]
        picks = stream(cfg.seed, "local_sgd", 0, int(i)).integers(
            0, len(shard.data), size=int(rec.taus[i]))
        deltas[int(i)] = local_sgd_oracle(w_t, shard.data.features, shard.data.labels, m,
                                          cfg.learning.eta, picks)
    want = weighted_average_oracle(w_t, deltas, exp.alpha, rec.taus)
    err = np.linalg.norm(new.w - want) / np.linalg.norm(want)
    return float(err), len(deltas)
