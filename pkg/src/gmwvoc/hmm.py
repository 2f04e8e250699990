"""Gaussian-emission hidden Markov models with diagonal covariances.

Observations are arrays of shape (T, d); a 1-D array is treated as d = 1.
Forward and backward tables are returned as natural logs.  The recursions
use per-step normalisation with accumulated log scale factors, which is
exact in the log domain and does not underflow for long sequences.
"""

from dataclasses import dataclass, replace

import numpy as np

VAR_MIN = 1e-8
_LOG_2PI = np.log(2.0 * np.pi)


class NonUniqueStationaryError(ValueError):
    """The transition matrix has more than one stationary distribution."""


@dataclass
class HmmModel:
    transmat: np.ndarray  # (n, n), rows sum to 1
    means: np.ndarray  # (n, d)
    variances: np.ndarray  # (n, d)
    initial: np.ndarray  # (n,)

    @property
    def n_states(self):
        return self.transmat.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    @classmethod
    def build(cls, transmat, means, variances, initial=None):
        """Assemble a model; ``initial`` defaults to the stationary distribution."""
        P = np.asarray(transmat, dtype=np.float64)
        n = P.shape[0]
        means = np.asarray(means, dtype=np.float64).reshape(n, -1)
        variances = np.maximum(np.asarray(variances, dtype=np.float64).reshape(n, -1), VAR_MIN)
        if initial is None:
            initial = stationary_or_uniform(P)
        return cls(P, means, variances, np.asarray(initial, dtype=np.float64))


def as_observations(obs):
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.ndim != 2 or obs.shape[0] < 1:
        raise ValueError("observations must have shape (T, d) with T >= 1")
    if not np.all(np.isfinite(obs)):
        raise ValueError("observations must be finite")
    return obs


def stationary_distribution(P):
    """Solve pi P = pi with sum(pi) = 1 as a linear system.

    Raises :class:`NonUniqueStationaryError` when the eigenvalue 1 is
    repeated (e.g. the identity), in which case any mixture of the
    stationary vectors would do.  Periodic chains such as [[0, 1], [1, 0]]
    still have a unique solution and are accepted.
    """
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    A = P.T - np.eye(n)
    if n > 1 and np.linalg.matrix_rank(A, tol=1e-10) < n - 1:
        raise NonUniqueStationaryError("stationary distribution is not unique")
    system = np.vstack([A, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(system, rhs, rcond=None)[0]
    # one step of iterative refinement
    pi = pi + np.linalg.lstsq(system, rhs - system @ pi, rcond=None)[0]
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def stationary_or_uniform(P):
    try:
        return stationary_distribution(P)
    except NonUniqueStationaryError:
        n = np.asarray(P).shape[0]
        return np.full(n, 1.0 / n)


def log_emissions(model, obs):
    """log N(y_t; mu_i, diag(var_i)) as a (T, n) table."""
    obs = as_observations(obs)
    if obs.shape[1] != model.dim:
        raise ValueError(f"observation dimension {obs.shape[1]} != model dimension {model.dim}")
    diff = obs[:, None, :] - model.means[None, :, :]
    return -0.5 * (np.sum(diff * diff / model.variances, axis=-1)
                   + np.sum(np.log(model.variances), axis=-1) + model.dim * _LOG_2PI)


def _scaled_emissions(logb):
    shift = logb.max(axis=1)
    return np.exp(logb - shift[:, None]), shift


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _forward_scaled(model, logb):
    b, shift = _scaled_emissions(logb)
    T, n = b.shape
    P = model.transmat
    alpha = np.empty((T, n))
    scale = np.empty(T)
    a = model.initial * b[0]
    scale[0] = a.sum()
    alpha[0] = a / scale[0]
    for t in range(1, T):
        a = (alpha[t - 1] @ P) * b[t]
        scale[t] = a.sum()
        alpha[t] = a / scale[t]
    log_c = _log(scale) + shift
    return alpha, log_c


def _backward_scaled(model, logb, log_c):
    b, shift = _scaled_emissions(logb)
    T, n = b.shape
    P = model.transmat
    beta = np.empty((T, n))
    beta[-1] = 1.0
    c = np.exp(log_c - shift)  # per-step normaliser of the scaled emissions
    for t in range(T - 2, -1, -1):
        beta[t] = (P @ (b[t + 1] * beta[t + 1])) / c[t + 1]
    return beta


def forward(model, obs):
    """Log forward table log P(X_t = i, y_1..y_t) and the total log-likelihood."""
    logb = log_emissions(model, obs)
    alpha, log_c = _forward_scaled(model, logb)
    cum = np.cumsum(log_c)
    return _log(alpha) + cum[:, None], float(cum[-1])


def backward(model, obs):
    """Log backward table log P(y_{t+1}..y_T | X_t = i); last row is 0."""
    logb = log_emissions(model, obs)
    _, log_c = _forward_scaled(model, logb)
    beta = _backward_scaled(model, logb, log_c)
    # scaled beta_t carries 1 / prod_{s>t} c_s
    tail = np.concatenate([np.cumsum(log_c[::-1])[::-1][1:], [0.0]])
    return _log(beta) + tail[:, None]


def posterior(log_alpha, log_beta):
    """State posteriors P(X_t = i | y_1..y_T), each row summing to 1."""
    s = np.asarray(log_alpha) + np.asarray(log_beta)
    s = s - s.max(axis=1, keepdims=True)
    g = np.exp(s)
    return g / g.sum(axis=1, keepdims=True)


def _estep(model, obs):
    logb = log_emissions(model, obs)
    alpha, log_c = _forward_scaled(model, logb)
    beta = _backward_scaled(model, logb, log_c)
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    b, shift = _scaled_emissions(logb)
    c = np.exp(log_c - shift)
    # xi summed over t: alpha_t(i) P_ij b_{t+1}(j) beta_{t+1}(j) / c_{t+1}
    weighted = (b[1:] * beta[1:]) / c[1:, None]
    xi = model.transmat * (alpha[:-1].T @ weighted)
    return gamma, xi, float(np.sum(log_c))


def _mstep(model, obs, gamma, xi):
    T = obs.shape[0]
    if T > 1:
        rows = xi.sum(axis=1, keepdims=True)
        P = np.where(rows > 0, xi / np.where(rows > 0, rows, 1.0), model.transmat)
    else:
        P = model.transmat.copy()
    occ = gamma.sum(axis=0)
    safe = np.where(occ > 0, occ, 1.0)[:, None]
    means = np.where(occ[:, None] > 0, gamma.T @ obs / safe, model.means)
    var = np.empty_like(means)
    for i in range(model.n_states):
        d = obs - means[i]
        var[i] = gamma[:, i] @ (d * d) / safe[i]
    var = np.where(occ[:, None] > 0, np.maximum(var, VAR_MIN), model.variances)
    return HmmModel(P, means, var, stationary_or_uniform(P))


def _blend(old, new, s):
    P = old.transmat + s * (new.transmat - old.transmat)
    P = P / P.sum(axis=1, keepdims=True)
    return HmmModel(P, old.means + s * (new.means - old.means),
                    np.maximum(old.variances + s * (new.variances - old.variances), VAR_MIN),
                    stationary_or_uniform(P))


def log_likelihood(model, obs):
    return forward(model, obs)[1]


def baum_welch(obs, n, seed_model, max_iters=100, tol=1e-6, return_trace=False):
    """Fit transition matrix and emissions by Baum-Welch.

    The initial distribution is tied to the transition matrix: after every
    M-step it is reset to the stationary distribution of the new P.  That
    coupling means a plain M-step is not guaranteed to raise the
    likelihood, so a candidate that lowers it is pulled back towards the
    current model by step halving (up to 20 times); if none helps, the fit
    stops.  Stops when the relative improvement is below ``tol``.
    """
    obs = as_observations(obs)
    if obs.shape[0] < n:
        raise ValueError(f"need at least {n} observations for {n} states, got {obs.shape[0]}")
    if seed_model.n_states != n:
        raise ValueError("seed model has the wrong number of states")
    model = replace(seed_model, initial=stationary_or_uniform(seed_model.transmat))
    gamma, xi, ll = _estep(model, obs)
    trace = [ll]
    for _ in range(max_iters):
        proposal = _mstep(model, obs, gamma, xi)
        accepted = None
        s = 1.0
        for _h in range(21):
            cand = proposal if s == 1.0 else _blend(model, proposal, s)
            cg, cxi, cll = _estep(cand, obs)
            if cll >= ll:
                accepted = (cand, cg, cxi, cll)
                break
            s *= 0.5
        if accepted is None:
            break
        model, gamma, xi, new_ll = accepted
        gain = new_ll - ll
        ll = new_ll
        trace.append(ll)
        if gain <= tol * abs(ll):
            break
    return (model, trace) if return_trace else model


def viterbi(model, obs):
    """Most probable state path; ties go to the lower state index."""
    logb = log_emissions(model, obs)
    T, n = logb.shape
    logP = _log(model.transmat)
    delta = _log(model.initial) + logb[0]
    back = np.zeros((T, n), dtype=np.intp)
    for t in range(1, T):
        cand = delta[:, None] + logP
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(n)] + logb[t]
    path = np.empty(T, dtype=np.intp)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def seed_model(obs, n):
    """Seed emissions from an equal-count split of frames ordered by energy.

    The first feature column is taken as the energy measure.  The
    transition matrix starts at 0.9 on the diagonal.
    """
    obs = as_observations(obs)
    order = np.argsort(obs[:, 0], kind="stable")
    groups = np.array_split(order, n)
    means = np.stack([obs[g].mean(axis=0) for g in groups])
    variances = np.stack([obs[g].var(axis=0) for g in groups])
    if n == 1:
        P = np.ones((1, 1))
    else:
        P = np.full((n, n), 0.1 / (n - 1))
        np.fill_diagonal(P, 0.9)
    return HmmModel.build(P, means, variances)


def reduce_restore(obs, n=2, max_iters=100, tol=1e-6):
    """Fit an n-state model, decode it, and replace frames by state means.

    Returns ``(path, model, restored)``; ``restored`` has at most ``n``
    distinct rows.
    """
    obs = as_observations(obs)
    model = baum_welch(obs, n, seed_model(obs, n), max_iters=max_iters, tol=tol)
    path = viterbi(model, obs)
    return path, model, model.means[path]
