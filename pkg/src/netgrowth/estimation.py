"""Parameter estimation: plug-in noise level, approximate EM for the
attachment parameter (with beta normalized to 1), root-count concentration
resampling, and Metropolis updates for the sequential-noise parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .graph import LabeledGraph
from .models import InvalidParamsError, ModelParams

ALPHA_UA_SENTINEL = math.inf


def estimate_theta(n: int, m: int) -> float:
    """Plug-in noise estimate: excess edges over the possible non-tree pairs."""
    if n < 2:
        raise InvalidParamsError("need at least two nodes")
    total_pairs = n * (n - 1) // 2
    if m < n - 1:
        raise InvalidParamsError("fewer edges than a spanning tree; not a single-root graph")
    if m > total_pairs:
        raise InvalidParamsError("more edges than node pairs")
    return (m - (n - 1)) / (total_pairs - (n - 1))


@dataclass(frozen=True)
class EmConfig:
    alpha_cap: float = 200.0
    tol: float = 1e-3
    max_iter: int = 100
    init: float = 1.0


def _limit_tree_degree_logpmf(alpha: float, max_s: int) -> np.ndarray:
    """Log of the limiting tree-degree distribution under beta=1 attachment.

    P(s) = (2+a)/(3+2a) * prod_{j<s} (j+a)/(j+3+2a); the uniform-attachment
    limit (alpha -> inf) is geometric with ratio 1/2.
    """
    out = np.empty(max_s + 1)
    out[0] = -math.inf
    if math.isinf(alpha):
        for s in range(1, max_s + 1):
            out[s] = -s * math.log(2.0)
        return out
    out[1] = math.log(2.0 + alpha) - math.log(3.0 + 2.0 * alpha)
    for s in range(2, max_s + 1):
        out[s] = out[s - 1] + math.log(s - 1 + alpha) - math.log(s + 2 + 2.0 * alpha)
    return out


def degree_tail_weights(graph: LabeledGraph, theta: float, alpha: float) -> np.ndarray:
    """Expected counts W(j) of nodes whose latent tree degree exceeds j.

    Each node's tree degree is given the limiting attachment distribution as
    a prior and combined with a Binomial(n-s, theta) noise-degree likelihood;
    the tails are then rescaled so that sum_j W(j) = n - 2 exactly, which is
    what the complete-data sufficient statistic satisfies.
    """
    n = graph.node_count
    degs = [graph.degree(u) for u in range(n)]
    max_deg = max(degs)
    counts = np.bincount(degs, minlength=max_deg + 1)
    prior = _limit_tree_degree_logpmf(alpha, max_deg)
    log_theta = math.log(theta) if theta > 0 else -math.inf
    log_1m = math.log1p(-theta) if theta < 1 else -math.inf

    tail_by_degree = {}
    for k in range(1, max_deg + 1):
        if counts[k] == 0:
            continue
        s_vals = np.arange(1, k + 1)
        if theta == 0.0:
            post = np.zeros(k)
            post[-1] = 1.0
        else:
            # log Binomial(n-s, theta) pmf at k-s
            lb = (np.array([math.lgamma(n - s + 1) - math.lgamma(k - s + 1)
                            - math.lgamma(n - k + 1) for s in s_vals])
                  + (k - s_vals) * log_theta + (n - k) * log_1m)
            lw = lb + prior[1:k + 1]
            lw -= lw.max()
            post = np.exp(lw)
            post /= post.sum()
        # tail(j) = P(tree degree > j), j = 1..k-1
        tail = np.cumsum(post[::-1])[::-1]
        tail_by_degree[k] = tail
    w = np.zeros(max_deg + 1)
    for k, tail in tail_by_degree.items():
        for j in range(1, k):
            w[j] += counts[k] * tail[j]
    total = w.sum()
    if total > 0:
        w *= (n - 2) / total
    return w


def _m_step_objective(alpha: float, w: np.ndarray, n: int) -> float:
    js = np.nonzero(w)[0]
    val = float((w[js] * np.log(js + alpha)).sum())
    ks = np.arange(3, n + 1)
    val -= float(np.log(2.0 * (ks - 2) + (ks - 1) * alpha).sum())
    return val


def _golden_section_max(f, lo: float, hi: float, tol: float = 1e-4) -> float:
    invphi = (math.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def em_estimate_alpha(graph: LabeledGraph, theta: float,
                      config: Optional[EmConfig] = None) -> float:
    """Approximate EM estimate of the attachment parameter with beta = 1.

    Returns math.inf (the uniform-attachment sentinel) when the maximizer
    runs into the cap, and is deterministic: it depends on the input only
    through the degree multiset.
    """
    if config is None:
        config = EmConfig()
    n = graph.node_count
    if n < 4 or graph.edge_count < n - 1:
        return ALPHA_UA_SENTINEL
    alpha = config.init
    for _ in range(config.max_iter):
        w = degree_tail_weights(graph, theta, alpha)
        if not w.any():
            return ALPHA_UA_SENTINEL
        nxt = _golden_section_max(lambda a: _m_step_objective(a, w, n),
                                  0.0, config.alpha_cap)
        if nxt >= config.alpha_cap * 0.995:
            return ALPHA_UA_SENTINEL
        if abs(nxt - alpha) < config.tol:
            return nxt
        alpha = nxt
    return alpha


def estimate_attachment(graph: LabeledGraph) -> tuple[float, float, float]:
    """(alpha, beta, theta) from a graph: theta plug-in, alpha by EM, beta = 1.

    The uniform-attachment sentinel keeps beta = 0 with alpha = 1 semantics
    downstream via ModelParams.attachment.
    """
    theta = estimate_theta(graph.node_count, graph.edge_count)
    alpha = em_estimate_alpha(graph, theta)
    return alpha, 1.0, theta


def sample_alpha0(current_alpha0: float, k: int, n: int, params: ModelParams,
                  rng, prior_rate: float = 0.1) -> float:
    """One posterior draw of the new-root concentration given the tree count.

    The root-creation process is a Chinese-restaurant process in the rescaled
    concentration a = alpha0 / (2*beta + alpha), so the standard auxiliary
    Beta-variable scheme applies, with the Exponential(prior_rate) prior on
    alpha0 mapping to a Gamma(1, prior_rate * (2*beta + alpha)) prior on a.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    alpha, beta = params.attachment
    c = 2.0 * beta + alpha
    a = current_alpha0 / c
    rate0 = prior_rate * c
    eta = rng.beta(a + 1.0, max(n, 1))
    rate = rate0 - math.log(eta)
    odds = k / (n * rate)
    shape = 1.0 + k if rng.random() < odds / (1.0 + odds) else float(k)
    a_new = rng.gamma(shape, 1.0 / rate)
    return c * max(a_new, 1e-12)


# -- sequential-noise parameter sampling ---------------------------------------------


def _tree_log_likelihood_alpha(deg: np.ndarray, n: int, alpha: float) -> float:
    """Log-likelihood of the attachment parameter given the latent tree (beta=1)."""
    total = 0.0
    for d in deg:
        for j in range(1, int(d)):
            total += math.log(j + alpha)
    ks = np.arange(3, n + 1)
    total -= float(np.log(2.0 * (ks - 2) + (ks - 1) * alpha).sum())
    return total


def seq_param_update(state, proposal_scale: float = 0.25,
                     prior_rate: float = 0.1) -> tuple[float, float, float]:
    """One Metropolis step on each of (alpha, theta, alpha_tilde), beta fixed at 1.

    Proposals are multiplicative log-normal shifts with the Jacobian folded
    into the acceptance ratio; priors are Exponential(prior_rate).  Mutates
    the chain state's parameters and noise model in place.
    """
    from . import seqnoise

    ctx = state.seq_ctx
    params = state.params
    rng = state.rng
    n = ctx.n

    alpha = params.alpha
    if math.isfinite(alpha) and alpha > 0:
        deg = np.array([len(s) for s in ctx.tree_nbrs])
        prop = alpha * math.exp(proposal_scale * rng.standard_normal())
        cur_ll = _tree_log_likelihood_alpha(deg, n, alpha) - prior_rate * alpha
        new_ll = _tree_log_likelihood_alpha(deg, n, prop) - prior_rate * prop
        log_r = new_ll - cur_ll + math.log(prop / alpha)
        if log_r >= 0 or rng.random() < math.exp(log_r):
            alpha = prop

    cur_params = replace(params, alpha=alpha)
    cur_model = ctx.model
    cur_noise_ll = seqnoise.noise_log_likelihood(ctx)
    for name in ("theta", "alpha_tilde"):
        cur_val = getattr(cur_params, name)
        if cur_val <= 0:
            continue
        prop = cur_val * math.exp(proposal_scale * rng.standard_normal())
        trial = replace(cur_params, **{name: prop})
        trial_model = seqnoise.SeqNoiseModel(trial, n)
        ctx.model = trial_model
        new_noise_ll = seqnoise.noise_log_likelihood(ctx)
        ctx.model = cur_model
        log_r = (new_noise_ll - cur_noise_ll
                 - prior_rate * (prop - cur_val)
                 + math.log(prop / cur_val))
        if log_r >= 0 or rng.random() < math.exp(log_r):
            cur_params = trial
            cur_noise_ll = new_noise_ll
            cur_model = trial_model
            ctx.model = trial_model

    state.params = cur_params
    ctx.model = cur_model
    return cur_params.alpha, cur_params.theta, cur_params.alpha_tilde
