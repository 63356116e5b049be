"""On-demand verification suites behind ``parasac verify``.

Each suite returns a JSON-serializable report with a ``passed`` flag. All
numerical checks run in float64.
"""

from __future__ import annotations

import itertools
import time

import numpy as np
from scipy import integrate

from ..approximator import ACTIVATIONS, MlpParams, gradient_check, mlp_backward, mlp_forward, \
    mlp_init
from ..bounds import ActionBounds
from ..policy import PolicyNet, actor_init, log_prob
from ..replay import NStepWindow, oracle_nstep_target
from ..sac_core import CriticEnsemble, actor_loss_and_grads, critic_loss_and_grads, \
    nstep_targets, q_values, soft_value, temperature_loss

# ---------------------------------------------------------------- oracle-check


def mask_patterns(n: int):
    """Every ``(dones, timeouts)`` pair of length ``n`` with ``b <= d``.

    Each step is running (0, 0), a failure (1, 0) or a timeout (1, 1).
    """
    states = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0))
    for combo in itertools.product(states, repeat=n):
        yield np.array([c[0] for c in combo]), np.array([c[1] for c in combo])


def _random_instance(rng, obs_dim=3, action_dim=2):
    bounds = ActionBounds(-rng.uniform(0.5, 2.0, action_dim), rng.uniform(0.5, 2.0, action_dim))
    policy = actor_init([obs_dim, 8], action_dim, init_std=rng.uniform(0.1, 1.0),
                        mean_init_std=0.3, seed=rng)
    critics = CriticEnsemble.create(obs_dim, action_dim, [8], 1e-3, 0.01, seed=rng).online
    return bounds, policy, critics


def oracle_check(num_windows: int = 10_000, max_n: int = 8, gamma: float = 0.97,
                 seed: int = 0, tol: float = 1e-9) -> dict:
    """Batched n-step targets against the looped oracle, window by window.

    All ``3^n`` mask patterns for every ``n`` are included when the budget
    allows; the rest of the budget is random patterns.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    obs_dim, action_dim = 3, 2
    bounds, policy, critics = _random_instance(rng, obs_dim, action_dim)
    alpha = 0.2

    by_n: dict[int, list] = {n: [] for n in range(1, max_n + 1)}
    exhaustive = sum(3 ** n for n in by_n) <= num_windows
    if exhaustive:
        for n in by_n:
            by_n[n].extend(mask_patterns(n))
    while sum(len(v) for v in by_n.values()) < num_windows:
        n = int(rng.integers(1, max_n + 1))
        states = rng.integers(0, 3, size=n)
        by_n[n].append(((states > 0).astype(float), (states == 2).astype(float)))

    worst, count = 0.0, 0
    for n, patterns in by_n.items():
        if not patterns:
            continue
        B = len(patterns)
        w = NStepWindow(
            obs=rng.standard_normal((B, obs_dim)),
            action=rng.uniform(-0.5, 0.5, (B, action_dim)),
            rewards=rng.uniform(-10, 10, (B, n)),
            dones=np.stack([p[0] for p in patterns]),
            timeouts=np.stack([p[1] for p in patterns]),
            next_obs=rng.standard_normal((B, n, obs_dim)),
        )
        noise = rng.standard_normal((B, n, action_dim))
        batched = nstep_targets(w, policy, critics, alpha, gamma, bounds, noise=noise)
        for i in range(B):
            win = w[i]

            def value(o, i=i, win=win):
                k = int(np.nonzero(np.all(win.next_obs == o, axis=1))[0][0])
                return float(soft_value(policy, critics, o[None], alpha, bounds,
                                        noise=noise[i, k][None])[0])

            ref = oracle_nstep_target(win, value, gamma, n)
            worst = max(worst, abs(ref - float(batched[i])))
        count += B
    return {"suite": "oracle-check", "windows": count, "exhaustive_masks": exhaustive,
            "max_abs_deviation": worst, "tolerance": tol, "passed": bool(worst < tol),
            "seconds": time.perf_counter() - t0}


# ------------------------------------------------------------------ grad-check


def _check_mlp(rng, act):
    dims = [int(rng.integers(1, 9)) for _ in range(int(rng.integers(2, 5)))]
    net = mlp_init(dims, act, rng)
    _perturb_biases(net, rng)
    x = rng.standard_normal((int(rng.integers(1, 6)), dims[0]))
    up = rng.standard_normal((x.shape[0], dims[-1]))
    f = lambda: float(np.sum(up * mlp_forward(net, x)))
    grads, dx = mlp_backward(net, x, up)
    err = gradient_check(f, net.arrays(), grads.arrays())
    return max(err, gradient_check(f, [x], [dx]))


def _perturb_biases(net: MlpParams, rng):
    # zero biases put ReLU kinks on the probe points, so move them off
    for b in net.biases:
        b += rng.uniform(-0.5, 0.5, b.shape)


def _check_critic(rng, act):
    obs_dim, action_dim = int(rng.integers(1, 6)), int(rng.integers(1, 4))
    ens = CriticEnsemble.create(obs_dim, action_dim, [int(rng.integers(2, 9))], 1e-3, 0.01,
                                activation=act, seed=rng)
    for q in ens.online:
        _perturb_biases(q, rng)
    B = int(rng.integers(2, 8))
    obs = rng.standard_normal((B, obs_dim))
    action = rng.uniform(-1, 1, (B, action_dim))
    y = rng.uniform(-3, 3, B)
    _, grads = critic_loss_and_grads(ens.online, obs, action, y)
    arrays = [a for q in ens.online for a in q.arrays()]
    f = lambda: critic_loss_and_grads(ens.online, obs, action, y)[0]
    return gradient_check(f, arrays, [g for gs in grads for g in gs])


def _check_actor(rng, act):
    obs_dim, action_dim = int(rng.integers(1, 6)), int(rng.integers(1, 4))
    bounds = ActionBounds(-rng.uniform(0.5, 2, action_dim), rng.uniform(0.5, 2, action_dim))
    policy = actor_init([obs_dim, int(rng.integers(2, 9))], action_dim,
                        init_std=rng.uniform(0.2, 1.0), mean_init_std=0.5, seed=rng,
                        activation=act)
    _perturb_biases(policy.net, rng)
    critics = CriticEnsemble.create(obs_dim, action_dim, [6], 1e-3, 0.01, activation=act,
                                    seed=rng).online
    B = int(rng.integers(2, 8))
    obs = rng.standard_normal((B, obs_dim))
    noise = rng.standard_normal((B, action_dim))
    alpha = rng.uniform(0.01, 1.0)
    _, grads, _ = actor_loss_and_grads(policy, critics, obs, alpha, bounds, noise)
    f = lambda: actor_loss_and_grads(policy, critics, obs, alpha, bounds, noise)[0]
    return gradient_check(f, policy.arrays(), grads)


def _check_temperature(rng, act):
    log_alpha = np.array(rng.uniform(-5, 1))
    log_probs = rng.standard_normal(int(rng.integers(1, 50)))
    target = -0.167 * int(rng.integers(1, 13))
    _, grad = temperature_loss(float(log_alpha), log_probs, target)
    f = lambda: temperature_loss(float(log_alpha), log_probs, target)[0]
    return gradient_check(f, [log_alpha], [np.array(grad)])


GRAD_CASES = {"mlp": _check_mlp, "critic_loss": _check_critic, "actor_loss": _check_actor,
              "temperature_loss": _check_temperature}


def grad_check(instances: int = 100, seed: int = 0, tol: float = 1e-4) -> dict:
    """Analytic gradients against central differences on random small instances.

    Instances cycle through the four gradient sources and all activations.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    names = list(GRAD_CASES)
    worst = {k: 0.0 for k in names}
    for i in range(instances):
        name = names[i % len(names)]
        act = ACTIVATIONS[(i // len(names)) % len(ACTIVATIONS)]
        worst[name] = max(worst[name], GRAD_CASES[name](rng, act))
    overall = max(worst.values())
    return {"suite": "grad-check", "instances": instances, "max_rel_error": overall,
            "per_case": worst, "tolerance": tol, "passed": bool(overall < tol),
            "seconds": time.perf_counter() - t0}


# --------------------------------------------------------------- density-check


def constant_head_policy(mu: float, sigma: float) -> PolicyNet:
    """1-D policy whose outputs ignore the observation: mean ``mu``, std ``sigma``."""
    net = MlpParams([np.zeros((2, 1))], [np.array([mu, np.log(sigma)])], "identity")
    return PolicyNet(net)


def squashed_density_mass(mu: float, sigma: float, b: float, c: float) -> float:
    """Integral of ``exp(log_prob)`` over the open action interval ``(b - c, b + c)``."""
    policy = constant_head_policy(mu, sigma)
    bounds = ActionBounds(np.array([b - c]), np.array([b + c]))
    obs = np.zeros((1, 1))

    def density(a):
        x = np.arctanh(np.clip((a - b) / c, -1 + 1e-16, 1 - 1e-16))
        return float(np.exp(log_prob(policy, obs, np.array([[x]]), bounds)[0]))

    peak = b + c * np.tanh(mu)
    mass, _ = integrate.quad(density, b - c, b + c, points=[peak], limit=500,
                             epsabs=1e-10, epsrel=1e-10)
    return float(mass)


def density_check(configs: int = 20, seed: int = 0, lo: float = 0.999, hi: float = 1.001) -> dict:
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(configs):
        mu, sigma = rng.uniform(-2, 2), float(np.exp(rng.uniform(-3, 1)))
        b, c = rng.uniform(-3, 3), rng.uniform(0.1, 5)
        rows.append({"mu": mu, "sigma": sigma, "b": b, "c": c,
                     "mass": squashed_density_mass(mu, sigma, b, c)})
    masses = [r["mass"] for r in rows]
    return {"suite": "density-check", "configs": rows, "min_mass": min(masses),
            "max_mass": max(masses), "range": [lo, hi],
            "passed": bool(all(lo <= m <= hi for m in masses))}


# ---------------------------------------------------------------- timeout-bias


def chain_value(trainer) -> float:
    """Mean online-critic value at the chain's initial state."""
    obs = trainer.normalizer.normalize(np.zeros((1, 1)), dtype=trainer.dtype)
    action = trainer.agent.act(obs, deterministic=True).action
    return float(q_values(trainer.agent.critics.online, obs, action).mean())


def timeout_bias(config_ref: str = "chain", seed: int = 0, tol: float = 0.05,
                 min_gap: float = 0.15, overrides: dict | None = None) -> dict:
    """Paired ChainEnv runs with and without timeout bootstrapping."""
    from .config import load_config
    from .trainer import train

    t0 = time.perf_counter()
    results = {}
    for flag in (True, False):
        cfg = load_config(config_ref, overrides={"seed": seed, "timeout bootstrapping": flag,
                                                 **(overrides or {})})
        trainer, _ = train(cfg)
        gamma, H = cfg.sac.gamma, trainer.env_spec.horizon
        results[flag] = {"q_s0": chain_value(trainer), "gamma": gamma, "horizon": H}
    gamma, H = results[True]["gamma"], results[True]["horizon"]
    aware_ref = 1.0 / (1.0 - gamma)
    fail_ref = (1.0 - gamma ** H) / (1.0 - gamma)
    aware, failure = results[True]["q_s0"], results[False]["q_s0"]
    aware_ok = abs(aware - aware_ref) <= tol * aware_ref
    fail_ok = abs(failure - fail_ref) <= tol * fail_ref
    gap = abs(aware - failure) / max(abs(aware), abs(failure))
    return {"suite": "timeout-bias", "timeout_aware": aware, "timeout_aware_expected": aware_ref,
            "timeouts_as_failures": failure, "timeouts_as_failures_expected": fail_ref,
            "ratio": failure / aware, "ratio_expected": 1.0 - gamma ** H,
            "relative_gap": gap, "passed": bool(aware_ok and fail_ok and gap > min_gap),
            "seconds": time.perf_counter() - t0}


SUITES = {"grad-check": grad_check, "oracle-check": oracle_check,
          "density-check": density_check, "timeout-bias": timeout_bias}
