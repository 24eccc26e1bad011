"""
Sampler: dynamic Hamiltonian Monte Carlo (no-U-turn) with multinomial trajectory sampling.

Each iteration draws a fresh momentum and grows a trajectory by repeated doubling in a
random direction until the generalized no-U-turn criterion fails, a subtree diverges,
or max_tree_depth doublings are done. The next state is drawn from the trajectory with
probability proportional to exp(-H): progressively biased toward the newest subtree at
the top level, uniformly within subtrees.

Chains run in separate processes. Chain k draws from its own stream
SeedSequence(seed, spawn_key=(k,)), so its output depends only on (seed, k) and the
merged result is identical however many workers run.

Usage:
    samples = sample(Posterior(spec, dm), SamplerConfig(chains=4, seed=1))
    samples.draws.shape  # (chains, sampling_iters, dim)
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from src.config import get_settings
from src.core.errors import DivergenceError, InitializationError
from src.core.schemas import SamplerConfig
from src.mcmc.adaptation import AdaptationState, WarmupAdapter, find_reasonable_epsilon
from src.mcmc.integrator import hamiltonian, leapfrog

logger = logging.getLogger(__name__)

INIT_ATTEMPTS = 100
STAT_FIELDS = ("accept_stat", "tree_depth", "n_leapfrog", "divergent", "energy", "step_size")


class LogDensity(Protocol):
    """
    Target of the sampler. HMC moves the first `dim` coordinates; a target whose
    `param_names` is longer also provides `draw_exact(rng, n)`, an (n, k) array of
    independent draws for the remaining k parameters.
    """

    dim: int
    param_names: list[str]

    def log_density_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]: ...


@dataclass
class PhasePoint:
    theta: np.ndarray
    logp: float
    grad: np.ndarray


@dataclass
class TransitionStats:
    accept_stat: float
    tree_depth: int
    n_leapfrog: int
    divergent: bool
    energy: float


@dataclass
class SampleSet:
    """Post-warmup draws on the unconstrained scale, shape (chains, sampling_iters, dim)."""

    draws: np.ndarray
    param_names: list[str]
    stats: dict[str, np.ndarray]
    config_echo: SamplerConfig
    adaptation: list[AdaptationState] = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    @property
    def dim(self) -> int:
        return self.draws.shape[2]

    def param(self, name: str) -> np.ndarray:
        """(chains, draws) array for one parameter."""
        return self.draws[:, :, self.param_names.index(name)]

    def flat(self) -> np.ndarray:
        """(chains * draws, dim) matrix, chain-major."""
        return self.draws.reshape(-1, self.dim)

    @property
    def divergent_count(self) -> int:
        return int(np.sum(self.stats["divergent"]))


# --- Trajectory building ---


@dataclass
class _Counters:
    n_leapfrog: int = 0
    sum_metro: float = 0.0
    divergent: bool = False


@dataclass
class _Subtree:
    # Outermost point, where the next doubling in this direction starts.
    edge: PhasePoint
    edge_momentum: np.ndarray
    # Momenta and sharp momenta (M^-1 p) at the first and last point built.
    p_begin: np.ndarray
    p_end: np.ndarray
    p_sharp_begin: np.ndarray
    p_sharp_end: np.ndarray
    rho: np.ndarray
    log_weight: float
    proposal: PhasePoint
    proposal_momentum: np.ndarray
    valid: bool = True


def _no_u_turn(p_sharp_minus: np.ndarray, p_sharp_plus: np.ndarray, rho: np.ndarray) -> bool:
    return float(p_sharp_plus @ rho) > 0 and float(p_sharp_minus @ rho) > 0


class Trajectory:
    """Builds one NUTS transition for a fixed step size and inverse mass."""

    def __init__(
        self,
        target: LogDensity,
        step_size: float,
        inv_mass: np.ndarray,
        max_tree_depth: int,
        divergence_threshold: float = 1000.0,
    ):
        self.target = target
        self.step_size = step_size
        self.inv_mass = inv_mass
        self.max_tree_depth = max_tree_depth
        self.divergence_threshold = divergence_threshold

    def _leaf(
        self,
        start: PhasePoint,
        momentum: np.ndarray,
        direction: int,
        h0: float,
        counters: _Counters,
    ) -> _Subtree:
        theta, p, logp, grad = leapfrog(
            self.target.log_density_and_grad,
            start.theta, momentum, start.grad, direction * self.step_size, self.inv_mass,
        )
        counters.n_leapfrog += 1
        h = hamiltonian(logp, p, self.inv_mass)
        point = PhasePoint(theta, logp, grad)
        p_sharp = self.inv_mass * p
        valid = True
        if h - h0 > self.divergence_threshold:
            counters.divergent = True
            valid = False
        counters.sum_metro += 1.0 if h0 - h > 0 else float(np.exp(h0 - h))
        return _Subtree(
            edge=point, edge_momentum=p,
            p_begin=p, p_end=p, p_sharp_begin=p_sharp, p_sharp_end=p_sharp,
            rho=p.copy(), log_weight=h0 - h,
            proposal=point, proposal_momentum=p, valid=valid,
        )

    def build_tree(
        self,
        depth: int,
        start: PhasePoint,
        momentum: np.ndarray,
        direction: int,
        h0: float,
        rng: np.random.Generator,
        counters: _Counters,
    ) -> _Subtree:
        """Recursively build a subtree of 2**depth leapfrog steps from `start`."""
        if depth == 0:
            return self._leaf(start, momentum, direction, h0, counters)

        init = self.build_tree(depth - 1, start, momentum, direction, h0, rng, counters)
        if not init.valid:
            return init
        final = self.build_tree(
            depth - 1, init.edge, init.edge_momentum, direction, h0, rng, counters
        )
        if not final.valid:
            return final

        log_weight = float(np.logaddexp(init.log_weight, final.log_weight))
        if rng.uniform() < np.exp(final.log_weight - log_weight):
            proposal, proposal_momentum = final.proposal, final.proposal_momentum
        else:
            proposal, proposal_momentum = init.proposal, init.proposal_momentum

        rho = init.rho + final.rho
        persist = _no_u_turn(init.p_sharp_begin, final.p_sharp_end, rho)
        persist &= _no_u_turn(init.p_sharp_begin, final.p_sharp_begin, init.rho + final.p_begin)
        persist &= _no_u_turn(init.p_sharp_end, final.p_sharp_end, final.rho + init.p_end)

        return _Subtree(
            edge=final.edge, edge_momentum=final.edge_momentum,
            p_begin=init.p_begin, p_end=final.p_end,
            p_sharp_begin=init.p_sharp_begin, p_sharp_end=final.p_sharp_end,
            rho=rho, log_weight=log_weight,
            proposal=proposal, proposal_momentum=proposal_momentum, valid=persist,
        )

    def transition(
        self, current: PhasePoint, rng: np.random.Generator
    ) -> tuple[PhasePoint, TransitionStats]:
        momentum = rng.standard_normal(current.theta.shape[0]) / np.sqrt(self.inv_mass)
        h0 = hamiltonian(current.logp, momentum, self.inv_mass)
        if self.max_tree_depth == 0:
            return self._static_step(current, momentum, h0, rng)

        counters = _Counters()
        sample, sample_momentum = current, momentum
        p_sharp0 = self.inv_mass * momentum
        # Backward and forward ends of the whole trajectory.
        bck = fwd = current
        p_bck = p_fwd = momentum
        p_bck_bck = p_bck_fwd = p_fwd_bck = p_fwd_fwd = momentum
        ps_bck_bck = ps_bck_fwd = ps_fwd_bck = ps_fwd_fwd = p_sharp0
        rho_bck = np.zeros_like(momentum)
        rho_fwd = momentum.copy()
        log_weight = 0.0
        depth = 0

        while depth < self.max_tree_depth:
            if rng.uniform() > 0.5:
                sub = self.build_tree(depth, fwd, p_fwd, 1, h0, rng, counters)
                fwd, p_fwd = sub.edge, sub.edge_momentum
                rho_bck = rho_bck + rho_fwd
                p_bck_fwd, ps_bck_fwd = p_fwd_fwd, ps_fwd_fwd
                p_fwd_bck, ps_fwd_bck = sub.p_begin, sub.p_sharp_begin
                p_fwd_fwd, ps_fwd_fwd = sub.p_end, sub.p_sharp_end
                rho_fwd = sub.rho
            else:
                sub = self.build_tree(depth, bck, p_bck, -1, h0, rng, counters)
                bck, p_bck = sub.edge, sub.edge_momentum
                rho_fwd = rho_bck + rho_fwd
                p_fwd_bck, ps_fwd_bck = p_bck_bck, ps_bck_bck
                p_bck_fwd, ps_bck_fwd = sub.p_begin, sub.p_sharp_begin
                p_bck_bck, ps_bck_bck = sub.p_end, sub.p_sharp_end
                rho_bck = sub.rho
            if not sub.valid:
                break
            depth += 1

            if sub.log_weight > log_weight or rng.uniform() < np.exp(sub.log_weight - log_weight):
                sample, sample_momentum = sub.proposal, sub.proposal_momentum
            log_weight = float(np.logaddexp(log_weight, sub.log_weight))

            rho = rho_bck + rho_fwd
            persist = _no_u_turn(ps_bck_bck, ps_fwd_fwd, rho)
            persist &= _no_u_turn(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck)
            persist &= _no_u_turn(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd)
            if not persist:
                break

        stats = TransitionStats(
            accept_stat=counters.sum_metro / max(counters.n_leapfrog, 1),
            tree_depth=depth,
            n_leapfrog=counters.n_leapfrog,
            divergent=counters.divergent,
            energy=hamiltonian(sample.logp, sample_momentum, self.inv_mass),
        )
        return sample, stats

    def _static_step(
        self, current: PhasePoint, momentum: np.ndarray, h0: float, rng: np.random.Generator
    ) -> tuple[PhasePoint, TransitionStats]:
        """Single leapfrog step with a Metropolis correction (tree depth 0)."""
        theta, p, logp, grad = leapfrog(
            self.target.log_density_and_grad,
            current.theta, momentum, current.grad, self.step_size, self.inv_mass,
        )
        h = hamiltonian(logp, p, self.inv_mass)
        divergent = h - h0 > self.divergence_threshold
        accept = 1.0 if h0 - h > 0 else float(np.exp(h0 - h))
        if not divergent and rng.uniform() < accept:
            chosen, energy = PhasePoint(theta, logp, grad), h
        else:
            chosen, energy = current, h0
        return chosen, TransitionStats(accept, 0, 1, bool(divergent), energy)


def build_trajectory(
    target: LogDensity,
    current: PhasePoint,
    adaptation: AdaptationState,
    rng: np.random.Generator,
    max_tree_depth: int = 10,
    divergence_threshold: float = 1000.0,
) -> tuple[PhasePoint, TransitionStats]:
    """One transition from `current` with the step size and mass in `adaptation`."""
    trajectory = Trajectory(
        target, adaptation.step_size, adaptation.inv_mass_diag, max_tree_depth,
        divergence_threshold,
    )
    return trajectory.transition(current, rng)


# --- Chains ---


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain,)))


def initialize(
    target: LogDensity, config: SamplerConfig, rng: np.random.Generator
) -> PhasePoint:
    """Uniform(-init_radius, init_radius) start with a finite density and gradient."""
    for _ in range(INIT_ATTEMPTS):
        theta = rng.uniform(-config.init_radius, config.init_radius, size=target.dim)
        logp, grad = target.log_density_and_grad(theta)
        if np.isfinite(logp) and np.all(np.isfinite(grad)):
            return PhasePoint(theta, float(logp), np.asarray(grad, dtype=float))
    raise InitializationError(
        f"no finite log density after {INIT_ATTEMPTS} attempts in "
        f"[-{config.init_radius}, {config.init_radius}]^{target.dim}"
    )


def adapt_warmup(
    target: LogDensity,
    current: PhasePoint,
    config: SamplerConfig,
    rng: np.random.Generator,
) -> tuple[PhasePoint, AdaptationState]:
    """
    Run the warmup iterations and return the last state with the frozen adaptation.

    Without adaptation the warmup draws are still taken (and discarded) at the
    initial step size with a unit mass matrix.
    """
    inv_mass = np.ones(target.dim)
    step_size = find_reasonable_epsilon(
        target.log_density_and_grad, current.theta, current.logp, current.grad, inv_mass, rng
    )
    if not config.adapt:
        trajectory = Trajectory(
            target, step_size, inv_mass, config.max_tree_depth, config.divergence_threshold
        )
        for _ in range(config.warmup_iters):
            current, _ = trajectory.transition(current, rng)
        return current, AdaptationState(step_size=step_size, inv_mass_diag=inv_mass)

    adapter = WarmupAdapter(target.dim, config.warmup_iters, config.target_accept, step_size)
    for iteration in range(config.warmup_iters):
        trajectory = Trajectory(
            target, adapter.step_size, adapter.inv_mass, config.max_tree_depth,
            config.divergence_threshold,
        )
        current, stats = trajectory.transition(current, rng)
        adapter.learn_step_size(stats.accept_stat)
        if adapter.add_sample(iteration, current.theta):
            step_size = find_reasonable_epsilon(
                target.log_density_and_grad, current.theta, current.logp, current.grad,
                adapter.inv_mass, rng, adapter.step_size,
            )
            adapter.restart(step_size)
    return current, adapter.final_state()


@dataclass
class ChainResult:
    chain: int
    draws: np.ndarray
    stats: dict[str, np.ndarray]
    adaptation: AdaptationState


def run_chain(target: LogDensity, config: SamplerConfig, chain: int) -> ChainResult:
    rng = chain_rng(config.seed, chain)
    current = initialize(target, config, rng)
    current, adaptation = adapt_warmup(target, current, config, rng)
    logger.debug("Chain %d warmup done: step_size=%.4g", chain, adaptation.step_size)

    trajectory = Trajectory(
        target, adaptation.step_size, adaptation.inv_mass_diag, config.max_tree_depth,
        config.divergence_threshold,
    )
    n = config.sampling_iters
    draws = np.empty((n, target.dim))
    stats = {
        "accept_stat": np.empty(n),
        "tree_depth": np.empty(n, dtype=np.int64),
        "n_leapfrog": np.empty(n, dtype=np.int64),
        "divergent": np.empty(n, dtype=bool),
        "energy": np.empty(n),
        "step_size": np.full(n, adaptation.step_size),
    }
    for i in range(n):
        current, info = trajectory.transition(current, rng)
        draws[i] = current.theta
        stats["accept_stat"][i] = info.accept_stat
        stats["tree_depth"][i] = info.tree_depth
        stats["n_leapfrog"][i] = info.n_leapfrog
        stats["divergent"][i] = info.divergent
        stats["energy"][i] = info.energy
    extra = len(target.param_names) - target.dim
    if extra:
        draws = np.hstack([draws, target.draw_exact(rng, n)])
    return ChainResult(chain=chain, draws=draws, stats=stats, adaptation=adaptation)


def _worker_count(config: SamplerConfig, max_workers: int | None) -> int:
    if max_workers is None:
        max_workers = get_settings().threads or os.cpu_count() or 1
    return max(1, min(max_workers, config.chains))


def sample(
    target: LogDensity, config: SamplerConfig, max_workers: int | None = None
) -> SampleSet:
    """
    Draw config.sampling_iters post-warmup draws from each of config.chains chains.

    Args:
        target: Log density with gradient; must be picklable when chains run in
            worker processes.
        config: Sampler settings.
        max_workers: Process count; defaults to BAYES_CANCEL_THREADS or the CPU count.
            1 runs the chains in this process.

    Raises:
        InitializationError: No finite starting point within init_radius.
        DivergenceError: More than max_divergent_fraction of post-warmup transitions
            diverged.
    """
    workers = _worker_count(config, max_workers)
    logger.info(
        "Sampling %d chain(s) x (%d warmup + %d draws) in %d process(es)",
        config.chains, config.warmup_iters, config.sampling_iters, workers,
    )
    if workers == 1:
        results = [run_chain(target, config, k) for k in range(config.chains)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_chain, target, config, k) for k in range(config.chains)]
            results = [f.result() for f in futures]
    results.sort(key=lambda r: r.chain)

    samples = SampleSet(
        draws=np.stack([r.draws for r in results]),
        param_names=list(target.param_names),
        stats={k: np.stack([r.stats[k] for r in results]) for k in STAT_FIELDS},
        config_echo=config,
        adaptation=[r.adaptation for r in results],
    )
    _check_divergences(samples, config)
    return samples


def _check_divergences(samples: SampleSet, config: SamplerConfig) -> None:
    divergent = samples.stats["divergent"]
    count = int(divergent.sum())
    if count == 0:
        return
    fraction = count / divergent.size
    payload = {
        "divergent": count,
        "transitions": int(divergent.size),
        "fraction": fraction,
        "per_chain": [int(c) for c in divergent.sum(axis=1)],
        "step_size": [a.step_size for a in samples.adaptation],
    }
    if fraction > config.max_divergent_fraction:
        raise DivergenceError(
            f"{count} of {divergent.size} post-warmup transitions diverged "
            f"({fraction:.1%} > {config.max_divergent_fraction:.0%})",
            payload,
        )
    logger.warning(
        "%d of %d post-warmup transitions diverged (%.1f%%)",
        count, divergent.size, 100 * fraction,
    )
