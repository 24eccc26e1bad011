from src.mcmc.adaptation import AdaptationState, DualAveraging, WarmupAdapter, warmup_windows
from src.mcmc.integrator import leapfrog
from src.mcmc.sampler import SampleSet, build_trajectory, sample

__all__ = [
    "AdaptationState",
    "DualAveraging",
    "SampleSet",
    "WarmupAdapter",
    "build_trajectory",
    "leapfrog",
    "sample",
    "warmup_windows",
]
