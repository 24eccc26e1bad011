from src.families.base import FAMILY_REGISTRY, Family, get_family, register_family
from src.families.bernoulli import BernoulliLogit
from src.families.beta_binomial import BetaBinomialLogit
from src.families.binomial import BinomialLogit

__all__ = [
    "FAMILY_REGISTRY",
    "BernoulliLogit",
    "BetaBinomialLogit",
    "BinomialLogit",
    "Family",
    "get_family",
    "register_family",
]
