"""Standard solved setups, cached so that fixtures and the acceptance
suite share one solve per configuration."""
from functools import lru_cache

from seneta.laplace import build_series, solve_R
from seneta.lifetime import malthusian, parse_lifetime_spec, tilt
from seneta.offspring import parse_offspring_spec
from seneta.renewal import build_table


class Setup:
    def __init__(self, offspring, lifetime, theta=None):
        self.offspring = parse_offspring_spec(offspring)
        self.lifetime = parse_lifetime_spec(lifetime)
        mu = self.offspring.mean
        self.beta = malthusian(self.lifetime, mu)
        q = self.offspring.extinction_probability
        self.theta = 0.5 * (q + 1) if theta is None else theta
        self.table = build_table(tilt(self.lifetime, self.beta, mu))
        self.sol = solve_R(self.offspring, self.lifetime, self.beta, self.theta, nu=self.table.nu)
        self.series = build_series(self.sol, self.table)


@lru_cache(maxsize=None)
def setup(offspring, lifetime, theta=None):
    return Setup(offspring, lifetime, theta)


YULE = ("binary", "exp:1", 0.5)
HEAVY_EXP = ("heavylog:0.5,2.0", "exp:1")
# lifetime with more spread than the exponential: Utilde increases and sigma > 0
HEAVY_GAMMA = ("heavylog:0.5,2.0", "gamma:0.5,0.3333333333333333")
