"""Shared test helpers: independent oracles and scenario shortcuts."""

from __future__ import annotations

import numpy as np
import pytest

from ackwatch.qcd import geometric_pmf
from ackwatch.scenario import scenario_from_dict


def exhaustive_no_change_posterior(ages, rho1: float, rho2: float, rho_i: float) -> float:
    """Brute-force Bayes posterior P(change index > m | ages 1..m).

    Sums the joint density over every change hypothesis j in {1..m, >m},
    weighting by the geometric onset prior.  Independent of the scalar
    recursion it cross-checks: prefix/suffix products of the two pmfs, no
    shared code path.
    """
    m = len(ages)
    b1 = [geometric_pmf(rho1, int(a)) for a in ages]
    b2 = [geometric_pmf(rho2, int(a)) for a in ages]
    prefix = [1.0]
    for value in b1:
        prefix.append(prefix[-1] * value)
    suffix = [1.0] * (m + 1)
    for j in range(m - 1, -1, -1):
        suffix[j] = suffix[j + 1] * b2[j]
    no_change = (1.0 - rho_i) ** m * prefix[m]
    total = no_change
    for j in range(1, m + 1):
        total += rho_i * (1.0 - rho_i) ** (j - 1) * prefix[j - 1] * suffix[j - 1]
    return no_change / total


def make_scenario(**overrides) -> "Scenario":
    """Scenario built from the defaults with a shallow override dict."""
    return scenario_from_dict(overrides)


@pytest.fixture
def rng():
    return np.random.default_rng(20250901)
