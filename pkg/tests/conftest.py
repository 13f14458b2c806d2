# SPDX-License-Identifier: MIT
"""Shared fixtures for the sdqkd tests."""

import numpy as np
from pytest import fixture

from sdqkd import eavesdrop


@fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(20240917)


@fixture
def equal_params():
    """Build optimal equal-prior params for (s, eta_ab)."""

    def build(s, eta_ab):
        return eavesdrop.optimal_params(0.5, s, eta_ab)

    return build


@fixture
def workdir(tmp_path, monkeypatch):
    """Run from an empty directory so no local sdqkd.json is found."""
    monkeypatch.chdir(tmp_path)
    return tmp_path
