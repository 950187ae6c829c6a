"""Shared builders for the test suite."""

import numpy as np
import pytest

from gsp import RandomSpec, SaddleSystem, SpdPreconditioner, gen_random


def random_system(m, n, *, skew=0.0, c_rank=None, seed=0, spectrum=(1.0, 2.0), density=1.0):
    if c_rank is None:
        c_rank = n // 2
    return gen_random(RandomSpec(m=m, n=n, density=density, spectrum=spectrum,
                                 skew_strength=skew, c_rank=c_rank, seed=seed))


def random_preconditioner(n, seed=0, lo=0.5, hi=2.0):
    rng = np.random.default_rng(seed)
    return SpdPreconditioner.from_diagonal(rng.uniform(lo, hi, n))


@pytest.fixture
def hand_system():
    """m=2, n=1: M=I, A=[1;1], C=[1], b=(1); Schur complement S = 3."""
    return SaddleSystem.from_matrices(
        np.eye(2), np.array([[1.0], [1.0]]), np.array([[1.0]]), np.array([1.0]))


@pytest.fixture
def hand_system_nonsym():
    """Same blocks but M = [[1, .5], [-.5, 1]]; S = 2.6."""
    return SaddleSystem.from_matrices(
        np.array([[1.0, 0.5], [-0.5, 1.0]]), np.array([[1.0], [1.0]]),
        np.array([[1.0]]), np.array([1.0]), symmetric=False)
