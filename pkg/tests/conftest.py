import numpy as np
import pytest

from destab import lti


def oscillator_plant():
    """Linearized cubic oscillator, G(s) = s / (s^2 + s + 1)."""
    return lti.StateSpace([[0.0, 1.0], [-1.0, -1.0]], [[0.0], [1.0]], [[0.0, 1.0]], [[0.0]])


def counterexample_plant():
    """H(s) = [[0, 1], [s, 0]] / (s + 1)^2."""
    ac = np.array([[0.0, 1.0], [-1.0, -2.0]])
    a = np.block([[ac, np.zeros((2, 2))], [np.zeros((2, 2)), ac]])
    b = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    c = np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    return lti.StateSpace(a, b, c, np.zeros((2, 2)))


def first_order(num1, num0, den0=1.0):
    """(num1 s + num0) / (s + den0) in state-space form."""
    return lti.StateSpace([[-den0]], [[1.0]], [[num0 - num1 * den0]], [[num1]])


@pytest.fixture
def plant():
    return oscillator_plant()


@pytest.fixture
def h_plant():
    return counterexample_plant()
