"""Random generators shared by the test modules."""

import numpy as np

from biophase import HamiltonianPath, StatePair, TimeProfile, build_frame, dual_partner

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
E1 = np.array([1, 0], dtype=complex)
E2 = np.array([0, 1], dtype=complex)
R2 = 1 / np.sqrt(2)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rand_matrix(rng, N):
    return crandn(rng, N, N)


def rand_pair(rng, N):
    """Random state paired through the eigenframe of a random non-Hermitian matrix."""
    return dual_partner(build_frame(rand_matrix(rng, N)), crandn(rng, N))


def rand_path(rng, N, norm=2.0, t_domain=(0.0, 1.0)):
    """Smooth ``H(t) = A + cos(wt) B + sin(wt) C`` with ``||H||_2 <= norm``."""
    mats = [rand_matrix(rng, N) for _ in range(3)]
    mats = [m * (norm / 3) / np.linalg.norm(m, 2) for m in mats]
    w = rng.uniform(1.0, 2 * np.pi)
    return HamiltonianPath([(mats[0], TimeProfile()),
                            (mats[1], TimeProfile((), w, (1.0,), ())),
                            (mats[2], TimeProfile((), w, (), (1.0,)))], t_domain=t_domain)


def self_dual(v):
    return StatePair.self_dual(np.asarray(v, dtype=complex))
