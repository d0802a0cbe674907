"""Small synthetic systems with known boundaries, shared across tests."""

import numpy as np

from stabmap.boundary import ParameterPlane, toy_boundary_system


def _cols(x):
    X = np.asarray(x)
    return (X[:, None], True) if X.ndim == 1 else (X, False)


def hopf_f(x, k):
    """x' = (k1 x1 - x2, x1 + k1 x2): Hopf at k1 = 0 with omega = 1."""
    X, single = _cols(x)
    out = np.stack([k[0] * X[0] - X[1], X[0] + k[0] * X[1]])
    return out[:, 0] if single else out


def radial_hopf_f(x, k):
    """Growth rate ||k||_2 - 0.5: Hopf circle of radius 0.5 about the origin."""
    X, single = _cols(x)
    mu = np.sqrt(k[0] ** 2 + k[1] ** 2) - 0.5
    out = np.stack([mu * X[0] - X[1], X[0] + mu * X[1]])
    return out[:, 0] if single else out


def fold_f(x, k):
    """x' = k1 - x^2: saddle-node at k1 = 0."""
    X, single = _cols(x)
    out = k[0] - X ** 2
    return out[:, 0] if single else out


def stable_f(x, k):
    """x' = -x + k1 + 0*k2: stable for every parameter value."""
    X, single = _cols(x)
    out = -X + k[0]
    return out[:, 0] if single else out


def hopf_plane():
    # constructed directly in normalized units (delta = 1)
    return ParameterPlane(axes=("mu", "nu"), delta=(1.0, 1.0),
                          k_lb=(-1.0, -1.0), k_ub=(1.0, 1.0), k0=(-0.5, 0.0))


def radial_plane():
    return ParameterPlane(axes=("k1", "k2"), delta=(1.0, 1.0),
                          k_lb=(-1.0, -1.0), k_ub=(1.0, 1.0), k0=(0.0, 0.0))


def fold_plane():
    return ParameterPlane(axes=("k1", "k2"), delta=(1.0, 1.0),
                          k_lb=(-1.0, -1.0), k_ub=(2.0, 2.0), k0=(1.0, 0.0))


def stable_plane():
    return ParameterPlane(axes=("k1", "k2"), delta=(1.0, 1.0),
                          k_lb=(-1.0, -1.0), k_ub=(1.0, 1.0), k0=(0.0, 0.0))


def hopf_system(theta):
    return toy_boundary_system(hopf_f, 2, hopf_plane(), theta)


def radial_system(theta):
    return toy_boundary_system(radial_hopf_f, 2, radial_plane(), theta)


def fold_system(theta):
    return toy_boundary_system(fold_f, 1, fold_plane(), theta)


def stable_system(theta):
    return toy_boundary_system(stable_f, 1, stable_plane(), theta)
