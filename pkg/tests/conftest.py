import numpy as np
import pytest

from meanfield_bose_lab import model as M

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def torus64():
    return M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=64))


@pytest.fixture(scope="session")
def torus32():
    return M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=32))


@pytest.fixture(scope="session")
def box_dirichlet():
    return M.build_model(M.ModelConfig(dim=1, extent=10.0, modes=64,
                                       bc=M.DIRICHLET))


@pytest.fixture(scope="session")
def cos_interaction(torus64):
    return M.make_interaction(torus64, func=lambda x: 1.0 + np.cos(x))


def direct_convolution(space, w, rho):
    """O(M^2) quadrature oracle for (w * rho), independent of FFTs."""
    pair = w.pair_matrix()
    return (pair @ np.asarray(rho).ravel() * space.weight).reshape(space.shape)


def direct_convolution_loops(space, wfunc, rho):
    """Plain double loop against the closed form; no Interaction machinery."""
    x = space.axes[0]
    rho = np.asarray(rho).ravel()
    out = np.zeros(space.size)
    for i, xi in enumerate(x):
        if space.bc == M.PERIODIC:
            d = xi - x
            d = (d + space.extent / 2.0) % space.extent - space.extent / 2.0
        else:
            d = xi - x
        out[i] = np.sum(wfunc(d) * rho) * space.weight
    return out.reshape(space.shape)
