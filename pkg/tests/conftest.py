import numpy as np
import pytest

import sirlevy as sl

# constants shared across the suite: the reference parameter point of the
# bundled studies and the two standard initial states
THETA_REF = sl.REFERENCE_THETA
X0_NUMBERS = (2.3, 0.19, 0.25)
X0_PROPORTIONS = (0.82, 0.07, 0.11)


def make_dataset(seed=0, eps=0.001, theta=None, model="numbers", substeps=10, n_obs=100, lam=None):
    """One synthetic trajectory with the standard constants."""
    theta = theta or THETA_REF
    params = (sl.numbers_defaults if model == "numbers" else sl.proportions_defaults)(eps=eps)
    x0 = X0_NUMBERS if model == "numbers" else X0_PROPORTIONS
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0,))))
    rate = lam if lam is not None else sl.sample_lambda(rng)
    noise = sl.LevyPathNoise(
        np.random.SeedSequence(entropy=seed, spawn_key=(1,)),
        rate,
        1.0,
        sl.get_model(model).driver_dim,
    )
    return sl.simulate_sde(model, theta, params, x0, 1.0, n_obs, noise, substeps=substeps)


@pytest.fixture(scope="session")
def numbers_traj():
    return make_dataset(seed=7, eps=0.001)


@pytest.fixture(scope="session")
def numbers_params():
    return sl.numbers_defaults(eps=0.001)
