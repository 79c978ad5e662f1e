import numpy as np
import pytest

import filtergen as fg

# convergence-quality discriminator training shared by the slow tests
DISC_CFG = fg.DiscConfig(lr=0.05, batch_size=256, max_epochs=200, patience=20, seed=31)


@pytest.fixture(scope="session")
def s1():
    return fg.build_scenario("s1")


@pytest.fixture(scope="session")
def s2():
    return fg.build_scenario("s2")


@pytest.fixture(scope="session")
def s3():
    return fg.build_scenario("s3")


@pytest.fixture(scope="session")
def s2_disc(s2):
    return fg.train_discriminator(s2.train, s2.generator, DISC_CFG,
                                  np.random.default_rng(31))


@pytest.fixture(scope="session")
def s3_disc(s3):
    return fg.train_discriminator(s3.train, s3.generator, DISC_CFG,
                                  np.random.default_rng(31))
