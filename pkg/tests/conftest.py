import pytest

import harkit as hk

# One shared recipe for every test that needs a trained model: 5 synthetic
# users x 2 recordings, full-batch training. Keep in sync with the
# acceptance suite, which builds the same corpus on purpose.
BASE_TRAIN_CONFIG = hk.TrainConfig(
    n_hidden=4, epochs=1500, learning_rate=0.2, momentum=0.9, seed=0, test_fraction=0.2
)


def build_training_corpus(n_users: int = 5, recordings_per_user: int = 2):
    dataset = []
    for u, profile in enumerate(hk.training_profiles(n_users, seed=0)):
        for rec in range(recordings_per_user):
            cfg = hk.SynthConfig(seed=100 * u + rec, script=hk.default_script(), profile=profile)
            stream, _ = hk.generate_synthetic(cfg)
            pairs, _ = hk.build_labeled_dataset(stream)
            dataset.extend(pairs)
    return dataset


@pytest.fixture(scope="session")
def training_corpus():
    return build_training_corpus()


@pytest.fixture(scope="session")
def base_model(training_corpus):
    """(params, report) of the standard 4-hidden-neuron model."""
    return hk.train_supervised(training_corpus, BASE_TRAIN_CONFIG)
