"""Session fixtures: one synthetic corpus bundle shared by CLI-level tests."""

import pytest

from wirepipe.cli import main
from wirepipe.synth import SynthConfig, generate_corpus, write_bundle

BUNDLE_SYNTH = SynthConfig(n_sources=60, seed=11)


@pytest.fixture(scope="session")
def bundle_corpus():
    return generate_corpus(BUNDLE_SYNTH)


@pytest.fixture(scope="session")
def bundle_dir(tmp_path_factory, bundle_corpus):
    out = tmp_path_factory.mktemp("bundle")
    write_bundle(bundle_corpus, out)
    return out


@pytest.fixture(scope="session")
def bundle_config(bundle_dir):
    return str(bundle_dir / "config.toml")


@pytest.fixture(scope="session")
def bundle_run(bundle_dir, bundle_config):
    """Artifacts of one full pipeline run, under <bundle>/out.

    Shared by read-only tests; tests that rerun stages with other settings
    must point paths.out_dir at their own directory.
    """
    assert main(["pipeline", "--config", bundle_config]) == 0
    return bundle_dir / "out"
