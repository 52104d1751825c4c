import pytest

from helpers_sidecar import WORDLIST


@pytest.fixture(scope="session")
def wordlist_checkpoint(tmp_path_factory):
    """One shared unit-weight checkpoint over the test wordlist."""
    from wirepipe_sidecar.checkpoint import build_checkpoint

    out = tmp_path_factory.mktemp("ckpt") / "wordlist-model"
    build_checkpoint({w: 1.0 for w in WORDLIST}, out, dim=48, seed=3)
    return str(out)
