import os
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_MNIST_DIR = REPO_ROOT / "data" / "mnist"


def find_mnist_dir() -> Path | None:
    env = os.environ.get("SPARSEFL_MNIST_DIR")
    candidate = Path(env) if env else DEFAULT_MNIST_DIR
    for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
        if not ((candidate / stem).exists() or (candidate / (stem + ".gz")).exists()):
            return None
    return candidate


@pytest.fixture(scope="session")
def mnist_dir() -> Path:
    found = find_mnist_dir()
    if found is None:
        pytest.skip("MNIST IDX files not found (set SPARSEFL_MNIST_DIR)")
    return found
