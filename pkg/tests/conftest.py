import numpy as np
import pytest

from stochint.data import Dataset, GroundTruth


@pytest.fixture
def small_dataset():
    rng = np.random.default_rng(42)
    n = 60
    x = rng.standard_normal((n, 3))
    t = (rng.random(n) < 0.5).astype(int)
    t[:2] = [0, 1]  # both arms guaranteed
    y = x[:, 0] + t * 1.5 + 0.1 * rng.standard_normal(n)
    return Dataset(x, t, y)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def csv_writer(tmp_path):
    def _write(name, lines):
        return write_lines(tmp_path / name, lines)

    return _write


def constant_ground_truth(n, c, p=0.5):
    return GroundTruth(np.full(n, float(c)), np.full(n, float(c)), np.full(n, p))
