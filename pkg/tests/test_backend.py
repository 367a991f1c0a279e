"""The compiled kernels and the NumPy fallback must give identical results."""
import io
import os
import warnings

import numpy as np
import pytest

from tredkit import _backend, mapkit, tred
from tredkit.counts import disk_count, robust_square_count, square_count
from tredkit.oracle import Raster, tlde_counts
from tredkit.synth import NoiseSpec, ShapeSpec, noisy_sample

pytestmark = pytest.mark.skipif(len(_backend.available()) < 2,
                                reason="compiled extension not built")


def _each(fn):
    out = {}
    for name in _backend.available():
        with _backend.use(name):
            out[name] = fn()
    return list(out.values())


@pytest.fixture(scope="module")
def trajs():
    shape = ShapeSpec("ellipse", {"a": 4.0, "b": 2.5})
    return [noisy_sample(shape, NoiseSpec(seed=s), cycles=3, pts_per_cycle=200) for s in range(4)]


def test_env_override_selects_python(monkeypatch):
    import importlib
    before = os.environ.get("TREDKIT_PURE_PYTHON")
    monkeypatch.setenv("TREDKIT_PURE_PYTHON", "1")
    mod = importlib.reload(_backend)
    try:
        assert mod.name() == "python"
    finally:
        monkeypatch.undo()
        importlib.reload(_backend)
    assert _backend.name() == ("python" if before == "1" else "compiled")


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.set_backend("fortran")


def test_counts_agree(trajs):
    rng = np.random.default_rng(0)
    for x in rng.uniform(-5, 5, (60, 2)):
        r = rng.uniform(0.1, 1.5)
        a, b = _each(lambda: (disk_count(trajs, x, r), square_count(trajs, x, r),
                              robust_square_count(trajs, x, r, 1.5 * r)))
        assert a == b


def test_tree_dumps_identical(trajs):
    params = tred.TredParams(6.0, 5, 0)

    def build():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tree = tred.build_offline(trajs, params)
        buf = io.StringIO()
        tred.dump(tree, buf)
        return buf.getvalue()

    a, b = _each(build)
    assert a == b


def test_tlde_agree(trajs):
    grid = Raster.covering((0.0, 0.0), 6.0, 80)
    for method in ("sweep", "brute"):
        a, b = _each(lambda: tlde_counts(trajs, 0.4, grid, method).values)
        np.testing.assert_array_equal(a, b)


def test_frechet_agree():
    rng = np.random.default_rng(2)
    for _ in range(20):
        p, q = rng.normal(size=(30, 2)), rng.normal(size=(25, 2))
        a, b = _each(lambda: mapkit.discrete_frechet(p, q))
        assert a == b
