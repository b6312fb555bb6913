import subprocess
import sys

import numpy as np
import pytest

from fragcov import _backend, _fastpath_py, band_mask

try:
    from fragcov import _fastpath
except ImportError:
    _fastpath = None


def _random_triple(seed, K=None, r=None):
    rng = np.random.default_rng(seed)
    K = K or int(rng.integers(3, 40))
    r = r or int(rng.integers(1, 6))
    gamma = np.ascontiguousarray(rng.standard_normal((K, r)))
    target = rng.standard_normal((K, K))
    target = np.ascontiguousarray(target + target.T)
    mask = band_mask(K, float(rng.uniform(0.4, 0.95))).include.astype(np.uint8)
    return gamma, target, np.ascontiguousarray(mask)


@pytest.mark.skipif(_fastpath is None, reason="compiled extension not built")
class TestCompiledAgainstPython:
    @pytest.mark.parametrize("seed", range(25))
    def test_value_and_gradient_agree(self, seed):
        gamma, target, mask = _random_triple(seed)
        fc, gc = _fastpath.masked_objective_grad(gamma, target, mask)
        fp, gp = _fastpath_py.masked_objective_grad(gamma, target, mask)
        assert fc == pytest.approx(fp, rel=1e-12, abs=1e-300)
        assert np.abs(gc - gp).max() < 1e-12 * max(1.0, np.abs(gp).max())

    def test_selected_backend_is_compiled(self):
        assert _backend.BACKEND == "compiled"


def test_prepare_mask_layout():
    m = _backend.prepare_mask(band_mask(6, 0.7).include)
    assert m.dtype == np.uint8
    assert m.flags["C_CONTIGUOUS"]


def test_python_backend_forced_via_env():
    code = "import fragcov; print(fragcov.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "FRAGCOV_BACKEND": "python"},
        check=True,
    )
    assert out.stdout.strip() == "python"


def test_benchmark_script_importable():
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_backends.py"
    spec = importlib.util.spec_from_file_location("bench_backends", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    rows = module.run_benchmark(sizes=((20, 2),), repeats=50, solve_reps=0)
    assert rows and rows[0]["K"] == 20
