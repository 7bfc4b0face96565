import os
import subprocess
import sys

import numpy as np
import pytest

from fkwaves import kernels
from fkwaves.backend import HAS_NUMBA

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not active")


def random_states(rng, B, M):
    u = np.sort(rng.uniform(0.0, 1.0, (B, M)), axis=1)
    xi = np.clip(u + rng.normal(0.0, 0.02, (B, M)), 0.0, 1.0)
    return u, xi


@needs_numba
@pytest.mark.parametrize("kind,params", [
    (kernels.KIND_CLASSICAL, (0.2, 0.0, 0.0)),
    (kernels.KIND_CUBIC, (1.0, 1.0, 0.25)),
])
@pytest.mark.parametrize("bc", [kernels.BC_FIXED, kernels.BC_HELICAL])
def test_rk4_backends_agree(kind, params, bc):
    rng = np.random.default_rng(42)
    u, xi = random_states(rng, 3, 24)
    p0, p1, p2 = params
    args = (kind, p0, p1, p2, 10.0, bc, 0.01, 200, 50)
    u_nb, xi_nb = kernels.rk4_run_numba(u, xi, *args)
    u_np, xi_np = kernels.rk4_run_numpy(u, xi, *args)
    assert np.allclose(u_nb, u_np, atol=1e-12, rtol=1e-12)
    assert np.allclose(xi_nb, xi_np, atol=1e-12, rtol=1e-12)


@needs_numba
def test_profile_residual_backends_agree():
    rng = np.random.default_rng(1)
    K = 181
    phi1 = np.sort(rng.uniform(0.0, 1.0, K))
    phi2 = np.clip(phi1 + rng.normal(0.0, 0.01, K), 0.0, 1.0)
    offs = np.array([0, 10, -10], dtype=np.int64)
    wts = np.zeros(3)
    for c in (0.7, -0.7, 0.0):
        a = kernels.profile_residual_numba(phi1, phi2, c, 10.0, 0.1, offs, wts,
                                           kernels.KIND_CLASSICAL, 0.1, 0, 0)
        b = kernels.profile_residual_numpy(phi1, phi2, c, 10.0, 0.1, offs, wts,
                                           kernels.KIND_CLASSICAL, 0.1, 0, 0)
        assert np.allclose(a[0], b[0], atol=1e-12)
        assert np.allclose(a[1], b[1], atol=1e-12)


@needs_numba
def test_fractional_shift_weights_agree():
    rng = np.random.default_rng(5)
    K = 101
    phi = np.sort(rng.uniform(0.0, 1.0, K))
    offs = np.array([0, 7, -8], dtype=np.int64)
    wts = np.array([0.0, 0.5, 0.25])
    out_nb = np.empty(K)
    kernels.profile_F_numba(phi, offs, wts, kernels.KIND_CUBIC, 1.0, 1.0,
                            0.25, out_nb)
    out_np = kernels.profile_F_numpy(phi, offs, wts, kernels.KIND_CUBIC, 1.0,
                                     1.0, 0.25)
    assert np.allclose(out_nb, out_np, atol=1e-13)


@needs_numba
def test_stationary_sweep_backends_agree():
    rng = np.random.default_rng(9)
    K = 161
    phi = np.sort(rng.uniform(0.0, 1.0, K))
    offs = np.array([0, 8, -8], dtype=np.int64)
    wts = np.zeros(3)
    a = kernels.stationary_sweep_numba(phi, offs, wts, kernels.KIND_CLASSICAL,
                                       0.0, 0, 0, 0.02, 40)
    b = kernels.stationary_sweep_numpy(phi, offs, wts, kernels.KIND_CLASSICAL,
                                       0.0, 0, 0, 0.02, 40)
    assert np.allclose(a, b, atol=1e-13)


def _backend_of(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("FKWAVES_BACKEND", None)
    else:
        env["FKWAVES_BACKEND"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from fkwaves.backend import BACKEND; print(BACKEND)"],
        capture_output=True, text=True, env=env,
    )
    return out.returncode, out.stdout.strip(), out.stderr


def test_env_flag_selects_backend():
    code, backend, _ = _backend_of("numpy")
    assert code == 0 and backend == "numpy"
    code, backend, _ = _backend_of(None)
    assert code == 0 and backend in ("numba", "numpy")


def test_env_flag_rejects_garbage():
    code, _, err = _backend_of("cuda")
    assert code != 0
    assert "FKWAVES_BACKEND" in err


def test_numpy_backend_runs_solvers():
    # a tiny end-to-end run on the fallback path in a subprocess
    script = (
        "import fkwaves as fk\n"
        "from fkwaves import wave\n"
        "from fkwaves.backend import BACKEND\n"
        "assert BACKEND == 'numpy'\n"
        "m = fk.make_model(fk.cubic_bistable(1, 1, 0.25), m0=0.05)\n"
        "sol = wave.solve_newton(m, wave.make_grid(m, c=0.3))\n"
        "assert sol.residual_sup < 1e-9\n"
        "print('%.12f' % sol.c)\n"
    )
    env = dict(os.environ, FKWAVES_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", script],
                         capture_output=True, text=True, env=env)
    assert out.returncode == 0, out.stderr
    c_numpy = float(out.stdout.strip())
    import fkwaves as fk
    from fkwaves import wave
    m = fk.make_model(fk.cubic_bistable(1, 1, 0.25), m0=0.05)
    sol = wave.solve_newton(m, wave.make_grid(m, c=0.3))
    assert abs(sol.c - c_numpy) < 1e-10
