import numpy as np
import pytest
from scipy.stats import unitary_group

from qfredkin import _kernels
from qfredkin._kernels import _fallback
from qfredkin.circuit import ghz_target
from qfredkin.measurement import sample_records, tomography_settings
from qfredkin.tomography import _stack

core = pytest.importorskip("qfredkin._kernels._core")


def test_backend_is_reported():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("sub", [(1, 0), (0, 2), (1, 1, 1), (2, 0, 1, 1), (1, 1, 1, 1), (3, 0, 0, 0)])
def test_expand_subspace_backends_agree(sub):
    u = unitary_group.rvs(len(sub), random_state=len(sub) + sum(sub))
    a = core.expand_subspace(tuple(sub), u)
    b = _fallback.expand_subspace(tuple(sub), u)
    assert set(a) == set(b)
    for k in a:
        assert a[k] == pytest.approx(b[k], abs=1e-13)


def test_expand_subspace_accepts_read_only_matrix():
    u = unitary_group.rvs(2, random_state=0)
    u.setflags(write=False)
    assert core.expand_subspace((1, 1), u)


def test_mle_backends_agree():
    t = ghz_target("1+")
    rho = 0.85 * np.outer(t, t.conj()) + 0.15 * np.eye(8) / 8
    vecs, counts = _stack(sample_records(rho, tomography_settings(), 4000, 3))
    rho0 = np.eye(8, dtype=complex) / 8
    ra, ha, ia, ca = core.mle_rhor(vecs, counts, rho0)
    rb, hb, ib, cb = _fallback.mle_rhor(vecs, counts, rho0)
    assert ca and cb
    # rounding order differs, so the slow tail may stop a few steps apart
    assert np.abs(ra - rb).max() < 1e-6
    assert abs(ha[-1] - hb[-1]) < 1e-8
    n = min(len(ha), len(hb), 500)
    assert np.allclose(ha[:n], hb[:n], rtol=1e-12, atol=1e-9)


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, QFREDKIN_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from qfredkin import _kernels; print(_kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
