import numpy as np
import pytest


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def pinv_svd(A, rcond=1e-13):
    """Moore-Penrose pseudoinverse from a full SVD, written out by hand."""
    U, s, Vh = np.linalg.svd(A, full_matrices=True)
    m, n = A.shape
    S_inv = np.zeros((n, m), dtype=complex)
    cutoff = rcond * s.max()
    for i, v in enumerate(s):
        if v > cutoff:
            S_inv[i, i] = 1.0 / v
    return Vh.conj().T @ S_inv @ U.conj().T


def central_diff(f, x, h=1e-5):
    """Gradient of scalar ``f`` at real array ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def complex_central_diff(f, z, h=1e-5):
    """``dL/dRe + i dL/dIm`` of real ``f`` at complex array ``z``."""
    z = np.array(z, dtype=np.complex128)
    g = np.zeros_like(z)
    for i in np.ndindex(z.shape):
        for unit in (1.0, 1j):
            zp = z.copy()
            zp[i] += h * unit
            zm = z.copy()
            zm[i] -= h * unit
            g[i] += unit * (f(zp) - f(zm)) / (2 * h)
    return g


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def shifted_coil_field(n_coils, n, seed=0):
    """Continuous multi-coil k-space where coil ``c`` is a base signal shifted by ``c/n`` in k_x.

    The base is the exact DFT of a random complex image, so every coil obeys
    ``y_c(k) = y_{c+1}(k + e_x / n)`` exactly.
    """
    rng = np.random.default_rng(seed)
    img = crandn(rng, n, n) * 0.1
    r = np.arange(n) - n // 2

    def field(coords):
        coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
        out = np.empty((len(coords), n_coils), dtype=complex)
        for c in range(n_coils):
            kx = coords[:, 0] - c / n
            ex = np.exp(-2j * np.pi * np.outer(kx, r))
            ey = np.exp(-2j * np.pi * np.outer(coords[:, 1], r))
            out[:, c] = np.sum((ex @ img) * ey, axis=1)
        return out

    return field


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
