import numpy as np


def central_diff(f, x, h=1e-6):
    """Central finite differences of a scalar function over an array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return np.abs(a - b).max() / denom


def random_instance(rng, n_max=8, d_max=6, c_max=4):
    """Random unit-norm features/prototypes pair for gradient checks."""
    from protoadapt.model import FeatureSet, Prototypes, l2_normalize_rows

    n = int(rng.integers(1, n_max + 1))
    d = int(rng.integers(2, d_max + 1))
    c = int(rng.integers(2, c_max + 1))
    feats = FeatureSet(
        l2_normalize_rows(rng.standard_normal((n, d))),
        rng.integers(0, c, size=n),
    )
    protos = Prototypes(l2_normalize_rows(rng.standard_normal((c, d))))
    return feats, protos
