"""Independent reference computations for the numerical kernels."""

import numpy as np


def pca_by_eigh(R, centering=False):
    """Eigendecomposition of the d x d covariance, sorted descending."""
    R = np.asarray(R, dtype=float)
    if centering:
        R = R - R.mean(axis=0)
    C = R.T @ R / (R.shape[0] - 1)
    lam, V = np.linalg.eigh(C)
    order = np.argsort(lam)[::-1]
    return lam[order], V[:, order]


def ridge_by_solve(Z, P, eps, free_bias=False):
    """Normal equations solved densely with numpy's LU."""
    I = np.eye(Z.shape[1])
    if free_bias:
        I[-1, -1] = 0.0
    return np.linalg.solve(Z.T @ Z + eps * I, Z.T @ P)


def ridge_objective(Z, P, W, eps, free_bias=False):
    pen = W[:-1] if free_bias else W
    return float(np.sum((Z @ W - P) ** 2) + eps * np.sum(pen**2))


def kf_cycle(x, P, z, q, r):
    """Predict/update written out with explicit inverses."""
    F = np.array([[1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)
    H = np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
    xp = F.dot(x)
    Pp = F.dot(P).dot(F.T) + q * np.eye(4)
    S = H.dot(Pp).dot(H.T) + r * np.eye(2)
    K = Pp.dot(H.T).dot(np.linalg.inv(S))
    xn = xp + K.dot(z - H.dot(xp))
    Pn = (np.eye(4) - K.dot(H)).dot(Pp)
    return xn, Pn


def rmse_loop(truth, est):
    sx = sy = 0.0
    for (tx, ty), (ex, ey) in zip(truth, est):
        sx += (ex - tx) ** 2
        sy += (ey - ty) ** 2
    n = len(truth)
    return ((sx + sy) / n) ** 0.5, (sx / n) ** 0.5, (sy / n) ** 0.5


def fisher_loop(f, c):
    f = list(map(float, f))
    mu = sum(f) / len(f)
    num = den = 0.0
    for lab in set(c):
        v = [fi for fi, ci in zip(f, c) if ci == lab]
        m = sum(v) / len(v)
        num += len(v) * (m - mu) ** 2
        den += sum((x - m) ** 2 for x in v)
    return num / den
