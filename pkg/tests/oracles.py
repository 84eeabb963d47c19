"""Independent reference implementations used to check the library.

Everything here is deliberately written the slow, obvious way (explicit
loops, central differences, textbook formulas) so that agreement with the
library is a real two-route check rather than the same code twice.
"""

import numpy as np

from trajgan.tensor import Tape, backward


def finite_diff(f, leaves, h=1e-5, coords=None):
    """Central-difference gradients of the scalar function ``f``.

    ``f`` is re-evaluated with perturbed leaf values; it must not depend on
    any state other than the leaves.  ``coords``, when given, is a list of
    (leaf_index, flat_index) pairs restricting which coordinates are probed;
    unprobed entries are left as NaN.
    """
    grads = [np.full(leaf.data.shape, np.nan) for leaf in leaves]
    if coords is None:
        coords = [(li, i) for li, leaf in enumerate(leaves)
                  for i in range(leaf.data.size)]
    for li, i in coords:
        flat = leaves[li].data.reshape(-1)
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f())
        flat[i] = orig - h
        fm = float(f())
        flat[i] = orig
        grads[li].reshape(-1)[i] = (fp - fm) / (2.0 * h)
    return grads


def relative_error(a, b):
    denom = max(abs(a), abs(b))
    if denom < 1e-6:
        # both effectively zero relative to the loss scale; compare absolutely
        return abs(a - b)
    return abs(a - b) / denom


def assert_grads_match(build_loss, leaves, rtol=1e-4, h=1e-5, coords=None):
    """Backward through ``build_loss`` and compare against finite differences.

    ``build_loss`` must rebuild the graph from the leaves on every call and
    return the scalar loss tensor.
    """
    for leaf in leaves:
        leaf.grad = None
    with Tape():
        loss = build_loss()
        backward(loss)
    auto = [leaf.grad.copy() if leaf.grad is not None else np.zeros(leaf.data.shape)
            for leaf in leaves]
    fd = finite_diff(lambda: build_loss().data, leaves, h=h, coords=coords)
    worst = 0.0
    for li, (a, n) in enumerate(zip(auto, fd)):
        mask = ~np.isnan(n)
        for i in np.flatnonzero(mask.reshape(-1)):
            err = relative_error(a.reshape(-1)[i], n.reshape(-1)[i])
            worst = max(worst, err)
            assert err < rtol, (
                f"gradient mismatch at leaf {li} coord {i}: "
                f"autodiff {a.reshape(-1)[i]!r} vs finite-diff {n.reshape(-1)[i]!r}")
    return worst


def rmse_trajectory_ref(pred, truth):
    """Straight-loop per-trajectory RMSE: sqrt(mean_t of squared point error)."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    assert pred.shape == truth.shape
    total = 0.0
    for t in range(pred.shape[0]):
        dx = pred[t, 0] - truth[t, 0]
        dy = pred[t, 1] - truth[t, 1]
        total += dx * dx + dy * dy
    return float(np.sqrt(total / pred.shape[0]))


def ade_ref(preds, truths):
    """Mean over trajectories of per-trajectory RMSE."""
    vals = [rmse_trajectory_ref(p, t) for p, t in zip(preds, truths)]
    return float(sum(vals) / len(vals))


def fde_ref(preds, truths):
    """Root of the mean over trajectories of the final-point squared error."""
    total = 0.0
    for p, t in zip(preds, truths):
        dx = p[-1, 0] - t[-1, 0]
        dy = p[-1, 1] - t[-1, 1]
        total += dx * dx + dy * dy
    return float(np.sqrt(total / len(preds)))


def jacobi_eigh(a, sweeps=100, tol=1e-14):
    """Brute-force symmetric eigendecomposition via cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) sorted descending, columns are
    eigenvectors.  Independent of LAPACK; only suitable for small matrices.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < tol:
                    continue
                theta = 0.5 * np.arctan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(np.diag(a))[::-1]
    return np.diag(a)[order], v[:, order]
