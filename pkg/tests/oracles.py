"""Independent reference solvers used by the tests."""

import numpy as np


def lasso_design(p, a):
    """``M, b`` with ``0.5||M vec(X) - b||^2 == sum_i lam_i/2 ||W_i X a_i - y_i||^2`` (row-major vec)."""
    blocks, rhs = [], []
    for i, (op, y) in enumerate(zip(p.sampling_ops, p.observations)):
        s = np.sqrt(p.weights[i])
        blocks.append(s * np.kron(op.composed, a[:, i][None, :]))
        rhs.append(s * y)
    return np.vstack(blocks), np.concatenate(rhs)


def coordinate_descent_l1(p, a, iters=20_000, tol=1e-13):
    """Cyclic coordinate descent on ``||X||_1 + sum_i lam_i/2 ||W_i X a_i - y_i||^2`` with A fixed."""
    mat, b = lasso_design(p, a)
    col_sq = (mat * mat).sum(axis=0)
    v = np.zeros(mat.shape[1])
    r = b.copy()
    for _ in range(iters):
        biggest = 0.0
        for j in range(v.size):
            if col_sq[j] == 0.0:
                continue
            rho = mat[:, j] @ r + col_sq[j] * v[j]
            new = np.sign(rho) * max(abs(rho) - 1.0, 0.0) / col_sq[j]
            if new != v[j]:
                r -= mat[:, j] * (new - v[j])
                biggest = max(biggest, abs(new - v[j]))
                v[j] = new
        if biggest < tol:
            break
    x = v.reshape(p.d, p.m)
    return x, float(np.abs(v).sum() + 0.5 * r @ r)
