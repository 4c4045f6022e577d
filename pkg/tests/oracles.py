"""Independent reference implementations used only by the tests.

These deliberately avoid the package's code paths: kernels are built with
explicit loops and posteriors use a dense matrix inverse.
"""

import math

import numpy as np


def se_kernel_loop(A, B, length_scales, signal_variance):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    K = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            r2 = sum(((A[i, k] - B[j, k]) / length_scales[k]) ** 2 for k in range(A.shape[1]))
            K[i, j] = signal_variance * math.exp(-0.5 * r2)
    return K


def dense_posterior(X, y, Q, length_scales, signal_variance, noise_variance, offset, scale):
    """Posterior mean and variance on the original output scale via ``inv(K)``."""
    z = (np.asarray(y) - offset) / scale
    K = se_kernel_loop(X, X, length_scales, signal_variance) + noise_variance * np.eye(len(X))
    Kinv = np.linalg.inv(K)
    Kq = se_kernel_loop(Q, X, length_scales, signal_variance)
    mean = Kq @ Kinv @ z
    var = signal_variance - np.einsum("ij,jk,ik->i", Kq, Kinv, Kq)
    return offset + scale * mean, scale**2 * var


def dense_lml(theta, X, z):
    d = X.shape[1]
    ls = np.exp(theta[:d])
    sf2, sn2 = np.exp(theta[d]), np.exp(theta[d + 1])
    K = se_kernel_loop(X, X, ls, sf2) + sn2 * np.eye(len(X))
    _, logdet = np.linalg.slogdet(K)
    return -0.5 * z @ np.linalg.solve(K, z) - 0.5 * logdet - 0.5 * len(X) * np.log(2 * np.pi)

