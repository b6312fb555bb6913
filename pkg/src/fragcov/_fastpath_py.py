"""Pure-numpy fallback for the compiled inner kernels."""

import numpy as np


def masked_objective_grad(gamma, target, mask):
    """Fused value and gradient of the masked factorized fit.

    value = K^-2 * sum_mask (gamma gamma^T - target)^2
    grad  = 4 K^-2 * (mask o (gamma gamma^T - target)) gamma
    """
    K = gamma.shape[0]
    residual = (gamma @ gamma.T - target) * mask
    inv = 1.0 / (K * K)
    value = inv * float(np.vdot(residual, residual))
    grad = (4.0 * inv) * (residual @ gamma)
    return value, grad
