"""
Numerically stable activations and their reverse-mode counterparts.

All functions operate on the last axis and accept arrays of any leading shape.
"""

import numpy as np


def softmax(z: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max-subtraction."""
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_backward(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    """
    Pull an upstream gradient through a softmax.

    Args:
        p: Softmax output
        dp: Gradient of the objective with respect to ``p``

    Returns:
        Gradient with respect to the softmax logits
    """
    return p * (dp - np.sum(dp * p, axis=-1, keepdims=True))


def sigmoid(z):
    """Two-branch logistic function; never evaluates ``exp`` of a large positive number."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_backward(s: np.ndarray, ds: np.ndarray) -> np.ndarray:
    """Gradient with respect to the sigmoid input, given its output ``s``."""
    return ds * s * (1.0 - s)


def log_prob(p: np.ndarray, index: int) -> float:
    """Natural log of ``p[index]``, clipped away from zero."""
    return float(np.log(max(float(p[index]), np.finfo(np.float64).tiny)))
