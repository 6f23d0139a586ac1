"""Activity detection statistics and error metrics.

The detection statistic for device n is the row norm of the pseudo-data at
convergence, ||x_hat_n + (S^H R)_n||. A device is declared active when its
statistic strictly exceeds the gate, so ties count as inactive.
"""

import numpy as np


def detection_statistics(x_hat, residual, pilots):
    rows = x_hat + pilots.conj().T @ residual
    return np.linalg.norm(rows, axis=1)


def detect(statistics, gate):
    return np.asarray(statistics) > gate


def confusion(detected, truth):
    """(false-alarm rate, missed-detection rate). A rate whose denominator
    is empty (no inactive devices, or no active ones) comes back as nan."""
    detected = np.asarray(detected, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if detected.shape != truth.shape:
        raise ValueError("detected and truth must have the same shape")
    n_inactive = int(np.count_nonzero(~truth))
    n_active = int(np.count_nonzero(truth))
    p_fa = np.count_nonzero(detected & ~truth) / n_inactive if n_inactive else np.nan
    p_md = np.count_nonzero(~detected & truth) / n_active if n_active else np.nan
    return p_fa, p_md


def roc_sweep(statistics, truth, gates):
    """Confusion rates across a gate grid; returns a list of
    (gate, p_fa, p_md) triples in the given gate order."""
    out = []
    for gate in gates:
        p_fa, p_md = confusion(detect(statistics, gate), truth)
        out.append((float(gate), p_fa, p_md))
    return out


def nmse(x_hat, x_true):
    """Ratio-of-sums normalized squared error over all entries; nan when
    the truth is identically zero."""
    x_hat = np.asarray(x_hat)
    x_true = np.asarray(x_true)
    denom = float(np.sum(np.abs(x_true) ** 2))
    if denom == 0.0:
        return np.nan
    return float(np.sum(np.abs(x_hat - x_true) ** 2)) / denom
