"""Multinomial logit choice model with facility availability.

Probabilities for customer ``n`` over the alternatives (candidates, then
competitors) are

    p_n(d) = phi_d a_nd z_d / S_n,   p_n(e) = b_ne / S_n,
    S_n = sum_k phi_k a_nk z_k + b_n.

A decision ``z`` is a boolean vector with one entry per candidate.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import DomainError
from .instance import PrecomputedUtilities


def transform(x) -> np.ndarray:
    return np.exp(np.asarray(x, dtype=float))


def recover(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if np.any(~(phi > 0)):
        raise DomainError("transformed covariates must be strictly positive")
    return np.log(phi)


def decision(open_set: Iterable[int], n_candidates: int) -> np.ndarray:
    z = np.zeros(n_candidates, dtype=bool)
    z[list(open_set)] = True
    return z


def open_set(z) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(z))


def _attraction(phi, z, pre: PrecomputedUtilities) -> np.ndarray:
    """(N, D) matrix phi_d a_nd z_d."""
    return pre.a_hat * (np.asarray(phi, dtype=float) * np.asarray(z, dtype=float))


def probabilities(phi, z, pre: PrecomputedUtilities) -> np.ndarray:
    """(N, D+E) choice probabilities for all customers."""
    att = _attraction(phi, z, pre)
    s = att.sum(axis=1) + pre.b_sum
    return np.hstack([att, pre.b]) / s[:, None]


def choice_probabilities(phi, z, pre: PrecomputedUtilities, n: int) -> np.ndarray:
    att = pre.a_hat[n] * np.asarray(phi, dtype=float) * np.asarray(z, dtype=float)
    s = att.sum() + pre.b_sum[n]
    return np.concatenate([att, pre.b[n]]) / s


def captured_demand(phi, z, pre: PrecomputedUtilities, weights) -> float:
    att = _attraction(phi, z, pre)
    a = att.sum(axis=1)
    return float(np.dot(weights, a / (a + pre.b_sum)))


def facility_demand(phi, z, pre: PrecomputedUtilities, weights) -> np.ndarray:
    """Captured demand split by candidate facility, shape (D,)."""
    att = _attraction(phi, z, pre)
    s = att.sum(axis=1) + pre.b_sum
    return np.asarray(weights, dtype=float) @ (att / s[:, None])


def demand_gradient(phi, z, pre: PrecomputedUtilities, weights) -> np.ndarray:
    """dQ/dphi_d, zero for closed candidates."""
    zf = np.asarray(z, dtype=float)
    att = _attraction(phi, z, pre)
    s = att.sum(axis=1) + pre.b_sum
    coef = np.asarray(weights, dtype=float) * pre.b_sum / s**2
    return (coef @ pre.a_hat) * zf


def probability_jacobian(phi, z, pre: PrecomputedUtilities, n: int) -> np.ndarray:
    """Jacobian of ``p_n`` with respect to phi of the open candidates.

    Returns an array of shape (D+E, k) where column ``j`` corresponds to the
    ``j``-th open candidate in increasing index order.
    """
    phi = np.asarray(phi, dtype=float)
    zf = np.asarray(z, dtype=float)
    idx = np.flatnonzero(z)
    a = pre.a_hat[n]
    s = float(np.dot(phi * a, zf) + pre.b_sum[n])
    numer = np.concatenate([phi * a * zf, pre.b[n]])
    # d/dphi_d [numer_c / s] = (1{c=d} a_d z_d s - numer_c a_d z_d) / s^2
    jac = -np.outer(numer, a[idx] * zf[idx]) / s**2
    jac[idx, np.arange(idx.size)] += a[idx] * zf[idx] / s
    return jac
