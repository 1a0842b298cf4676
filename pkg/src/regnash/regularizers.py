"""Regularizers on the simplex and their mirror maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax, xlogy

from . import _kernels as K
from .errors import SpecError

KINDS = ("entropy", "l2")


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sorting algorithm)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


@dataclass(frozen=True)
class Regularizer:
    kind: str = "entropy"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown regularizer {self.kind!r}; expected one of {KINDS}")

    @property
    def code(self) -> int:
        return K.REG_ENTROPY if self.kind == "entropy" else K.REG_L2

    # single block ----------------------------------------------------
    def mirror(self, y) -> np.ndarray:
        """argmax_p <y, p> - phi(p) over the simplex."""
        y = np.asarray(y, dtype=float)
        return softmax(y) if self.kind == "entropy" else project_simplex(0.5 * y)

    def phi(self, p) -> float:
        p = np.asarray(p, dtype=float)
        return float(xlogy(p, p).sum()) if self.kind == "entropy" else float(p @ p)

    def conjugate(self, y) -> float:
        y = np.asarray(y, dtype=float)
        if self.kind == "entropy":
            return float(logsumexp(y))
        p = self.mirror(y)
        return float(p @ y - self.phi(p))

    def bregman(self, p, q) -> float:
        """D_phi(p, q): KL for entropy, squared distance for l2."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == "entropy":
            return float(xlogy(p, p).sum() - xlogy(p, q).sum())
        d = p - q
        return float(d @ d)

    # whole game --------------------------------------------------------
    def mirror_all(self, game, scores) -> np.ndarray:
        from .values import kernel_args
        args = kernel_args(game)
        return K.mirror(np.ascontiguousarray(scores, dtype=float), args[8], args[9], self.code)


ENTROPY = Regularizer("entropy")
L2 = Regularizer("l2")


def as_regularizer(reg) -> Regularizer:
    if isinstance(reg, Regularizer):
        return reg
    if reg is None:
        return ENTROPY
    return Regularizer(str(reg))
