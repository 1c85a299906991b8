"""Discrete free energy on G_N^n and its Euclidean gradient.

    E(u) = (vol/2) <u, A u> + lam * vol * sum_i W(u_i),   vol = p**(-N n)

The quadratic form equals the pair sum ``(vol/4) sum_ij a_ij (u_i - u_j)**2``
because the rows of ``A`` sum to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operator import _check_state, matvec_fast


@dataclass(frozen=True)
class EnergyBreakdown:
    interaction: float
    potential: float

    @property
    def total(self):
        return self.interaction + self.potential

    def as_dict(self):
        return {"interaction": self.interaction, "potential": self.potential, "total": self.total}


def energy(u, op, rx, Au=None):
    """Energy of the state ``u``; pass ``Au`` to reuse an operator application."""
    u = _check_state(op, u)
    if Au is None:
        Au = matvec_fast(op, u)
    vol = op.params.cell_volume
    interaction = 0.5 * vol * float(np.dot(u, Au))
    potential = rx.lam * vol * float(np.sum(rx.eval_W(u)))
    return EnergyBreakdown(interaction, potential)


def gradient(u, op, rx):
    """``vol * (A u + lam f(u))``."""
    u = _check_state(op, u)
    return op.params.cell_volume * (matvec_fast(op, u) + rx.lam * rx.eval_f(u))
