# ghzsim/qstate.py
"""
Branch-product state of one controllable spin and N memory spins.

The controllable spin never leaves its {|g>, |e>} branches during the
protocols simulated here, so the full state is

    c_g |g>_c (x) v_g,1 ... v_g,N  +  c_e |e>_c (x) v_e,1 ... v_e,N

and storage is O(N). Per-spin vectors are (amp_g, amp_e) pairs; sigma_z acts
as sigma_z|g> = -|g>, sigma_z|e> = |e>.

States are immutable: every operation returns a new state.
"""
from dataclasses import dataclass
from functools import reduce
from typing import Sequence
import logging
import math

import numpy as np

from .constants import DENSE_STATE_MAX_SPINS, NORM_TOL, UNITARY_TOL
from .exceptions import CapacityError, InvalidArgumentError

logger = logging.getLogger("ghzsim.qstate")


@dataclass(frozen=True)
class SpinVector:
    """Two-level amplitude pair of a single memory spin."""

    amp_g: complex
    amp_e: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.amp_g, self.amp_e], dtype=complex)

    def norm_squared(self) -> float:
        return abs(self.amp_g) ** 2 + abs(self.amp_e) ** 2


GROUND = SpinVector(1.0 + 0j, 0j)
EXCITED = SpinVector(0j, 1.0 + 0j)


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=complex, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class BranchProductState:
    """
    c_g, c_e: controllable-spin branch amplitudes.
    v_g, v_e: (N, 2) arrays of memory-spin vectors in each branch.
    """

    c_g: complex
    c_e: complex
    v_g: np.ndarray
    v_e: np.ndarray

    def __post_init__(self):
        v_g = _frozen(self.v_g)
        v_e = _frozen(self.v_e)
        if v_g.ndim != 2 or v_g.shape[1] != 2 or v_g.shape != v_e.shape:
            raise InvalidArgumentError(
                f"Branch vectors must both have shape (N, 2), got {v_g.shape} and {v_e.shape}"
            )
        if v_g.shape[0] < 1:
            raise InvalidArgumentError("A state needs at least one memory spin")
        object.__setattr__(self, "v_g", v_g)
        object.__setattr__(self, "v_e", v_e)
        object.__setattr__(self, "c_g", complex(self.c_g))
        object.__setattr__(self, "c_e", complex(self.c_e))

    @classmethod
    def from_spins(
        cls,
        c_g: complex,
        c_e: complex,
        v_g: Sequence[SpinVector],
        v_e: Sequence[SpinVector],
    ) -> "BranchProductState":
        if len(v_g) != len(v_e):
            raise InvalidArgumentError("Both branches must hold the same number of spins")
        return cls(
            c_g=c_g,
            c_e=c_e,
            v_g=np.array([s.as_array() for s in v_g]),
            v_e=np.array([s.as_array() for s in v_e]),
        )

    @property
    def n_spins(self) -> int:
        return self.v_g.shape[0]

    def spins(self, branch: str) -> list:
        """Per-spin vectors of branch "g" or "e" as SpinVector values."""
        rows = self.v_g if branch == "g" else self.v_e
        return [SpinVector(complex(a), complex(b)) for a, b in rows]

    def branch_weights(self) -> tuple:
        """(|c_g|^2 prod ||v_g,i||^2, |c_e|^2 prod ||v_e,i||^2)"""
        norm_g = float(np.prod(np.sum(np.abs(self.v_g) ** 2, axis=1)))
        norm_e = float(np.prod(np.sum(np.abs(self.v_e) ** 2, axis=1)))
        return abs(self.c_g) ** 2 * norm_g, abs(self.c_e) ** 2 * norm_e

    def norm(self) -> float:
        weight_g, weight_e = self.branch_weights()
        return weight_g + weight_e

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def branch_overlaps(self) -> np.ndarray:
        """Per-spin <v_g,i|v_e,i>."""
        return np.sum(np.conj(self.v_g) * self.v_e, axis=1)


def initial_state(n_spins: int) -> BranchProductState:
    """
    State after the (ideal) controllable-spin pi/2 pulse:
    (|g>_c + |e>_c)/sqrt(2) (x) |g...g>.
    """
    if not isinstance(n_spins, (int, np.integer)) or isinstance(n_spins, bool) or n_spins < 1:
        raise InvalidArgumentError(f"n_spins must be a positive integer, got {n_spins!r}")

    ground = np.tile(GROUND.as_array(), (int(n_spins), 1))
    amp = 1 / math.sqrt(2)
    return BranchProductState(c_g=amp, c_e=amp, v_g=ground, v_e=ground)


def unitarity_defect(u: np.ndarray) -> float:
    """Largest entry of |u^dagger u - I| over a stack of 2x2 matrices."""
    u = np.asarray(u, dtype=complex)
    gram = np.conj(np.swapaxes(u, -1, -2)) @ u
    return float(np.max(np.abs(gram - np.eye(2)))) if u.size else 0.0


def apply_branch_unitaries(
    state: BranchProductState,
    u_g: np.ndarray,
    u_e: np.ndarray,
) -> BranchProductState:
    """
    Apply per-spin 2x2 unitaries u_g[i] in the |g>_c branch and u_e[i] in the
    |e>_c branch. Branch amplitudes are untouched.
    """
    u_g = np.asarray(u_g, dtype=complex)
    u_e = np.asarray(u_e, dtype=complex)
    expected = (state.n_spins, 2, 2)
    if u_g.shape != expected or u_e.shape != expected:
        raise InvalidArgumentError(
            f"Expected unitaries of shape {expected}, got {u_g.shape} and {u_e.shape}"
        )

    defect = max(unitarity_defect(u_g), unitarity_defect(u_e))
    if defect > UNITARY_TOL:
        raise InvalidArgumentError(f"Non-unitary branch operator (defect {defect:.3e})")

    return BranchProductState(
        c_g=state.c_g,
        c_e=state.c_e,
        v_g=np.einsum("nij,nj->ni", u_g, state.v_g),
        v_e=np.einsum("nij,nj->ni", u_e, state.v_e),
    )


def measure_plus_y(state: BranchProductState) -> float:
    """
    Probability of |+y>_c = (|e>_c + i|g>_c)/sqrt(2) on the controllable spin:

        1/2 (w_g + w_e) - Im(c_g* c_e prod_i <v_g,i|v_e,i>)
    """
    weight_g, weight_e = state.branch_weights()
    overlap = complex(np.prod(state.branch_overlaps()))
    cross = np.conj(state.c_g) * state.c_e * overlap
    return 0.5 * (weight_g + weight_e) - cross.imag


def to_dense(state: BranchProductState) -> np.ndarray:
    """
    Full 2^(N+1) statevector. Controllable spin is the most significant
    index, memory spin 1 next, memory spin N least significant; |g> before |e>.
    """
    if state.n_spins > DENSE_STATE_MAX_SPINS:
        raise CapacityError(
            f"Dense expansion limited to {DENSE_STATE_MAX_SPINS} memory spins, got {state.n_spins}"
        )

    branch_g = reduce(np.kron, state.v_g)
    branch_e = reduce(np.kron, state.v_e)
    return np.concatenate([state.c_g * branch_g, state.c_e * branch_e])
