"""Truncated Fock-space representation: modes, pure states, ladder operators.

Every mode lives in a finite window |0>..|dim-1>. Multimode amplitudes are
flattened row-major in mode order, with mode 0 (the signal, by convention)
varying slowest; ``amplitudes.reshape(space.dims)`` therefore yields a tensor
indexed by occupation numbers. States are stored normalized; probabilities of
conditional branches are carried outside the state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, NamedTuple

import numpy as np

from .errors import TruncationError, TruncationWarning

#: Largest probability mass allowed outside the truncation window.
TAIL_MASS_LIMIT = 1e-12
#: Ladder leakage above this triggers a TruncationWarning.
LEAKAGE_WARN_LIMIT = 1e-10
#: Stored states must be normalized within this tolerance.
NORM_TOL = 1e-12

_LAGUERRE_SERIES_MAX = 12
_LAGUERRE_ORDER_GUARD = 170


@dataclass(frozen=True)
class ModeSpec:
    """One bosonic mode with Fock truncation ``dim`` and a human label."""

    dim: int
    label: str

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"mode {self.label!r}: dim must be >= 2, got {self.dim}")


@dataclass(frozen=True)
class MultiMode:
    """Ordered mode list; index 0 is the signal, 1..N are idlers in stage order."""

    modes: tuple[ModeSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"mode labels must be unique, got {labels}")
        if self.total_dim > np.iinfo(np.intp).max:
            raise ValueError("total dimension overflows the addressable index range")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.dim for m in self.modes)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)


def single_mode(dim: int, label: str = "signal") -> MultiMode:
    return MultiMode((ModeSpec(dim, label),))


@dataclass(frozen=True)
class PureState:
    """Normalized complex amplitude vector over a MultiMode space."""

    space: MultiMode
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.space.total_dim,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, "
                f"space needs ({self.space.total_dim},)"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state must be normalized, got norm {norm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, space: MultiMode, raw: np.ndarray) -> "PureState":
        """Build a state from an unnormalized vector, dividing out its norm."""
        raw = np.asarray(raw, dtype=np.complex128)
        norm = np.linalg.norm(raw)
        if norm == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return cls(space, raw / norm)

    def tensor_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per mode (read-only view)."""
        return self.amplitudes.reshape(self.space.dims)


@dataclass(frozen=True)
class WeightedEnsemble:
    """Probability-weighted mixture of pure states on a common space.

    Represents conditional states under imperfect detection, where different
    unobserved photon numbers leave distinct pure branches.
    """

    space: MultiMode
    branches: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "branches", tuple((float(w), s) for w, s in self.branches)
        )
        if not self.branches:
            raise ValueError("ensemble needs at least one branch")
        for w, state in self.branches:
            if not 0.0 <= w <= 1.0 + 1e-10:
                raise ValueError(f"branch weight {w} outside [0, 1]")
            if state.space.dims != self.space.dims:
                raise ValueError("all branch states must share the ensemble space")
        total = sum(w for w, _ in self.branches)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"branch weights must sum to 1, got {total!r}")

    @classmethod
    def pure(cls, state: PureState) -> "WeightedEnsemble":
        return cls(state.space, ((1.0, state),))


class LadderResult(NamedTuple):
    """Unnormalized result of a ladder operator, with norm and leakage.

    ``leakage`` is the input probability mass sitting at the top Fock level
    of the raised mode, i.e. the mass whose image falls outside the window.
    """

    amplitudes: np.ndarray
    norm: float
    leakage: float


# ---------------------------------------------------------------------------
# Laguerre polynomials
# ---------------------------------------------------------------------------

def laguerre_series(m: int, x: float) -> float:
    """L_m(x) by the defining series sum_n (-1)^n x^n m! / ((n!)^2 (m-n)!).

    The alternating terms cancel catastrophically in floats for x > 0 and
    large m, so the sum runs in exact rational arithmetic (a float argument
    is an exact rational) and is rounded once at the end.
    """
    xr = Fraction(x)
    total = Fraction(0)
    m_fact = math.factorial(m)
    for n in range(m + 1):
        coeff = Fraction(m_fact, math.factorial(n) ** 2 * math.factorial(m - n))
        total += (-1) ** n * xr**n * coeff
    return float(total)


def laguerre_recurrence(m: int, x: float) -> float:
    """L_m(x) by the stable three-term recurrence."""
    if m == 0:
        return 1.0
    prev, cur = 1.0, 1.0 - x
    for k in range(1, m):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur


def laguerre(m: int, x: float) -> float:
    """Laguerre polynomial L_m(x); series for small m, recurrence above.

    For x <= 0 all series terms are nonnegative, so L_m(x) >= 1.
    """
    if m < 0:
        raise ValueError(f"order must be nonnegative, got {m}")
    if m > _LAGUERRE_ORDER_GUARD:
        raise ValueError(
            f"order {m} exceeds the factorial overflow guard ({_LAGUERRE_ORDER_GUARD})"
        )
    if not math.isfinite(x):
        raise ValueError(f"argument must be finite, got {x}")
    if m <= _LAGUERRE_SERIES_MAX:
        return laguerre_series(m, x)
    return laguerre_recurrence(m, x)


# ---------------------------------------------------------------------------
# State constructors
# ---------------------------------------------------------------------------

def default_signal_dim(alpha: complex, added_photons: int = 0) -> int:
    """Truncation policy: cutoff keeping coherent tail mass below 1e-12.

    ``added_photons`` reserves headroom for photon-addition operations.
    """
    a = abs(alpha)
    return max(16, math.ceil(a * a + 6.0 * a + 10.0) + added_photons)


def coherent_state(alpha: complex, dim: int, label: str = "signal") -> PureState:
    """Coherent state |alpha> truncated at ``dim``, renormalized.

    Amplitudes follow c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!). Raises
    TruncationError when the truncated tail mass exceeds 1e-12.
    """
    space = single_mode(dim, label)
    amps = np.zeros(dim, dtype=np.complex128)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    tail = 1.0 - float(np.sum(np.abs(amps) ** 2))
    if tail > TAIL_MASS_LIMIT:
        raise TruncationError(
            f"coherent state with |alpha|={abs(alpha):.4g} has tail mass "
            f"{tail:.3e} beyond dim {dim}",
            suggested_dim=default_signal_dim(alpha),
        )
    return PureState.from_amplitudes(space, amps)


def fock_state(n: int, dim: int, label: str = "signal") -> PureState:
    """Number state |n>."""
    if not 0 <= n < dim:
        raise ValueError(f"photon number {n} outside the window [0, {dim})")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[n] = 1.0
    return PureState(single_mode(dim, label), amps)


def pacs_state(alpha: complex, m: int, dim: int, label: str = "signal") -> PureState:
    """Photon-added coherent state: m creation operators on |alpha>, normalized.

    The squared norm removed by normalization equals m! L_m(-|alpha|^2);
    reduces to the coherent state at m=0 and to |m> at alpha=0.
    """
    if m < 0:
        raise ValueError(f"photon-addition order must be nonnegative, got {m}")
    if m == 0:
        return coherent_state(alpha, dim, label)
    if alpha == 0:
        return fock_state(m, dim, label)
    state = coherent_state(alpha, dim, label)
    raw = state.amplitudes
    leak_total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        for _ in range(m):
            interim = PureState.from_amplitudes(state.space, raw)
            raised = ladder_apply(interim, 0, "raise")
            leak_total += raised.leakage
            raw = raised.amplitudes
    if leak_total > TAIL_MASS_LIMIT:
        raise TruncationError(
            f"adding {m} photons to |alpha|={abs(alpha):.4g} leaks mass "
            f"{leak_total:.3e} past dim {dim}",
            suggested_dim=default_signal_dim(alpha, m),
        )
    return PureState.from_amplitudes(state.space, raw)


# ---------------------------------------------------------------------------
# Operators and composition
# ---------------------------------------------------------------------------

def lowering_matrix(dim: int) -> np.ndarray:
    """Dense annihilation operator: a|n> = sqrt(n)|n-1>."""
    a = np.zeros((dim, dim))
    n = np.arange(1, dim)
    a[n - 1, n] = np.sqrt(n)
    return a


def raising_matrix(dim: int) -> np.ndarray:
    """Dense creation operator on the window; the top level maps out and is cut."""
    return lowering_matrix(dim).T.copy()


def ladder_apply(
    state: PureState, mode: int, kind: Literal["raise", "lower"]
) -> LadderResult:
    """Apply a creation or annihilation operator to one mode.

    Raising drops the amplitude that leaves the window; the input mass at the
    top level is reported as ``leakage`` and warned about above 1e-10.
    """
    dims = state.space.dims
    if not 0 <= mode < len(dims):
        raise ValueError(f"mode index {mode} outside 0..{len(dims) - 1}")
    if kind not in ("raise", "lower"):
        raise ValueError(f"kind must be 'raise' or 'lower', got {kind!r}")
    d = dims[mode]
    tensor = np.moveaxis(state.tensor_view().copy(), mode, 0)
    out = np.zeros_like(tensor)
    factors = np.sqrt(np.arange(1, d))
    leakage = 0.0
    if kind == "raise":
        leakage = float(np.sum(np.abs(tensor[d - 1]) ** 2))
        out[1:] = factors.reshape((-1,) + (1,) * (tensor.ndim - 1)) * tensor[:-1]
        if leakage > LEAKAGE_WARN_LIMIT:
            warnings.warn(
                f"raising mode {mode} leaks mass {leakage:.3e} past its window",
                TruncationWarning,
                stacklevel=2,
            )
    else:
        out[:-1] = factors.reshape((-1,) + (1,) * (tensor.ndim - 1)) * tensor[1:]
    result = np.moveaxis(out, 0, mode).reshape(-1)
    return LadderResult(result, float(np.linalg.norm(result)), leakage)


def tensor(a: PureState, b: PureState) -> PureState:
    """Kronecker composition; modes of ``a`` come first (and vary slowest)."""
    space = MultiMode(a.space.modes + b.space.modes)
    return PureState(space, np.kron(a.amplitudes, b.amplitudes))


def partial_trace_to_marginal(state: PureState, keep: Iterable[int]) -> np.ndarray:
    """Joint photon-number distribution over the kept modes.

    Returns an array with one axis per kept mode (in mode-index order);
    entries sum to 1 up to float roundoff.
    """
    keep = sorted(set(keep))
    n = state.space.n_modes
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep={keep} is not a valid subset of modes 0..{n - 1}")
    probs = np.abs(state.tensor_view()) ** 2
    drop = tuple(i for i in range(n) if i not in keep)
    return probs.sum(axis=drop) if drop else probs


def fidelity_pure(a: PureState, b: PureState) -> float:
    """Overlap fidelity |<a|b>|^2."""
    if a.space.dims != b.space.dims:
        raise ValueError(f"incompatible spaces {a.space.dims} vs {b.space.dims}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def fidelity_ensemble(ensemble: WeightedEnsemble, reference: PureState) -> float:
    """<ref| rho |ref> for the ensemble's density operator rho."""
    return float(
        sum(w * fidelity_pure(state, reference) for w, state in ensemble.branches)
    )


def mean_photon_number(state: PureState, mode: int = 0) -> float:
    dist = partial_trace_to_marginal(state, [mode])
    return float(np.dot(np.arange(dist.size), dist))
