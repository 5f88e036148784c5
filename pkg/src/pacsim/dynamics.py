"""Two-mode squeezing stages and cascaded-chain evolution.

Each amplifier stage couples the travelling signal mode to a fresh idler
vacuum through U = exp[lam (a_s+ a_i+ - a_s a_i)]. The dimensionless strength
``lam`` bundles pump amplitude, mode coupling and crystal transit time; only
their product matters here. Stages act pairwise on (signal, idler_j), so the
chain is evolved either on the full joint space or sequentially with the
idlers measured off as soon as their stage has fired.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .detection import (
    IMPOSSIBLE_PROBABILITY,
    ClickPattern,
    ConditionalState,
    DetectorModel,
)
from .errors import DimensionBudgetError, StrongCouplingWarning
from .fock import (
    ModeSpec,
    MultiMode,
    PureState,
    WeightedEnsemble,
    coherent_state,
    default_signal_dim,
    lowering_matrix,
)

#: Weak-coupling regime bound; beyond it leading-order scaling claims degrade.
WEAK_COUPLING_LIMIT = 0.3
#: Default cap on joint-space amplitudes for full-chain evolution.
DEFAULT_AMPLITUDE_BUDGET = 20_000_000


@dataclass(frozen=True)
class StageParams:
    """One amplifier stage: effective interaction strength and idler cutoff."""

    lam: float
    idler_dim: int = 4

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.idler_dim < 2:
            raise ValueError(f"idler_dim must be >= 2, got {self.idler_dim}")
        if self.lam > WEAK_COUPLING_LIMIT:
            warnings.warn(
                f"lam={self.lam} is outside the weak-coupling regime "
                f"(> {WEAK_COUPLING_LIMIT}); exact evolution remains valid",
                StrongCouplingWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class ChainConfig:
    """Seed coherent amplitude plus the ordered amplifier stages."""

    alpha: complex
    stages: tuple[StageParams, ...]
    signal_dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ValueError("chain needs at least one stage")
        if self.signal_dim is None:
            object.__setattr__(
                self, "signal_dim", default_signal_dim(self.alpha, len(self.stages))
            )
        elif self.signal_dim < 2:
            raise ValueError(f"signal_dim must be >= 2, got {self.signal_dim}")

    @classmethod
    def uniform(
        cls,
        alpha: complex,
        lam: float,
        n_stages: int,
        idler_dim: int = 4,
        signal_dim: int | None = None,
    ) -> "ChainConfig":
        """Chain of ``n_stages`` identical stages."""
        return cls(alpha, tuple(StageParams(lam, idler_dim) for _ in range(n_stages)),
                   signal_dim)

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def stage_generator(lam: float, signal_dim: int, idler_dim: int) -> np.ndarray:
    """Generator G = lam (a_s+ a_i+ - a_s a_i) on the signal (x) idler space.

    Real and antisymmetric in the Fock basis; exp(G) is therefore exactly
    orthogonal on the truncated space.
    """
    a_s = lowering_matrix(signal_dim)
    a_i = lowering_matrix(idler_dim)
    return lam * (np.kron(a_s.T, a_i.T) - np.kron(a_s, a_i))


def stage_unitary(lam: float, signal_dim: int, idler_dim: int) -> np.ndarray:
    """Exact stage unitary exp(G) as a dense real-orthogonal matrix.

    G conserves the photon-number difference n_s - n_i, so the exponential is
    assembled from one small tridiagonal block per difference value instead of
    exponentiating the full (signal x idler)-sized generator. The result is
    identical to expm(stage_generator(...)) up to roundoff but stays cheap at
    large cutoffs.
    """
    u = np.zeros((signal_dim * idler_dim, signal_dim * idler_dim))
    for delta in range(-(idler_dim - 1), signal_dim):
        k_lo = max(0, -delta)
        k_hi = min(idler_dim, signal_dim - delta)
        ks = np.arange(k_lo, k_hi)
        if ks.size == 0:
            continue
        if ks.size == 1:
            block = np.ones((1, 1))
        else:
            couplings = lam * np.sqrt((delta + ks[:-1] + 1.0) * (ks[:-1] + 1.0))
            gen = np.zeros((ks.size, ks.size))
            rows = np.arange(ks.size - 1)
            gen[rows + 1, rows] = couplings
            gen[rows, rows + 1] = -couplings
            block = expm(gen)
        idx = (delta + ks) * idler_dim + ks
        u[np.ix_(idx, idx)] = block
    return u


def orthogonality_defect(u: np.ndarray) -> float:
    """max |U^T U - I|, the full-space unitarity defect."""
    g = u.T @ u
    g[np.diag_indices_from(g)] -= 1.0
    return float(np.max(np.abs(g)))


def perturbative_output(
    alpha: complex,
    lam: float,
    order: int,
    signal_dim: int | None = None,
    idler_dim: int = 4,
) -> PureState:
    """Taylor expansion of the stage output through ``order`` in lam.

    Expands exp(G)|alpha>|0> literally as (I + G + G^2/2 + ...)|alpha>|0> and
    renormalizes. Valid as a weak-coupling approximation; at order 1 the idler
    single-photon weight obeys P(1)/P(0) = lam^2 (1 + |alpha|^2).
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if signal_dim is None:
        signal_dim = default_signal_dim(alpha, order)
    g = stage_generator(lam, signal_dim, idler_dim)
    signal = coherent_state(alpha, signal_dim)
    vac = np.zeros(idler_dim, dtype=np.complex128)
    vac[0] = 1.0
    psi = np.kron(signal.amplitudes, vac)
    term = psi.copy()
    for k in range(1, order + 1):
        term = (g @ term) / k
        psi = psi + term
    space = MultiMode((ModeSpec(signal_dim, "signal"), ModeSpec(idler_dim, "idler-1")))
    return PureState.from_amplitudes(space, psi)


def _apply_stage_full(
    psi: np.ndarray, dims: tuple[int, ...], stage_index: int, u: np.ndarray
) -> np.ndarray:
    """Apply a (signal, idler_j) unitary inside the joint tensor."""
    t = psi.reshape(dims)
    t = np.moveaxis(t, stage_index + 1, 1)
    shape = t.shape
    mat = t.reshape(shape[0] * shape[1], -1)
    mat = u @ mat
    t = mat.reshape(shape)
    return np.moveaxis(t, 1, stage_index + 1).reshape(-1)


def run_chain_full(
    config: ChainConfig, budget: int = DEFAULT_AMPLITUDE_BUDGET
) -> PureState:
    """Evolve the seed through every stage on the full joint space.

    Output modes are ordered signal, idler-1 .. idler-N. Raises
    DimensionBudgetError when the joint space would exceed ``budget``
    amplitudes; chains that large should use run_chain_sequential.
    """
    dims = (config.signal_dim, *(s.idler_dim for s in config.stages))
    total = math.prod(dims)
    if total > budget:
        raise DimensionBudgetError(
            f"joint space needs {total} amplitudes (budget {budget}); "
            "use run_chain_sequential for long chains"
        )
    modes = [ModeSpec(config.signal_dim, "signal")]
    modes += [ModeSpec(s.idler_dim, f"idler-{j + 1}") for j, s in enumerate(config.stages)]
    space = MultiMode(tuple(modes))

    signal = coherent_state(config.alpha, config.signal_dim)
    psi = signal.amplitudes
    for stage in config.stages:
        vac = np.zeros(stage.idler_dim, dtype=np.complex128)
        vac[0] = 1.0
        psi = np.kron(psi, vac)
    unitaries: dict[tuple[float, int], np.ndarray] = {}
    for j, stage in enumerate(config.stages):
        key = (stage.lam, stage.idler_dim)
        if key not in unitaries:
            unitaries[key] = stage_unitary(stage.lam, config.signal_dim, stage.idler_dim)
        psi = _apply_stage_full(psi, dims, j, unitaries[key])
    return PureState.from_amplitudes(space, psi)


def run_chain_sequential(
    config: ChainConfig, detector: DetectorModel, pattern: ClickPattern
) -> ConditionalState:
    """Chain evolution with each idler measured right after its stage.

    Idlers never interact again once their stage has fired, so the joint
    evolution factorizes into N two-mode problems: every stage entangles the
    current signal branches with a fresh idler, the detector POVM conditions
    on that stage's click outcome, and only the signal survives to the next
    stage. Returns the pattern probability and the conditional signal
    ensemble; agrees with run_chain_full + condition_on_pattern.
    """
    if len(pattern) != config.n_stages:
        raise ValueError(
            f"pattern has {len(pattern)} outcomes for {config.n_stages} stages"
        )
    ds = config.signal_dim
    signal = coherent_state(config.alpha, ds)
    branches: list[tuple[float, np.ndarray]] = [(1.0, signal.amplitudes)]
    unitaries: dict[tuple[float, int], np.ndarray] = {}
    for stage, clicked in zip(config.stages, pattern.clicks):
        di = stage.idler_dim
        key = (stage.lam, di)
        if key not in unitaries:
            unitaries[key] = stage_unitary(stage.lam, ds, di)
        u = unitaries[key]
        n = np.arange(di)
        p_click = detector.click_probability(n)
        povm = p_click if clicked else 1.0 - p_click
        vac = np.zeros(di, dtype=np.complex128)
        vac[0] = 1.0
        new_branches: list[tuple[float, np.ndarray]] = []
        for weight, amps in branches:
            joint = (u @ np.kron(amps, vac)).reshape(ds, di)
            mass = np.sum(np.abs(joint) ** 2, axis=0)
            child_w = weight * (mass / mass.sum()) * povm
            for k in np.nonzero(child_w > 0.0)[0]:
                new_branches.append(
                    (float(child_w[k]), joint[:, k] / math.sqrt(mass[k]))
                )
        branches = new_branches
        if not branches:
            break
    probability = float(sum(w for w, _ in branches))
    if probability < IMPOSSIBLE_PROBABILITY or not branches:
        return ConditionalState(probability=0.0, ensemble=None)
    space = single_signal_space(ds)
    ensemble = WeightedEnsemble(
        space,
        tuple(
            (w / probability, PureState.from_amplitudes(space, amps))
            for w, amps in branches
        ),
    )
    return ConditionalState(probability=probability, ensemble=ensemble)


def single_signal_space(signal_dim: int) -> MultiMode:
    return MultiMode((ModeSpec(signal_dim, "signal"),))
