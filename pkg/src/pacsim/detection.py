"""Click/no-click detector models and measurement conditioning.

Single-photon detectors are modeled by the standard on/off POVM, diagonal in
photon number: P(click | n) = 1 - (1 - dark_prob) (1 - eta)^n. Conditioning a
joint chain output on a click pattern yields the pattern probability and the
conditional signal state as a weighted ensemble (one pure branch per
unresolved idler photon-number record).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .fock import MultiMode, PureState, WeightedEnsemble, mean_photon_number

#: Pattern probabilities below this are reported as impossible outcomes.
IMPOSSIBLE_PROBABILITY = 1e-30


@dataclass(frozen=True)
class DetectorModel:
    """On/off detector: quantum efficiency and per-gate dark-count probability."""

    eta: float = 1.0
    dark_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.dark_prob < 1.0:
            raise ValueError(f"dark_prob must lie in [0, 1), got {self.dark_prob}")

    @classmethod
    def ideal(cls) -> "DetectorModel":
        return cls(eta=1.0, dark_prob=0.0)

    def click_probability(self, n) -> np.ndarray | float:
        """P(click | n photons arrive) = 1 - (1 - dark)(1 - eta)^n.

        Evaluated as dark + (1 - dark)(1 - (1 - eta)^n), which is the same
        polynomial but returns dark_prob bit-exactly at n = 0. Accepts
        scalars or arrays.
        """
        miss = (1.0 - self.eta) ** np.asarray(n)
        return self.dark_prob + (1.0 - self.dark_prob) * (1.0 - miss)


def click_probability_given_n(detector: DetectorModel, n: int) -> float:
    if n < 0:
        raise ValueError(f"photon count must be nonnegative, got {n}")
    return float(detector.click_probability(n))


@dataclass(frozen=True)
class ClickPattern:
    """One binary outcome per idler detector, in stage order."""

    clicks: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "clicks", tuple(bool(c) for c in self.clicks))

    @classmethod
    def from_string(cls, text: str) -> "ClickPattern":
        """Parse a pattern like "010" (1 = click)."""
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"pattern must be a nonempty string of 0/1, got {text!r}")
        return cls(tuple(c == "1" for c in text))

    def __len__(self) -> int:
        return len(self.clicks)

    def __str__(self) -> str:
        return "".join("1" if c else "0" for c in self.clicks)

    @property
    def n_clicks(self) -> int:
        return sum(self.clicks)


@dataclass(frozen=True)
class ConditionalState:
    """Outcome probability plus the conditional signal ensemble.

    ``ensemble`` is None for impossible outcomes (probability below
    IMPOSSIBLE_PROBABILITY).
    """

    probability: float
    ensemble: WeightedEnsemble | None

    @property
    def impossible(self) -> bool:
        return self.ensemble is None


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome probability plus the conditional idler state (None if impossible)."""

    probability: float
    state: PureState | None

    @property
    def impossible(self) -> bool:
        return self.state is None


@dataclass(frozen=True)
class PatternOutcome:
    """One row of a pattern enumeration: outcome, weight and signal summary."""

    pattern: ClickPattern
    probability: float
    ensemble: WeightedEnsemble | None
    mean_signal_photons: float | None


def _signal_space(joint: PureState) -> MultiMode:
    return MultiMode(joint.space.modes[:1])


def _idler_povm_weights(
    joint: PureState, pattern: ClickPattern, detector: DetectorModel
) -> np.ndarray:
    """POVM weight for every idler photon-number record, flattened."""
    idler_dims = joint.space.dims[1:]
    weights = np.ones(1)
    for clicked, d in zip(pattern.clicks, idler_dims):
        p_click = detector.click_probability(np.arange(d))
        factor = p_click if clicked else 1.0 - p_click
        weights = np.multiply.outer(weights, factor)
    return weights.reshape(-1)


def condition_on_pattern(
    joint: PureState, pattern: ClickPattern, detector: DetectorModel
) -> ConditionalState:
    """Condition a joint (signal + idlers) state on one click pattern.

    Applies the product on/off POVM over the idlers, traces them out, and
    returns the pattern probability together with the normalized conditional
    signal ensemble. Each surviving idler record contributes one pure branch
    with weight proportional to POVM(record) |amplitude|^2.
    """
    n_idlers = joint.space.n_modes - 1
    if len(pattern) != n_idlers:
        raise ValueError(
            f"pattern has {len(pattern)} outcomes for {n_idlers} idler modes"
        )
    ds = joint.space.dims[0]
    columns = joint.amplitudes.reshape(ds, -1)
    mass = np.sum(np.abs(columns) ** 2, axis=0)
    # divide out the (unit, up to roundoff) total so outcome probabilities
    # honor the normalized-state contract exactly
    weights = (mass / mass.sum()) * _idler_povm_weights(joint, pattern, detector)
    probability = float(weights.sum())
    if probability < IMPOSSIBLE_PROBABILITY:
        return ConditionalState(probability=0.0, ensemble=None)
    space = _signal_space(joint)
    branches = tuple(
        (
            float(weights[k] / probability),
            PureState.from_amplitudes(space, columns[:, k]),
        )
        for k in np.nonzero(weights > 0.0)[0]
    )
    return ConditionalState(
        probability=probability,
        ensemble=WeightedEnsemble(space, branches),
    )


def orthogonalized_reference(
    reference: PureState, orthogonal_to: Sequence[PureState]
) -> PureState:
    """Unit component of ``reference`` orthogonal to span(orthogonal_to)."""
    vec = reference.amplitudes.astype(np.complex128)
    basis: list[np.ndarray] = []
    for other in orthogonal_to:
        if other.space.dims != reference.space.dims:
            raise ValueError("orthogonal_to states must share the reference space")
        w = other.amplitudes.astype(np.complex128)
        for b in basis:
            w = w - np.vdot(b, w) * b
        norm = np.linalg.norm(w)
        if norm > 1e-12:
            basis.append(w / norm)
    for b in basis:
        vec = vec - np.vdot(b, vec) * b
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise ValueError("reference lies in the span of orthogonal_to")
    return PureState(reference.space, vec / norm)


def project_signal(
    joint: PureState,
    reference: PureState,
    orthogonal_to: Sequence[PureState] = (),
) -> ProjectionResult:
    """Project the signal mode onto a reference state, keeping the idlers.

    With ``orthogonal_to`` empty this is the bare projector |ref><ref| on the
    signal. Passing states there projects instead onto the component of the
    reference orthogonal to their span; that models an ideal identification
    of the reference among a set of non-orthogonal alternatives (the relevant
    case when heralding on a photon-added state, whose coherent background
    would otherwise dominate the projection).
    """
    if reference.space.dims != joint.space.dims[:1]:
        raise ValueError(
            f"reference dim {reference.space.dims} does not match signal dim "
            f"({joint.space.dims[0]},)"
        )
    if orthogonal_to:
        reference = orthogonalized_reference(reference, orthogonal_to)
    ds = joint.space.dims[0]
    idler_vec = reference.amplitudes.conj() @ joint.amplitudes.reshape(ds, -1)
    probability = float(np.vdot(idler_vec, idler_vec).real)
    if probability < IMPOSSIBLE_PROBABILITY:
        return ProjectionResult(probability=0.0, state=None)
    idler_space = MultiMode(joint.space.modes[1:])
    state = PureState(idler_space, idler_vec / math.sqrt(probability))
    return ProjectionResult(probability=probability, state=state)


def enumerate_patterns(joint: PureState, detector: DetectorModel) -> list[PatternOutcome]:
    """All 2^N click patterns with probabilities and signal summaries.

    Probabilities sum to 1 (POVM completeness). Patterns are listed in
    lexicographic order with no-click first, i.e. "00..", "00..1", ...
    """
    n_idlers = joint.space.n_modes - 1
    outcomes = []
    for bits in product((False, True), repeat=n_idlers):
        pattern = ClickPattern(bits)
        cond = condition_on_pattern(joint, pattern, detector)
        mean_n = None
        if cond.ensemble is not None:
            mean_n = float(
                sum(w * mean_photon_number(s) for w, s in cond.ensemble.branches)
            )
        outcomes.append(
            PatternOutcome(
                pattern=pattern,
                probability=cond.probability,
                ensemble=cond.ensemble,
                mean_signal_photons=mean_n,
            )
        )
    return outcomes
