"""Frame-level Monte Carlo of pair emission, loss and dark counts.

An independent statistical check on the analytic post-selection and case
probabilities.  Each emitted pair is detected independently (binomial
thinning), which is exact for the loss model used throughout.  No arrival
times are drawn.

Frames are generated in fixed-size chunks, each with its own generator
spawned from one :class:`numpy.random.SeedSequence`, so the output depends
only on ``(seed, count)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .photon_stats import (
    CaseWeights,
    case_probabilities_raw,
    coincidence_prob,
    postselect_prob_closed_form,
)
from .scenario import Scenario

CHUNK_FRAMES = 1 << 20
NOT_POSTSELECTED = 0


@dataclass(frozen=True)
class FrameSample:
    n_pairs: int
    alice_photon_click: bool
    bob_photon_click: bool
    alice_dark: bool
    bob_dark: bool
    case_label: int | None


@dataclass(frozen=True)
class FrameBatch:
    """Column-wise block of frames; ``case_label`` is 0 when not post-selected."""

    n_pairs: np.ndarray
    alice_photon_click: np.ndarray
    bob_photon_click: np.ndarray
    alice_dark: np.ndarray
    bob_dark: np.ndarray
    case_label: np.ndarray

    def __len__(self) -> int:
        return int(self.n_pairs.size)

    def __iter__(self) -> Iterator[FrameSample]:
        for i in range(len(self)):
            label = int(self.case_label[i])
            yield FrameSample(
                int(self.n_pairs[i]),
                bool(self.alice_photon_click[i]),
                bool(self.bob_photon_click[i]),
                bool(self.alice_dark[i]),
                bool(self.bob_dark[i]),
                label if label != NOT_POSTSELECTED else None,
            )


def label_cases(n, a_ph, b_ph, a_dk, b_dk) -> np.ndarray:
    """Assign the five arrival-time cases to post-selected frames."""
    post = (a_ph | a_dk) & (b_ph | b_dk)
    both = a_ph & b_ph
    clean_single = both & (n == 1) & ~a_dk & ~b_dk
    labels = np.zeros(n.shape, dtype=np.int8)
    labels[clean_single] = 1
    labels[both & ~clean_single] = 2
    labels[a_ph & ~b_ph & b_dk] = 3
    labels[~a_ph & b_ph & a_dk] = 4
    labels[~a_ph & ~b_ph & a_dk & b_dk] = 5
    labels[~post] = NOT_POSTSELECTED
    return labels


def _thin(rng: np.random.Generator, n: np.ndarray, eta: float) -> np.ndarray:
    """True where at least one of n photons survives a loss of 1 - eta."""
    hit = np.zeros(n.shape, dtype=bool)
    nz = n > 0
    hit[nz] = rng.binomial(n[nz], eta) > 0
    return hit


def _chunk(rng: np.random.Generator, lam: float, eta_a: float, eta_bp: float, p_d: float, size: int) -> FrameBatch:
    n = rng.poisson(lam, size)
    a_ph = _thin(rng, n, eta_a)
    b_ph = _thin(rng, n, eta_bp)
    a_dk = rng.random(size) < p_d
    b_dk = rng.random(size) < p_d
    return FrameBatch(n, a_ph, b_ph, a_dk, b_dk, label_cases(n, a_ph, b_ph, a_dk, b_dk))


def sample_frames_raw(
    lam: float, eta_a: float, eta_b_eta_p: float, p_d: float, seed: int, count: int
) -> Iterator[FrameBatch]:
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    if lam < 0:
        raise ValueError(f"mean pair number must be non-negative, got {lam}")
    n_chunks = -(-count // CHUNK_FRAMES)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for i, child in enumerate(children):
        size = min(CHUNK_FRAMES, count - i * CHUNK_FRAMES)
        yield _chunk(np.random.default_rng(child), lam, eta_a, eta_b_eta_p, p_d, size)


def sample_frames(lam: float, scenario: Scenario, seed: int, count: int) -> Iterator[FrameBatch]:
    """Stream of frame batches at mean pair number ``lam`` (Eve absent)."""
    return sample_frames_raw(lam, scenario.eta_a, scenario.eta_b_eta_p, scenario.p_d, seed, count)


@dataclass(frozen=True)
class MCEstimate:
    frames: int
    postselected: int
    singles: int  # frames with exactly one pair
    P_hat: float
    P_se: float
    pi_hat: tuple[float, ...]  # cases 1..5
    pi_se: tuple[float, ...]
    F_hat: float
    F_se: float
    C1_hat: float
    C1_se: float


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n) if n > 0 else math.nan


def estimate_observables(samples: FrameBatch | Iterable[FrameBatch]) -> MCEstimate:
    """Empirical P_λ, π₁…π₅, F_λ and C₁ with binomial standard errors."""
    if isinstance(samples, FrameBatch):
        samples = (samples,)
    frames = post = singles = singles_post = 0
    counts = np.zeros(6, dtype=np.int64)
    for batch in samples:
        labels = batch.case_label
        frames += len(batch)
        is_post = labels != NOT_POSTSELECTED
        post += int(is_post.sum())
        one = batch.n_pairs == 1
        singles += int(one.sum())
        singles_post += int((one & is_post).sum())
        counts += np.bincount(labels, minlength=6)[:6]
    if frames == 0:
        raise ValueError("no frames sampled")
    if post == 0:
        raise ValueError(f"none of {frames} frames was post-selected; nothing to estimate")

    p_hat = post / frames
    pi = tuple(float(c) / post for c in counts[1:])
    f_hat = singles_post / post
    c1_hat = singles_post / singles if singles else math.nan
    return MCEstimate(
        frames,
        post,
        singles,
        p_hat,
        _binomial_se(p_hat, frames),
        pi,
        tuple(_binomial_se(p, post) for p in pi),
        f_hat,
        _binomial_se(f_hat, post),
        c1_hat,
        _binomial_se(c1_hat, singles),
    )


@dataclass(frozen=True)
class ValidationRow:
    """One analytic-vs-empirical comparison.

    ``se`` is the binomial error under the analytic value, so rare cases with
    no sampled events still get a finite z-score.
    """

    quantity: str
    analytic: float
    empirical: float
    trials: int

    @property
    def se(self) -> float:
        return _binomial_se(self.analytic, self.trials)

    @property
    def z(self) -> float:
        if self.se > 0:
            return (self.empirical - self.analytic) / self.se
        return 0.0 if self.empirical == self.analytic else math.inf

    def within(self, sigmas: float = 4.0) -> bool:
        return abs(self.z) <= sigmas


def validation_table(lam: float, scenario: Scenario, estimate: MCEstimate) -> list[ValidationRow]:
    """Analytic vs empirical P_λ, F_λ, C₁ and π₁…π₅."""
    eta_a, eta_bp, p_d = scenario.eta_a, scenario.eta_b_eta_p, scenario.p_d
    p = postselect_prob_closed_form(lam, eta_a, eta_bp, p_d)
    weights: CaseWeights = case_probabilities_raw(lam, eta_a, eta_bp, p_d)
    c1 = coincidence_prob(1, eta_a, eta_bp, p_d)
    f = lam * math.exp(-lam) * c1 / p
    singles = estimate.singles
    rows = [
        ValidationRow("P", p, estimate.P_hat, estimate.frames),
        ValidationRow("F", f, estimate.F_hat, estimate.postselected),
        ValidationRow("C1", c1, estimate.C1_hat, singles),
    ]
    for i, (exact, emp) in enumerate(zip(weights.as_tuple(), estimate.pi_hat), start=1):
        rows.append(ValidationRow(f"pi_{i}", exact, emp, estimate.postselected))
    return rows
