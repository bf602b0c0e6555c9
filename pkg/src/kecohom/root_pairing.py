"""Coefficient ratios kappa_m and condition d from the catalog root data."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .case_catalog import (
    E6_KAPPA,
    E6_MULTIPLICITY,
    E6_THETA_D_NORM_SQ,
    CaseSpec,
    RootVector,
)

__all__ = [
    "PairingReport",
    "MalformedCatalogError",
    "pairing",
    "kappa_ratios",
    "condition_d_holds",
]


class MalformedCatalogError(ValueError):
    """Root data that cannot come from a valid catalog entry."""


@dataclass(frozen=True)
class PairingReport:
    # (kappa, multiplicity) sorted by kappa; multiplicity may be 0 for a
    # rank-one factor whose family is empty
    kappa_values: tuple[tuple[Fraction, int], ...]
    theta_D_norm_sq: Fraction
    condition_d: bool

    def kappa_multiset(self) -> Counter:
        c: Counter = Counter()
        for k, m in self.kappa_values:
            c[k] += m
        return c

    def distinct_magnitudes(self) -> list[Fraction]:
        return sorted({abs(k) for k, _ in self.kappa_values})

    def to_json(self) -> dict:
        return {
            "kappa_values": [{"kappa": str(k), "multiplicity": m} for k, m in self.kappa_values],
            "theta_D_norm_sq": str(self.theta_D_norm_sq),
            "condition_d": self.condition_d,
        }


def pairing(a: RootVector, b: RootVector) -> Fraction:
    if len(a) != len(b):
        raise ValueError(f"coordinate length mismatch: {len(a)} vs {len(b)}")
    total = Fraction(0)
    for x, y in zip(a.coords, b.coords):
        if x and y:
            total += x * y
    return total


def _ratios(case: CaseSpec) -> tuple[tuple[tuple[Fraction, int], ...], Fraction]:
    if pairing(case.theta_kappa, case.theta_D) != 0:
        raise MalformedCatalogError(f"{case.label}: theta_kappa is not orthogonal to theta_D")
    acc: dict[Fraction, int] = {}
    for beta, mult in case.positive_roots:
        den = pairing(case.theta_D, beta)
        if den == 0:
            raise MalformedCatalogError(f"{case.label}: root {beta.to_json()} orthogonal to theta_D")
        k = pairing(case.theta_kappa, beta) / den
        acc[k] = acc.get(k, 0) + mult
    return tuple(sorted(acc.items())), pairing(case.theta_D, case.theta_D)


def _condition_d(values, norm_sq: Fraction, N_F: int, eps_F: int) -> bool:
    return all(norm_sq * abs(k) > N_F + eps_F for k, _ in values)


def kappa_ratios(case: CaseSpec) -> PairingReport:
    """kappa_m = <theta^kappa, beta_m> / <theta_D, beta_m> over R'_+, with multiplicity.

    For the E6 row the coordinate computation is checked against the stored
    constants (kappa = +-24 eight times each, <theta_D, theta_D> = 1).
    """
    values, norm_sq = _ratios(case)
    if case.case_id == 5:
        expected = ((-E6_KAPPA, E6_MULTIPLICITY), (E6_KAPPA, E6_MULTIPLICITY))
        if values != expected or norm_sq != E6_THETA_D_NORM_SQ:
            raise MalformedCatalogError("E6 root data disagrees with the stored constants")
    return PairingReport(values, norm_sq, _condition_d(values, norm_sq, case.N_F, case.epsilon_F))


def condition_d_holds(case: CaseSpec) -> bool:
    """|<theta_D,theta_D> kappa_m| > N_F + eps_F for every kappa_m."""
    return kappa_ratios(case).condition_d
