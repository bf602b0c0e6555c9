"""Root data for the five families of cohomogeneity-one K-manifolds.

Every case is described in epsilon-coordinates of a Cartan subalgebra, with the
Euclidean dot product standing in for the (dual) Killing form.  Vectors for
``su`` factors are projected onto the trace-free hyperplane, which leaves every
pairing with a root unchanged.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "Fiber",
    "Status",
    "RootVector",
    "CaseSpec",
    "Admissibility",
    "CATALOG_SCHEMA_VERSION",
    "FIXED_RANKS",
    "make_case",
    "enumerate_cases",
    "classify",
    "table_kappa",
    "group_names",
    "catalog_json",
    "ClosedFormIntegrand",
    "closed_form_integrand",
]

CATALOG_SCHEMA_VERSION = "1.0"

_HALF = Fraction(1, 2)
_ZERO = Fraction(0)
_ONE = Fraction(1)


class Fiber(str, enum.Enum):
    QUADRIC = "Quadric"
    PROJECTIVE = "ProjectiveSpace"

    @property
    def epsilon(self) -> int:
        return 2 if self is Fiber.PROJECTIVE else 1

    @property
    def short(self) -> str:
        return "CP" if self is Fiber.PROJECTIVE else "Q"

    @classmethod
    def parse(cls, text: str) -> "Fiber":
        key = text.strip().lower()
        if key in ("q", "quadric"):
            return cls.QUADRIC
        if key in ("cp", "p", "projective", "projectivespace"):
            return cls.PROJECTIVE
        raise ValueError(f"unknown fiber {text!r}; expected Q or CP")


class Status(str, enum.Enum):
    PROVEN_KE = "ProvenKE"
    EXCLUDED_CONDITION_D = "ExcludedConditionD"
    EXCLUDED_POSITIVE_INTEGRAL = "ExcludedPositiveIntegral"


@dataclass(frozen=True)
class RootVector:
    coords: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        coords = tuple(c if type(c) is Fraction else Fraction(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return len(self.coords)

    def __add__(self, other: "RootVector") -> "RootVector":
        _check_len(self, other)
        return RootVector(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "RootVector") -> "RootVector":
        _check_len(self, other)
        return RootVector(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __mul__(self, k) -> "RootVector":
        k = Fraction(k)
        return RootVector(tuple(k * a for a in self.coords))

    __rmul__ = __mul__

    def __neg__(self) -> "RootVector":
        return self * -1

    def to_json(self) -> list[str]:
        return [str(c) for c in self.coords]


def _check_len(a: RootVector, b: RootVector) -> None:
    if len(a) != len(b):
        raise ValueError(f"coordinate length mismatch: {len(a)} vs {len(b)}")


@dataclass(frozen=True)
class CaseSpec:
    case_id: int
    rank_params: tuple[int, ...]
    fiber: Fiber
    N_F: int
    theta_D: RootVector
    theta_kappa: RootVector
    positive_roots: tuple[tuple[RootVector, int], ...]

    @property
    def epsilon_F(self) -> int:
        return self.fiber.epsilon

    @property
    def label(self) -> str:
        params = ",".join(str(r) for r in self.rank_params)
        inner = f"({params})" if params else ""
        return f"case{self.case_id}{inner}-{self.fiber.short}"

    def root_count(self) -> int:
        return sum(m for _, m in self.positive_roots)

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "rank_params": list(self.rank_params),
            "fiber": self.fiber.value,
            "N_F": self.N_F,
            "epsilon_F": self.epsilon_F,
            "theta_D": self.theta_D.to_json(),
            "theta_kappa": self.theta_kappa.to_json(),
            "roots": [
                {"coords": r.to_json(), "multiplicity": m} for r, m in self.positive_roots
            ],
        }


@dataclass(frozen=True)
class Admissibility:
    status: Status
    detail: str


# N_F per catalog row
_N_F = {1: 1, 2: 2, 3: 4, 4: 6, 5: 8}

# fibers allowed per row
_FIBERS = {
    1: (Fiber.QUADRIC, Fiber.PROJECTIVE),
    2: (Fiber.PROJECTIVE,),
    3: (Fiber.PROJECTIVE,),
    4: (Fiber.QUADRIC, Fiber.PROJECTIVE),
    5: (Fiber.QUADRIC, Fiber.PROJECTIVE),
}

# rank of G for the rows without rank parameters
FIXED_RANKS = {4: 5, 5: 6}

# E6 data recorded as constants: kappa magnitude, multiplicity per sign, <theta_D, theta_D>
E6_KAPPA = Fraction(24)
E6_MULTIPLICITY = 8
E6_THETA_D_NORM_SQ = Fraction(1)


class _Block:
    """One ``su_n`` factor: coefficients keyed by 0-based index, projected trace-free."""

    def __init__(self, n: int):
        self.n = n

    def vec(self, coeffs: dict[int, Fraction]) -> list[Fraction]:
        raw = [Fraction(coeffs.get(i, 0)) for i in range(self.n)]
        mean = sum(raw, Fraction(0)) / self.n
        if mean == 0:
            return raw
        return [c - mean for c in raw]

    def unit_diff(self, i: int, a: int) -> list[Fraction]:
        v = [_ZERO] * self.n
        v[i], v[a] = _ONE, -_ONE
        return v


def _su_family(n_real: int, head: Sequence[int], phantom: bool):
    """Coordinates for a factor su_{n_real} with tail indices after ``head``.

    A rank-one factor (n_real = 2 with a two-element head) has no tail roots.
    Its family is still carried through a phantom tail coordinate with
    multiplicity zero so that its kappa value is read from the same formula.
    """
    n = n_real + 1 if phantom else n_real
    tail = list(range(len(head), n))
    return _Block(n), tail


def _case1(ell: int, fiber: Fiber) -> CaseSpec:
    blk, tail = _su_family(ell + 1, (0, 1), phantom=False)
    theta_D = blk.vec({0: -_HALF, 1: _HALF})
    kap = {0: ell - 1, 1: ell - 1}
    kap.update({a: -2 for a in tail})
    theta_kappa = blk.vec(kap)
    roots = tuple(
        (RootVector(blk.unit_diff(i, a)), 1) for i in (0, 1) for a in tail
    )
    return CaseSpec(1, (ell,), fiber, _N_F[1], RootVector(theta_D), RootVector(theta_kappa), roots)


def _su2_factor(rank: int):
    """Return (theta_D part, theta_kappa part, [(root part, mult)]) for one case-2 factor."""
    phantom = rank == 1
    blk, tail = _su_family(rank + 1, (0, 1), phantom=phantom)
    theta_D = blk.vec({0: -_HALF, 1: _HALF})
    kap = {0: rank - 1, 1: rank - 1}
    kap.update({a: -2 for a in tail})
    theta_kappa = blk.vec(kap)
    mult = 0 if phantom else 1
    roots = [(blk.unit_diff(i, a), mult) for i in (0, 1) for a in tail]
    return theta_D, theta_kappa, roots, blk.n


def _case2(p: int, q: int, fiber: Fiber) -> CaseSpec:
    dP, kP, rP, nP = _su2_factor(p)
    dQ, kQ, rQ, nQ = _su2_factor(q)
    zP, zQ = [Fraction(0)] * nP, [Fraction(0)] * nQ
    roots = tuple((RootVector(r + zQ), m) for r, m in rP) + tuple(
        (RootVector(zP + r), m) for r, m in rQ
    )
    return CaseSpec(
        2, (p, q), fiber, _N_F[2], RootVector(dP + dQ), RootVector(kP + kQ), roots
    )


def _case3(ell: int, fiber: Fiber) -> CaseSpec:
    blk, tail = _su_family(ell + 1, (0, 1, 2, 3), phantom=False)
    theta_D = blk.vec({0: -_HALF, 1: -_HALF, 2: _HALF, 3: _HALF})
    kap = {i: ell - 1 for i in range(4)}
    kap.update({a: -4 for a in tail})
    theta_kappa = blk.vec(kap)
    roots = tuple((RootVector(blk.unit_diff(i, a)), 1) for i in range(4) for a in tail)
    return CaseSpec(3, (ell,), fiber, _N_F[3], RootVector(theta_D), RootVector(theta_kappa), roots)


def _unit(n: int, i: int) -> list[Fraction]:
    v = [Fraction(0)] * n
    v[i] = Fraction(1)
    return v


def _case4(fiber: Fiber) -> CaseSpec:
    e = [RootVector(_unit(5, i)) for i in range(5)]
    theta_D = _HALF * (e[1] + e[2] + e[3] + e[4])
    theta_kappa = 8 * e[0]
    roots = tuple((e[0] + s * e[i], 1) for i in range(1, 5) for s in (1, -1))
    return CaseSpec(4, (), fiber, _N_F[4], theta_D, theta_kappa, roots)


def _case5(fiber: Fiber) -> CaseSpec:
    # eps_1..eps_6 trace-free in the first six axes; eps spans the last two
    # axes as (1/2, 1/2) so that <eps, eps> = 1/2, all coordinates rational.
    def eps_i(i: int) -> RootVector:
        v = [Fraction(-1, 6)] * 6 + [Fraction(0), Fraction(0)]
        v[i] += 1
        return RootVector(v)

    eps = RootVector([Fraction(0)] * 6 + [_HALF, _HALF])
    e = [eps_i(i) for i in range(6)]
    theta_D = -_HALF * (2 * e[0] + e[5] + eps)
    theta_kappa = 12 * (eps - e[5])
    roots: list[tuple[RootVector, int]] = [(e[i] - e[5], 1) for i in range(5)]
    roots += [(e[i] + e[j] + e[k] + eps, 1) for i, j, k in itertools.combinations(range(5), 3)]
    roots.append((2 * eps, 1))
    return CaseSpec(5, (), fiber, _N_F[5], theta_D, theta_kappa, tuple(roots))


def make_case(case_id: int, rank_params: Iterable[int] = (), fiber: Fiber | str = Fiber.PROJECTIVE) -> CaseSpec:
    """Build one catalog entry; raises ValueError outside the row's domain."""
    if isinstance(fiber, str):
        fiber = Fiber.parse(fiber) if fiber not in Fiber._value2member_map_ else Fiber(fiber)
    params = tuple(int(r) for r in rank_params)
    if case_id not in _N_F:
        raise ValueError(f"case_id must be 1..5, got {case_id}")
    if fiber not in _FIBERS[case_id]:
        raise ValueError(f"case {case_id} admits only fiber {_FIBERS[case_id][0].value}")
    if case_id == 1:
        if len(params) != 1 or params[0] < 2:
            raise ValueError("case 1 needs rank_params (l,) with l >= 2")
        return _case1(params[0], fiber)
    if case_id == 2:
        if len(params) != 2 or min(params) < 1 or sum(params) <= 2:
            raise ValueError("case 2 needs rank_params (p, q) with p, q >= 1 and p + q > 2")
        return _case2(params[0], params[1], fiber)
    if case_id == 3:
        if len(params) != 1 or params[0] <= 3:
            raise ValueError("case 3 needs rank_params (l,) with l > 3")
        return _case3(params[0], fiber)
    if params:
        raise ValueError(f"case {case_id} takes no rank parameters")
    return _case4(fiber) if case_id == 4 else _case5(fiber)


def enumerate_cases(max_rank: int, case_ids: Iterable[int] = (1, 2, 3, 4, 5)) -> list[CaseSpec]:
    """All admissible (case, rank, fiber) combinations with ranks up to ``max_rank``.

    Case 2 is listed with p <= q since swapping the factors gives the same manifold.
    The fixed rows count with the rank of their group (SO_10: 5, E_6: 6).
    """
    if max_rank < 0:
        raise ValueError("max_rank must be non-negative")
    wanted = set(case_ids)
    out: list[CaseSpec] = []
    if 1 in wanted:
        for ell in range(2, max_rank + 1):
            out += [_case1(ell, f) for f in _FIBERS[1]]
    if 2 in wanted:
        for p in range(1, max_rank + 1):
            for q in range(p, max_rank + 1):
                if p + q > 2:
                    out.append(_case2(p, q, Fiber.PROJECTIVE))
    if 3 in wanted:
        out += [_case3(ell, Fiber.PROJECTIVE) for ell in range(4, max_rank + 1)]
    if 4 in wanted and max_rank >= FIXED_RANKS[4]:
        out += [_case4(f) for f in _FIBERS[4]]
    if 5 in wanted and max_rank >= FIXED_RANKS[5]:
        out += [_case5(f) for f in _FIBERS[5]]
    return out


def table_kappa(case: CaseSpec) -> list[Fraction]:
    """The closed-form kappa magnitudes listed for the row, one per root family."""
    cid, r = case.case_id, case.rank_params
    if cid == 1:
        return [Fraction(2 * (r[0] + 1))]
    if cid == 2:
        return [Fraction(2 * (r[0] + 1)), Fraction(2 * (r[1] + 1))]
    if cid == 3:
        return [Fraction(2 * (r[0] - 1) + 8)]
    if cid == 4:
        return [Fraction(16)]
    return [E6_KAPPA]


def classify(case: CaseSpec) -> Admissibility:
    """Expected admissibility of a catalog entry, as stated for the main existence result."""
    cid, r, fib = case.case_id, case.rank_params, case.fiber
    if cid == 1 and r[0] == 2 and fib is Fiber.PROJECTIVE:
        return Admissibility(
            Status.EXCLUDED_CONDITION_D,
            "SU_3 with fiber CP^2: |kappa|<theta_D,theta_D> equals N_F + eps_F",
        )
    if cid == 2 and min(r) == 1:
        return Admissibility(
            Status.EXCLUDED_CONDITION_D,
            "SU_p x SU_2: the rank-one factor gives |kappa|<theta_D,theta_D> = N_F + eps_F",
        )
    if cid == 4 and fib is Fiber.QUADRIC:
        return Admissibility(Status.EXCLUDED_POSITIVE_INTEGRAL, "SO_10 with fiber Q^7: sign integral positive")
    if cid == 5 and fib is Fiber.QUADRIC:
        return Admissibility(Status.EXCLUDED_POSITIVE_INTEGRAL, "E_6 with fiber Q^9: sign integral positive")
    return Admissibility(Status.PROVEN_KE, "condition d holds and the sign integral is negative")


def group_names(case: CaseSpec) -> dict[str, str]:
    """Translate row parameters to group / fiber names (SU_n with n = l + 1)."""
    cid, r = case.case_id, case.rank_params
    if cid == 1:
        G = f"SU_{r[0] + 1}"
        F = "Q^2" if case.fiber is Fiber.QUADRIC else "CP^2"
    elif cid == 2:
        G = f"SU_{r[0] + 1} x SU_{r[1] + 1}"
        F = "CP^3"
    elif cid == 3:
        G = f"SU_{r[0] + 1}"
        F = "CP^5"
    elif cid == 4:
        G = "SO_10"
        F = "Q^7" if case.fiber is Fiber.QUADRIC else "CP^7"
    else:
        G = "E_6"
        F = "Q^9" if case.fiber is Fiber.QUADRIC else "CP^9"
    return {"G": G, "F": F}


def catalog_json(cases: Sequence[CaseSpec]) -> str:
    doc = {
        "schema_version": CATALOG_SCHEMA_VERSION,
        "cases": [c.to_json() for c in cases],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


@dataclass(frozen=True)
class ClosedFormIntegrand:
    """A sign integral in the printed form prefactor * int_0^1 x^p prod(A - B x)^e (k - m sqrt x) dx."""

    prefactor: Fraction
    x_power: Fraction
    factors: tuple[tuple[Fraction, Fraction, int], ...]  # (A, B, exponent)
    linear: tuple[Fraction, Fraction]  # (k, m)

    def normalized_factors(self) -> dict[Fraction, int]:
        """Map abar^2 = A/B to its exponent, dropping empty factors."""
        out: dict[Fraction, int] = {}
        for A, B, e in self.factors:
            if e:
                out[A / B] = out.get(A / B, 0) + e
        return out

    def integrand(self, x: float) -> float:
        val = float(self.prefactor) * x ** float(self.x_power)
        for A, B, e in self.factors:
            val *= (float(A) - float(B) * x) ** e
        k, m = self.linear
        return val * (float(k) - float(m) * math.sqrt(x))


def closed_form_integrand(case: CaseSpec) -> ClosedFormIntegrand:
    """The sign integral as listed in closed form for each row (normalized V_c = 1)."""
    F = Fraction
    cid, r, eps = case.case_id, case.rank_params, case.epsilon_F
    if cid == 1 and eps == 1:
        l = r[0]
        return ClosedFormIntegrand(F(1, 4 ** (l - 1)), F(0), ((F((l + 1) ** 2), F(4), l - 1),), (F(1), F(2)))
    if cid == 1:
        l = r[0]
        return ClosedFormIntegrand(F(1, 2 * 9 ** (l - 1)), F(0), ((F((l + 1) ** 2), F(9), l - 1),), (F(1), F(3)))
    if cid == 2:
        p, q = r
        return ClosedFormIntegrand(
            F(1, 4 ** (p - 1) * 4 ** (q - 1)),
            F(1, 2),
            ((F((p + 1) ** 2), F(4), p - 1), (F((q + 1) ** 2), F(4), q - 1)),
            (F(1), F(2)),
        )
    if cid == 3:
        l = r[0]
        return ClosedFormIntegrand(
            F(1, 9 ** (2 * l - 6)), F(3, 2), ((F((l + 3) ** 2), F(9), 2 * (l - 3)),), (F(2), F(3))
        )
    if cid == 4 and eps == 2:
        return ClosedFormIntegrand(F(1), F(5, 2), ((F(4), F(1), 4),), (F(3), F(4)))
    if cid == 4:
        return ClosedFormIntegrand(F(1, 7 ** 8), F(5, 2), ((F(256), F(49), 4),), (F(6), F(7)))
    if eps == 1:
        return ClosedFormIntegrand(F(1), F(7, 2), ((F(64, 9), F(1), 8),), (F(8), F(9)))
    return ClosedFormIntegrand(F(1), F(7, 2), ((F(144, 25), F(1), 8),), (F(4), F(5)))
