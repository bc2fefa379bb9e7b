"""Model parameters, invariant sectors and regime classification.

Two families are supported:

* ``TWO_MODE``: ``H = w(a1+ a1 + a2+ a2) + D sz + g sx (a1+ a2+ + a1 a2)``, split
  into su(1,1) blocks labelled by the Bargmann index ``kappa = 1/2, 1, 3/2, ...``.
* ``K_PHOTON``: ``H = w a+ a + D sz + g sx (a+^k + a^k)``, split into ``k`` blocks
  labelled by ``q = (r k + 1) / k^2`` with Fock offset ``r = 0 .. k-1``.

Each block further splits into two parity sectors (``PLUS``/``MINUS``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import BlockMismatch, CouplingZero, NoCharacteristicEquation, ParameterError


class Family(str, enum.Enum):
    TWO_MODE = "two-mode"
    K_PHOTON = "k-photon"


class Parity(str, enum.Enum):
    PLUS = "plus"
    MINUS = "minus"

    @property
    def sign(self) -> int:
        return 1 if self is Parity.PLUS else -1

    @property
    def symbol(self) -> str:
        return "+" if self is Parity.PLUS else "-"


class Verdict(str, enum.Enum):
    NORMALIZABLE = "normalizable"
    NON_NORMALIZABLE = "non-normalizable"
    UNDEFINED_K_GE_3 = "undefined-k-ge-3"


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one Hamiltonian.

    ``k`` is ignored for the two-mode family, which is a distinct model and
    not the ``k = 2`` member of the k-photon family.
    """

    family: Family
    omega: float
    delta: float
    g: float
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("omega", "delta", "g"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.omega <= 0:
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if self.family is Family.K_PHOTON:
            if int(self.k) != self.k or self.k < 1:
                raise ParameterError(f"k must be a positive integer, got {self.k!r}")
            object.__setattr__(self, "k", int(self.k))
        else:
            object.__setattr__(self, "k", 1)

    @classmethod
    def two_mode(cls, omega: float, delta: float, g: float) -> "ModelParams":
        return cls(Family.TWO_MODE, omega, delta, g)

    @classmethod
    def k_photon(cls, k: int, omega: float, delta: float, g: float) -> "ModelParams":
        return cls(Family.K_PHOTON, omega, delta, g, k)

    def scaled(self, factor: float) -> "ModelParams":
        return ModelParams(self.family, self.omega * factor, self.delta * factor, self.g * factor, self.k)

    def with_delta(self, delta: float) -> "ModelParams":
        return ModelParams(self.family, self.omega, delta, self.g, self.k)

    def require_coupling(self) -> None:
        if self.g == 0.0:
            raise CouplingZero("recurrence coefficients divide by g; g = 0 is oracle-only")

    def as_dict(self) -> dict:
        out = {"family": self.family.value, "omega": self.omega, "delta": self.delta, "g": self.g}
        if self.family is Family.K_PHOTON:
            out["k"] = self.k
        return out


@dataclass(frozen=True)
class SectorLabel:
    """One invariant subspace: block label (kappa or q) plus parity."""

    block: Fraction
    parity: Parity

    def __post_init__(self):
        object.__setattr__(self, "block", Fraction(self.block))
        object.__setattr__(self, "parity", Parity(self.parity))

    def __str__(self):
        return f"{self.block}{self.parity.symbol}"


def parse_block(text) -> Fraction:
    """Parse ``"1/2"``, ``"1.5"`` or a number into an exact block label."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, float):
        return Fraction(text).limit_denominator(10_000)
    try:
        return Fraction(str(text).strip()).limit_denominator(10_000)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParameterError(f"cannot parse block label {text!r}") from exc


def fock_offset(params: ModelParams, block: Fraction) -> int:
    """Fock offset ``r = (k^2 q - 1) / k`` of a k-photon block."""
    k = params.k
    r = (k * k * Fraction(block) - 1) / k
    if r.denominator != 1 or not 0 <= r < k:
        raise BlockMismatch(f"q = {block} is not an admissible label for k = {k}")
    return int(r)


def check_block(params: ModelParams, block: Fraction) -> Fraction:
    block = Fraction(block)
    if params.family is Family.TWO_MODE:
        if block <= 0 or (2 * block).denominator != 1:
            raise BlockMismatch(f"kappa = {block} is not a positive half-integer")
    else:
        fock_offset(params, block)
    return block


def check_sector(params: ModelParams, sector: SectorLabel) -> SectorLabel:
    check_block(params, sector.block)
    return sector


def enumerate_blocks(params: ModelParams, max_blocks: int) -> list[Fraction]:
    """Block labels in ascending order, at most ``max_blocks`` of them.

    Two-mode blocks are unbounded (kappa = 1/2, 1, 3/2, ...); the k-photon
    family has exactly ``k`` blocks and the cap never pads the list.
    """
    if max_blocks < 1:
        raise ParameterError("max_blocks must be positive")
    if params.family is Family.TWO_MODE:
        return [Fraction(j, 2) for j in range(1, max_blocks + 1)]
    k = params.k
    return [Fraction(r * k + 1, k * k) for r in range(min(k, max_blocks))]


def enumerate_sectors(params: ModelParams, max_blocks: int) -> list[SectorLabel]:
    return [SectorLabel(b, p) for b in enumerate_blocks(params, max_blocks) for p in Parity]


@dataclass(frozen=True)
class RegimeClass:
    verdict: Verdict
    ratio: float | None

    @property
    def normalizable(self) -> bool:
        return self.verdict is Verdict.NORMALIZABLE


def coupling_ratio(params: ModelParams) -> float | None:
    """``|g/w|`` (two-mode), ``|2g/w|`` (k = 2), else ``None``."""
    if params.family is Family.TWO_MODE:
        return abs(params.g / params.omega)
    if params.k == 2:
        return abs(2.0 * params.g / params.omega)
    return None


def classify_regime(params: ModelParams) -> RegimeClass:
    """Decide whether normalizable entire wavefunctions exist.

    The boundary ratio 1 is non-normalizable. ``g = 0`` is the free model and
    is classified normalizable by convention.
    """
    ratio = coupling_ratio(params)
    if params.family is Family.K_PHOTON and params.k >= 3:
        verdict = Verdict.NORMALIZABLE if params.g == 0.0 else Verdict.UNDEFINED_K_GE_3
    elif ratio is None:  # k = 1, the ordinary Rabi model
        verdict = Verdict.NORMALIZABLE
    else:
        verdict = Verdict.NORMALIZABLE if ratio < 1.0 else Verdict.NON_NORMALIZABLE
    return RegimeClass(verdict, ratio)


@dataclass(frozen=True)
class CharacteristicRoots:
    """Roots of ``t^2 + a t + b = 0`` sorted by modulus.

    Real when ``distinct_real``; otherwise a complex-conjugate (or, at the
    boundary, doubled) pair of equal modulus.
    """

    t1: complex | float
    t2: complex | float
    distinct_real: bool


def characteristic_roots(params: ModelParams) -> CharacteristicRoots:
    params.require_coupling()
    if params.family is Family.TWO_MODE:
        scale, product = params.omega / params.g, 1.0
    elif params.k == 2:
        scale, product = params.omega / (4.0 * params.g), 0.25
    else:
        raise NoCharacteristicEquation(
            f"k = {params.k}: Newton-Puiseux slopes differ; use asymptotic_exponents"
        )
    rho = coupling_ratio(params)
    if rho < 1.0:
        t2 = -scale * (1.0 + math.sqrt(1.0 - rho * rho))
        return CharacteristicRoots(product / t2, t2, True)
    im = abs(scale) * math.sqrt(rho * rho - 1.0)
    return CharacteristicRoots(complex(-scale, im), complex(-scale, -im), False)


@dataclass(frozen=True)
class AsymptoticExponents:
    """Leading behaviour ``c_n ~ a n^alpha``, ``d_n ~ b n^beta``."""

    a: float
    alpha: int
    b: float
    beta: int

    @property
    def p1_below_segment(self) -> bool:
        """Middle Newton-Puiseux point lies strictly below the chord P0-P2.

        Then every solution shares one growth class and no minimal solution
        can be singled out.
        """
        return 2 * self.alpha < self.beta


def asymptotic_exponents(params: ModelParams) -> AsymptoticExponents:
    params.require_coupling()
    if params.family is Family.TWO_MODE:
        return AsymptoticExponents(2.0 * params.omega / params.g, -1, 1.0, -2)
    k = params.k
    return AsymptoticExponents(params.omega / (params.g * k ** (k - 1)), 1 - k, 1.0 / k**k, -k)
