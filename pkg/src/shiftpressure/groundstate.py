"""Ground-state energy (two-sided and from above) and ground-state entropy from above."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import ResourceLimit
from .language import LanguageProvider, default_provider
from .potential import LocallyConstantPotential, scale
from .pressure import CertifiedEstimate, UpperSequence, certified_pressure
from .rigor import DEFAULT_PREC, DyadicInterval, cmp_real, iv_log_int
from .subshift import SftSpec

PressureFn = Callable[[LocallyConstantPotential, Fraction], CertifiedEstimate]


@dataclass
class EnergyEstimate:
    value: DyadicInterval
    beta_used: int
    epsilon: Fraction
    conditional_on: frozenset = frozenset()
    pressure: CertifiedEstimate | None = None


def beta_for(epsilon, alphabet_size: int) -> int:
    """The integer ceil(4 log|A| / epsilon), decided exactly."""
    eps = Fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if alphabet_size < 1:
        raise ValueError("alphabet size must be positive")
    if alphabet_size == 1:
        return 1
    p = 64
    while True:
        x = iv_log_int(alphabet_size, p) * 4 / DyadicInterval.point(eps, p + 8)
        lo, hi = math.floor(x.lo.to_fraction()), math.floor(x.hi.to_fraction())
        if lo == hi:
            # x is irrational, so it is never an integer
            return lo + 1
        p *= 2


def ground_state_energy(pressure_fn: PressureFn, pot: LocallyConstantPotential, epsilon,
                        alphabet_size: int) -> EnergyEstimate:
    """sup over invariant measures of the integral of phi, to within epsilon.

    With beta = ceil(4 log|A| / eps), P(beta phi) lies in
    [beta E, beta E + log|A|], so beta^-1 P(beta phi) minus [log|A| / beta, 0]
    encloses E; the pressure is requested to width beta eps / 2.
    """
    eps = Fraction(epsilon)
    beta = beta_for(eps, alphabet_size)
    try:
        est = pressure_fn(scale(pot, beta), beta * eps / 2)
    except ResourceLimit as exc:
        raise ResourceLimit(f"pressure at beta={beta} failed: {exc}", exc.projected) from exc
    p = est.value
    if p.lo is None:
        raise ValueError("ground_state_energy needs a two-sided pressure estimate")
    prec = max(p.prec, DEFAULT_PREC)
    hi = DyadicInterval(p.hi, p.hi, prec) / beta
    lo = (DyadicInterval(p.lo, p.lo, prec) - iv_log_int(alphabet_size, prec)) / beta
    return EnergyEstimate(DyadicInterval(lo.lo, hi.hi, prec), beta, eps, est.conditional_on, est)


def ground_state_energy_upper(pressure_upper_fn: Callable[[LocallyConstantPotential], object],
                              pot: LocallyConstantPotential, steps: int) -> UpperSequence:
    """Running minimum of n^-1 (upper bound on P(n phi)) for n = 1..steps.

    ``pressure_upper_fn`` may return a CertifiedEstimate, a DyadicInterval or
    an UpperSequence (its last value is used).
    """
    seq = UpperSequence()
    for n in range(1, steps + 1):
        try:
            res = pressure_upper_fn(scale(pot, n))
        except ResourceLimit as exc:
            seq.skip(f"n={n}: {exc}")
            continue
        hi = _upper_of(res)
        if hi is None:
            seq.skip(f"n={n}: no upper bound produced")
            continue
        bound = DyadicInterval(hi, hi, DEFAULT_PREC) / n
        seq.append(DyadicInterval(None, bound.hi, DEFAULT_PREC), n=n)
    return seq


def _upper_of(res):
    if isinstance(res, CertifiedEstimate):
        return res.value.hi
    if isinstance(res, DyadicInterval):
        return res.hi
    if isinstance(res, UpperSequence):
        return res.last.value.hi if res.last else None
    raise TypeError("unsupported pressure result")


def ground_state_entropy_upper(pressure_fn: PressureFn, pot: LocallyConstantPotential, steps: int,
                               alphabet_size: int) -> UpperSequence:
    """Running minimum over beta = 1..steps of P(beta phi).hi - beta * E.lo.

    E comes from ground_state_energy at precision 2^-k / beta with
    k = ceil(log2 beta) + steps, so the amplified energy error stays below
    2^-steps while every term remains a true upper bound.
    """
    seq = UpperSequence()
    for beta in range(1, steps + 1):
        k_beta = (beta - 1).bit_length() + steps
        eps = Fraction(1, 2**k_beta * beta)
        try:
            energy = ground_state_energy(pressure_fn, pot, eps, alphabet_size)
            p = pressure_fn(scale(pot, beta), Fraction(1, 2**steps))
        except ResourceLimit as exc:
            seq.skip(f"beta={beta}: {exc}")
            continue
        prec = max(DEFAULT_PREC, p.value.prec)
        term = DyadicInterval(p.value.hi, p.value.hi, prec) - DyadicInterval(energy.value.lo, energy.value.lo,
                                                                             prec) * beta
        seq.append(DyadicInterval(None, term.hi, prec), n=beta, k=k_beta)
    return seq


# --- ready-made pressure functions -------------------------------------------

def perron_pressure_fn(spec: SftSpec, prec: int = 128) -> PressureFn:
    from .transfer import perron_pressure_1d

    def fn(pot: LocallyConstantPotential, width) -> CertifiedEstimate:
        return perron_pressure_1d(spec, pot, Fraction(width), prec)
    return fn


def certified_pressure_fn(spec: SftSpec, lang: LanguageProvider | None = None) -> PressureFn:
    lang = lang or default_provider(spec)

    def fn(pot: LocallyConstantPotential, width) -> CertifiedEstimate:
        width = Fraction(width)
        k = 1
        while Fraction(1, 2**k) > width:
            k += 1
        return certified_pressure(spec, pot, k, lang)
    return fn


def within(value: DyadicInterval, target, eps) -> bool:
    """Is every point of ``value`` within eps of the rational target?"""
    t = Fraction(target)
    e = Fraction(eps)
    return cmp_real(value.lo, t - e) >= 0 and cmp_real(value.hi, t + e) <= 0
