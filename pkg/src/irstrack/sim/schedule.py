"""Time-block bookkeeping and overhead ratios in exact rational arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


def exact(x) -> Fraction:
    """Fraction from a decimal literal, so ``4.16e-6`` is exactly ``416/10^8``."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class TimeBlockSchedule:
    """One time block: UC, IDE, then ``eta`` CE/D pairs.

    ``T_DT`` absorbs the remainder left by flooring ``eta`` so that
    ``T == T_UC + T_IDE + eta * (T_CE + T_DT)`` holds exactly;
    ``nominal_slot`` keeps the configured CE/D pair length.
    """

    T: Fraction
    T_UC: Fraction
    T_IDE: Fraction
    T_CE: Fraction
    T_DT: Fraction
    eta: int
    T_S: Fraction
    N_UC: int
    N_IDE: int
    N_CE: int
    nominal_slot: Fraction | None = None

    def __post_init__(self):
        if self.T_UC + self.T_IDE + self.eta * (self.T_CE + self.T_DT) != self.T:
            raise ValueError("time block durations do not add up")

    @property
    def slot(self) -> Fraction:
        return self.T_CE + self.T_DT

    def block_start(self, k: int) -> Fraction:
        return k * self.T

    def ide_start(self, k: int) -> Fraction:
        return k * self.T + self.T_UC

    def slot_start(self, k: int, kappa: int) -> Fraction:
        """``t_{k,kappa}``, the start of the ``kappa``-th CE sub-block."""
        if not 0 <= kappa < self.eta:
            raise IndexError(f"kappa {kappa} outside 0..{self.eta - 1}")
        return k * self.T + self.T_UC + self.T_IDE + kappa * self.slot


def build_schedule(T, slot, T_S, ue_antennas: int, N_UC: int, N_IDE: int, n_codewords: int,
                   N_CE: int = 1) -> TimeBlockSchedule:
    """Schedule with ``eta = floor((T - T_UC - T_IDE) / slot)``."""
    T, slot, T_S = exact(T), exact(slot), exact(T_S)
    T_UC = ue_antennas * N_UC * T_S
    T_IDE = n_codewords * N_IDE * T_S
    T_CE = N_CE * T_S
    rest = T - T_UC - T_IDE
    if rest <= 0:
        raise ValueError("UC and IDE sub-blocks do not fit into the time block")
    eta = math.floor(rest / slot)
    if eta < 1:
        raise ValueError("no room for a CE/D pair in the time block")
    T_DT = rest / eta - T_CE
    if T_DT <= 0:
        raise ValueError("CE sub-block longer than the slot")
    return TimeBlockSchedule(T, T_UC, T_IDE, T_CE, T_DT, eta, T_S, N_UC, N_IDE, N_CE, slot)


def overhead_ratio(schedule: TimeBlockSchedule) -> Fraction:
    """Share of the block spent on UC, IDE and CE."""
    s = schedule
    return (s.T_UC + s.T_IDE + s.eta * s.T_CE) / s.T


def focusing_pilots(L_r: int, L_t: int, irs_cells: int) -> int:
    """Pilot length for full-CSI estimation, ``ceil(L_r L_t ln Q_IRS)``."""
    return math.ceil(L_r * L_t * math.log(irs_cells))


def focusing_overhead(schedule: TimeBlockSchedule, pilots: int) -> Fraction:
    """``T_CE^B / (T_CE^B + T_DT^B)`` with the CE/D pair spanning one nominal slot."""
    slot = schedule.nominal_slot or schedule.slot
    T_CE_B = pilots * schedule.T_S
    if T_CE_B >= slot:
        raise ValueError("focusing pilots do not fit into one slot")
    return T_CE_B / slot


@dataclass(frozen=True)
class HierarchicalTiming:
    T_HS: Fraction
    eta: int
    overhead: Fraction
    first_level: int


def hierarchical_timing(schedule: TimeBlockSchedule, first_level: int, N_HS: int = 4, L_C: int = 2) -> HierarchicalTiming:
    """``T_HS = T_CE (first_level + N_HS (L_C - 1))`` and the matching overhead.

    ``first_level`` is the number of codewords searched at the widest level,
    ``M_HS / N_HS^(L_C - 1)`` when that is an integer.
    """
    s = schedule
    T_HS = s.T_CE * (first_level + N_HS * (L_C - 1))
    eta = math.floor((s.T - s.T_UC - T_HS) / (s.nominal_slot or s.slot))
    if eta < 1:
        raise ValueError("hierarchical search leaves no room for data")
    overhead = (s.T_UC + T_HS + eta * s.T_CE) / s.T
    return HierarchicalTiming(T_HS, eta, overhead, first_level)


def perfect_overhead(schedule: TimeBlockSchedule) -> Fraction:
    """One CE pilot per slot and no search cost."""
    return schedule.T_CE / schedule.slot
