"""Composition calculus, cheating estimates and loss-gain sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from .adversaries import (
    AttackReport, certificates_for, predicted_success, scorer_for,
)
from .engine import (
    ALICE, ChannelConfig, ProtocolDescriptor, Strategy, TrialStats, derive_seed, run_trials,
)

TOL = 1e-12


def _check_range(**values: float) -> None:
    for name, v in values.items():
        if not 0.5 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [1/2, 1], got {v}")


@dataclass(frozen=True)
class CompositionResult:
    A_wcf: float
    B_wcf: float
    A_rot: float
    B_rot: float
    A_ot: float
    B_ot: float
    eps_ot: float
    eps_rot: float

    @property
    def fair(self) -> bool:
        return abs(self.A_ot - self.B_ot) <= TOL

    @property
    def within_bound(self) -> bool:
        return self.eps_ot <= self.eps_rot + TOL

    def as_dict(self) -> dict:
        return {"A_wcf": self.A_wcf, "B_wcf": self.B_wcf, "A_rot": self.A_rot,
                "B_rot": self.B_rot, "A_ot": self.A_ot, "B_ot": self.B_ot,
                "eps_ot": self.eps_ot, "eps_rot": self.eps_rot, "fair": self.fair}


def compose_theorem1(A_wcf: float, B_wcf: float, A_rot: float, B_rot: float,
                     ) -> CompositionResult:
    """Cheating probabilities of the WCF-balanced Random-OT.

    Each party's advantage is the gap |A_rot - B_rot| weighted by how well it
    can force the coin, on top of the weaker side's value.
    """
    _check_range(A_wcf=A_wcf, B_wcf=B_wcf, A_rot=A_rot, B_rot=B_rot)
    gap, low = abs(A_rot - B_rot), min(A_rot, B_rot)
    a_ot = A_wcf * gap + low
    b_ot = B_wcf * gap + low
    # max(A_rot, B_rot) written as gap + low so that W = 1 reproduces it bit for bit
    return CompositionResult(A_wcf, B_wcf, A_rot, B_rot, a_ot, b_ot,
                             max(a_ot, b_ot) - 0.5, gap + low - 0.5)


def strict_improvement_check(A_wcf: float, B_wcf: float, A_rot: float, B_rot: float) -> bool:
    """True iff composing strictly lowers the bias."""
    r = compose_theorem1(A_wcf, B_wcf, A_rot, B_rot)
    return r.eps_ot < r.eps_rot


def improvement_expected(A_wcf: float, B_wcf: float, A_rot: float, B_rot: float) -> bool:
    """The closed-form condition: a non-trivial coin and an unfair Random-OT."""
    return max(A_wcf, B_wcf) - 0.5 < 0.5 and A_rot != B_rot


def grid(step: float = 0.025) -> list[float]:
    """Points of [1/2, 1] at ``step``, built from integers to avoid drift."""
    k = round(0.5 / step)
    return [0.5 + i / (2 * k) for i in range(k + 1)]


def grid_properties(step: float = 0.025) -> dict[str, int]:
    """Count violations of the composition properties over the 4-d grid."""
    pts = grid(step)
    bad = {"fairness_transfer": 0, "strict_improvement": 0, "bound": 0, "symmetry": 0}
    for aw in pts:
        for bw in pts:
            for ar in pts:
                for br in pts:
                    r = compose_theorem1(aw, bw, ar, br)
                    if aw == bw and not r.fair:
                        bad["fairness_transfer"] += 1
                    if (r.eps_ot < r.eps_rot) != improvement_expected(aw, bw, ar, br):
                        bad["strict_improvement"] += 1
                    if not r.within_bound:
                        bad["bound"] += 1
                    s = compose_theorem1(bw, aw, ar, br)
                    if (s.A_ot, s.B_ot) != (r.B_ot, r.A_ot):
                        bad["symmetry"] += 1
    return bad


def estimate_cheating(protocol: ProtocolDescriptor, attack: Strategy, honest: Strategy,
                      channel: ChannelConfig, n: int, seed: int, workers: int = 1,
                      ) -> TrialStats:
    """Fraction of runs where the attacker outputs the other party's secret.

    Runs aborted by anyone count as failures for the attacker.
    """
    if n < 100:
        raise ValueError("n must be at least 100")
    alice, bob = (attack, honest) if attack.role == ALICE else (honest, attack)
    return run_trials(protocol, alice, bob, channel, n, seed,
                      score=scorer_for(protocol, attack.role), workers=workers)


def honest_partner(protocol: ProtocolDescriptor, attack: Strategy) -> Strategy:
    return protocol.bob if attack.role == ALICE else protocol.alice


def attack_report(protocol: ProtocolDescriptor, attack: Strategy, channel: ChannelConfig,
                  n: int, seed: int, workers: int = 1) -> AttackReport:
    stats = estimate_cheating(protocol, attack, honest_partner(protocol, attack),
                              channel, n, seed, workers)
    return AttackReport(attack.name, protocol.name,
                        predicted_success(attack, protocol, channel), stats,
                        certificates_for(attack))


def loss_gain_curve(protocol: ProtocolDescriptor, family: Callable[[int], Strategy],
                    r_values: Iterable[int], n: int, seed: int,
                    channel: ChannelConfig = ChannelConfig(),
                    ) -> list[tuple[int, TrialStats, float | None]]:
    """Estimate ``family(r)`` at each r, alongside its predicted success."""
    rs = list(r_values)
    if not rs:
        raise ValueError("r_values must be nonempty")
    out = []
    for r in rs:
        attack = family(r)
        stats = estimate_cheating(protocol, attack, honest_partner(protocol, attack),
                                  channel, n, derive_seed(seed, r))
        out.append((r, stats, predicted_success(attack, protocol, channel)))
    return out
