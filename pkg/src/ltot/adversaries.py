"""Cheating strategies, their predicted success, and analytic certificates.

Every attack is an ordinary :class:`~ltot.engine.Strategy` that sends
protocol-conforming messages, so honest parties never abort on it. A cheating
Alice returns a :class:`~ltot.protocols.Guess` of Bob's index b; a cheating
Bob returns a guess of Alice's parity x0 ^ x1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import quantum as q
from .engine import (
    ALICE, BOB, RECV, ChannelConfig, ClassicalBits, Completed, DeclareLoss, Ideal,
    ProtocolDescriptor, QuantumPayload, Send, Strategy, TrialStats, restartable,
)
from .protocols import (
    CKS10, PAULI_MASK, QUTRIT_PHASE, UNFAIR, Guess, SenderBits, WcfSpec,
    classical_bits, cks10_alice_views, derandomize_alice, prototype_alice, prototype_bob,
    quantum_handles, unfair_alice_views, wcf_play,
)

QUTRIT_Z = q.computational_povm(3)
QUBIT_Z = q.computational_povm(2)
BELL = {(x0, x1): q.bell_state(x0, x1) for x0 in (0, 1) for x1 in (0, 1)}
# outcome index 2*x0 + x1 identifies the Bell state Alice's mask produced
BELL_POVM = q.Povm.projective([BELL[k] for k in sorted(BELL)])
PARITY_SOURCE = q.superpose([(1, q.ket((3, 3), 0, 0)), (1, q.ket((3, 3), 1, 1))])
PARITY_CLASS = {0: PARITY_SOURCE,
                1: q.superpose([(1, q.ket((3, 3), 0, 0)), (-1, q.ket((3, 3), 1, 1))])}
PARITY_POVM = q.Povm.projective([PARITY_CLASS[0], PARITY_CLASS[1]])


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    name: str
    value: float
    expected: float
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return abs(self.value - self.expected) <= self.tolerance

    def as_dict(self) -> dict[str, Any]:
        return {"name": self.name, "value": self.value, "expected": self.expected,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass(frozen=True)
class AttackReport:
    """Predicted against measured success for one attack.

    ``status`` is PASSED when every certificate holds and the estimate lies
    within three binomial standard deviations of the prediction.
    """

    attack: str
    target: str
    predicted: float | None
    empirical: TrialStats
    certificates: tuple[Certificate, ...] = field(default_factory=tuple)

    @property
    def within_ci(self) -> bool:
        lo, hi = self.empirical.interval
        return self.predicted is not None and lo <= self.predicted <= hi

    @property
    def status(self) -> str:
        ok = all(c.passed for c in self.certificates)
        if self.predicted is not None:
            ok = ok and self.empirical.agrees_with(self.predicted)
        return "PASSED" if ok else "FAILED"

    def as_dict(self) -> dict[str, Any]:
        return {"attack": self.attack, "target": self.target, "predicted": self.predicted,
                "empirical": self.empirical.as_dict(), "within_ci": self.within_ci,
                "certificates": [c.as_dict() for c in self.certificates],
                "status": self.status}


def other_role(role: str) -> str:
    return BOB if role == ALICE else ALICE


# -- scoring -----------------------------------------------------------------

def _sender(out) -> SenderBits | None:
    return out.output if isinstance(out, Guess) else out


def score_alice_guess(outcome) -> bool:
    """Alice's guess equals the index b in Bob's output (run must complete)."""
    if not isinstance(outcome, Completed) or not isinstance(outcome.alice_output, Guess):
        return False
    bob = outcome.bob_output
    b = bob.output.b if isinstance(bob, Guess) else bob.b
    return outcome.alice_output.value == b


def score_bob_guess(outcome) -> bool:
    """Bob's guess equals x0 ^ x1 of Alice's output (run must complete)."""
    if not isinstance(outcome, Completed) or not isinstance(outcome.bob_output, Guess):
        return False
    a = _sender(outcome.alice_output)
    return outcome.bob_output.value == a.x0 ^ a.x1


def score_bob_both_bits(outcome) -> bool:
    """Bob recovered (x0, x1) exactly."""
    if not isinstance(outcome, Completed) or not isinstance(outcome.bob_output, Guess):
        return False
    a = _sender(outcome.alice_output)
    return tuple(outcome.bob_output.detail) == (a.x0, a.x1)


def score_alice_forces(outcome) -> bool:
    """The coin landed on Alice's side (c = 0)."""
    return isinstance(outcome, Completed) and outcome.bob_output == 0


def score_bob_forces(outcome) -> bool:
    """The coin landed on Bob's side (c = 1)."""
    return isinstance(outcome, Completed) and outcome.alice_output == 1


SCORERS = {ALICE: score_alice_guess, BOB: score_bob_guess}
WCF_SCORERS = {ALICE: score_alice_forces, BOB: score_bob_forces}


def scorer_for(protocol: ProtocolDescriptor, role: str):
    return (WCF_SCORERS if protocol.kind == "wcf" else SCORERS)[role]


# -- attacks on the qutrit Random-OT -----------------------------------------

def _measuring_alice_attempt(ctx, max_restarts):
    x0, x1 = ctx.random_bit("x0"), ctx.random_bit("x1")
    h = quantum_handles(ctx, (yield RECV), (3,))
    k = ctx.measure(QUTRIT_Z, h)
    if k == 2 and ctx.attempt < max_restarts and ctx.restarts_remaining > 0:
        yield DeclareLoss()
    ctx.apply(QUTRIT_PHASE[x0, x1], h)
    yield Send(QuantumPayload(h))
    guess = k if k < 2 else ctx.rng.getrandbits(1)
    return Guess(guess, output=SenderBits(x0, x1))


def measuring_alice(ctx, max_restarts=0):
    return (yield from restartable(ctx, CKS10, _measuring_alice_attempt, max_restarts))


def alice_lost_message_attack(max_restarts: int) -> Strategy:
    """Measure the incoming qutrit; on outcome 2 claim it was lost, up to
    ``max_restarts`` times, then guess."""
    return Strategy(ALICE, "alice-lost-message", measuring_alice,
                    (("max_restarts", int(max_restarts)),), honest=False)


def alice_helstrom_attack() -> Strategy:
    """Computational-basis measurement of the first message, no loss abuse."""
    return Strategy(ALICE, "alice-helstrom", measuring_alice, (("max_restarts", 0),),
                    honest=False)


def _parity_bob_attempt(ctx):
    kept, sent = ctx.prepare(PARITY_SOURCE)
    yield Send(QuantumPayload((sent,)))
    back = quantum_handles(ctx, (yield RECV), (3,))
    k = ctx.measure(PARITY_POVM, (kept, back[0]))
    return Guess(k)


def parity_bob(ctx):
    return (yield from restartable(ctx, CKS10, _parity_bob_attempt))


def bob_parity_attack() -> Strategy:
    """Send half of (|00>+|11>)/sqrt2; Alice's phases leave a parity-labelled
    state from one of two orthogonal classes."""
    return Strategy(BOB, "bob-parity", parity_bob, honest=False)


# -- attacks on the unfair qubit Random-OT -----------------------------------

def _epr_bob_attempt(ctx):
    kept, sent = ctx.prepare(BELL[0, 0])
    yield Send(QuantumPayload((sent,)))
    back = quantum_handles(ctx, (yield RECV), (2,))
    x0, x1 = divmod(ctx.measure(BELL_POVM, (kept, back[0])), 2)
    return Guess(x0 ^ x1, detail=(x0, x1))


def epr_bob(ctx):
    return (yield from restartable(ctx, UNFAIR, _epr_bob_attempt))


def bob_epr_attack() -> Strategy:
    """Send half of |Phi+>, then Bell-measure to read off (x0, x1)."""
    return Strategy(BOB, "bob-epr", epr_bob, honest=False)


def _guessing_alice_attempt(ctx, declared_losses):
    x0, x1 = ctx.random_bit("x0"), ctx.random_bit("x1")
    h = quantum_handles(ctx, (yield RECV), (2,))
    seen = ctx.measure(QUBIT_Z, h)
    if ctx.attempt < declared_losses and ctx.restarts_remaining > 0:
        yield DeclareLoss()
    ctx.apply(PAULI_MASK[x0, x1], h)
    yield Send(QuantumPayload(h))
    return Guess(seen, output=SenderBits(x0, x1))


def guessing_alice(ctx, declared_losses=0):
    return (yield from restartable(ctx, UNFAIR, _guessing_alice_attempt, declared_losses))


def alice_protocol6_attack(declared_losses: int = 0) -> Strategy:
    """Measure each incoming qubit, claim the first ``declared_losses`` were
    lost, and guess b from the last measurement."""
    return Strategy(ALICE, "alice-unfair-guess", guessing_alice,
                    (("declared_losses", int(declared_losses)),), honest=False)


# -- attacks through the reductions ------------------------------------------

def switched_alice(ctx, inner):
    # outer Alice is the inner receiver; her target b' is the inner x0 ^ x1
    g = yield from best_attack(inner, BOB).run(ctx)
    d = ctx.random_bit("d")
    xb = g.output.xb if g.output is not None else ctx.rng.getrandbits(1)
    yield Send(ClassicalBits((d ^ xb,)))
    return Guess(g.value)


def switched_bob(ctx, inner):
    # outer Bob is the inner sender; his target x'0 ^ x'1 is the inner b
    g = yield from best_attack(inner, ALICE).run(ctx)
    yield RECV
    return Guess(g.value)


def derandomized_alice(ctx, inputs, rot):
    g = yield from best_attack(rot, ALICE).run(ctx)
    flag = classical_bits((yield RECV), 1)
    if g.output is not None:
        _, flips = derandomize_alice(inputs, g.output, flag[0])
    else:
        flips = (ctx.rng.getrandbits(1), ctx.rng.getrandbits(1))
    yield Send(ClassicalBits(flips))
    return Guess(g.value ^ flag[0], output=SenderBits(*inputs))


def derandomized_bob(ctx, want, rot):
    g = yield from best_attack(rot, BOB).run(ctx)
    flag = (g.output.b ^ want) if g.output is not None else ctx.rng.getrandbits(1)
    yield Send(ClassicalBits((flag,)))
    flips = classical_bits((yield RECV), 2)
    return Guess(g.value ^ flips[0] ^ flips[1])


def combined_alice_attack(ctx, wcf, rot_xy, rot_yx):
    c = yield Ideal("wcf", ALICE, {"spec": wcf, "mode": "cheat"})
    return (yield from best_attack(rot_xy if c == 0 else rot_yx, ALICE).run(ctx))


def combined_bob_attack(ctx, wcf, rot_xy, rot_yx):
    c = yield Ideal("wcf", BOB, {"spec": wcf, "mode": "cheat"})
    return (yield from best_attack(rot_xy if c == 0 else rot_yx, BOB).run(ctx))


def combined_protocol_attack(party: str, protocol: ProtocolDescriptor) -> Strategy:
    """Bias the coin toward the branch favourable to ``party``, then run that
    branch's best attack."""
    if protocol.name != "combined-rot":
        raise ValueError("combined_protocol_attack targets a combined-rot descriptor")
    play = combined_alice_attack if party == ALICE else combined_bob_attack
    return Strategy(party, f"{party}-combined", play, protocol.params, honest=False)


def box_cheat(ctx, role, profile, fixed=None):
    out, hint = yield Ideal("rot", role, {"profile": profile, "mode": "cheat", "fixed": fixed})
    return Guess(hint, output=out)


def curious_prototype(party: str, protocol: ProtocolDescriptor) -> Strategy:
    """Follows the prototype exactly, then guesses the other side's secret
    from what it saw."""
    play = prototype_alice if party == ALICE else prototype_bob
    return Strategy(party, f"{party}-curious", play,
                    protocol.params + (("curious", True),), honest=True)


def wcf_cheat(party: str, spec: WcfSpec) -> Strategy:
    return Strategy(party, f"{party}-wcf-cheat", wcf_play,
                    (("role", party), ("spec", spec), ("mode", "cheat")), honest=False)


def best_attack(protocol: ProtocolDescriptor, party: str) -> Strategy:
    """The strongest implemented attack by ``party`` on ``protocol``."""
    name = protocol.name
    if name == CKS10:
        return alice_helstrom_attack() if party == ALICE else bob_parity_attack()
    if name == UNFAIR:
        return alice_protocol6_attack() if party == ALICE else bob_epr_attack()
    if name == "role-switch":
        play = switched_alice if party == ALICE else switched_bob
        return Strategy(party, f"{party}-switched", play, protocol.params, honest=False)
    if name == "ot-from-rot":
        play = derandomized_alice if party == ALICE else derandomized_bob
        return Strategy(party, f"{party}-derandomized", play, protocol.params, honest=False)
    if name == "combined-rot":
        return combined_protocol_attack(party, protocol)
    if name == "rot-black-box":
        return Strategy(party, f"{party}-box-cheat", box_cheat,
                        (("role", party),) + protocol.params, honest=False)
    if name == "prototype-rot":
        return curious_prototype(party, protocol)
    if name == "wcf-black-box":
        return wcf_cheat(party, protocol.param("spec"))
    raise ValueError(f"no attack implemented for {party} against {name}")


# -- predictions -------------------------------------------------------------

def completion_probability(channel: ChannelConfig, quantum_messages: int) -> float:
    """Chance a restartable scope with that many quantum messages finishes."""
    ok = (1 - channel.loss_rate) ** quantum_messages
    if channel.max_restarts is None:
        return 1.0 if ok > 0 else 0.0
    return 1 - (1 - ok) ** (channel.max_restarts + 1)


def lost_message_success(max_restarts: int, channel: ChannelConfig = ChannelConfig()) -> float:
    """Exact success of the lost-message attack, by backward iteration.

    In attempt k Bob's qutrit may be lost; otherwise Alice learns b with
    probability 1/2, and on outcome 2 she claims a loss while k < max_restarts
    and the cap allows. Her reply may be lost too. A loss with no restart left
    aborts. Once she stops claiming losses each further attempt is worth 3/4.
    """
    loss, cap = channel.loss_rate, channel.max_restarts
    if loss == 0 or cap is None:
        top = max_restarts if cap is None else min(max_restarts, cap)
        value = 0.75
    else:
        top, value = cap + 1, 0.0
    for k in range(top - 1, -1, -1):
        nxt = value if cap is None or k < cap else 0.0
        declare = k < max_restarts and (cap is None or k < cap)
        known = (1 - loss) + loss * nxt
        guessed = (1 - loss) * 0.5 + loss * nxt
        value = loss * nxt + (1 - loss) * 0.5 * (known + (nxt if declare else guessed))
    return value


def predicted_success(strategy: Strategy, protocol: ProtocolDescriptor,
                      channel: ChannelConfig) -> float | None:
    """Predicted success of ``strategy`` against ``protocol`` (None if unknown)."""
    name = strategy.name
    if name == "alice-lost-message":
        return lost_message_success(strategy.param("max_restarts"), channel)
    if name == "alice-helstrom":
        return 0.75 * completion_probability(channel, 2)
    if name in ("bob-parity", "bob-epr"):
        return completion_probability(channel, 2)
    if name == "alice-unfair-guess":
        return 0.5 * completion_probability(channel, 2)
    if name.endswith("-box-cheat"):
        prof = protocol.profile
        return prof.A if strategy.role == ALICE else prof.B
    if name.endswith("-wcf-cheat"):
        spec: WcfSpec = strategy.param("spec")
        return spec.A_wcf if strategy.role == ALICE else spec.B_wcf
    if name.endswith("-curious"):
        return 0.75
    if name.endswith("-switched"):
        inner = protocol.param("inner")
        return predicted_success(best_attack(inner, other_role(strategy.role)), inner, channel)
    if name.endswith("-derandomized"):
        rot = protocol.param("rot")
        return predicted_success(best_attack(rot, strategy.role), rot, channel)
    if name.endswith("-combined"):
        wcf: WcfSpec = protocol.param("wcf")
        rot_xy, rot_yx = protocol.param("rot_xy"), protocol.param("rot_yx")
        role = strategy.role
        s_xy = predicted_success(best_attack(rot_xy, role), rot_xy, channel)
        s_yx = predicted_success(best_attack(rot_yx, role), rot_yx, channel)
        if s_xy is None or s_yx is None:
            return None
        if role == ALICE:
            return wcf.A_wcf * s_xy + (1 - wcf.A_wcf) * s_yx
        return wcf.B_wcf * s_yx + (1 - wcf.B_wcf) * s_xy
    return None


def combined_prediction(party: str, wcf: WcfSpec, x: float, y: float) -> float:
    """Forcing the favourable branch: W * (x - y) + y."""
    w = wcf.A_wcf if party == ALICE else wcf.B_wcf
    return w * (x - y) + y


# -- certificates ------------------------------------------------------------

def cks10_helstrom_certificate() -> Certificate:
    views = cks10_alice_views()
    return Certificate("cks10-alice-helstrom", q.helstrom(views[0], views[1]), 0.75)


def parity_orthogonality_certificate() -> Certificate:
    """Largest overlap between the two parity classes after Alice's phases."""
    states = {}
    for x0 in (0, 1):
        for x1 in (0, 1):
            states[x0, x1] = q.apply_unitary(PARITY_SOURCE, QUTRIT_PHASE[x0, x1], [1])
    even = [states[0, 0], states[1, 1]]
    odd = [states[0, 1], states[1, 0]]
    worst = max(abs(q.overlap(a, b)) for a in even for b in odd)
    return Certificate("cks10-parity-classes-orthogonal", worst, 0.0)


def bell_gram_certificate() -> Certificate:
    """Distance of the post-attack Gram matrix from the identity."""
    phi_plus = BELL[0, 0]
    states = [q.apply_unitary(phi_plus, PAULI_MASK[x0, x1], [1])
              for x0 in (0, 1) for x1 in (0, 1)]
    gram = q.gram_matrix(states)
    return Certificate("unfair-epr-bell-gram", float(np.abs(gram - np.eye(4)).max()), 0.0)


def unfair_alice_certificate(restarts: int = 0) -> Certificate:
    views = unfair_alice_views(restarts)
    return Certificate(f"unfair-alice-helstrom-{restarts}-restarts",
                       q.helstrom(views[0], views[1]), 0.5)


def certificates_for(strategy: Strategy) -> tuple[Certificate, ...]:
    name = strategy.name
    if name in ("alice-helstrom", "alice-lost-message"):
        return (cks10_helstrom_certificate(),)
    if name == "bob-parity":
        return (parity_orthogonality_certificate(),)
    if name == "bob-epr":
        return (bell_gram_certificate(),)
    if name == "alice-unfair-guess":
        k = strategy.param("declared_losses", 0)
        return tuple(unfair_alice_certificate(r) for r in sorted({0, k}))
    return ()


ATTACKS = {
    "alice-lost-message": lambda r=0, **_: alice_lost_message_attack(r),
    "alice-helstrom": lambda **_: alice_helstrom_attack(),
    "bob-parity": lambda **_: bob_parity_attack(),
    "bob-epr": lambda **_: bob_epr_attack(),
    "alice-unfair-guess": lambda declared_losses=0, **_: alice_protocol6_attack(declared_losses),
}
