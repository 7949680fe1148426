"""Honest strategies and descriptors for the Random-OT / OT protocols.

Quantum protocols: the qutrit Random-OT (``cks10-rot``) and the unfair qubit
Random-OT (``unfair-lt-rot``). Classical transformers: ``rot-from-ot``,
``ot-from-rot`` (derandomization), ``role-switch``, ``prototype-rot`` and
``combined-rot``. Trusted primitives are modelled as ideal functionalities:
``wcf-black-box``, ``ideal-ot`` and ``rot-black-box``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import quantum as q
from .engine import (
    ALICE, BOB, RECV, Abort, ClassicalBits, Completed, Ideal, ProtocolDescriptor,
    QuantumPayload, Send, Strategy, UnknownProtocol, register_functionality, restartable,
)

TOL = 1e-9


# -- domain types ------------------------------------------------------------

@dataclass(frozen=True)
class SenderBits:
    x0: int
    x1: int


@dataclass(frozen=True)
class ReceiverBits:
    b: int
    xb: int


@dataclass(frozen=True)
class Guess:
    """A cheater's output: its guess at the other party's secret.

    ``output`` holds whatever honest-shaped output the cheater also obtained
    (``None`` when it has none); ``detail`` carries extra recovered data.
    """

    value: int
    detail: tuple = ()
    output: Any = None


@dataclass(frozen=True)
class RotOutput:
    alice: tuple[int, int]
    bob: tuple[int, int]

    @classmethod
    def from_outcome(cls, outcome: Completed) -> "RotOutput":
        a, b = outcome.alice_output, outcome.bob_output
        return cls((a.x0, a.x1), (b.b, b.xb))

    @property
    def correct(self) -> bool:
        b, xb = self.bob
        return xb == self.alice[b]


@dataclass(frozen=True)
class OtInputs:
    alice: tuple[int, int]
    bob: int

    def __post_init__(self) -> None:
        if any(v not in (0, 1) for v in (*self.alice, self.bob)):
            raise ValueError("OT inputs must be bits")


def _check_prob(name: str, v: float) -> None:
    if not 0.5 - TOL <= v <= 1.0 + TOL:
        raise ValueError(f"{name} must lie in [1/2, 1], got {v}")


@dataclass(frozen=True)
class WcfSpec:
    """Weak coin flip with forcing probabilities for Alice (c=0) and Bob (c=1)."""

    A_wcf: float
    B_wcf: float

    def __post_init__(self) -> None:
        _check_prob("A_wcf", self.A_wcf)
        _check_prob("B_wcf", self.B_wcf)

    @property
    def bias(self) -> float:
        return max(self.A_wcf, self.B_wcf) - 0.5


@dataclass(frozen=True)
class CheatProfile:
    A: float
    B: float

    def __post_init__(self) -> None:
        _check_prob("A", self.A)
        _check_prob("B", self.B)

    @property
    def bias(self) -> float:
        return max(self.A, self.B) - 0.5

    @property
    def fair(self) -> bool:
        return abs(self.A - self.B) <= 1e-12

    def swapped(self) -> "CheatProfile":
        return CheatProfile(self.B, self.A)


# -- ideal functionalities ---------------------------------------------------

def _wcf_functionality(rng, calls: dict[str, dict]) -> dict[str, int]:
    spec: WcfSpec = calls[ALICE]["spec"]
    a_cheats = calls[ALICE].get("mode") == "cheat"
    b_cheats = calls[BOB].get("mode") == "cheat"
    u = rng.random()
    if a_cheats and not b_cheats:
        c = 0 if u < spec.A_wcf else 1
    elif b_cheats and not a_cheats:
        c = 1 if u < spec.B_wcf else 0
    else:
        c = 0 if u < 0.5 else 1
    return {ALICE: c, BOB: c}


def _ot_functionality(rng, calls: dict[str, Any]) -> dict[str, Any]:
    x0, x1 = calls[ALICE]
    return {ALICE: None, BOB: (x0, x1)[calls[BOB]]}


def _rot_functionality(rng, calls: dict[str, dict]) -> dict[str, Any]:
    """Perfect Random-OT that leaks to a cheater at its declared profile.

    A cheating sender gets a hint equal to b with probability 2A-1 and a
    uniform bit otherwise, so guessing the hint succeeds with probability
    exactly A; symmetrically for a cheating receiver and x0^x1 with B.
    """
    req_a, req_b = calls[ALICE], calls[BOB]
    fixed = req_a.get("fixed")
    if fixed is not None:
        x0, x1, b = fixed
    else:
        x0, x1, b = rng.getrandbits(1), rng.getrandbits(1), rng.getrandbits(1)
    prof: CheatProfile = req_a["profile"]
    out_a, out_b = SenderBits(x0, x1), ReceiverBits(b, (x0, x1)[b])

    def hint(secret: int, p: float) -> int:
        return secret if rng.random() < 2 * p - 1 else rng.getrandbits(1)

    res_a = (out_a, hint(b, prof.A)) if req_a.get("mode") == "cheat" else out_a
    res_b = (out_b, hint(x0 ^ x1, prof.B)) if req_b.get("mode") == "cheat" else out_b
    return {ALICE: res_a, BOB: res_b}


register_functionality("wcf", _wcf_functionality)
register_functionality("ot", _ot_functionality)
register_functionality("rot", _rot_functionality)


# -- shared constants --------------------------------------------------------

CKS10 = "cks10-rot"
UNFAIR = "unfair-lt-rot"

PHI = {b: q.phi_state(b) for b in (0, 1)}
CKS10_POVM = {b: q.Povm.projective([PHI[b]]) for b in (0, 1)}
QUTRIT_PHASE = {(x0, x1): q.qutrit_phase(x0, x1) for x0 in (0, 1) for x1 in (0, 1)}
PAULI_MASK = {(x0, x1): q.pauli_mask(x0, x1) for x0 in (0, 1) for x1 in (0, 1)}
HB_STATE = {(b, d): q.hadamard_basis_state(b, d) for b in (0, 1) for d in (0, 1)}
# outcome k of the (b, d) decoding basis means the qubit came back as H^b|d^k>
UNFAIR_POVM = {(b, d): q.Povm((
    np.outer(HB_STATE[b, d].amplitudes, HB_STATE[b, d].amplitudes.conj()),
    np.outer(HB_STATE[b, d ^ 1].amplitudes, HB_STATE[b, d ^ 1].amplitudes.conj()),
)) for b in (0, 1) for d in (0, 1)}


def quantum_handles(ctx, msg, dims: tuple[int, ...]) -> tuple[int, ...] | None:
    """Handles of an incoming quantum message of the expected shape, else None."""
    if not isinstance(msg, QuantumPayload) or len(msg.handles) != len(dims):
        return None
    if ctx.dims(msg.handles) != dims:
        return None
    return msg.handles


def classical_bits(msg, n: int) -> tuple[int, ...] | None:
    if not isinstance(msg, ClassicalBits) or len(msg.bits) != n:
        return None
    if any(b not in (0, 1) for b in msg.bits):
        return None
    return msg.bits


# -- qutrit Random-OT --------------------------------------------------------

def _cks10_alice_attempt(ctx):
    x0, x1 = ctx.random_bit("x0"), ctx.random_bit("x1")
    h = quantum_handles(ctx, (yield RECV), (3,))
    if h is None:
        yield Abort("expected one qutrit")
    ctx.apply(QUTRIT_PHASE[x0, x1], h)
    yield Send(QuantumPayload(h))
    return SenderBits(x0, x1)


def _cks10_bob_attempt(ctx):
    b = ctx.random_bit("b")
    kept, sent = ctx.prepare(PHI[b])
    yield Send(QuantumPayload((sent,)))
    back = quantum_handles(ctx, (yield RECV), (3,))
    if back is None:
        yield Abort("expected the qutrit back")
    return ReceiverBits(b, ctx.measure(CKS10_POVM[b], (kept, back[0])))


def cks10_alice(ctx):
    return (yield from restartable(ctx, CKS10, _cks10_alice_attempt))


def cks10_bob(ctx):
    return (yield from restartable(ctx, CKS10, _cks10_bob_attempt))


def cks10_rot() -> ProtocolDescriptor:
    """Qutrit Random-OT: Bob sends half of (|bb>+|22>)/sqrt2, Alice phases it."""
    return ProtocolDescriptor(CKS10, "rot", Strategy(ALICE, "honest", cks10_alice),
                              Strategy(BOB, "honest", cks10_bob), CheatProfile(0.75, 1.0))


def cks10_alice_views() -> dict[int, q.DensityMatrix]:
    """Alice's reduced state of Bob's first message, for each index b."""
    return {b: q.partial_trace(PHI[b], [1]) for b in (0, 1)}


# -- unfair qubit Random-OT --------------------------------------------------

def _unfair_alice_attempt(ctx):
    x0, x1 = ctx.random_bit("x0"), ctx.random_bit("x1")
    h = quantum_handles(ctx, (yield RECV), (2,))
    if h is None:
        yield Abort("expected one qubit")
    ctx.apply(PAULI_MASK[x0, x1], h)
    yield Send(QuantumPayload(h))
    return SenderBits(x0, x1)


def _unfair_bob_attempt(ctx):
    b, d = ctx.random_bit("b"), ctx.random_bit("d")
    (h,) = ctx.prepare(HB_STATE[b, d])
    yield Send(QuantumPayload((h,)))
    back = quantum_handles(ctx, (yield RECV), (2,))
    if back is None:
        yield Abort("expected the qubit back")
    return ReceiverBits(b, ctx.measure(UNFAIR_POVM[b, d], back))


def unfair_alice(ctx):
    return (yield from restartable(ctx, UNFAIR, _unfair_alice_attempt))


def unfair_bob(ctx):
    return (yield from restartable(ctx, UNFAIR, _unfair_bob_attempt))


def unfair_lt_rot() -> ProtocolDescriptor:
    """Qubit Random-OT: Bob sends H^b|d>, Alice applies X^x0 Z^x1 and returns it."""
    return ProtocolDescriptor(UNFAIR, "rot", Strategy(ALICE, "honest", unfair_alice),
                              Strategy(BOB, "honest", unfair_bob), CheatProfile(0.5, 1.0))


def unfair_alice_views(restarts: int = 0) -> dict[int, q.DensityMatrix]:
    """Everything Alice has received, conditioned on the final index b.

    Earlier attempts each contribute a fresh, independent H^b'|d'> averaged
    over b' and d'; the final attempt is averaged over d only.
    """
    def avg(bs):
        states = [HB_STATE[b, d] for b in bs for d in (0, 1)]
        return q.DensityMatrix.mixture([1 / len(states)] * len(states), states)

    earlier = avg((0, 1))
    views = {}
    for b in (0, 1):
        m, dims = avg((b,)).matrix, (2,)
        for _ in range(restarts):
            m, dims = np.kron(earlier.matrix, m), (2,) + dims
        views[b] = q.DensityMatrix(dims, m)
    return views


# -- ideal OT / Random-OT black boxes ----------------------------------------

def ideal_ot_alice(ctx, inputs):
    yield Ideal("ot", ALICE, tuple(inputs))
    return SenderBits(*inputs)


def ideal_ot_bob(ctx, b):
    xb = yield Ideal("ot", BOB, b)
    return ReceiverBits(b, xb)


def ideal_ot() -> ProtocolDescriptor:
    """A perfect OT functionality (inputs in, x_b out)."""
    return ProtocolDescriptor("ideal-ot", "ot", Strategy(ALICE, "honest", ideal_ot_alice),
                              Strategy(BOB, "honest", ideal_ot_bob), CheatProfile(0.5, 0.5))


def rot_box_play(ctx, role, profile, fixed=None):
    return (yield Ideal("rot", role, {"profile": profile, "mode": "honest", "fixed": fixed}))


def rot_black_box(A: float, B: float, fixed: tuple[int, int, int] | None = None,
                  ) -> ProtocolDescriptor:
    """Random-OT primitive with cheating profile (A, B), attained exactly.

    ``fixed=(x0, x1, b)`` pins the honest outputs (for exhaustive tests).
    """
    prof = CheatProfile(A, B)
    params = (("profile", prof), ("fixed", fixed))
    return ProtocolDescriptor(
        "rot-black-box", "rot",
        Strategy(ALICE, "honest", rot_box_play, (("role", ALICE),) + params),
        Strategy(BOB, "honest", rot_box_play, (("role", BOB),) + params),
        prof, params)


# -- weak coin flip ----------------------------------------------------------

def wcf_play(ctx, role, spec, mode="honest"):
    return (yield Ideal("wcf", role, {"spec": spec, "mode": mode}))


def wcf_black_box(spec: WcfSpec) -> ProtocolDescriptor:
    """Weak coin flip: uniform when honest; a cheater forces its side at its rate."""
    params = (("spec", spec),)
    return ProtocolDescriptor(
        "wcf-black-box", "wcf",
        Strategy(ALICE, "honest", wcf_play, (("role", ALICE),) + params),
        Strategy(BOB, "honest", wcf_play, (("role", BOB),) + params),
        CheatProfile(spec.A_wcf, spec.B_wcf), params)


# -- OT <-> Random-OT --------------------------------------------------------

def rfo_alice(ctx, ot):
    x0, x1 = ctx.random_bit("x0"), ctx.random_bit("x1")
    yield from ot.alice.run(ctx, (x0, x1))
    return SenderBits(x0, x1)


def rfo_bob(ctx, ot):
    b = ctx.random_bit("b")
    return (yield from ot.bob.run(ctx, b))


def rot_from_ot(ot: ProtocolDescriptor) -> ProtocolDescriptor:
    """Random-OT by feeding uniformly random inputs into an OT."""
    if ot.kind != "ot":
        raise ValueError(f"{ot.name} is not an OT protocol")
    params = (("ot", ot),)
    return ProtocolDescriptor("rot-from-ot", "rot", Strategy(ALICE, "honest", rfo_alice, params),
                              Strategy(BOB, "honest", rfo_bob, params), ot.profile, params, (ot,))


def derandomize_alice(inputs: tuple[int, int], rot_out: SenderBits, mismatch: int,
                      ) -> tuple[tuple[int, int], tuple[int, int]]:
    """Swap on a mismatch, then compute which bits differ from ``inputs``."""
    held = (rot_out.x0, rot_out.x1) if not mismatch else (rot_out.x1, rot_out.x0)
    return held, (held[0] ^ inputs[0], held[1] ^ inputs[1])


def ofr_alice(ctx, inputs, rot):
    out = yield from rot.alice.run(ctx)
    flag = classical_bits((yield RECV), 1)
    if flag is None:
        yield Abort("expected Bob's index flag")
    _, flips = derandomize_alice(inputs, out, flag[0])
    yield Send(ClassicalBits(flips))
    return SenderBits(*inputs)


def ofr_bob(ctx, want, rot):
    out = yield from rot.bob.run(ctx)
    yield Send(ClassicalBits((out.b ^ want,)))
    flips = classical_bits((yield RECV), 2)
    if flips is None:
        yield Abort("expected Alice's flip mask")
    return ReceiverBits(want, out.xb ^ flips[want])


def ot_from_rot(rot: ProtocolDescriptor) -> ProtocolDescriptor:
    """OT on chosen inputs from a Random-OT plus two classical announcements."""
    if rot.kind != "rot":
        raise ValueError(f"{rot.name} is not a Random-OT protocol")
    params = (("rot", rot),)
    return ProtocolDescriptor("ot-from-rot", "ot", Strategy(ALICE, "honest", ofr_alice, params),
                              Strategy(BOB, "honest", ofr_bob, params), rot.profile, params, (rot,))


# -- prototype and WCF-arbitrated combination --------------------------------

def prototype_alice(ctx, wcf, curious=False):
    x0, x1 = ctx.random_bit("x0"), ctx.random_bit("x1")
    c = yield from wcf_play(ctx, ALICE, wcf)
    seen = None
    if c == 0:
        bits = classical_bits((yield RECV), 1)
        if bits is None:
            yield Abort("expected Bob's index")
        seen = bits[0]
        yield Send(ClassicalBits(((x0, x1)[seen],)))
    else:
        yield Send(ClassicalBits((x0, x1)))
    out = SenderBits(x0, x1)
    if not curious:
        return out
    guess = seen if seen is not None else ctx.rng.getrandbits(1)
    return Guess(guess, output=out)


def prototype_bob(ctx, wcf, curious=False):
    b = ctx.random_bit("b")
    c = yield from wcf_play(ctx, BOB, wcf)
    if c == 0:
        yield Send(ClassicalBits((b,)))
        bits = classical_bits((yield RECV), 1)
        if bits is None:
            yield Abort("expected x_b")
        out = ReceiverBits(b, bits[0])
        parity = None
    else:
        bits = classical_bits((yield RECV), 2)
        if bits is None:
            yield Abort("expected both bits")
        out = ReceiverBits(b, bits[b])
        parity = bits[0] ^ bits[1]
    if not curious:
        return out
    guess = parity if parity is not None else ctx.rng.getrandbits(1)
    return Guess(guess, output=out)


def prototype_rot(wcf: WcfSpec) -> ProtocolDescriptor:
    """The flawed prototype: the coin decides who reveals everything."""
    params = (("wcf", wcf),)
    return ProtocolDescriptor("prototype-rot", "rot",
                              Strategy(ALICE, "honest", prototype_alice, params),
                              Strategy(BOB, "honest", prototype_bob, params), None, params)


def combined_alice(ctx, wcf, rot_xy, rot_yx):
    c = yield from wcf_play(ctx, ALICE, wcf)
    return (yield from (rot_xy if c == 0 else rot_yx).alice.run(ctx))


def combined_bob(ctx, wcf, rot_xy, rot_yx):
    c = yield from wcf_play(ctx, BOB, wcf)
    return (yield from (rot_xy if c == 0 else rot_yx).bob.run(ctx))


def composed_profile(wcf: WcfSpec, x: float, y: float) -> CheatProfile:
    return CheatProfile(wcf.A_wcf * (x - y) + y, wcf.B_wcf * (x - y) + y)


def combined_rot(wcf: WcfSpec, rot_xy: ProtocolDescriptor, rot_yx: ProtocolDescriptor,
                 ) -> ProtocolDescriptor:
    """Coin c=0 runs ``rot_xy`` (profile (x, y), x >= y); c=1 runs ``rot_yx``."""
    pxy, pyx = rot_xy.profile, rot_yx.profile
    if pxy is None or pyx is None:
        raise ValueError("both branches need declared cheating profiles")
    if pxy.A < pxy.B:
        raise ValueError(f"rot_xy profile {pxy} violates x >= y")
    if abs(pyx.A - pxy.B) > TOL or abs(pyx.B - pxy.A) > TOL:
        raise ValueError(f"rot_yx profile {pyx} is not the swap of {pxy}")
    params = (("wcf", wcf), ("rot_xy", rot_xy), ("rot_yx", rot_yx))
    return ProtocolDescriptor("combined-rot", "rot",
                              Strategy(ALICE, "honest", combined_alice, params),
                              Strategy(BOB, "honest", combined_bob, params),
                              composed_profile(wcf, pxy.A, pxy.B), params, (rot_xy, rot_yx))


# -- role switch -------------------------------------------------------------

def role_switch_outputs(b: int, xb: int, x0: int, x1: int, d: int,
                        ) -> tuple[SenderBits, ReceiverBits]:
    """Outer outputs from inner receiver (b, xb), inner sender (x0, x1) and d."""
    return SenderBits(d, d ^ b), ReceiverBits(x0 ^ x1, d ^ xb ^ x0)


def switch_alice(ctx, inner):
    got = yield from inner.bob.run(ctx)
    d = ctx.random_bit("d")
    yield Send(ClassicalBits((d ^ got.xb,)))
    return SenderBits(d, d ^ got.b)


def switch_bob(ctx, inner):
    sent = yield from inner.alice.run(ctx)
    bits = classical_bits((yield RECV), 1)
    if bits is None:
        yield Abort("expected d ^ x_b")
    return ReceiverBits(sent.x0 ^ sent.x1, bits[0] ^ sent.x0)


def role_switch(rot: ProtocolDescriptor) -> ProtocolDescriptor:
    """Run ``rot`` with Bob as sender, then one classical bit; profile swaps."""
    if rot.kind != "rot":
        raise ValueError(f"{rot.name} is not a Random-OT protocol")
    params = (("inner", rot),)
    prof = rot.profile.swapped() if rot.profile is not None else None
    return ProtocolDescriptor("role-switch", "rot", Strategy(ALICE, "honest", switch_alice, params),
                              Strategy(BOB, "honest", switch_bob, params), prof, params, (rot,))


def combined_from_base(wcf: WcfSpec, base: ProtocolDescriptor) -> ProtocolDescriptor:
    """Balance one Random-OT by pairing it with its role-switched copy."""
    prof = base.profile
    if prof.A >= prof.B:
        return combined_rot(wcf, base, role_switch(base))
    return combined_rot(wcf, role_switch(base), base)


# -- registry ----------------------------------------------------------------

DEFAULT_WCF = WcfSpec(0.5, 0.5)

REGISTRY: dict[str, Callable[..., ProtocolDescriptor]] = {
    "cks10-rot": lambda wcf=DEFAULT_WCF: cks10_rot(),
    "rot-from-ot": lambda wcf=DEFAULT_WCF: rot_from_ot(ideal_ot()),
    "ot-from-rot": lambda wcf=DEFAULT_WCF: ot_from_rot(combined_from_base(wcf, unfair_lt_rot())),
    "prototype-rot": lambda wcf=DEFAULT_WCF: prototype_rot(wcf),
    "combined-rot": lambda wcf=DEFAULT_WCF: combined_from_base(wcf, unfair_lt_rot()),
    "role-switch": lambda wcf=DEFAULT_WCF: role_switch(unfair_lt_rot()),
    "unfair-lt-rot": lambda wcf=DEFAULT_WCF: unfair_lt_rot(),
    "wcf-black-box": lambda wcf=DEFAULT_WCF: wcf_black_box(wcf),
    "ideal-ot": lambda wcf=DEFAULT_WCF: ideal_ot(),
    "rot-black-box": lambda wcf=DEFAULT_WCF: rot_black_box(1.0, 0.5),
}


def build_protocol(name: str, wcf: WcfSpec = DEFAULT_WCF) -> ProtocolDescriptor:
    """Canonical descriptor for a registry name.

    ``ot-from-rot`` and ``combined-rot`` are built on the unfair qubit
    Random-OT balanced through its role-switched copy.
    """
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise UnknownProtocol(f"unknown protocol {name!r}; known: {', '.join(REGISTRY)}") from None
    return factory(wcf)
