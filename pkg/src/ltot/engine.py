"""Two-party protocol execution over a lossy channel.

A party is a generator function ``play(ctx, *args)`` that yields actions
(:class:`Send`, :data:`RECV`, :class:`DeclareLoss`, :class:`Abort`,
:class:`Ideal`, :class:`ScopeBegin`, :class:`ScopeEnd`) and returns its
output. The engine schedules the two generators, routes messages, applies
loss, and keeps the single shared quantum register. Parties only touch the
factors they currently own; sending a :class:`QuantumPayload` hands the
factors over.

Quantum losses restart the innermost restartable scope (see
:func:`restartable`). Classical losses are resent and never restart anything.
"""

from __future__ import annotations

import math
import random
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from . import quantum as q

ALICE, BOB = "alice", "bob"
PARTIES = (ALICE, BOB)
MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def other(party: str) -> str:
    return BOB if party == ALICE else ALICE


# -- messages ----------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalBits:
    bits: tuple[int, ...]

    def summary(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class QuantumPayload:
    handles: tuple[int, ...]

    def summary(self) -> str:
        return "q" + ",".join(str(h) for h in self.handles)


@dataclass(frozen=True)
class LossDeclaration:
    def summary(self) -> str:
        return "lost"


Message = ClassicalBits | QuantumPayload | LossDeclaration


# -- actions yielded by strategies -------------------------------------------

@dataclass(frozen=True)
class Send:
    message: Message


class _Recv:
    def __repr__(self) -> str:
        return "RECV"


RECV = _Recv()


@dataclass(frozen=True)
class DeclareLoss:
    """Claim the last received quantum message never arrived."""


@dataclass(frozen=True)
class Abort:
    reason: str = ""


@dataclass(frozen=True)
class Ideal:
    """Call a trusted functionality; both parties must call it together.

    ``role`` is the caller's role inside the functionality, which may differ
    from the caller's real identity when a sub-protocol runs role-switched.
    """

    name: str
    role: str
    payload: Any = None


@dataclass(frozen=True)
class ScopeBegin:
    name: str


@dataclass(frozen=True)
class ScopeEnd:
    name: str


class Restart(Exception):
    """Thrown into both parties when their innermost scope restarts."""


class ProtocolViolation(Exception):
    """A strategy broke the engine's rules; the run aborts, blamed on it."""


class UnknownProtocol(LookupError):
    pass


def restartable(ctx: "PartyContext", name: str, attempt: Callable, *args):
    """Run ``attempt(ctx, *args)`` until it completes without a restart."""
    while True:
        yield ScopeBegin(name)
        try:
            result = yield from attempt(ctx, *args)
            yield ScopeEnd(name)
        except Restart:
            continue
        return result


# -- configuration, descriptors, outcomes -------------------------------------

@dataclass(frozen=True)
class ChannelConfig:
    """Loss model.

    ``max_restarts`` caps restarts per restartable scope (``None`` means
    unbounded). ``classical_loss_rate`` injects classical losses, which are
    always resent.
    """

    loss_rate: float = 0.0
    adversarial_loss_allowed: bool = True
    max_restarts: int | None = None
    classical_loss_rate: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError(f"loss_rate must lie in [0, 1], got {self.loss_rate}")
        if not 0.0 <= self.classical_loss_rate < 1.0:
            raise ValueError("classical_loss_rate must lie in [0, 1)")
        if self.max_restarts is not None and self.max_restarts < 0:
            raise ValueError("max_restarts must be nonnegative or None")
        if self.loss_rate == 1.0 and self.max_restarts is None:
            raise ValueError("loss_rate 1 with unbounded restarts never terminates")


@dataclass(frozen=True)
class Strategy:
    """One party's behaviour: ``play(ctx, *args, **params)`` as a generator."""

    role: str
    name: str
    play: Callable
    params: tuple[tuple[str, Any], ...] = ()
    honest: bool = True

    def __post_init__(self) -> None:
        if self.role not in PARTIES:
            raise ValueError(f"unknown role {self.role!r}")

    def run(self, ctx: "PartyContext", *args):
        return self.play(ctx, *args, **dict(self.params))

    def param(self, key: str, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class ProtocolDescriptor:
    """An immutable protocol: its honest strategies plus metadata.

    ``kind`` is ``"rot"`` (no inputs), ``"ot"`` (Alice inputs two bits, Bob an
    index) or ``"wcf"``.
    """

    name: str
    kind: str
    alice: Strategy
    bob: Strategy
    profile: Any = None
    params: tuple[tuple[str, Any], ...] = ()
    parts: tuple["ProtocolDescriptor", ...] = ()

    def param(self, key: str, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class Completed:
    alice_output: Any
    bob_output: Any


@dataclass(frozen=True)
class Aborted:
    by: str
    reason: str = ""


ProtocolOutcome = Completed | Aborted


@dataclass(frozen=True)
class Event:
    round: int
    attempt: int
    sender: str
    kind: str
    detail: str = ""
    lost: bool = False
    restart: bool = False

    def to_line(self) -> str:
        return (f"round={self.round} attempt={self.attempt} sender={self.sender} "
                f"kind={self.kind} lost={int(self.lost)} restart={int(self.restart)} "
                f"detail={self.detail}")


@dataclass
class Transcript:
    seed: int
    events: list[Event] = field(default_factory=list)
    final_state: str = ""

    def to_text(self) -> str:
        lines = [f"# seed={self.seed}"]
        lines += [e.to_line() for e in self.events]
        lines.append(f"# final_state={self.final_state}")
        return "\n".join(lines) + "\n"

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    @property
    def restarts(self) -> int:
        return sum(e.restart for e in self.events)

    def attempt_draws(self, party: str) -> list[dict[str, int]]:
        """Per-attempt random draws of ``party`` in the outermost scope order."""
        out: list[dict[str, int]] = [{}]
        for e in self.events:
            if e.restart:
                out.append({})
            elif e.kind == "draw" and e.sender == party:
                label, value = e.detail.split("=")
                out[-1][label] = int(value)
        return out


# -- seeds -------------------------------------------------------------------

def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *path: int) -> int:
    h = base & MASK64
    for p in path:
        h = splitmix64((h + (p + 1) * GOLDEN) & MASK64)
    return h


# Parties, measurement sampling and functionalities share one stream; the
# loss streams are separate so injecting classical loss never moves any other
# draw, and they are only consumed when their rate is positive.
_STREAMS = {"main": 0, "qloss": 1, "closs": 2}
_SHARED = {ALICE: "main", BOB: "main", "nature": "main", "ideal": "main"}


class _Streams(dict):
    """Independent per-purpose generators, created on first use."""

    def __init__(self, seed: int) -> None:
        super().__init__()
        self.seed = seed

    def __missing__(self, key: str) -> random.Random:
        if key in _SHARED:
            rng = self[key] = self[_SHARED[key]]
        else:
            rng = self[key] = random.Random(derive_seed(self.seed, _STREAMS[key]))
        return rng


# -- functionalities ---------------------------------------------------------

FUNCTIONALITIES: dict[str, Callable] = {}


def register_functionality(name: str, fn: Callable) -> None:
    """``fn(rng, calls)`` gets ``{role: payload}`` and returns ``{role: result}``."""
    FUNCTIONALITIES[name] = fn


# -- quantum register --------------------------------------------------------

class _Register:
    """The global state vector with per-factor owner and scope tags."""

    def __init__(self) -> None:
        self.psi = np.ones(1, dtype=complex)
        self.dims: list[int] = []
        self.ids: list[int] = []
        self.owner: dict[int, str | None] = {}
        self.scope: dict[int, int] = {}
        self.pinned: set[int] = set()
        self._next = 0

    def add(self, state: q.StateVector, owner: str, scope: int) -> tuple[int, ...]:
        if self.dims:
            self.psi = np.kron(self.psi, state.amplitudes)
        else:
            self.psi = state.amplitudes.copy()
        handles = tuple(range(self._next, self._next + len(state.dims)))
        self._next += len(state.dims)
        self.dims.extend(state.dims)
        self.ids.extend(handles)
        for h in handles:
            self.owner[h] = owner
            self.scope[h] = scope
        return handles

    def axes(self, handles: Sequence[int]) -> list[int]:
        return [self.ids.index(h) for h in handles]

    def check_owner(self, party: str, handles: Sequence[int]) -> None:
        if not handles or len(set(handles)) != len(handles):
            raise ProtocolViolation(f"{party} addressed invalid handles {handles}")
        for h in handles:
            if self.owner.get(h, None) != party or h not in self.scope:
                raise ProtocolViolation(f"{party} does not hold factor {h}")

    def apply(self, matrix: np.ndarray, handles: Sequence[int]) -> None:
        axes = self.axes(handles)
        if matrix.shape[0] != math.prod([self.dims[a] for a in axes]):
            raise q.DimensionError("operator does not match addressed factors")
        self.psi = q.apply_matrix(self.psi, self.dims, matrix, axes)

    def measure(self, povm: q.Povm, handles: Sequence[int], u: float) -> tuple[int, list[float]]:
        axes = self.axes(handles)
        if povm.dim != math.prod([self.dims[a] for a in axes]):
            raise q.DimensionError("POVM does not match addressed factors")
        probs, branches = q.outcome_probabilities(self.psi, self.dims, povm.kraus, axes)
        k = q.sample_index(probs, u)
        self.psi = branches[k] / np.sqrt(probs[k])
        return k, probs

    def reduced(self, handles: Sequence[int]) -> q.DensityMatrix:
        state = q.StateVector(tuple(self.dims), self.psi)
        return q.partial_trace(state, self.axes(handles))

    def discard(self, handles: Iterable[int], rng: random.Random) -> None:
        """Trace out factors by sampling them in the computational basis.

        Measuring and forgetting leaves the remaining factors with the same
        reduced state as a partial trace, so the pure-state simulation stays
        exact for everything still held.
        """
        handles = [h for h in handles if h in self.scope]
        if len(handles) == len(self.ids):
            self._reset()
            return
        for h in handles:
            ax = self.ids.index(h)
            t = self.psi.reshape(self.dims)
            t = np.moveaxis(t, ax, 0).reshape(self.dims[ax], -1)
            probs = np.einsum("ij,ij->i", t.conj(), t).real
            k = q.sample_index(list(probs), rng.random())
            rest = t[k] / np.sqrt(probs[k])
            del self.dims[ax]
            del self.ids[ax]
            self.psi = rest.reshape(-1)
            del self.owner[h], self.scope[h]
            self.pinned.discard(h)

    def _reset(self) -> None:
        nxt = self._next
        self.__init__()
        self._next = nxt

    def summary(self) -> str:
        return "dims=" + ",".join(str(d) for d in self.dims) if self.dims else "empty"


# -- party context -----------------------------------------------------------

class PartyContext:
    """What a strategy may touch: its rng, its own factors, and scope info."""

    __slots__ = ("_ex", "role", "rng")

    def __init__(self, execution: "_Execution", role: str, rng: random.Random) -> None:
        self._ex = execution
        self.role = role
        self.rng = rng

    @property
    def channel(self) -> ChannelConfig:
        return self._ex.channel

    @property
    def attempt(self) -> int:
        """Attempt index within the innermost restartable scope."""
        stack = self._ex.scopes
        return stack[-1].restarts if stack else 0

    @property
    def restarts_remaining(self) -> float:
        cap = self._ex.channel.max_restarts
        return float("inf") if cap is None else cap - self.attempt

    def random_bit(self, label: str) -> int:
        bit = self.rng.getrandbits(1)
        self._ex.log(self.role, "draw", f"{label}={bit}")
        return bit

    def prepare(self, state: q.StateVector) -> tuple[int, ...]:
        return self._ex.register.add(state, self.role, self._ex.scope_token())

    def apply(self, u: q.UnitaryOp, handles: Sequence[int]) -> None:
        self._ex.register.check_owner(self.role, handles)
        self._ex.register.apply(u.matrix, handles)

    def measure(self, povm: q.Povm, handles: Sequence[int]) -> int:
        reg = self._ex.register
        reg.check_owner(self.role, handles)
        k, probs = reg.measure(povm, handles, self._ex.rngs["nature"].random())
        self._ex.log(self.role, "measure",
                     f"outcome={k} p=" + ",".join(f"{p:.6f}" for p in probs))
        return k

    def dims(self, handles: Sequence[int]) -> tuple[int, ...]:
        reg = self._ex.register
        reg.check_owner(self.role, handles)
        return tuple(reg.dims[a] for a in reg.axes(handles))

    def reduced_state(self, handles: Sequence[int]) -> q.DensityMatrix:
        self._ex.register.check_owner(self.role, handles)
        return self._ex.register.reduced(handles)

    def pin(self, handles: Sequence[int]) -> None:
        """Keep factors alive past the end (or restart) of the current scope."""
        self._ex.register.check_owner(self.role, handles)
        self._ex.register.pinned.update(handles)


# -- execution ---------------------------------------------------------------

class _Stop(Exception):
    def __init__(self, outcome: ProtocolOutcome) -> None:
        self.outcome = outcome


@dataclass
class _Scope:
    name: str
    token: int
    restarts: int = 0
    pending: bool = False


class _Party:
    __slots__ = ("name", "gen", "pending", "inbox", "done", "output", "ctx", "heard_quantum")

    def __init__(self, name: str) -> None:
        self.name = name
        self.inbox: deque = deque()
        self.done = False
        self.output = None
        self.pending = None
        self.heard_quantum = False


_BARRIERS = (ScopeBegin, ScopeEnd, Ideal)


class _Execution:
    def __init__(self, channel: ChannelConfig, seed: int) -> None:
        self.channel = channel
        self.seed = seed
        self.rngs = _Streams(seed)
        self.register = _Register()
        self.scopes: list[_Scope] = []
        self._tokens = 0
        self.round = 0
        self.transcript = Transcript(seed)
        self.parties = {p: _Party(p) for p in PARTIES}

    def scope_token(self) -> int:
        return self.scopes[-1].token if self.scopes else 0

    def log(self, sender: str, kind: str, detail: str = "", lost: bool = False,
            restart: bool = False) -> None:
        attempt = self.scopes[-1].restarts if self.scopes else 0
        self.transcript.events.append(
            Event(self.round, attempt, sender, kind, detail, lost, restart))

    # scheduling ------------------------------------------------------------

    def run(self, alice: Strategy, bob: Strategy, args: dict[str, tuple]) -> ProtocolOutcome:
        try:
            for strat in (alice, bob):
                p = self.parties[strat.role]
                p.ctx = PartyContext(self, strat.role, self.rngs[strat.role])
                p.gen = strat.run(p.ctx, *args[strat.role])
            for p in self.parties.values():
                self._advance(p)
            outcome = self._loop()
        except _Stop as stop:
            outcome = stop.outcome
        if isinstance(outcome, Aborted):
            self.log(outcome.by, "abort", outcome.reason)
        else:
            self.log("both", "complete")
        self.transcript.final_state = self.register.summary()
        return outcome

    def _loop(self) -> ProtocolOutcome:
        a, b = self.parties[ALICE], self.parties[BOB]
        while True:
            if not (self._step(a) or self._step(b)):
                if a.done and b.done:
                    for p in (a, b):
                        if p.inbox:
                            return Aborted(other(p.name), "message sent out of turn")
                    return Completed(a.output, b.output)
                return Aborted(self._stall_culprit(a, b), "protocol stalled")

    @staticmethod
    def _stall_culprit(a: _Party, b: _Party) -> str:
        # a finished party left the other waiting; otherwise blame whoever
        # sits at a barrier while its peer still waits for a message
        for p in (a, b):
            if p.done:
                return p.name
        for p, o in ((a, b), (b, a)):
            if p.pending is not RECV and o.pending is RECV:
                return p.name
        return ALICE

    def _advance(self, p: _Party, value=None, exc: BaseException | None = None) -> None:
        try:
            p.pending = p.gen.throw(exc) if exc is not None else p.gen.send(value)
        except StopIteration as stop:
            p.done, p.output, p.pending = True, stop.value, None
        except ProtocolViolation as err:
            raise _Stop(Aborted(p.name, str(err)))
        except Restart:
            raise _Stop(Aborted(p.name, "restart outside a restartable scope"))

    def _step(self, p: _Party) -> bool:
        if p.done:
            return False
        act = p.pending
        if act is RECV:
            if not p.inbox:
                return False
            msg = p.inbox.popleft()
            p.heard_quantum = isinstance(msg, QuantumPayload)
            self._advance(p, msg)
            return True
        if isinstance(act, Send):
            if isinstance(act.message, LossDeclaration):
                self._declared_loss(p)
            else:
                self._send(p, act.message)
            return True
        if isinstance(act, DeclareLoss):
            self._declared_loss(p)
            return True
        if isinstance(act, Abort):
            raise _Stop(Aborted(p.name, act.reason or "aborted"))
        if isinstance(act, _BARRIERS):
            o = self.parties[other(p.name)]
            peer = o.pending
            if type(peer) is not type(act) or peer.name != act.name:
                return False
            if isinstance(act, ScopeBegin):
                self._begin(act.name)
                self._advance(p)
                self._advance(o)
            elif isinstance(act, ScopeEnd):
                self._end(p, o)
                self._advance(p)
                self._advance(o)
            else:
                results = self._ideal(act, peer, p.name)
                self._advance(p, results[act.role])
                self._advance(o, results[peer.role])
            return True
        raise _Stop(Aborted(p.name, f"unknown action {act!r}"))

    # messages --------------------------------------------------------------

    def _send(self, p: _Party, msg: Message) -> None:
        o = self.parties[other(p.name)]
        self.round += 1
        if isinstance(msg, QuantumPayload):
            try:
                self.register.check_owner(p.name, msg.handles)
            except ProtocolViolation as err:
                raise _Stop(Aborted(p.name, str(err)))
            rate = self.channel.loss_rate
            lost = rate > 0 and self.rngs["qloss"].random() < rate
            self.log(p.name, "quantum", msg.summary(), lost=lost)
            for h in msg.handles:
                self.register.owner[h] = None if lost else o.name
            if lost:
                self.log(o.name, "loss-declaration", "genuine")
                self._restart(lost_sender=p.name)
                return
        elif isinstance(msg, ClassicalBits):
            closs = self.channel.classical_loss_rate
            while closs and self.rngs["closs"].random() < closs:
                self.log(p.name, "classical", msg.summary(), lost=True)
                self.log(p.name, "resend", msg.summary())
            self.log(p.name, "classical", msg.summary())
        else:
            raise _Stop(Aborted(p.name, f"cannot send {msg!r}"))
        o.inbox.append(msg)
        self._advance(p)

    def _declared_loss(self, p: _Party) -> None:
        if not p.heard_quantum:
            raise _Stop(Aborted(p.name, "loss declared without a quantum message"))
        if not self.channel.adversarial_loss_allowed:
            raise _Stop(Aborted(p.name, "loss declarations are not permitted"))
        self.round += 1
        self.log(p.name, "loss-declaration", "declared")
        self._restart(lost_sender=other(p.name))

    def _restart(self, lost_sender: str) -> None:
        if not self.scopes:
            raise _Stop(Aborted(lost_sender, "quantum message lost outside a restartable scope"))
        scope = self.scopes[-1]
        cap = self.channel.max_restarts
        if cap is not None and scope.restarts >= cap:
            raise _Stop(Aborted(lost_sender, "restart limit reached"))
        self.log("both", "restart", scope.name, restart=True)
        self._drop_scope_factors(scope.token, parent=None)
        scope.restarts += 1
        scope.pending = True
        for party in self.parties.values():
            party.inbox.clear()
            party.heard_quantum = False
        for party in self.parties.values():
            if party.done:
                raise _Stop(Aborted(party.name, "finished before its scope completed"))
            self._advance(party, exc=Restart())

    def _drop_scope_factors(self, token: int, parent: int | None) -> None:
        reg = self.register
        doomed = []
        for h, tag in list(reg.scope.items()):
            if tag != token:
                continue
            if h in reg.pinned and reg.owner.get(h) is not None:
                reg.scope[h] = parent if parent is not None else 0
            else:
                doomed.append(h)
        if doomed:
            reg.discard(doomed, self.rngs["nature"])

    # barriers --------------------------------------------------------------

    def _begin(self, name: str) -> None:
        top = self.scopes[-1] if self.scopes else None
        if top is not None and top.pending and top.name == name:
            top.pending = False
            return
        self._tokens += 1
        self.scopes.append(_Scope(name, self._tokens))

    def _end(self, p: _Party, o: _Party) -> None:
        for party in (p, o):
            if party.inbox:
                raise _Stop(Aborted(other(party.name), "message sent out of turn"))
        scope = self.scopes.pop()
        self._drop_scope_factors(scope.token, parent=self.scope_token())

    def _ideal(self, a: Ideal, b: Ideal, a_party: str) -> dict[str, Any]:
        if a.role == b.role:
            raise _Stop(Aborted(a_party, f"both parties called {a.name} as {a.role}"))
        fn = FUNCTIONALITIES.get(a.name)
        if fn is None:
            raise UnknownProtocol(f"no functionality named {a.name!r}")
        results = fn(self.rngs["ideal"], {a.role: a.payload, b.role: b.payload})
        self.round += 1
        self.log("both", "ideal", f"{a.name}")
        return results


def run_protocol(protocol: ProtocolDescriptor, alice: Strategy, bob: Strategy,
                 channel: ChannelConfig, seed: int,
                 inputs: tuple[tuple[int, int], int] | None = None,
                 ) -> tuple[ProtocolOutcome, Transcript]:
    """Execute one run; identical arguments give identical transcripts.

    For an OT descriptor ``inputs`` is ``((x0, x1), b)``; when omitted each
    party draws its own inputs uniformly.
    """
    if not isinstance(protocol, ProtocolDescriptor):
        raise UnknownProtocol(f"not a protocol descriptor: {protocol!r}")
    if alice.role != ALICE or bob.role != BOB:
        raise ValueError("strategies do not match the alice/bob roles")
    ex = _Execution(channel, seed)
    args: dict[str, tuple] = {ALICE: (), BOB: ()}
    if protocol.kind == "ot":
        if inputs is None:
            ra, rb = ex.rngs[ALICE], ex.rngs[BOB]
            inputs = ((ra.getrandbits(1), ra.getrandbits(1)), rb.getrandbits(1))
        (x0, x1), b = inputs
        ex.log(ALICE, "input", f"x0={x0} x1={x1}")
        ex.log(BOB, "input", f"b={b}")
        args = {ALICE: ((x0, x1),), BOB: (b,)}
    outcome = ex.run(alice, bob, args)
    return outcome, ex.transcript


# -- trial statistics --------------------------------------------------------

@dataclass(frozen=True)
class TrialStats:
    """Aggregated results of seeded repetitions.

    ``n`` counts scored trials (a scorer may exclude runs, e.g. aborted ones
    when measuring correctness of completed runs); ``trials`` counts all runs.
    """

    n: int
    successes: int
    trials: int
    seed: int
    counts: tuple[tuple[str, int], ...] = ()

    @property
    def estimate(self) -> float:
        return self.successes / self.n if self.n else float("nan")

    @property
    def interval(self) -> tuple[float, float]:
        """Wilson score interval at 95 %."""
        if not self.n:
            return (0.0, 1.0)
        ci = binomtest(self.successes, self.n).proportion_ci(0.95, method="wilson")
        return (float(ci.low), float(ci.high))

    def count(self, key: str) -> int:
        return dict(self.counts).get(key, 0)

    def sigma(self, p: float) -> float:
        return float(np.sqrt(p * (1 - p) / self.n))

    def agrees_with(self, predicted: float, k: float = 3.0) -> bool:
        """|estimate - predicted| within ``k`` binomial standard deviations."""
        return abs(self.estimate - predicted) <= k * self.sigma(predicted) + 1e-12

    def as_dict(self) -> dict[str, Any]:
        lo, hi = self.interval
        return {"n": self.n, "successes": self.successes, "trials": self.trials,
                "estimate": self.estimate if self.n else None, "ci95": [lo, hi], "seed": self.seed,
                "counts": dict(self.counts)}


def honest_correctness(outcome: ProtocolOutcome) -> bool | None:
    """Did Bob receive Alice's bit at his index? ``None`` for aborted runs."""
    if not isinstance(outcome, Completed):
        return None
    a, b = outcome.alice_output, outcome.bob_output
    return b.xb == (a.x0, a.x1)[b.b]


def trial_seed(base_seed: int, i: int) -> int:
    return derive_seed(base_seed, i)


def _trial_chunk(protocol, alice, bob, channel, base_seed, lo, hi, score, inputs):
    counts: dict[str, int] = {}
    scored = successes = 0
    for i in range(lo, hi):
        outcome, tr = run_protocol(protocol, alice, bob, channel, trial_seed(base_seed, i), inputs)
        key = "completed" if isinstance(outcome, Completed) else f"aborted_by_{outcome.by}"
        counts[key] = counts.get(key, 0) + 1
        counts["restarts"] = counts.get("restarts", 0) + tr.restarts
        s = score(outcome)
        if s is not None:
            scored += 1
            successes += bool(s)
    return scored, successes, counts


def run_trials(protocol: ProtocolDescriptor, alice: Strategy, bob: Strategy,
               channel: ChannelConfig, n: int, base_seed: int,
               score: Callable[[ProtocolOutcome], bool | None] = honest_correctness,
               workers: int = 1, inputs=None) -> TrialStats:
    """Run ``n`` independently seeded executions and aggregate ``score``.

    Trial ``i`` uses ``trial_seed(base_seed, i)``, so results do not depend on
    ``workers``. Strategies, descriptors and ``score`` must be picklable when
    ``workers > 1``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if workers <= 1:
        parts = [_trial_chunk(protocol, alice, bob, channel, base_seed, 0, n, score, inputs)]
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(_trial_chunk, protocol, alice, bob, channel, base_seed,
                                int(lo), int(hi), score, inputs)
                    for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            parts = [f.result() for f in futs]
    counts: dict[str, int] = {}
    for _, _, c in parts:
        for k, v in c.items():
            counts[k] = counts.get(k, 0) + v
    return TrialStats(n=sum(p[0] for p in parts), successes=sum(p[1] for p in parts),
                      trials=n, seed=base_seed, counts=tuple(sorted(counts.items())))
