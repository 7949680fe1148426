"""Acceptance checks, shared by ``ltot selftest`` and the test suite.

Each ``criterion_N`` returns a :class:`CriterionResult` whose contents depend
only on the seed, so reports are byte-reproducible. Wall-clock budgets are
reported as pass/fail without the measured time.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from . import adversaries as adv
from . import quantum as q
from .analysis import compose_theorem1, estimate_cheating, grid_properties, honest_partner
from .engine import (
    ALICE, BOB, ChannelConfig, Completed, TrialStats, derive_seed, honest_correctness,
    run_protocol, run_trials,
)
from .protocols import (
    PAULI_MASK, HB_STATE, UNFAIR_POVM, WcfSpec, cks10_rot, combined_from_base, combined_rot,
    ot_from_rot, prototype_rot, role_switch, role_switch_outputs, rot_black_box,
    unfair_alice_views, unfair_lt_rot,
)

DEFAULT_SEED = 20240601
EXACT = 1e-9


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict[str, Any]:
        return {"check": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    estimates: list[dict[str, Any]] = field(default_factory=list)
    certificates: list[adv.Certificate] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(Check(name, bool(passed), detail))
        return bool(passed)

    def certify(self, cert: adv.Certificate) -> bool:
        self.certificates.append(cert)
        return self.check(cert.name, cert.passed, f"value={cert.value!r} expected={cert.expected!r}")

    def record(self, label: str, stats: TrialStats, predicted: float | None = None) -> TrialStats:
        row = {"criterion": self.number, "label": label, **stats.as_dict()}
        row["predicted"] = predicted
        self.estimates.append(row)
        return stats

    def line(self) -> str:
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}"


def _within_3sigma(stats: TrialStats, p: float) -> tuple[bool, str]:
    band = 3 * stats.sigma(p)
    return stats.agrees_with(p), f"estimate={stats.estimate:.6f} predicted={p:.6f} band={band:.6f}"


def _attack(protocol, attack, channel, n, seed) -> TrialStats:
    return estimate_cheating(protocol, attack, honest_partner(protocol, attack), channel, n, seed)


# -- criteria ----------------------------------------------------------------

def criterion_1(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(1, "qutrit Random-OT honest correctness")
    p = cks10_rot()
    t0 = time.perf_counter()
    st = res.record("cks10 honest", run_trials(p, p.alice, p.bob, ChannelConfig(), 10_000,
                                               derive_seed(seed, 1)), 1.0)
    elapsed = time.perf_counter() - t0
    res.check("all 10^4 runs completed", st.n == 10_000, f"completed={st.n}")
    res.check("Bob's x_b matches Alice's in every completed run", st.successes == st.n,
              f"correct={st.successes}/{st.n}")
    res.check("runtime under 10 s", elapsed < 10.0)
    return res


def criterion_2(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(2, "Alice's Helstrom attack on the qutrit Random-OT")
    res.certify(adv.cks10_helstrom_certificate())
    p = cks10_rot()
    st = res.record("alice-helstrom", _attack(p, adv.alice_helstrom_attack(), ChannelConfig(),
                                              100_000, derive_seed(seed, 2)), 0.75)
    res.check("estimate in [0.7425, 0.7575] at n=10^5", 0.7425 <= st.estimate <= 0.7575,
              f"estimate={st.estimate:.6f}")
    return res


def lost_message_formula(r: int) -> float:
    return 1 - 2.0 ** -(r + 1)


def criterion_3(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(3, "lost-message attack curve")
    p = cks10_rot()
    ch = ChannelConfig()
    est = {}
    for r in (0, 1, 3, 7, 20):
        attack = adv.alice_lost_message_attack(r)
        est[r] = res.record(f"alice-lost-message r={r}",
                            _attack(p, attack, ch, 10_000, derive_seed(seed, 3, r)),
                            adv.predicted_success(attack, p, ch))
    for r in (0, 1, 3, 7):
        ok, detail = _within_3sigma(est[r], lost_message_formula(r))
        res.check(f"r={r} matches 1-2^-(r+1) within 3 sigma", ok, detail)
    lo, _ = est[1].interval
    res.check("r=1 strictly exceeds the 0.75 certificate", lo > 0.75,
              f"estimate={est[1].estimate:.6f} wilson_low={lo:.6f}")
    res.check("r=20 success at least 0.999", est[20].estimate >= 0.999,
              f"estimate={est[20].estimate:.6f}")
    return res


def criterion_4(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(4, "Bob's parity attack on the qutrit Random-OT")
    res.certify(adv.parity_orthogonality_certificate())
    p = cks10_rot()
    st = res.record("bob-parity", _attack(p, adv.bob_parity_attack(), ChannelConfig(), 10_000,
                                          derive_seed(seed, 4)), 1.0)
    res.check("success 1.0 at n=10^4", st.successes == st.n == 10_000,
              f"successes={st.successes}/{st.n}")
    aborts = st.count("aborted_by_alice")
    res.check("honest Alice never aborts", aborts == 0, f"aborts={aborts}")
    return res


def unfair_exhaustive() -> list[tuple[tuple[int, int, int, int], float]]:
    """Probability Bob decodes x_b for every (b, d, x0, x1)."""
    rows = []
    for b, d, x0, x1 in itertools.product((0, 1), repeat=4):
        returned = q.apply_unitary(HB_STATE[b, d], PAULI_MASK[x0, x1], [0])
        probs = q.born_probabilities(returned, UNFAIR_POVM[b, d])
        rows.append(((b, d, x0, x1), float(probs[(x0, x1)[b]])))
    return rows


def criterion_5(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(5, "unfair qubit Random-OT")
    rows = unfair_exhaustive()
    worst = min(pr for _, pr in rows)
    res.check("(a) decoding succeeds with certainty on all 16 (b,d,x0,x1)",
              len(rows) == 16 and abs(worst - 1) <= EXACT, f"min_probability={worst!r}")
    p = unfair_lt_rot()
    seen, wrong = set(), 0
    for i in range(400):
        out, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(), derive_seed(seed, 5, i))
        a, b = tr.attempt_draws(ALICE)[-1], tr.attempt_draws(BOB)[-1]
        seen.add((b["b"], b["d"], a["x0"], a["x1"]))
        wrong += not honest_correctness(out)
    res.check("(a) simulated runs cover all 16 tuples without error",
              len(seen) == 16 and wrong == 0, f"tuples={len(seen)} errors={wrong}")
    views = unfair_alice_views()
    td = q.trace_distance(views[0], views[1])
    res.check("(b) Alice's two views are identical", td <= EXACT, f"trace_distance={td!r}")
    for k in (0, 5):
        res.certify(adv.unfair_alice_certificate(k))
    res.certify(adv.bell_gram_certificate())
    epr = adv.bob_epr_attack()
    st = res.record("bob-epr both bits", run_trials(
        p, p.alice, epr, ChannelConfig(), 10_000, derive_seed(seed, 5, 1),
        score=adv.score_bob_both_bits), 1.0)
    res.check("(c) EPR attack recovers (x0, x1) in all 10^4 runs",
              st.successes == st.n == 10_000, f"successes={st.successes}/{st.n}")
    for attack, pred in ((epr, 1.0), (adv.alice_protocol6_attack(), 0.5)):
        base = None
        for loss in (0.0, 0.3, 0.7):
            st = res.record(f"{attack.name} loss={loss}",
                            _attack(p, attack, ChannelConfig(loss_rate=loss), 4_000,
                                    derive_seed(seed, 5, 2, int(loss * 10))), pred)
            if base is None:
                base = st
                continue
            band = 3 * (base.sigma(pred) ** 2 + st.sigma(pred) ** 2) ** 0.5 + 1e-12
            diff = abs(st.estimate - base.estimate)
            res.check(f"(d) {attack.name} success at loss {loss} matches loss 0 within 3 sigma",
                      diff <= band, f"difference={diff:.6f} band={band:.6f}")
    return res


def role_switch_table() -> list[tuple[tuple[int, ...], bool]]:
    rows = []
    for x0, x1, b, d in itertools.product((0, 1), repeat=4):
        xb = (x0, x1)[b]
        alice, bob = role_switch_outputs(b, xb, x0, x1, d)
        ok = (bob.xb == (alice.x0, alice.x1)[bob.b] and alice.x0 ^ alice.x1 == b
              and bob.b == x0 ^ x1)
        rows.append(((x0, x1, b, d), ok))
    return rows


def criterion_6(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(6, "role-switch reduction")
    rows = role_switch_table()
    res.check("truth table holds on all 16 (x0,x1,b,d)", len(rows) == 16 and all(ok for _, ok in rows),
              f"failures={sum(not ok for _, ok in rows)}")
    covered, bad = set(), 0
    for x0, x1, b in itertools.product((0, 1), repeat=3):
        p = role_switch(rot_black_box(0.5, 0.5, fixed=(x0, x1, b)))
        for i in range(12):
            out, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(), derive_seed(seed, 6, x0, x1, b, i))
            d = tr.attempt_draws(ALICE)[-1]["d"]
            covered.add((x0, x1, b, d))
            a, r = out.alice_output, out.bob_output
            bad += not (r.xb == (a.x0, a.x1)[r.b] and a.x0 ^ a.x1 == b and r.b == x0 ^ x1)
    res.check("simulated role switch matches on every covered case",
              len(covered) == 16 and bad == 0, f"cases={len(covered)} failures={bad}")
    inner = unfair_lt_rot()
    outer = role_switch(inner)
    expected = (inner.profile.B, inner.profile.A)
    res.check("declared profile swaps", (outer.profile.A, outer.profile.B) == expected,
              f"profile=({outer.profile.A}, {outer.profile.B})")
    for role, pred in zip((ALICE, BOB), expected):
        attack = adv.best_attack(outer, role)
        st = res.record(f"role-switch {attack.name}",
                        _attack(outer, attack, ChannelConfig(), 10_000, derive_seed(seed, 6, int(role == BOB))), pred)
        ok, detail = _within_3sigma(st, pred)
        res.check(f"{role} cheats with probability {pred} within 3 sigma", ok, detail)
    return res


def criterion_7(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(7, "derandomization")
    lossy = ChannelConfig(classical_loss_rate=0.5)
    wrong = changed_outputs = resent = differing = 0
    for m0, m1, want, x0, x1, b in itertools.product((0, 1), repeat=6):
        p = ot_from_rot(rot_black_box(0.5, 0.5, fixed=(x0, x1, b)))
        s = derive_seed(seed, 7, m0, m1, want, x0, x1, b)
        out, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(), s, ((m0, m1), want))
        out2, tr2 = run_protocol(p, p.alice, p.bob, lossy, s, ((m0, m1), want))
        wrong += not (isinstance(out, Completed) and out.bob_output.b == want
                      and out.bob_output.xb == (m0, m1)[want])
        changed_outputs += out != out2
        resent += bool(tr2.of_kind("resend"))
        differing += tr.to_text() != tr2.to_text()
    res.check("Bob obtains the desired x_b in all 64 cases", wrong == 0, f"failures={wrong}")
    res.check("classical loss never changes outputs", changed_outputs == 0,
              f"changed={changed_outputs}")
    res.check("classical loss shows up as resends in transcripts", resent > 0 and differing == resent,
              f"runs_with_resends={resent} differing_transcripts={differing}")
    p = build_quantum_ot()
    changed = 0
    for i in range(100):
        s = derive_seed(seed, 7, 9, i)
        changed += run_protocol(p, p.alice, p.bob, ChannelConfig(), s)[0] != \
            run_protocol(p, p.alice, p.bob, lossy, s)[0]
    res.check("same holds over the quantum-backed OT", changed == 0, f"changed={changed}")
    return res


def build_quantum_ot():
    return ot_from_rot(combined_from_base(WcfSpec(0.8536, 0.8536), unfair_lt_rot()))


def criterion_8(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(8, "prototype privacy flaw")
    p = prototype_rot(WcfSpec(0.5, 0.5))
    for role in (ALICE, BOB):
        attack = adv.curious_prototype(role, p)
        st = res.record(f"prototype {attack.name}",
                        _attack(p, attack, ChannelConfig(), 10_000, derive_seed(seed, 8, int(role == BOB))), 0.75)
        res.check(f"honest {role} identifies the other's secret in [0.73, 0.77]",
                  0.73 <= st.estimate <= 0.77, f"estimate={st.estimate:.6f}")
    return res


# (label, A_wcf, B_wcf, party, x, y); None for x, y means the unfair qubit base
COMBINED_SETTINGS = (
    ("unfair-base alice", 0.8536, 0.8536, ALICE, None, None),
    ("box alice", 0.5, 0.5, ALICE, 0.9, 0.6),
    ("box bob", 0.6, 1.0, BOB, 0.8, 0.55),
    ("box alice", 0.7, 0.55, ALICE, 1.0, 0.75),
    ("box bob", 0.9, 0.75, BOB, 0.7, 0.5),
)


def combined_setting(A_wcf, B_wcf, x, y):
    wcf = WcfSpec(A_wcf, B_wcf)
    if x is None:
        return combined_from_base(wcf, unfair_lt_rot())
    return combined_rot(wcf, rot_black_box(x, y), rot_black_box(y, x))


def criterion_9(seed: int = DEFAULT_SEED) -> CriterionResult:
    res = CriterionResult(9, "composition calculus and combined protocol")
    r = compose_theorem1(0.8536, 0.8536, 1, 0.5)
    res.check("bias of the composed protocol is 0.4268 within 1e-4",
              abs(r.eps_ot - 0.4268) <= 1e-4, f"eps_ot={r.eps_ot!r}")
    res.check("composed cheating probabilities 0.9268 and fair",
              abs(r.A_ot - 0.9268) <= 1e-4 and abs(r.B_ot - 0.9268) <= 1e-4 and r.fair,
              f"A_ot={r.A_ot!r} B_ot={r.B_ot!r}")
    for i, (label, aw, bw, party, x, y) in enumerate(COMBINED_SETTINGS):
        p = combined_setting(aw, bw, x, y)
        xy = p.param("rot_xy").profile
        w = aw if party == ALICE else bw
        pred = w * (xy.A - xy.B) + xy.B
        st = res.record(f"combined {label} A_wcf={aw} B_wcf={bw} x={xy.A} y={xy.B}",
                        _attack(p, adv.combined_protocol_attack(party, p), ChannelConfig(),
                                100_000, derive_seed(seed, 9, i)), pred)
        ok, detail = _within_3sigma(st, pred)
        res.check(f"setting {i + 1}: {party} matches W(x-y)+y within 3 sigma", ok, detail)
    bad = grid_properties(0.025)
    for prop, count in bad.items():
        res.check(f"grid property {prop} holds on the 0.025 grid", count == 0, f"violations={count}")
    return res


CRITERIA: dict[int, Callable[[int], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


def run_all(seed: int = DEFAULT_SEED, only=None) -> list[CriterionResult]:
    """Run criteria 1-9 (the determinism criterion needs two selftest runs)."""
    return [CRITERIA[k](seed) for k in sorted(CRITERIA) if only is None or k in only]
