import pytest
from scipy.stats import chi2_contingency, chisquare

from ltot import quantum as q
from ltot.engine import (
    ALICE, BOB, RECV, Aborted, ChannelConfig, ClassicalBits, Completed, DeclareLoss,
    ProtocolDescriptor, QuantumPayload, Send, Strategy, derive_seed, restartable,
    run_protocol, run_trials,
)
from ltot.protocols import cks10_rot, ot_from_rot, unfair_lt_rot

GOLDEN_CKS10_SEED_1 = """\
# seed=1
round=0 attempt=0 sender=alice kind=draw lost=0 restart=0 detail=x0=1
round=0 attempt=0 sender=alice kind=draw lost=0 restart=0 detail=x1=0
round=0 attempt=0 sender=bob kind=draw lost=0 restart=0 detail=b=1
round=1 attempt=0 sender=bob kind=quantum lost=0 restart=0 detail=q1
round=2 attempt=0 sender=alice kind=quantum lost=0 restart=0 detail=q1
round=2 attempt=0 sender=bob kind=measure lost=0 restart=0 detail=outcome=0 p=1.000000,0.000000
round=2 attempt=0 sender=both kind=complete lost=0 restart=0 detail=
# final_state=empty
"""


def toy(alice_play, bob_play):
    a, b = Strategy(ALICE, "toy", alice_play), Strategy(BOB, "toy", bob_play)
    return ProtocolDescriptor("toy", "rot", a, b, None), a, b


def run_toy(alice_play, bob_play, channel=ChannelConfig(), seed=0):
    proto, a, b = toy(alice_play, bob_play)
    return run_protocol(proto, a, b, channel, seed)


# -- determinism -------------------------------------------------------------

def test_golden_transcript():
    p = cks10_rot()
    outcome, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(), 1)
    assert tr.to_text() == GOLDEN_CKS10_SEED_1
    assert outcome.bob_output.xb == (outcome.alice_output.x0, outcome.alice_output.x1)[1]


@pytest.mark.parametrize("channel", [ChannelConfig(), ChannelConfig(loss_rate=0.4),
                                     ChannelConfig(loss_rate=0.4, max_restarts=1)])
def test_same_seed_same_transcript(channel):
    p = unfair_lt_rot()
    for seed in range(20):
        one = run_protocol(p, p.alice, p.bob, channel, seed)
        two = run_protocol(p, p.alice, p.bob, channel, seed)
        assert one[0] == two[0]
        assert one[1].to_text() == two[1].to_text()


def test_different_seeds_differ():
    p = unfair_lt_rot()
    texts = {run_protocol(p, p.alice, p.bob, ChannelConfig(), s)[1].to_text() for s in range(30)}
    assert len(texts) > 10


def test_derive_seed_is_path_sensitive():
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1) != derive_seed(2)


def test_parallel_matches_serial():
    p = cks10_rot()
    one = run_trials(p, p.alice, p.bob, ChannelConfig(loss_rate=0.2), 300, 9)
    two = run_trials(p, p.alice, p.bob, ChannelConfig(loss_rate=0.2), 300, 9, workers=2)
    assert one == two


# -- loss and restarts -------------------------------------------------------

def test_restart_cap_aborts_and_blames_sender():
    p = unfair_lt_rot()
    outcome, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(loss_rate=1.0, max_restarts=2), 0)
    assert outcome == Aborted(BOB, "restart limit reached")
    assert tr.restarts == 2
    assert len(tr.of_kind("loss-declaration")) == 3


def test_zero_cap_means_single_attempt():
    p = unfair_lt_rot()
    outcome, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(loss_rate=1.0, max_restarts=0), 0)
    assert isinstance(outcome, Aborted)
    assert tr.restarts == 0


def test_lossy_runs_still_correct():
    p = unfair_lt_rot()
    st = run_trials(p, p.alice, p.bob, ChannelConfig(loss_rate=0.5), 300, 4)
    assert st.n == 300 and st.successes == 300
    assert st.count("restarts") > 0


def test_restart_discards_quantum_state():
    p = cks10_rot()
    for seed in range(30):
        outcome, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(loss_rate=0.5), seed)
        assert isinstance(outcome, Completed)
        assert tr.final_state == "empty"


def test_restart_draws_are_fresh():
    p = unfair_lt_rot()
    pairs = []
    final = []
    for seed in range(3000):
        _, tr = run_protocol(p, p.alice, p.bob, ChannelConfig(loss_rate=0.5), seed)
        draws = tr.attempt_draws(BOB)
        final.append(draws[-1]["b"] * 2 + draws[-1]["d"])
        if len(draws) >= 2:
            pairs.append((draws[0]["b"], draws[1]["b"]))
    assert len(pairs) > 1000
    table = [[sum(1 for a, b in pairs if (a, b) == (i, j)) for j in (0, 1)] for i in (0, 1)]
    assert chi2_contingency(table).pvalue > 0.001
    counts = [final.count(k) for k in range(4)]
    assert chisquare(counts).pvalue > 0.001


def test_classical_loss_only_adds_resends():
    p = ot_from_rot(cks10_rot())
    plain = ChannelConfig()
    lossy = ChannelConfig(classical_loss_rate=0.6)
    resends = 0
    for seed in range(40):
        a = run_protocol(p, p.alice, p.bob, plain, seed)
        b = run_protocol(p, p.alice, p.bob, lossy, seed)
        assert a[0] == b[0]
        resends += len(b[1].of_kind("resend"))
        stripped = [e for e in b[1].events if e.kind != "resend" and not e.lost]
        assert [e.to_line() for e in stripped] == [e.to_line() for e in a[1].events]
    assert resends > 0


def _send_qubit(ctx):
    (h,) = ctx.prepare(q.ket((2,), 0))
    yield Send(QuantumPayload((h,)))


def _claim_loss(ctx):
    yield RECV
    yield DeclareLoss()


def test_adversarial_loss_can_be_forbidden():
    def sender(ctx):
        return (yield from restartable(ctx, "s", _send_qubit))

    def declarer(ctx):
        return (yield from restartable(ctx, "s", _claim_loss))

    out, _ = run_toy(sender, declarer, ChannelConfig(adversarial_loss_allowed=False))
    assert out.by == BOB
    assert "not permitted" in out.reason
    out, tr = run_toy(sender, declarer, ChannelConfig(max_restarts=3))
    assert out == Aborted(ALICE, "restart limit reached")
    assert tr.restarts == 3


def test_loss_declaration_needs_a_quantum_message():
    def talker(ctx):
        yield Send(ClassicalBits((1,)))
        return 0

    def declarer(ctx):
        yield RECV
        yield DeclareLoss()

    out, _ = run_toy(talker, declarer)
    assert out == Aborted(BOB, "loss declared without a quantum message")


def test_loss_outside_a_scope_aborts():
    def sender(ctx):
        (h,) = ctx.prepare(q.ket((2,), 0))
        yield Send(QuantumPayload((h,)))

    def receiver(ctx):
        yield RECV

    out, _ = run_toy(sender, receiver, ChannelConfig(loss_rate=1.0, max_restarts=3))
    assert isinstance(out, Aborted) and out.by == ALICE


# -- protocol violations -----------------------------------------------------

def test_sending_a_foreign_qubit_aborts():
    def alice(ctx):
        (h,) = ctx.prepare(q.ket((2,), 0))
        yield Send(QuantumPayload((h,)))
        yield RECV

    def bob(ctx):
        msg = yield RECV
        yield Send(QuantumPayload(msg.handles))
        yield Send(QuantumPayload(msg.handles))

    out, _ = run_toy(alice, bob)
    assert out.by == BOB


def test_message_out_of_turn():
    def alice(ctx):
        yield Send(ClassicalBits((0,)))
        return 1

    def bob(ctx):
        return 2
        yield

    out, _ = run_toy(alice, bob)
    assert out == Aborted(ALICE, "message sent out of turn")


def test_mutual_wait_stalls():
    def waiter(ctx):
        yield RECV

    out, _ = run_toy(waiter, waiter)
    assert isinstance(out, Aborted) and out.reason == "protocol stalled"


def test_channel_config_validation():
    with pytest.raises(ValueError):
        ChannelConfig(loss_rate=1.2)
    with pytest.raises(ValueError):
        ChannelConfig(loss_rate=1.0)
    with pytest.raises(ValueError):
        ChannelConfig(max_restarts=-1)
    with pytest.raises(ValueError):
        ChannelConfig(classical_loss_rate=1.0)


def test_trial_stats_interval_and_gates():
    p = cks10_rot()
    st = run_trials(p, p.alice, p.bob, ChannelConfig(), 200, 3)
    lo, hi = st.interval
    assert lo <= st.estimate <= hi == 1.0
    assert st.agrees_with(1.0)
    assert not st.agrees_with(0.9)
