import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedqtn.data import PartitionSpec, partition, synth_blobs
from fedqtn.errors import ContractError, NumericError
from fedqtn.fed import (MEAN, WEIGHTED, ClientState, FedConfig, ServerState, aggregate, broadcast, derive_seed,
                        run_federation, run_round)
from fedqtn.model import init_params
from fedqtn.qtn import build_template
from fedqtn.train import AdamState, DPConfig, train_local


def toy_params(values):
    """A GAP model whose quantum vector is overwritten; only the vector matters to aggregate()."""
    t = build_template("mps", 2) if len(values) == 4 else build_template("ttn", 4)
    p = init_params(t, "gap", 1, 0)
    v = np.zeros(p.spec.n_total)
    v[:len(values)] = values
    return p.with_vector(v)


def setup(n_clients=4, n=64, head="gap", seed=0, dp=None, lr=0.01):
    t = build_template("ttn", 4)
    data = synth_blobs(n, 4, 4, 0.1, seed)
    test = synth_blobs(20, 4, 4, 0.1, seed + 100)
    init = init_params(t, head, 4, seed)
    fr = [1.0] if n_clients == 1 else [0.48, 0.25, 0.15, 0.12][:n_clients]
    fr[-1] = 1 - sum(fr[:-1])
    shards = partition(data, PartitionSpec(fractions=fr, seed=seed))
    clients = [ClientState(s.name, s, init.copy(), AdamState.fresh(init.spec.n_total, lr=lr), dp) for s in shards]
    return ServerState(init.copy()), clients, test, data


# --- broadcast / aggregate ----------------------------------------------------


def test_broadcast_copies():
    server, clients, _, _ = setup()
    server.global_params = server.global_params.with_vector(server.global_params.vector() + 0.1)
    out = broadcast(server, clients)
    for c in out:
        assert c.params.vector().tobytes() == server.global_params.vector().tobytes()
        assert c.params.quantum is not server.global_params.quantum
    assert broadcast(server, []) == []


def test_broadcast_mismatch():
    server, clients, _, _ = setup()
    other = init_params(build_template("mps", 4), "gap", 4, 0)
    clients[0].params = other
    with pytest.raises(ContractError):
        broadcast(server, clients)


def test_aggregate_mean_example():
    server = ServerState(toy_params([0, 0, 0, 0]))
    out = aggregate(server, [(toy_params([1, 3, 0, 0]), 1), (toy_params([3, 5, 0, 0]), 1)])
    assert out.global_params.vector()[:2].tolist() == [2.0, 4.0]
    assert out.round == 1 and server.round == 0


def test_aggregate_server_lr():
    server = ServerState(toy_params([0, 0, 0, 0]), server_lr=0.5)
    out = aggregate(server, [(toy_params([2, 4, 0, 0]), 1)])
    assert out.global_params.vector()[:2].tolist() == [1.0, 2.0]


def test_aggregate_weighted():
    server = ServerState(toy_params([0, 0, 0, 0]), aggregation=WEIGHTED)
    out = aggregate(server, [(toy_params([4, 0, 0, 0]), 3), (toy_params([0, 4, 0, 0]), 1)])
    assert np.allclose(out.global_params.vector()[:2], [3.0, 1.0], atol=1e-15)


def test_aggregate_errors():
    server = ServerState(toy_params([0, 0, 0, 0]))
    with pytest.raises(ContractError):
        aggregate(server, [])
    with pytest.raises(ContractError):
        ServerState(toy_params([0, 0, 0, 0]), aggregation="median")


vectors = st.lists(st.floats(-10, 10), min_size=12, max_size=12)


@settings(max_examples=50, deadline=None)
@given(vectors, st.integers(1, 6), st.sampled_from([MEAN, WEIGHTED]))
def test_aggregate_idempotent(vec, h, mode):
    p = toy_params(vec)
    server = ServerState(toy_params([0.0] * 12), aggregation=mode)
    out = aggregate(server, [(p.copy(), k + 1) for k in range(h)])
    assert np.array_equal(out.global_params.vector(), p.vector())  # exact; -0.0 may come back as 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(vectors, min_size=1, max_size=5), st.randoms(use_true_random=False))
def test_aggregate_order_insensitive(vecs, rnd):
    server = ServerState(toy_params([0.0] * 12))
    items = [(toy_params(v), 1) for v in vecs]
    shuffled = items[:]
    rnd.shuffle(shuffled)
    a = aggregate(server, items).global_params.vector()
    b = aggregate(server, shuffled).global_params.vector()
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


# --- rounds -------------------------------------------------------------------


def test_round_bytes_and_report():
    server, clients, test, _ = setup()
    server, clients2, rep = run_round(server, clients, 1, test)
    assert rep.bytes_exchanged == 384 and server.bytes_exchanged == 384
    assert rep.round == server.round == 1
    assert [c[0] for c in rep.per_client] == ["H1", "H2", "H3", "H4"]
    assert sum(c[2] for c in rep.per_client) == 64
    assert rep.global_metrics.n == 20
    server, _, rep2 = run_round(server, clients2, 1, test)
    assert rep2.bytes_exchanged == 768


def test_round_client_order_irrelevant():
    server, clients, test, _ = setup()
    a, _, _ = run_round(server, clients, 1, test, seed=3)
    b, _, _ = run_round(server, clients[::-1], 1, test, seed=3)
    assert a.global_params.vector().tobytes() == b.global_params.vector().tobytes()


def test_round_threads_match_serial():
    server, clients, test, _ = setup()
    a, _, _ = run_round(server, clients, 1, test, seed=1, threads=1)
    b, _, _ = run_round(server, clients, 1, test, seed=1, threads=4)
    assert a.global_params.vector().tobytes() == b.global_params.vector().tobytes()


def test_round_requires_epochs():
    server, clients, test, _ = setup()
    with pytest.raises(ContractError):
        run_round(server, clients, 0, test)


@pytest.mark.parametrize("head", ["gap", "dense"])
def test_single_client_equals_centralized(head):
    server, clients, test, data = setup(n_clients=1, head=head)
    result = run_federation(server, clients, test, FedConfig(rounds=3, local_epochs=2, seed=7))

    params, opt = clients[0].params, clients[0].opt
    for r in range(1, 4):
        params, _, opt = train_local(params, clients[0].dataset, 2, opt, seed=derive_seed(7, r, "H1"))
    assert np.max(np.abs(result.server.global_params.vector() - params.vector())) <= 1e-12


def test_zero_rounds():
    server, clients, test, _ = setup()
    result = run_federation(server, clients, test, FedConfig(rounds=0))
    assert result.history == []
    assert result.server.global_params.vector().tobytes() == server.global_params.vector().tobytes()


@pytest.mark.parametrize("patience", [1, 2])
def test_target_zero_stops_after_patience(patience):
    server, clients, test, _ = setup()
    result = run_federation(server, clients, test, FedConfig(rounds=5, target_accuracy=0.0, patience=patience))
    assert len(result.history) == patience


def test_federation_deterministic():
    runs = []
    for _ in range(2):
        server, clients, test, _ = setup(dp=DPConfig(1.0, 0.4, rng_seed=2))
        res = run_federation(server, clients, test, FedConfig(rounds=2, seed=5))
        runs.append(([(r.per_client, r.global_metrics.accuracy, r.bytes_exchanged) for r in res.history],
                     res.server.global_params.vector().tobytes()))
    assert runs[0] == runs[1]


def test_bytes_monotone_and_formula():
    server, clients, test, _ = setup(n_clients=3)
    res = run_federation(server, clients, test, FedConfig(rounds=3))
    b = [r.bytes_exchanged for r in res.history]
    assert b == sorted(b) and b[-1] == 2 * 3 * 3 * 12 * 4


def test_client_optimizer_persists():
    server, clients, test, _ = setup()
    res = run_federation(server, clients, test, FedConfig(rounds=2, batch_size=8))
    by_id = {c.id: c for c in res.clients}
    for c in clients:
        steps_per_epoch = -(-c.n_samples // 8)
        assert by_id[c.id].opt.t == 2 * steps_per_epoch


def test_numeric_error_returns_partial_history(monkeypatch):
    import fedqtn.fed as fed

    real = fed.train_local
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] > 4:
            raise NumericError("non-finite gradient")
        return real(*args, **kw)

    monkeypatch.setattr(fed, "train_local", flaky)
    server, clients, test, _ = setup()
    res = run_federation(server, clients, test, FedConfig(rounds=3))
    assert len(res.history) == 1
    assert res.error == {"round": 2, "message": "non-finite gradient"}
    assert res.server.round == 1


def test_derive_seed_properties():
    assert derive_seed(0, 1, "H1") == derive_seed(0, 1, "H1")
    assert len({derive_seed(0, r, c) for r in range(5) for c in ("H1", "H2")}) == 10
    assert 0 <= derive_seed(123, "x") < 2**63
