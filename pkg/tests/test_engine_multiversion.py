"""Multi-version switches: install, bump, drain, retire, and abort paths."""

import pytest

from reconflow.engine import DeterministicEngine, EngineError, RunConfig, SourceSchedule
from reconflow.harness import build_workflow, make_update
from reconflow.schedulers import schedule_multi_version


def run_mv(targets=("FM",), *, seed=3, at_us=30_000, limit=60,
           transform="identity", new_function="enrich",
           params=None, stop_after=True):
    wf = build_workflow("fig2")
    request = {
        t: make_update(new_function, params or {"tag": "v2"},
                       state_transform=transform, config_id="cfg-v2")
        for t in targets
    }
    plan = schedule_multi_version(wf.graph, request)
    eng = DeterministicEngine(
        wf.graph, wf.functions,
        config=RunConfig(seed=seed, stop_after_reconfig=stop_after,
                         max_vtime_us=2_000_000),
        sources={"SRC": SourceSchedule(interval_us=1_000, limit=limit)},
    )
    eng.schedule_reconfiguration(at_us, plan)
    return eng, eng.run()


def test_switch_completes_and_retires():
    eng, res = run_mv()
    rep = res.reconfig_reports[0]
    assert rep.status == "applied"
    assert rep.version == 2
    assert set(rep.mu_vtimes) == {"FM"}
    assert rep.config_switch["FM"] == ("passthrough", "cfg-v2")
    # the dual slot is empty again: exactly one live state per operator
    assert eng.dual_state_workers == []
    assert eng.final_configs["FM"] == "cfg-v2"


def test_old_before_mu_new_after_mu():
    # every tag-1 event at the switched worker precedes its Mu, every
    # tag-2 event follows it, even though both ran concurrently
    eng, res = run_mv()
    mu = [e for e in res.log.mu_events() if e.worker == "FM"]
    assert len(mu) == 1
    for e in res.log.phi_events():
        if e.worker != "FM":
            continue
        if e.version_tag == 1:
            assert e.seq < mu[0].seq
            assert e.config_id == "passthrough"
        else:
            assert e.seq > mu[0].seq
            assert e.config_id == "cfg-v2"


def test_both_versions_processed_during_drain():
    # with a long pre-switch queue some tagged-old tuples are still in
    # flight after the bump, so both tags appear at the sink
    eng, res = run_mv(at_us=10_000, limit=80)
    tags = {r.version_tag for r in res.sink_records}
    assert tags == {1, 2}
    # old tuples keep the old configuration at FM
    by_txn = {}
    for e in res.log.phi_events():
        if e.worker == "FM":
            by_txn[e.txn_id] = e
    for r in res.sink_records:
        assert by_txn[r.txn_id].version_tag == r.version_tag


def test_no_mu_until_drained():
    eng, res = run_mv()
    mu = next(e for e in res.log.mu_events() if e.worker == "FM")
    # no tag-1 tuple is processed anywhere after the switch point at FM
    for e in res.log.phi_events():
        if e.worker == "FM" and e.global_index > mu.global_index:
            assert e.version_tag >= 2


def test_transform_failure_aborts_without_switch():
    eng, res = run_mv(transform="failing")
    rep = res.reconfig_reports[0]
    assert rep.status == "aborted"
    assert "already switched: none" in rep.reason
    assert "transform rejected the old state" in rep.reason
    assert eng.final_configs["FM"] == "passthrough"
    assert eng.dual_state_workers == []
    assert all(r.version_tag == 1 for r in res.sink_records)
    assert not [e for e in res.log.mu_events() if e.worker == "FM"]


def test_multi_worker_switch_all_or_nothing():
    eng, res = run_mv(targets=("FC", "FM"))
    rep = res.reconfig_reports[0]
    assert rep.status == "applied"
    assert set(rep.mu_vtimes) == {"FC", "FM"}
    assert eng.final_configs["FC"] == eng.final_configs["FM"] == "cfg-v2"
    # each sink tuple saw a consistent configuration across both workers
    cfg = {}
    for e in res.log.phi_events():
        if e.worker in ("FC", "FM"):
            cfg.setdefault(e.txn_id, set()).add(e.config_id)
    for txn, seen in cfg.items():
        assert len(seen) == 1, f"{txn} crossed configurations: {seen}"


def test_second_request_while_active_rejected():
    wf = build_workflow("fig2")
    plan = schedule_multi_version(
        wf.graph, {"FM": make_update("enrich", {"tag": "v2"})})
    eng = DeterministicEngine(
        wf.graph, wf.functions,
        config=RunConfig(seed=9, stop_after_reconfig=True,
                         max_vtime_us=2_000_000),
        sources={"SRC": SourceSchedule(interval_us=1_000, limit=40)},
    )
    eng.schedule_reconfiguration(5_000, plan)
    eng.schedule_reconfiguration(5_500, plan)
    res = eng.run()
    statuses = sorted(r.status for r in res.reconfig_reports)
    assert statuses == ["applied", "rejected"]
    rejected = next(r for r in res.reconfig_reports if r.status == "rejected")
    assert "busy" in rejected.reason
