"""Acceptance gate: one check per top-level criterion, each printing its own
pass/fail line (run with ``pytest -s tests/test_acceptance.py`` to see them).
"""
from __future__ import annotations

import collections
import contextlib
import time

import numpy as np
import pytest
from scipy import stats as spstats

from bodymod import cli, interaction, service as service_mod, tasks
from bodymod.interaction import (
    Contact,
    ModMethod,
    WeightState,
    gesture_velocity,
    joystick_velocity,
    object_velocity,
    replay,
)
from bodymod.mesh import VertexRegion, cotangent_laplacian, reconstruct
from bodymod.rigid import alignment_rmsd, kabsch_align
from bodymod.service import Service
from bodymod.shapemodel import (
    AnthroVector,
    fit_measurement_map,
    generate_synthetic_corpus,
    mesh_volume,
    synthetic_subject,
    train_pca,
    train_shape_model,
    weight_from_volume,
)
from bodymod.stats import friedman, ols_hc4, rm_anova, wilcoxon_enumeration_oracle, wilcoxon_signed_rank

from conftest import build_icosphere, grid_interior, planar_grid
from test_interaction import gesture_sample, joystick_sample, objects_sample, random_stream
from test_service import run_full_session
from test_stats import fixed_12_point_dataset, hc4_dense_oracle

HELD_OUT = AnthroVector(weight=75.0, height=1.76, armspan=1.82, inseam=0.80)


@contextlib.contextmanager
def criterion(name: str):
    try:
        yield
    except Exception:
        print(f"FAIL {name}")
        raise
    print(f"PASS {name}")


@pytest.fixture(scope="module")
def model20k():
    corpus = generate_synthetic_corpus(8, seed=2, rings=140, segments=142)
    return train_shape_model(corpus)


@pytest.fixture(scope="module")
def subject20k():
    mesh, _ = synthetic_subject(HELD_OUT, 140, 142)
    return mesh


# ---------------------------------------------------------------------------
# geometry core

def test_geometry_1_identity_face_fix_runtime(model20k, subject20k, small_model):
    with criterion("geometry 1: zero-delta identity, fixed face, 20k runtime"):
        subject, _ = synthetic_subject(HELD_OUT, 20, 20)
        out0 = small_model.modify_weight(subject, 0.0)
        assert np.abs(out0.vertices - subject.vertices).max() <= 1e-6
        idx = small_model.face_region.indices
        base = HELD_OUT.weight
        for dw in np.arange(-0.35, 0.351, 0.05) * base:
            out = small_model.modify_weight(subject, float(dw))
            assert np.array_equal(out.vertices[idx], subject.vertices[idx])
        assert subject20k.vertex_count >= 20_000 - 200
        start = time.time()
        model20k.modify_weight(subject20k, 10.0)
        assert time.time() - start < 10.0


def test_geometry_2_laplacian_oracles(icosphere3):
    with criterion("geometry 2: icosphere delta magnitude, planar deltas"):
        rows = VertexRegion(np.arange(icosphere3.vertex_count),
                            icosphere3.vertex_count)
        lap = cotangent_laplacian(icosphere3.vertices, icosphere3.faces, rows)
        mags = np.linalg.norm(lap.deltas(), axis=1)
        assert np.abs(mags / 2.0 - 1.0).max() < 0.05
        grid = planar_grid(9)
        plap = cotangent_laplacian(grid.vertices, grid.faces, grid_interior(9))
        assert np.abs(plap.deltas()).max() < 1e-9


def test_geometry_3_self_reconstruction(icosphere3):
    with criterion("geometry 3: self-reconstruction under constraints"):
        rows = VertexRegion(np.arange(icosphere3.vertex_count),
                            icosphere3.vertex_count)
        lap = cotangent_laplacian(icosphere3.vertices, icosphere3.faces, rows)
        fixed = {i: icosphere3.vertices[i] for i in range(40)}
        out = reconstruct(lap, lap.deltas(), fixed)
        assert np.abs(out - icosphere3.vertices).max() <= 1e-6


def test_geometry_4_pca_and_measurement_map(small_corpus):
    with criterion("geometry 4: PCA orthonormality, full-rank recon, map recovery"):
        m = small_corpus.size
        mean, p, w = train_pca(small_corpus, small_corpus.face_region, m - 1)
        assert np.abs(p.T @ p - np.eye(m - 1)).max() <= 1e-10
        body = small_corpus.face_region.complement().indices
        for j, mesh in enumerate(small_corpus.meshes):
            target = (mesh.vertices - mean)[body].ravel()
            assert np.abs(p @ w[:, j] - target).max() <= 1e-8
        # exact-linear synthetic target
        rng = np.random.default_rng(10)
        d = rng.uniform(0.5, 2.0, (14, 4))
        c_true = rng.normal(size=(5, 4))
        w_exact = (np.hstack([d, np.ones((14, 1))]) @ c_true).T
        c, residuals = fit_measurement_map(d, w_exact)
        assert np.abs(c - c_true).max() <= 1e-8
        assert residuals.max() <= 1e-9


def test_geometry_5_volume_oracle(small_model):
    with criterion("geometry 5: +10 kg volume oracle and monotone sweep"):
        subject, _ = synthetic_subject(HELD_OUT, 20, 20)
        out = small_model.modify_weight(subject, 10.0)
        implied = weight_from_volume(out, subject, HELD_OUT.weight)
        assert implied == pytest.approx(HELD_OUT.weight + 10.0, rel=0.02)
        vols = [mesh_volume(small_model.modify_weight(subject, float(dw)))
                for dw in np.linspace(-20.0, 20.0, 9)]
        assert all(b > a for a, b in zip(vols, vols[1:]))


# ---------------------------------------------------------------------------
# calibration

def test_calibration():
    with criterion("calibration: exact recovery, noise Monte-Carlo, proper rotation"):
        rng = np.random.default_rng(0)
        src = rng.normal(size=(6, 3))
        rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        t = np.array([0.3, -1.0, 2.0])
        tr = kabsch_align(src, src @ rot.T + t)
        assert np.abs(tr.rotation - rot).max() <= 1e-9
        assert np.abs(tr.translation - t).max() <= 1e-9
        for seed in range(100):
            srng = np.random.default_rng(seed)
            pts = srng.uniform(-1, 1, (4, 3))
            q, _ = np.linalg.qr(srng.normal(size=(3, 3)))
            if np.linalg.det(q) < 0:
                q[:, 0] = -q[:, 0]
            noisy = pts @ q.T + srng.normal(size=3) + srng.normal(0, 1e-3, (4, 3))
            assert alignment_rmsd(kabsch_align(pts, noisy), pts, noisy) <= 5e-3
        mirrored = src.copy()
        mirrored[:, 2] = -mirrored[:, 2]
        assert np.linalg.det(kabsch_align(src, mirrored).rotation) == \
            pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# interaction

def test_interaction_anchors_and_properties():
    with criterion("interaction: anchor velocities, bounds, replay, splitting"):
        assert gesture_velocity(1.0) == pytest.approx(18.5)
        assert joystick_velocity(1.0) == pytest.approx(15.0)
        assert joystick_velocity(0.5) == pytest.approx(7.5)
        assert object_velocity(0.0) == pytest.approx(3.0)
        assert object_velocity(1.5) == pytest.approx(15.0)
        assert object_velocity(2.0) == pytest.approx(15.0)

        rng = np.random.default_rng(2024)
        methods = list(ModMethod)
        for i in range(10_000):
            method = methods[i % 3]
            base = float(rng.uniform(50.0, 110.0))
            stream = random_stream(rng, method, 6)
            states = replay(WeightState.initial(base, method), stream)
            for s in states:
                assert 0.65 * base - 1e-9 <= s.weight <= 1.35 * base + 1e-9
            again = replay(WeightState.initial(base, method), stream)
            assert [s.weight for s in states] == [s.weight for s in again]

        for method in methods:
            def const(t):
                if method is ModMethod.GESTURE:
                    return gesture_sample(t, 0.7)
                if method is ModMethod.JOYSTICK:
                    return joystick_sample(t, 0.5)
                return objects_sample(t, Contact.PLUS)
            coarse = replay(WeightState.initial(90.0, method),
                            [const(0.0), const(2.0)])
            fine = replay(WeightState.initial(90.0, method),
                          [const(0.02 * i) for i in range(101)])
            assert abs(coarse[-1].weight - fine[-1].weight) <= 1e-9


# ---------------------------------------------------------------------------
# tasks and statistics

def test_tasks_and_statistics():
    with criterion("tasks/stats: levels, Latin square, Wilcoxon, HC4, ANOVA, Friedman"):
        levels = tasks.task_levels()
        assert levels == list(range(-20, 21, 5)) and len(levels) == 9

        orders = [tasks.counterbalanced_order(i, seed=3) for i in range(9)]
        for pos in range(9):
            counts = collections.Counter(o[pos] for o in orders)
            assert len(counts) == 9 and all(v == 1 for v in counts.values())

        rng = np.random.default_rng(77)
        for _ in range(100):
            m = int(rng.integers(3, 11))
            d = np.round(rng.normal(0.2, 1.0, m), 1)
            d[d == 0] = 0.05
            fast = wilcoxon_signed_rank(d, np.zeros(m))
            slow = wilcoxon_enumeration_oracle(d, np.zeros(m))
            assert fast.p_value == slow.p_value
            assert fast.statistic == slow.statistic

        design, y = fixed_12_point_dataset()
        report = ols_hc4(design, y)
        oracle = hc4_dense_oracle(design, y)
        assert np.abs(report.coefficients - oracle["beta"]).max() < 1e-10
        assert np.abs(report.robust_se - oracle["robust_se"]).max() < 1e-10
        assert np.abs(report.p_values - oracle["p"]).max() < 1e-10

        m3 = np.array([[2.0, 4.0, 6.0], [3.0, 5.0, 10.0], [1.0, 2.0, 6.0]])
        grand = m3.mean()
        ss_cond = 3 * ((m3.mean(axis=0) - grand) ** 2).sum()
        ss_subj = 3 * ((m3.mean(axis=1) - grand) ** 2).sum()
        ss_err = ((m3 - grand) ** 2).sum() - ss_cond - ss_subj
        assert rm_anova(m3).statistic == pytest.approx(
            (ss_cond / 2) / (ss_err / 4), abs=1e-10)

        ordered = np.tile([1.0, 2.0, 3.0], (6, 1)) + np.arange(6)[:, None] * 9
        assert friedman(ordered).statistic == pytest.approx(12.0, abs=1e-12)


# ---------------------------------------------------------------------------
# qualitative-direction reproduction

def test_qualitative_direction_reproduction():
    with criterion("qualitative: contraction-bias slope direction over 10 seeds"):
        start = time.time()
        hits = 0
        gain = 0.8
        for seed in range(10):
            records = tasks.simulate_estimator(
                gain=gain, reference_weight=75.0, noise_sd=0.02, seed=seed,
                base_weight=75.0, participants=12)
            assert len(records) == 108
            signed = tasks.analyze_vs_level(records)["signed"]
            slope = signed.coefficients[0]
            p = signed.p_values[0]
            if p < 0.05 and slope < 0 and abs(slope - (gain - 1.0)) <= 0.05:
                hits += 1
        assert hits >= 9
        assert time.time() - start < 5.0


# ---------------------------------------------------------------------------
# service

def test_service_end_to_end(small_model, tmp_path):
    with criterion("service: full session, replay, restart, analyze parity"):
        svc = Service(tmp_path / "data")
        svc.register_model("default", small_model)
        sid = svc.create_session(1, 80.0, "default", "full", seed=6)
        run_full_session(svc, sid, 80.0)
        session = svc.session(sid)
        assert session.completed and len(session.records) == 45

        # replay the logged inputs per AMT trial and compare every snapshot
        import json as _json
        events = [_json.loads(line)
                  for line in svc.export_log(sid).splitlines()[1:]]
        trial_inputs: dict[int, list] = collections.defaultdict(list)
        trial_snapshots: dict[int, list] = collections.defaultdict(list)
        index = 0
        for e in events:
            if e["type"] == "estimate":
                index += 1
            elif e["type"] == "input":
                trial_inputs[index].append(interaction.InputSample.from_json(
                    _json.dumps({k: v for k, v in e.items() if k != "type"})))
            elif e["type"] == "weight":
                trial_snapshots[index].append(e["kg"])
        for idx, inputs in trial_inputs.items():
            method = session.plan[idx].method
            states = replay(WeightState.initial(80.0, method), inputs)
            assert [s.weight for s in states[1:]] == trial_snapshots[idx]

        # crash-restart: a fresh service over the same directory restores state
        fresh = Service(tmp_path / "data")
        fresh.register_model("default", small_model)
        restored = fresh.session(sid)
        assert restored.completed
        assert restored.records == session.records

        # offline analyze of the exported log is byte-identical to get_results
        log_path = tmp_path / "data" / "sessions" / f"{sid}.jsonl"
        report_path = tmp_path / "report.json"
        assert cli.main(["analyze", "--records", str(log_path),
                         "--out", str(report_path)]) == 0
        assert report_path.read_text() == \
            service_mod.report_json(svc.get_results(sid))
