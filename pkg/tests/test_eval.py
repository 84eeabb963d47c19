import numpy as np
import pytest
import warnings

from trajgan import data as D
from trajgan import evaluate as E
from trajgan import model as M
from trajgan.tensor import ContractError

from oracles import ade_ref, fde_ref, rmse_trajectory_ref, jacobi_eigh


def rand_pairs(rng, n, t):
    return [(rng.normal(size=(t, 2)), rng.normal(size=(t, 2))) for _ in range(n)]


# ---------------------------------------------------------------------------
# metric anchors

def test_rmse_perfect_is_zero():
    p = np.arange(24.0).reshape(12, 2)
    assert E.rmse_trajectory(p, p) == 0.0


def test_rmse_three_four_offset_is_exactly_five():
    t = np.zeros((7, 2))
    p = t + np.array([3.0, 4.0])
    assert abs(E.rmse_trajectory(p, t) - 5.0) < 1e-12


def test_rmse_mixed_offsets_hand_value():
    t = np.zeros((2, 2))
    p = np.array([[3.0, 4.0], [0.0, 0.0]])
    assert abs(E.rmse_trajectory(p, t) - np.sqrt(12.5)) < 1e-12


def test_rmse_length_mismatch_rejected():
    with pytest.raises(ContractError):
        E.rmse_trajectory(np.zeros((3, 2)), np.zeros((4, 2)))


def test_ade_is_mean_of_rmse():
    t = np.zeros((5, 2))
    pairs = [(t, t), (t + np.array([3.0, 4.0]), t)]
    assert abs(E.ade(pairs) - 2.5) < 1e-12


def test_fde_single_three_four_offset():
    t = np.zeros((5, 2))
    p = t.copy()
    p[-1] = [3.0, 4.0]
    assert abs(E.fde([(p, t)]) - 5.0) < 1e-12


def test_fde_is_rms_over_trajectories():
    t = np.zeros((5, 2))
    p1 = t.copy()
    p1[-1] = [3.0, 4.0]
    assert abs(E.fde([(p1, t), (t, t)]) - np.sqrt(12.5)) < 1e-12


def test_fde_mean_form():
    t = np.zeros((5, 2))
    p1 = t.copy()
    p1[-1] = [3.0, 4.0]
    assert abs(E.fde([(p1, t), (t, t)], form="mean") - 2.5) < 1e-12
    with pytest.raises(ContractError):
        E.fde([(t, t)], form="median")


def test_empty_dataset_rejected():
    with pytest.raises(ContractError):
        E.ade([])
    with pytest.raises(ContractError):
        E.fde([])


def test_metrics_match_straight_loop_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        t = int(rng.integers(1, 15))
        pairs = rand_pairs(rng, n, t)
        preds = [p for p, _ in pairs]
        truths = [t_ for _, t_ in pairs]
        assert abs(E.ade(pairs) - ade_ref(preds, truths)) < 1e-12
        assert abs(E.fde(pairs) - fde_ref(preds, truths)) < 1e-12
        assert abs(E.rmse_trajectory(*pairs[0])
                   - rmse_trajectory_ref(*pairs[0])) < 1e-12


def test_metrics_translation_invariant():
    rng = np.random.default_rng(1)
    pairs = rand_pairs(rng, 4, 12)
    shift = np.array([123.4, -56.7])
    shifted = [(p + shift, t + shift) for p, t in pairs]
    assert abs(E.ade(pairs) - E.ade(shifted)) < 1e-12
    assert abs(E.fde(pairs) - E.fde(shifted)) < 1e-12


# ---------------------------------------------------------------------------
# constant-velocity baseline

def test_baseline_exact_on_linear_scene():
    w = D.synth_scene("linear", 3, ["pedestrian", "car", "bus"], seed=2)[0]
    pred = E.constant_velocity_baseline(w)
    assert np.allclose(pred, w.future, atol=1e-9)


def test_baseline_stationary_agent_stays_put():
    w = D.synth_scene("linear", 1, ["pedestrian"], seed=3)[0]
    w.observed[0, :] = w.observed[0, :1]
    pred = E.constant_velocity_baseline(w)
    assert np.array_equal(pred[0], np.repeat(w.observed[0, -1:], w.t_pred, axis=0))


def test_baseline_misses_turns():
    w = D.synth_scene("turn", 2, ["car", "bicyclist"], seed=4)[0]
    a, _ = E.baseline_metrics([w])
    assert a > 0.1


# ---------------------------------------------------------------------------
# min-of-k evaluation

def tiny_gen(seed=5, **kw):
    cfg = M.ModelConfig(embed_dim=3, class_embed_dim=2, hidden_dim=4,
                        noise_dim=2, pool_dim=3, transformer_heads=2,
                        transformer_layers=1, transformer_ff_dim=6,
                        gamma_mlp_hidden=(3,), pooling_mlp_hidden=(3,),
                        decoder_init_mlp_hidden=(3,), classifier_mlp_hidden=(3,),
                        k_samples=3, **kw)
    return M.build_generator(cfg, seed=seed)


def test_eval_report_shape_and_determinism():
    gen = tiny_gen()
    ws = D.synth_scene("linear", 3, ["pedestrian", "car", "bicyclist"],
                       seed=6, n_windows=2)
    r1 = E.eval_min_of_k(gen, ws, k=3, seed=7)
    r2 = E.eval_min_of_k(gen, ws, k=3, seed=7)
    assert r1.ade == r2.ade and r1.fde == r2.fde
    assert r1.n_trajectories == 6
    assert r1.k == 3
    assert set(r1.per_class) == {"pedestrian", "car", "bicyclist"}
    assert sum(m.n for m in r1.per_class.values()) == 6
    assert r1.baseline_ade is not None


def test_min_of_k_nested_improvement():
    gen = tiny_gen()
    ws = D.synth_scene("turn", 2, ["pedestrian", "car"], seed=8, n_windows=3)
    ades = [E.eval_min_of_k(gen, ws, k=k, seed=9).ade for k in (1, 4, 8)]
    assert ades[1] <= ades[0] + 1e-12
    assert ades[2] <= ades[1] + 1e-12


def test_eval_rejects_bad_inputs():
    gen = tiny_gen()
    ws = D.synth_scene("linear", 1, ["car"], seed=10)
    with pytest.raises(ContractError):
        E.eval_min_of_k(gen, ws, k=0)
    with pytest.raises(ContractError):
        E.eval_min_of_k(gen, [], k=1)


def test_report_csv_and_text():
    gen = tiny_gen()
    ws = D.synth_scene("linear", 2, ["pedestrian", "bus"], seed=11)
    r = E.eval_min_of_k(gen, ws, k=2, seed=12)
    csv_text = r.to_csv()
    lines = csv_text.strip().splitlines()
    assert lines[0] == "scope,ade,fde,n,k"
    assert lines[1].startswith("model,")
    assert any(l.startswith("constant_velocity,") for l in lines)
    assert any(l.startswith("class:pedestrian,") for l in lines)
    text = r.to_text()
    assert E.REFERENCE_MARKER in text
    assert "21.98" in text and "43.53" in text
    assert "23.56" in text and "46.86" in text


def test_reference_rows_cover_experiment_matrix():
    assert len(E.REFERENCE_RESULTS) == 7
    best = min(E.REFERENCE_RESULTS, key=lambda r: r[1])
    assert best[1:] == (21.98, 43.53)


# ---------------------------------------------------------------------------
# PCA and distances

def test_pca_planar_points_keep_pairwise_distances():
    rng = np.random.default_rng(13)
    flat = rng.normal(size=(6, 2))
    basis, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    emb = flat @ basis[:2, :]
    proj = E.pca_project(emb)
    for i in range(6):
        for j in range(6):
            want = np.linalg.norm(flat[i] - flat[j])
            got = np.linalg.norm(proj[i] - proj[j])
            assert abs(want - got) < 1e-9


def test_pca_collinear_second_component_zero():
    emb = np.zeros((3, 5))
    emb[:, 0] = [1.0, 2.0, 3.0]
    proj = E.pca_project(emb)
    assert np.max(np.abs(proj[:, 1])) < 1e-9


def test_pca_rotation_invariance_of_distances():
    rng = np.random.default_rng(14)
    emb = rng.normal(size=(6, 8))
    q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    p1, p2 = E.pca_project(emb), E.pca_project(emb @ q)
    d1 = E.embedding_distances(p1)
    d2 = E.embedding_distances(p2)
    assert np.max(np.abs(d1 - d2)) < 1e-9


def test_pca_matches_jacobi_oracle():
    rng = np.random.default_rng(15)
    emb = rng.normal(size=(6, 8))
    x = emb - emb.mean(axis=0)
    evals, evecs = jacobi_eigh(x.T @ x / x.shape[0])
    comps = evecs[:, :2].copy()
    for j in range(2):
        nz = np.nonzero(np.abs(comps[:, j]) > 1e-12)[0]
        if comps[nz[0], j] < 0:
            comps[:, j] = -comps[:, j]
    assert np.max(np.abs(E.pca_project(emb) - x @ comps)) < 1e-9


def test_pca_zero_variance_warns_and_zeros():
    emb = np.ones((6, 4)) * 2.5
    with pytest.warns(UserWarning):
        proj = E.pca_project(emb)
    assert np.array_equal(proj, np.zeros((6, 2)))


def test_pca_rejects_one_dim():
    with pytest.raises(ContractError):
        E.pca_project(np.zeros((6, 1)))


def test_distance_table_axioms():
    rng = np.random.default_rng(16)
    e = rng.normal(size=(6, 5))
    d = E.embedding_distances(e)
    assert np.array_equal(d, d.T)
    assert np.array_equal(np.diag(d), np.zeros(6))
    assert abs(d[0, 1] - np.linalg.norm(e[0] - e[1])) < 1e-12
    for i in range(6):
        for j in range(6):
            for l in range(6):
                assert d[i, j] <= d[i, l] + d[l, j] + 1e-12


def test_distance_known_three_four():
    e = np.array([[0.0, 0.0], [3.0, 4.0]])
    d = E.embedding_distances(e)
    assert abs(d[0, 1] - 5.0) < 1e-12


def test_analyze_embeddings_shapes():
    gen = tiny_gen(seed=17)
    a = E.analyze_embeddings(gen)
    assert a.pca_coords.shape == (6, 2)
    assert a.distance_table.shape == (6, 6)
    assert not a.degenerate
    assert a.pca_csv().splitlines()[0] == "class,pc1,pc2"
    assert len(a.pca_csv().strip().splitlines()) == 7
    first = a.distances_csv().splitlines()[0]
    assert first == "class," + ",".join(D.CLASS_NAMES)


def test_analyze_embeddings_flags_degenerate():
    gen = tiny_gen(seed=18)
    gen.encoder.class_embed.W.data[:] = 0.0
    a = E.analyze_embeddings(gen)
    assert a.degenerate
    assert np.array_equal(a.pca_coords, np.zeros((6, 2)))
