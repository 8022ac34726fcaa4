import math

import numpy as np
import pytest
from checks import as_subspace, dense_viable, measure_viability, tilted_viable

from lowspace.agsp import AgspConfig, generate
from lowspace.hamiltonian import Region, build_model, restrict, to_dense, to_mpo
from lowspace.mps import MPS, add_mpo, MPO
from lowspace.oracle import (
    DenseSubspace,
    columns_from_states,
    spectral_subspace,
    viability,
)
from lowspace.solver import (
    SolveConfig,
    estimate_energy,
    final_refine,
    low_space,
    merge_prime,
    rayleigh_ritz,
)
from lowspace.tensor import DimensionError, NumericError, haar_isometry, spawn_rng
from lowspace.viable import ViableSet, sample_product, tensor_sets


def single_site_sets(h, j1, j2):
    a = ViableSet(Region(j1, j1), [MPS.basis_state(1, h.d, [i]) for i in range(h.d)])
    b = ViableSet(Region(j2, j2), [MPS.basis_state(1, h.d, [i]) for i in range(h.d)])
    return a, b


class TestSolveConfig:
    def test_rejects_bad_case(self):
        with pytest.raises(NumericError):
            SolveConfig(case="xx")

    def test_rejects_bad_delta(self):
        with pytest.raises(NumericError):
            SolveConfig(case="ff", delta=0.0)

    def test_ld_needs_window(self):
        with pytest.raises(NumericError):
            SolveConfig(case="ld")

    def test_s_cap_floor(self):
        with pytest.raises(DimensionError):
            SolveConfig(case="dg", r=4, s_cap=2)

    def test_practical_default_cap(self):
        assert SolveConfig(case="dg", r=4).effective_s_cap == 24

    def test_paper_cap(self):
        cfg = SolveConfig(case="dg", r=4, paper_constants=True)
        assert cfg.effective_s_cap >= 1600 * 4


class TestMergePrime:
    def test_pinned_first_merge_viable(self):
        """Merging two full single-site bases keeps the pinned ground state
        highly viable on the merged block."""
        h = build_model("pinned", 4)
        v1, v2 = single_site_sets(h, 1, 2)
        bundle = generate(h, Region(1, 2), 0.0, "ff", cfg=AgspConfig(ell=1, k=4))
        cfg = SolveConfig(case="ff", delta=1e-3, seed=7)
        out = merge_prime(v1, v2, bundle, cfg)
        t = spectral_subspace(h, -1e-9, 0.5)
        assert measure_viability(h, out, t) <= 0.1

    def test_identity_bundle_is_sampled_span(self):
        """With a degree-zero (identity) amplifier and no trimming, the merge
        returns exactly the sampled tensor span."""
        h = build_model("pinned", 4)
        v1, v2 = single_site_sets(h, 1, 2)
        bundle = generate(h, Region(1, 2), 0.0, "ff", cfg=AgspConfig(ell=1, k=0))
        cfg = SolveConfig(case="ff", delta=1e-3, xi=0.0, seed=7, s_cap=3)
        out = merge_prime(v1, v2, bundle, cfg)
        from lowspace.solver import _derived_seed

        direct = sample_product(v1, v2, 3, seed=_derived_seed(cfg.seed, 0, 0))
        p1 = as_subspace(out).projector()
        p2 = as_subspace(direct).projector()
        assert np.abs(p1 - p2).max() < 1e-8

    def test_sample_product_matches_tensor_then_sample(self):
        """Factored product sampling spans the same subspace as sampling the
        explicitly tensored set with the same seed."""
        from lowspace.viable import random_subspace

        rng = spawn_rng(17)
        v1 = dense_viable(Region(1, 2), haar_isometry(4, 3, rng))
        v2 = dense_viable(Region(3, 4), haar_isometry(4, 2, rng))
        a = sample_product(v1, v2, 3, seed=99)
        b = random_subspace(tensor_sets(v1, v2), 3, seed=99)
        p1 = as_subspace(a).projector()
        p2 = as_subspace(b).projector()
        assert np.abs(p1 - p2).max() < 1e-8

    def test_composed_bound_audit(self):
        """The merged viability obeys the composed spectral bound when the
        sample keeps the full tensor span (no sampling loss)."""
        h = build_model("tfi", 8, {"g": 1.2})
        w = np.linalg.eigvalsh(to_dense(h))
        t = spectral_subspace(h, -1e-9, float(w[0]) + 1e-9)
        v1 = tilted_viable(h, Region(1, 4), t, 0.3, 21)
        v2 = tilted_viable(h, Region(5, 8), t, 0.25, 22)
        d1 = measure_viability(h, v1, t)
        d2 = measure_viability(h, v2, t)
        gam = float(w[1] - w[0])
        bundle = generate(
            h, Region(1, 8), float(w[0]), "dg",
            cfg=AgspConfig(ell=1, max_bond=32), gamma=gam,
        )
        cfg = SolveConfig(
            case="dg", delta=1e-2, xi=0.0, seed=5, gamma=gam,
            s_cap=v1.dim * v2.dim, k_inner=1, max_bond=64,
        )
        out = merge_prime(v1, v2, bundle, cfg)
        d_out = measure_viability(h, out, t)
        predicted = bundle.Delta_measured / (1.0 - (d1 + d2)) ** 2
        assert d_out <= predicted + 1e-6


class TestEstimateEnergy:
    def test_ff_returns_zero(self):
        h = build_model("pinned", 4)
        v1, v2 = single_site_sets(h, 1, 2)
        bundle = generate(h, Region(1, 2), 0.0, "ff", cfg=AgspConfig(ell=1))
        assert estimate_energy(v1, v2, bundle, 0) == 0.0

    def test_full_span_power_zero_exact(self):
        """A full tensor basis with no power steps recovers the truncated
        block operator's ground energy exactly."""
        h = build_model("tfi", 4, {"g": 1.5})
        w = np.linalg.eigvalsh(to_dense(h))
        gam = float(w[1] - w[0])
        bundle = generate(
            h, Region(1, 4), float(w[0]), "dg",
            cfg=AgspConfig(ell=1, max_bond=32), gamma=gam,
        )
        v1, v2 = single_site_sets(h, 1, 2)
        v2 = ViableSet(
            Region(2, 4),
            [
                MPS.basis_state(3, 2, [i, j, k])
                for i in range(2)
                for j in range(2)
                for k in range(2)
            ],
        )
        est = estimate_energy(v1, v2, bundle, 0)
        dense = bundle.truncated_mpo_M.to_dense()
        eps_m = float(np.linalg.eigvalsh((dense + dense.conj().T) / 2)[0])
        assert abs(est - eps_m) <= 1e-6

    def test_mid_tree_within_three(self):
        """A mid-tree estimate from merged children lands within +-3 of the
        dense block energy."""
        h = build_model("tfi", 8, {"g": 1.5})
        w = np.linalg.eigvalsh(to_dense(h))
        gam = float(w[1] - w[0])
        cfg = SolveConfig(
            case="dg", delta=1e-2, r=1, seed=3, gamma=gam, max_bond=48,
            agsp_cfg=AgspConfig(ell=1, max_bond=24),
        )
        children = []
        for j1 in (1, 3):
            v1, v2 = single_site_sets(h, j1, j1 + 1)
            b = generate(h, Region(j1, j1 + 1), 0.0, "dg", cfg=cfg.agsp_cfg, gamma=gam)
            children.append(merge_prime(v1, v2, b, cfg, seed_key=(1, j1)))
        bundle = generate(h, Region(1, 4), 0.0, "dg", cfg=cfg.agsp_cfg, gamma=gam)
        power_count = 4 * int(math.ceil(math.log2(1.0 / gam)))
        est = estimate_energy(children[0], children[1], bundle, power_count, cfg)
        block = restrict(h, Region(1, 4))
        eps_m = float(np.linalg.eigvalsh(to_dense(block))[0])
        assert abs(est - eps_m) <= 3.0


class TestFinalRefine:
    def test_eigenbasis_span_unchanged(self):
        h = build_model("tfi", 6, {"g": 1.5})
        w, u = np.linalg.eigh(to_dense(h))
        basis = [MPS.from_dense(u[:, i], [2] * 6) for i in range(3)]
        cfg = SolveConfig(case="dg", delta=1e-2, gamma=float(w[1] - w[0]), xi=0.0)
        out = final_refine(basis, h, cfg)
        p1 = DenseSubspace.from_vectors([u[:, i] for i in range(3)]).projector()
        p2 = DenseSubspace.from_vectors(
            [columns_from_states([b])[:, 0] for b in out]
        ).projector()
        assert np.abs(p1 - p2).max() < 1e-6

    def test_iteration_count_and_monotone_trace(self):
        """delta=1e-2, gamma=1, n=8: ceil(10*7*ln 100) = 323 power steps, with
        the lowest Ritz value non-increasing along the recorded trace."""
        h = build_model("pinned", 8)
        w, u = np.linalg.eigh(to_dense(h))
        mix = np.cos(0.4) * u[:, 0] + np.sin(0.4) * u[:, 5]
        basis = [MPS.from_dense(mix, [2] * 8)]
        cfg = SolveConfig(
            case="ff", delta=1e-2, gamma=1.0, xi=0.0, paper_constants=True
        )
        assert math.ceil(10 * 7 * math.log(100)) == 323
        trace: list = []
        out = final_refine(basis, h, cfg, trace=trace)
        assert len(trace) == 323
        diffs = np.diff(np.asarray(trace))
        assert diffs.max() <= 1e-9
        final = columns_from_states(out)[:, 0]
        assert abs(np.vdot(u[:, 0], final)) ** 2 >= 1 - 1e-6

    def test_single_power_step_amplitude_ratio(self):
        """One application of 1 - H/(n-1) scales an excited amplitude by
        1 - E/(n-1) relative to the ground amplitude."""
        h = build_model("pinned", 4)
        w, u = np.linalg.eigh(to_dense(h))
        gamma = float(w[1] - w[0])
        c0, c1 = 0.8, 0.6
        mix = c0 * u[:, 0] + c1 * u[:, 1]
        k_mpo = add_mpo(MPO.identity(4, 2), to_mpo(h), coeff_b=-1.0 / 3.0)
        from lowspace.mps import apply_mpo

        img, _ = apply_mpo(k_mpo, MPS.from_dense(mix, [2] * 4), max_bond=32)
        vec = img.to_dense()
        a0 = np.vdot(u[:, 0], vec)
        a1 = np.vdot(u[:, 1], vec)
        ratio = (a1 / a0) / (c1 / c0)
        assert abs(ratio - (1 - gamma / 3) / (1 - w[0] / 3)) < 1e-10


class TestRayleighRitz:
    def test_exact_eigenvectors(self):
        h = build_model("tfi", 8, {"g": 1.5})
        w, u = np.linalg.eigh(to_dense(h))
        basis = [MPS.from_dense(u[:, i], [2] * 8) for i in range(4)]
        vals, states = rayleigh_ritz(basis, to_mpo(h), 4)
        np.testing.assert_allclose(vals, w[:4], atol=1e-8)
        for i, s in enumerate(states):
            assert abs(np.vdot(u[:, i], s.to_dense())) ** 2 > 1 - 1e-8

    def test_single_vector_rayleigh_quotient(self):
        h = build_model("heisenberg", 4)
        rng = spawn_rng(3)
        vec = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        vec /= np.linalg.norm(vec)
        vals, _ = rayleigh_ritz([MPS.from_dense(vec, [2] * 4)], to_mpo(h), 1)
        expected = float(np.real(np.vdot(vec, to_dense(h) @ vec)))
        assert abs(vals[0] - expected) < 1e-10

    def test_variational_bound(self):
        h = build_model("tfi", 8, {"g": 1.5})
        w = np.linalg.eigvalsh(to_dense(h))
        rng = spawn_rng(11)
        cols = haar_isometry(256, 6, rng)
        basis = [MPS.from_dense(cols[:, i], [2] * 8) for i in range(6)]
        vals, _ = rayleigh_ritz(basis, to_mpo(h), 6)
        assert np.all(vals >= w[:6] - 1e-9)

    def test_rank_deficient_raises(self):
        h = build_model("pinned", 4)
        v = MPS.basis_state(4, 2, [0, 0, 0, 0])
        with pytest.raises(NumericError):
            rayleigh_ritz([v, v.scale(1.0)], to_mpo(h), 2)

    def test_too_many_requested(self):
        h = build_model("pinned", 4)
        v = MPS.basis_state(4, 2, [0, 0, 0, 0])
        with pytest.raises(DimensionError):
            rayleigh_ritz([v], to_mpo(h), 2)


class TestLowSpace:
    def test_pinned_ff_overlap(self):
        h = build_model("pinned", 8)
        cfg = SolveConfig(case="ff", delta=1e-3, seed=1)
        states, energies, report = low_space(h, cfg)
        assert len(states) == 1
        target = np.zeros(256)
        target[0] = 1.0
        overlap = abs(np.vdot(target, states[0].to_dense()))
        assert overlap >= 1 - 1e-3
        assert energies[0] <= 1e-6

    def test_pinned_odd_length_padding(self):
        h = build_model("pinned", 6)
        cfg = SolveConfig(case="ff", delta=1e-3, seed=2)
        states, energies, report = low_space(h, cfg)
        assert states[0].n == 6
        target = np.zeros(64)
        target[0] = 1.0
        assert abs(np.vdot(target, states[0].to_dense())) >= 1 - 1e-3
        assert any("padded" in note for note in report.notes)

    def test_dg_tfi_ground_energy(self):
        h = build_model("tfi", 8, {"g": 1.5})
        w = np.linalg.eigvalsh(to_dense(h))
        gam = float(w[1] - w[0])
        cfg = SolveConfig(
            case="dg", delta=1e-2, r=1, seed=3, gamma=gam, max_bond=48,
            agsp_cfg=AgspConfig(ell=1, max_bond=24),
        )
        states, energies, report = low_space(h, cfg)
        assert abs(energies[0] - w[0]) <= 1e-2 * gam
        # variational soundness and energy-estimate propagation
        assert energies[0] >= w[0] - 1e-8
        for level in report.levels:
            for block in level.blocks:
                lo, hi = block["region"]
                eps_m = float(np.linalg.eigvalsh(to_dense(restrict(h, Region(lo, hi))))[0])
                assert abs(block["eps_estimate"] - eps_m) <= 10.0

    def test_determinism_bit_for_bit(self):
        h = build_model("tfi", 8, {"g": 1.5})
        cfg = SolveConfig(
            case="dg", delta=1e-2, r=1, seed=3, gamma=0.31, max_bond=48,
            agsp_cfg=AgspConfig(ell=1, max_bond=24),
        )
        s1, e1, r1 = low_space(h, cfg)
        s2, e2, r2 = low_space(h, cfg)
        np.testing.assert_array_equal(np.asarray(e1), np.asarray(e2))
        np.testing.assert_array_equal(
            columns_from_states(s1), columns_from_states(s2)
        )
        assert [lv.blocks for lv in r1.levels] == [lv.blocks for lv in r2.levels]

    def test_ld_window_contract(self):
        """Every returned vector's Rayleigh quotient stays below
        eps0 + eta - mu + delta."""
        h = build_model("tfi", 8, {"g": 1.5})
        w = np.linalg.eigvalsh(to_dense(h))
        gam = float(w[1] - w[0])
        eta, mu = 1.2, 0.6
        cfg = SolveConfig(
            case="ld", delta=1e-2, r=2, seed=5, gamma=gam, max_bond=48,
            ld_window=(eta, mu), agsp_cfg=AgspConfig(ell=1, max_bond=24),
        )
        states, energies, report = low_space(h, cfg)
        hd = to_dense(h)
        for s in states:
            vec = s.to_dense()
            rq = float(np.real(np.vdot(vec, hd @ vec)))
            assert rq <= float(w[0]) + eta - mu + cfg.delta + 1e-9

    def test_report_structure(self):
        h = build_model("pinned", 8)
        cfg = SolveConfig(case="ff", delta=1e-3, seed=1)
        _, _, report = low_space(h, cfg)
        assert len(report.levels) == 3
        assert [len(lv.blocks) for lv in report.levels] == [4, 2, 1]
        assert set(report.wall_clock) == {"merge", "refine", "extract"}
        assert len(report.entropies) == 1 and len(report.entropies[0]) == 7
        assert all(r >= 1 for r in report.schmidt_ranks[0])
