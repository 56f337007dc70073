import numpy as np
import pytest
from numpy.testing import assert_allclose

from sectorops.radial import RadialProfile, make_grid, profile_from_callable
from sectorops.system import (ZeroNormError, hermiticity_defect,
                              lowest_eigenpairs_dofs, mass_norm)
from sectorops.toy import (DEFAULT_LAMBDA, ToyParams, ToyState, assemble,
                           constraint_embed, constraint_residual,
                           dofs_to_state, evolve, lowest_eigenpairs,
                           pure_source_dofs, sector_probabilities,
                           state_to_dofs)

GRID = make_grid(10.0, 65)


def gaussian_profile(grid, width=1.0):
    return profile_from_callable(grid, lambda r: np.exp(-(r / width) ** 2))


class TestConstraintEmbed:
    def test_unit_value(self):
        prof = profile_from_callable(GRID, lambda r: (1 + r**2) * np.exp(-r**2))
        state = constraint_embed(prof, ToyParams(1.0, 0.0, 1.0))
        assert state.amplitude_c == 1.0

    def test_zero_profile(self):
        state = constraint_embed(RadialProfile(GRID, np.zeros(65)),
                                 ToyParams(1.0, 0.0, 1.0))
        assert state.amplitude_c == 0.0

    def test_lambda_variant(self):
        prof = profile_from_callable(GRID, lambda r: 2.0 * np.exp(-r**2))
        params = ToyParams(1.0, 0.0, 1.0, lambda_scale=2 * DEFAULT_LAMBDA)
        state = constraint_embed(prof, params)
        assert state.amplitude_c == 1.0
        assert constraint_residual(state, params) == 0.0


class TestParamsValidation:
    @pytest.mark.parametrize("kw", [
        {"mass_m": -1.0, "energy_e": 0.0, "coupling_g": 1.0},
        {"mass_m": 1.0, "energy_e": -0.5, "coupling_g": 1.0},
        {"mass_m": 1.0, "energy_e": 0.0, "coupling_g": 0.0},
        {"mass_m": 1.0, "energy_e": 0.0, "coupling_g": 1.0,
         "lambda_scale": 0.0},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ToyParams(**kw)


class TestAssemble:
    def test_exact_hermiticity(self):
        system = assemble(ToyParams(1.0, 0.7, 2.0, point_coupling_mu=0.3),
                          GRID)
        assert hermiticity_defect(system.hamiltonian) == 0.0
        assert hermiticity_defect(system.mass_matrix) == 0.0

    def test_positive_semidefinite(self):
        system = assemble(ToyParams(1.0, 0.0, 1.0), GRID)
        vals, _ = lowest_eigenpairs_dofs(system, 3)
        assert vals[0] >= -1e-10

    def test_weak_coupling_free_limit(self):
        # with the interaction switched nearly off the lowest level is the
        # boxed free particle's; it decreases toward zero as the wall recedes
        eigs = []
        for r_max in (10.0, 20.0, 40.0):
            grid = make_grid(r_max, 129)
            system = assemble(ToyParams(1.0, 0.0, 1e-10), grid)
            vals, _ = lowest_eigenpairs_dofs(system, 1)
            eigs.append(vals[0])
        assert eigs[0] > eigs[1] > eigs[2] > -1e-12
        assert eigs[2] < 0.25 * eigs[0]

    def test_lambda_variant_invariance(self):
        base = assemble(ToyParams(1.0, 0.5, 1.5), GRID)
        for lam in (0.5, -2.0, 3.7):
            system = assemble(ToyParams(1.0, 0.5, 1.5, lambda_scale=lam),
                              GRID)
            assert hermiticity_defect(system.hamiltonian) == 0.0
            diff = system.interaction_block - base.interaction_block
            assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0

    def test_interaction_block_negativity(self):
        system = assemble(ToyParams(1.0, 0.2, 1.0), GRID)
        rng = np.random.default_rng(3)
        for _ in range(100):
            x = rng.normal(size=system.n_dofs) \
                + 1j * rng.normal(size=system.n_dofs)
            x /= mass_norm(system, x)
            form = -np.vdot(x, system.interaction_block @ x)
            assert form.real <= 1e-12


class TestEigenpairs:
    def test_ascending_orthonormal_residual(self):
        system = assemble(ToyParams(1.0, 0.4, 1.0), GRID)
        vals, vecs = lowest_eigenpairs_dofs(system, 5)
        assert np.all(np.diff(vals) >= 0)
        M = system.mass_matrix.toarray()
        gram = vecs.T @ M @ vecs
        assert_allclose(gram, np.eye(5), rtol=0, atol=1e-10)

    def test_state_wrapper(self):
        system = assemble(ToyParams(1.0, 0.4, 1.0), GRID)
        pairs = lowest_eigenpairs(system, 2)
        val, state = pairs[0]
        assert isinstance(state, ToyState)
        assert constraint_residual(state, system.params) == 0.0

    def test_richardson_stability(self):
        vals = []
        for n in (65, 129):
            system = assemble(ToyParams(1.0, 0.3, 1.0), make_grid(10.0, n))
            v, _ = lowest_eigenpairs_dofs(system, 1)
            vals.append(v[0])
        # second-order scheme: the doubling gap shrinks by about 4
        system = assemble(ToyParams(1.0, 0.3, 1.0), make_grid(10.0, 257))
        v, _ = lowest_eigenpairs_dofs(system, 1)
        ratio = (vals[0] - vals[1]) / (vals[1] - v[0])
        assert 3.0 < ratio < 5.0


class TestSectorProbabilities:
    def test_pure_source(self):
        state = ToyState(RadialProfile(GRID, np.zeros(65)), 1.0)
        assert sector_probabilities(state) == (0.0, 1.0)

    def test_pure_boson(self):
        state = ToyState(gaussian_profile(GRID), 0.0)
        assert sector_probabilities(state) == (1.0, 0.0)

    def test_sum_is_one_exactly(self):
        state = ToyState(gaussian_profile(GRID), 0.37 + 0.1j)
        p_b, p_s = sector_probabilities(state)
        assert p_b + p_s == 1.0

    def test_zero_norm_raises(self):
        state = ToyState(RadialProfile(GRID, np.zeros(65)), 0.0)
        with pytest.raises(ZeroNormError):
            sector_probabilities(state)


class TestEvolve:
    def test_norm_conservation_and_reversibility(self):
        system = assemble(ToyParams(1.0, 0.3, 1.0), GRID)
        x0 = pure_source_dofs(system)
        traj = evolve(system, x0, dt=0.01, n_steps=2000)
        assert traj.norm_drift() <= 1e-10
        back = evolve(system, traj.final_dofs, dt=-0.01, n_steps=2000)
        assert np.linalg.norm(back.final_dofs - x0) <= 1e-8

    def test_probability_columns(self):
        system = assemble(ToyParams(1.0, 0.3, 1.0), GRID)
        traj = evolve(system, pure_source_dofs(system), dt=0.01, n_steps=50)
        total = traj.columns["p_boson"] + traj.columns["p_source"]
        assert np.all(total == 1.0)
        assert traj.columns["p_source"][0] == 1.0

    def test_emission_onset_quadratic(self):
        system = assemble(ToyParams(1.0, 0.3, 1.0), make_grid(8.0, 21))
        traj = evolve(system, pure_source_dofs(system), dt=5e-5, n_steps=55)
        t = traj.times[5:51]
        p = traj.columns["p_boson"][5:51]
        slope = np.polyfit(np.log(t), np.log(p), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)

    def test_projection_loss_warning(self):
        system = assemble(ToyParams(1.0, 0.3, 1.0), GRID)
        bad = ToyState(gaussian_profile(GRID), amplitude_c=5.0)
        traj = evolve(system, bad, dt=0.01, n_steps=2)
        assert traj.projection_loss > 1e-6
        assert traj.warnings

    def test_embedded_state_round_trip(self):
        system = assemble(ToyParams(1.0, 0.3, 1.0), GRID)
        state = constraint_embed(gaussian_profile(GRID), system.params)
        dofs, loss = state_to_dofs(system, state)
        assert loss <= 1e-12
        back = dofs_to_state(system, dofs)
        assert_allclose(back.profile.values[:-1], state.profile.values[:-1],
                        rtol=0, atol=1e-12)
        assert back.amplitude_c == pytest.approx(state.amplitude_c, abs=1e-12)
