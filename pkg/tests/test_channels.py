import math

import numpy as np
import pytest

from conftest import kron_all, proj, rotated_h, witness_state
from ergokit.channels import (
    ChannelFamily,
    KrausChannel,
    apply,
    choi_matrix,
    coherent_gibbs,
    dephasing,
    extraction_family,
    identity_channel,
    is_cptp,
    is_unital,
    lambda_beta_map,
    lambda_beta_tilde_family,
    level_swap,
    mixture,
    partial_dephasing,
    random_channel,
    random_unital_channel,
    selective_outcomes,
    thermal_dilation,
    thermal_operation,
    thermalizing,
    unitary_channel,
)
from ergokit.exceptions import ValidationError
from ergokit.spectra import (
    Hamiltonian,
    energy,
    gibbs,
    passive_rearrangement,
    random_state,
    random_unitary,
    validate_state,
)
from ergokit.workfn import ergotropy, free_energy

H2 = Hamiltonian(np.array([0.0, 1.0]))
H001 = Hamiltonian(np.array([0.0, 0.0, 1.0]))
H012 = Hamiltonian(np.array([0.0, 1.0, 2.0]))


def choi_oracle(ch):
    """sum_ij |i><j| (x) Lambda(|i><j|), built entry by entry through the Kraus action."""
    d = ch.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1
            img = sum(k @ e @ k.conj().T for k in ch.kraus)
            out[i * d:(i + 1) * d, j * d:(j + 1) * d] = img
    return out


def completeness_error(ch):
    return np.abs(sum(k.conj().T @ k for k in ch.kraus) - np.eye(ch.dim)).max()


class TestKrausChannel:
    def test_incomplete_rejected(self):
        with pytest.raises(ValidationError):
            KrausChannel(np.array([np.eye(2) * 0.9]))

    def test_shape_rejected(self):
        with pytest.raises(ValidationError):
            KrausChannel(np.zeros((1, 2, 3)))

    def test_immutable(self):
        ch = identity_channel(2)
        with pytest.raises(ValueError):
            ch.kraus[0, 0, 0] = 2

    def test_dim_mismatch(self):
        with pytest.raises(ValidationError):
            apply(identity_channel(2), np.eye(3) / 3)

    def test_choi_matches_oracle(self, rng):
        for r in (1, 2, 4):
            ch = random_channel(3, r, seed=rng)
            assert np.allclose(choi_matrix(ch), choi_oracle(ch), atol=1e-12)


class TestApply:
    def test_identity(self, rng):
        rho = random_state(4, seed=rng)
        assert np.allclose(apply(identity_channel(4), rho), rho, atol=1e-14)

    def test_dephasing_diagonal_fixed(self):
        rho = np.diag([0.5, 0.3, 0.2])
        assert np.allclose(apply(dephasing(H001), rho), rho, atol=1e-14)

    def test_dephasing_witness(self):
        out = apply(dephasing(H001), witness_state())
        assert np.allclose(out, np.diag([0, 0.5, 0.5]), atol=1e-14)

    def test_output_valid(self, rng):
        for k in range(100):
            d = 2 + k % 4
            ch = random_channel(d, 1 + k % 3, seed=rng)
            out = apply(ch, random_state(d, seed=rng))
            validate_state(out)
            assert abs(np.trace(out) - 1) <= 1e-10


class TestDephasing:
    @pytest.mark.parametrize("rep", ["projectors", "phases"])
    def test_gibbs_fixed(self, rng, rep):
        h = rotated_h(rng, 3)
        g = gibbs(h, 0.8).matrix
        assert np.allclose(apply(dephasing(h, rep), g), g, atol=1e-12)

    def test_unital_and_idempotent(self, rng):
        h = rotated_h(rng, 4)
        ch = dephasing(h)
        assert is_unital(ch) and is_cptp(ch)
        rho = random_state(4, seed=rng)
        once = apply(ch, rho)
        assert np.abs(apply(ch, once) - once).max() <= 1e-12

    def test_projector_kraus(self):
        ch = dephasing(H012)
        assert len(ch) == 3
        assert all(np.linalg.matrix_rank(k) == 1 for k in ch.kraus)

    def test_representations_agree(self, rng):
        h = rotated_h(rng, 4)
        a, b = dephasing(h), dephasing(h, "phases")
        for _ in range(20):
            rho = random_state(4, seed=rng)
            assert np.allclose(apply(a, rho), apply(b, rho), atol=1e-12)

    def test_unknown_representation(self):
        with pytest.raises(ValidationError):
            dephasing(H2, "twirl")


class TestPartialDephasing:
    def test_all_ones_identity(self, rng):
        ch = partial_dephasing(H012, np.ones((3, 3)))
        rho = random_state(3, seed=rng)
        assert np.allclose(apply(ch, rho), rho, atol=1e-12)

    def test_identity_coeffs_is_dephasing(self, rng):
        ch = partial_dephasing(H012, np.eye(3))
        rho = random_state(3, seed=rng)
        assert np.allclose(apply(ch, rho), apply(dephasing(H012), rho), atol=1e-12)

    def test_qubit_half(self, rng):
        ch = partial_dephasing(H2, [[1, 0.5], [0.5, 1]])
        rho = random_state(2, seed=rng)
        out = apply(ch, rho)
        assert out[0, 1] == pytest.approx(0.5 * rho[0, 1], abs=1e-12)
        assert np.allclose(np.diag(out), np.diag(rho), atol=1e-12)
        assert np.linalg.eigvalsh(choi_oracle(ch)).min() >= -1e-10

    def test_gibbs_fixed(self):
        c = np.array([[1, 0.3, 0.1], [0.3, 1, 0.2], [0.1, 0.2, 1]])
        g = gibbs(H012, 1.3).matrix
        assert np.allclose(apply(partial_dephasing(H012, c), g), g, atol=1e-12)

    def test_non_psd_rejected(self):
        # |alpha| <= 1 entrywise but not PSD, so the Schur multiplier is not CP
        c = np.array([[1, 1, -1], [1, 1, 1], [-1, 1, 1]])
        with pytest.raises(ValidationError):
            partial_dephasing(H012, c)

    def test_bad_diagonal(self):
        with pytest.raises(ValidationError):
            partial_dephasing(H2, [[0.9, 0], [0, 1]])


class TestLambdaBeta:
    @pytest.mark.parametrize("beta", [0.0, 0.4, 1.0, 3.0])
    def test_incoherent_to_gibbs(self, rng, beta):
        ch = lambda_beta_map(H012, beta, coherent_gibbs(H012, beta))
        g = gibbs(H012, beta).matrix
        for _ in range(20):
            p = rng.dirichlet(np.ones(3))
            assert np.abs(apply(ch, np.diag(p)) - g).max() <= 1e-10

    def test_gibbs_to_gibbs(self):
        ch = lambda_beta_map(H012, 1.0, coherent_gibbs(H012, 1.0))
        g = gibbs(H012, 1.0).matrix
        for b in (0.0, 0.2, 5.0, math.inf):
            assert np.abs(apply(ch, gibbs(H012, b).matrix) - g).max() <= 1e-10

    def test_psi_branch(self):
        sp = coherent_gibbs(H012, 0.7)
        ch = lambda_beta_map(H012, 0.7, sp)
        psi = np.ones(3) / math.sqrt(3)
        assert np.allclose(apply(ch, proj(psi)), sp, atol=1e-12)

    def test_invalid_sigma_prime(self):
        # a pure excited state makes sigma negative at low temperature
        with pytest.raises(ValidationError):
            lambda_beta_map(H012, 3.0, np.diag([0.0, 0.0, 1.0]))

    def test_cptp_not_unital(self):
        ch = lambda_beta_map(H012, 1.0, coherent_gibbs(H012, 1.0))
        assert is_cptp(ch) and not is_unital(ch)

    def test_coherent_gibbs_always_admissible(self, rng):
        for _ in range(50):
            h = rotated_h(rng, 2 + int(rng.integers(4)))
            b = float(rng.uniform(0, 5))
            lambda_beta_map(h, b, coherent_gibbs(h, b))


class TestThermalizing:
    def test_constant(self, rng):
        ch = thermalizing(H012, 0.9)
        g = gibbs(H012, 0.9).matrix
        for _ in range(50):
            out = apply(ch, random_state(3, seed=rng))
            assert np.abs(out - g).max() <= 1e-10

    def test_free_energy_zero(self, rng):
        ch = thermalizing(H001, 1.4)
        for _ in range(50):
            assert free_energy(H001, apply(ch, random_state(3, seed=rng))) == pytest.approx(0, abs=1e-9)

    def test_completeness_and_not_unital(self):
        ch = thermalizing(H012, 2.0)
        assert completeness_error(ch) <= 1e-9
        assert not is_unital(ch)

    def test_negative_beta(self):
        with pytest.raises(ValidationError):
            thermalizing(H012, -1.0)


class TestUnitaries:
    def test_identity_unitary(self, rng):
        rho = random_state(3, seed=rng)
        assert np.allclose(apply(unitary_channel(np.eye(3)), rho), rho)

    def test_non_unitary_rejected(self):
        with pytest.raises(ValidationError):
            unitary_channel(np.array([[1, 1], [0, 1]]))

    def test_extraction_reaches_passive(self, rng):
        h = rotated_h(rng, 3)
        fam = extraction_family(h)
        for _ in range(20):
            rho = random_state(3, seed=rng)
            out = apply(fam, rho)
            assert np.abs(out - passive_rearrangement(h, rho).matrix).max() <= 1e-8
            assert energy(h, rho) - energy(h, out) == pytest.approx(ergotropy(h, rho), abs=1e-9)

    def test_swap_raises_ground_energy(self):
        out = apply(level_swap(H012), np.diag([1.0, 0, 0]))
        assert energy(H012, out) == pytest.approx(2.0)


class TestMixture:
    def test_single(self, rng):
        ch = random_channel(3, 2, seed=rng)
        m = mixture([ch], [1.0])
        rho = random_state(3, seed=rng)
        assert np.allclose(apply(m, rho), apply(ch, rho), atol=1e-14)

    def test_two_unitaries_unital(self, rng):
        us = [unitary_channel(random_unitary(3, seed=rng)) for _ in range(2)]
        assert is_unital(mixture(us, [0.5, 0.5]))

    def test_thermalizing_mixture_not_gibbs(self):
        m = mixture([thermalizing(H012, 0.5), thermalizing(H012, 2.0)], [0.5, 0.5])
        p = np.real(np.diag(apply(m, gibbs(H012, 1.0).matrix)))
        # a Gibbs state has equal log-ratios between equally spaced levels
        assert abs(math.log(p[0] / p[1]) - math.log(p[1] / p[2])) > 1e-3

    def test_bad_weights(self):
        ch = identity_channel(2)
        with pytest.raises(ValidationError):
            mixture([ch, ch], [0.5])
        with pytest.raises(ValidationError):
            mixture([ch, ch], [0.7, 0.7])
        with pytest.raises(ValidationError):
            mixture([ch, identity_channel(3)], [0.5, 0.5])


class TestThermalOperation:
    HE = Hamiltonian(np.array([0.0, 1.0]))

    def test_gibbs_preserved(self, rng):
        for seed in range(5):
            h = rotated_h(rng, 3)
            he = Hamiltonian(np.array([0.0, 0.5, 1.0]))
            g = gibbs(h, 0.8).matrix
            ch = thermal_operation(h, he, 0.8, seed=seed)
            assert np.abs(apply(ch, g) - g).max() <= 1e-8

    def test_resonant_gibbs_preserved(self):
        ch = thermal_operation(H012, self.HE, 1.2, seed=3)
        g = gibbs(H012, 1.2).matrix
        assert np.abs(apply(ch, g) - g).max() <= 1e-8

    def test_trivial_environment_energy_conserving_unitary(self, rng):
        ch = thermal_operation(H001, Hamiltonian(np.zeros(1)), 1.0, seed=1)
        assert len(ch) == 1
        u = ch.kraus[0]
        assert np.abs(u @ H001.matrix - H001.matrix @ u).max() <= 1e-12

    def test_dilation_conserves_energy(self, rng):
        u = thermal_dilation(H012, self.HE, seed=7)
        htot = np.kron(H012.matrix, np.eye(2)) + np.kron(np.eye(3), self.HE.matrix)
        assert np.abs(u @ htot - htot @ u).max() <= 1e-12
        for _ in range(20):
            rho = random_state(3, seed=rng)
            joint = kron_all(rho, gibbs(self.HE, 1.0).matrix)
            after = u @ joint @ u.conj().T
            e0 = np.trace(htot @ joint).real
            assert np.trace(htot @ after).real == pytest.approx(e0, abs=1e-9)

    def test_cptp(self):
        assert is_cptp(thermal_operation(H012, self.HE, 0.5, seed=0))

    def test_dimension_cap(self):
        with pytest.raises(ValidationError):
            thermal_operation(Hamiltonian(np.arange(9.0)), Hamiltonian(np.arange(8.0)), 1.0)

    def test_deterministic(self):
        a = thermal_operation(H012, self.HE, 1.0, seed=11)
        b = thermal_operation(H012, self.HE, 1.0, seed=11)
        assert np.array_equal(a.kraus, b.kraus)


class TestRandomChannel:
    @pytest.mark.parametrize("rank", [1, 2, 5])
    def test_valid(self, rank):
        ch = random_channel(4, rank, seed=rank)
        assert completeness_error(ch) <= 1e-9
        assert np.linalg.eigvalsh(choi_oracle(ch)).min() >= -1e-10

    def test_rank_one_unitary(self):
        u = random_channel(3, 1, seed=0).kraus[0]
        assert np.abs(u.conj().T @ u - np.eye(3)).max() <= 1e-12

    def test_deterministic(self):
        assert np.array_equal(random_channel(3, 2, seed=9).kraus, random_channel(3, 2, seed=9).kraus)

    def test_bad_rank(self):
        with pytest.raises(ValidationError):
            random_channel(3, 0)


class TestSelectiveOutcomes:
    def test_unitary_single(self, rng):
        outs = selective_outcomes(unitary_channel(random_unitary(3, seed=rng)), random_state(3, seed=rng))
        assert len(outs) == 1 and outs[0].probability == pytest.approx(1.0)

    def test_dephasing_maximally_mixed(self):
        outs = selective_outcomes(dephasing(H012), np.eye(3) / 3)
        assert len(outs) == 3
        assert all(o.probability == pytest.approx(1 / 3) for o in outs)

    def test_reconstruction(self, rng):
        for k in range(50):
            d = 2 + k % 4
            ch = random_channel(d, 1 + k % 4, seed=rng)
            rho = random_state(d, seed=rng)
            outs = selective_outcomes(ch, rho)
            assert sum(o.probability for o in outs) == pytest.approx(1, abs=1e-9)
            rec = sum(o.probability * o.state for o in outs)
            assert np.abs(rec - apply(ch, rho)).max() <= 1e-8

    def test_drops_null_outcomes(self):
        outs = selective_outcomes(dephasing(H012), np.diag([1.0, 0, 0]))
        assert len(outs) == 1


class TestUnital:
    def test_examples(self, rng):
        assert is_unital(dephasing(H012))
        assert not is_unital(thermalizing(H012, 1.0))
        assert is_unital(random_unital_channel(3, 4, seed=rng))

    def test_unital_lemma(self, rng):
        # passive energy cannot drop under a unital map
        for k in range(500):
            d = 2 + k % 4
            h = rotated_h(rng, d)
            ch = random_unital_channel(d, 1 + k % 4, seed=rng)
            rho = random_state(d, seed=rng)
            e_in = energy(h, passive_rearrangement(h, rho).matrix)
            e_out = energy(h, passive_rearrangement(h, apply(ch, rho)).matrix)
            assert e_out >= e_in - 1e-9

    def test_unital_energy_nonincreasing_contracts_ergotropy(self, rng):
        seen = 0
        for k in range(2000):
            d = 2 + k % 3
            h = rotated_h(rng, d)
            ch = random_unital_channel(d, 2, seed=rng)
            rho = random_state(d, seed=rng)
            out = apply(ch, rho)
            if energy(h, out) <= energy(h, rho):
                seen += 1
                assert ergotropy(h, out) <= ergotropy(h, rho) + 1e-9
        assert seen > 100


class TestFamilies:
    def test_family_resolves_per_state(self, rng):
        fam = lambda_beta_tilde_family(H012, 0.5)
        assert isinstance(fam, ChannelFamily)
        assert fam.label == "lambda_beta_tilde(offset=0.5)"
        a, b = random_state(3, seed=rng), random_state(3, seed=rng)
        # the channel picked for a differs from the one picked for b
        assert not np.allclose(apply(fam.resolve(a), b), apply(fam.resolve(b), b))

    def test_lambda_tilde_incoherent_to_gibbs(self):
        from ergokit.workfn import beta_of_state

        rho = np.diag([0.6, 0.3, 0.1])
        bt = beta_of_state(H012, rho).beta + 0.5
        assert np.abs(apply(lambda_beta_tilde_family(H012, 0.5), rho) - gibbs(H012, bt).matrix).max() <= 1e-10

    def test_negative_offset(self):
        with pytest.raises(ValidationError):
            lambda_beta_tilde_family(H012, -0.1)
