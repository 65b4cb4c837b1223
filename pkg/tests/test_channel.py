"""Channel Hamiltonians: potentials, envelopes, boundary closures,
self-adjointness, the conjugate-operator commutator, and the
representation identity on the grid."""
import numpy as np
import pytest

from adsdirac.algebra import ANGULAR, Channel, GAMMA, MASS, VELOCITY
from adsdirac.channel import (
    BoundaryCondition,
    ConfigurationError,
    assemble_hamiltonian,
    commutator_brute_force,
    commutator_closed_form,
    conjugate_apply,
    envelope_check,
    free_operator,
    mit_reflection,
    potentials_sads,
    potentials_tabulated,
    potentials_zero,
    reference_potentials,
    select_bc,
    smooth_cutoff,
    transform_consistency,
)
from adsdirac.geometry import make_params
from adsdirac.grids import gaussian_packet, make_grid

P_MIT = make_params(1.0, 1.0, 0.25)  # 2ml = 1/2 — bag-type wall
P_NAT = make_params(1.0, 1.0, 1.0)  # 2ml = 2   — no boundary data


class TestPotentials:
    def test_wall_limits_unit_l(self):
        pp = potentials_sads(P_MIT)
        assert pp.a_ang(-1e-4) == pytest.approx(1.0, abs=1e-7)
        assert 1e-4 * pp.b_mass(-1e-4) == pytest.approx(1.0, abs=1e-7)

    def test_horizon_decay_rate(self):
        # A(−30)/A(−29) ≈ e^{−κ} with κ = 2 for M = l = 1
        pp = potentials_sads(P_MIT)
        ratio = pp.a_ang(-30.0) / pp.a_ang(-29.0)
        assert ratio == pytest.approx(np.exp(-2.0), rel=0.05)

    def test_domain_error(self):
        pp = potentials_sads(P_MIT)
        with pytest.raises(ValueError):
            pp.a_ang(0.5)

    def test_zero_pair(self):
        pp = potentials_zero()
        x = -np.linspace(0.1, 5.0, 7)
        assert np.all(pp.a_ang(x) == 0.0)
        assert np.all(pp.b_mass(x) == 0.0)


class TestCutoffAndEnvelopes:
    def test_cutoff_plateaus(self):
        assert smooth_cutoff(-2.5) == 0.0
        assert smooth_cutoff(-0.5) == 1.0
        assert 0.0 < smooth_cutoff(-1.5) < 1.0

    def test_cutoff_monotone(self):
        x = np.linspace(-2.2, -0.8, 200)
        y = smooth_cutoff(x)
        assert np.all(np.diff(y) >= 0.0)

    def test_reference_pair_wall_and_deep(self):
        a0, b0 = reference_potentials(1.0)
        assert a0(-1e-3) == pytest.approx(1.0, rel=1e-12)
        assert b0(-1e-3) == pytest.approx(1000.0, rel=1e-12)
        assert a0(-2.5) == 0.0 and b0(-2.5) == 0.0

    def test_envelope_report(self):
        rep = envelope_check(potentials_sads(P_MIT), P_MIT)
        assert rep.passed
        assert rep.theta_fit >= 0.95 * rep.kappa
        assert rep.beta_fit >= 0.95 * rep.kappa
        # boundary envelopes with their analytic leading constants,
        # 1/(2l³) and 1/(6l)
        assert rep.boundary_quad_sup == pytest.approx(0.5, rel=0.01)
        assert rep.boundary_lin_sup == pytest.approx(1.0 / 6.0, rel=0.01)

    def test_mass_defect_small_near_wall(self):
        # |B − B₀| at x = −10⁻³ is linear-order small
        pp = potentials_sads(P_MIT)
        _, b0 = reference_potentials(1.0)
        assert abs(pp.b_mass(-1e-3) - b0(-1e-3)) <= 1e-2

    def test_envelope_rejects_override(self):
        with pytest.raises(ConfigurationError):
            envelope_check(potentials_zero(), P_MIT)


class TestBoundarySelection:
    @pytest.mark.parametrize("M", [0.3, 1.0, 4.0, 17.0])
    def test_depends_only_on_2ml(self, M):
        # same 2ml, wildly different black-hole masses
        assert select_bc(make_params(M, 2.0, 0.2)) == BoundaryCondition.MIT
        assert select_bc(make_params(M, 2.0, 0.25)) == BoundaryCondition.NATURAL

    def test_critical_product_uses_natural(self):
        assert select_bc(make_params(1.0, 1.0, 0.5)) == BoundaryCondition.NATURAL

    def test_reflection_matrix(self):
        s = mit_reflection()
        expected = np.zeros((4, 4))
        expected[0, 2] = expected[2, 0] = -1.0
        expected[1, 3] = expected[3, 1] = 1.0
        assert np.allclose(s, expected, atol=1e-14)
        g1 = VELOCITY.astype(complex)
        assert np.allclose(g1 @ s + s.conj().T @ g1, 0.0, atol=1e-14)

    def test_bc_mismatch_raises(self):
        g = make_grid(-10.0, 64)
        with pytest.raises(ConfigurationError):
            assemble_hamiltonian(
                Channel(0.5, 0.5), P_MIT, g, bc=BoundaryCondition.NATURAL
            )
        with pytest.raises(ConfigurationError):
            assemble_hamiltonian(Channel(0.5, 0.5), P_NAT, g, bc=BoundaryCondition.MIT)


class TestAssembly:
    def test_self_adjoint_mit(self):
        g = make_grid(-10.0, 128)
        op = assemble_hamiltonian(Channel(1.5, 0.5), P_MIT, g)
        assert op.hermiticity_defect(100) <= 1e-12

    def test_self_adjoint_natural(self):
        g = make_grid(-10.0, 128)
        op = assemble_hamiltonian(Channel(0.5, -0.5), P_NAT, g)
        assert op.hermiticity_defect(100) <= 1e-12

    def test_self_adjoint_graded(self):
        from adsdirac.grids import BoundaryGraded

        g = make_grid(-6.0, policy=BoundaryGraded(h_min=1e-3, ratio=1.08))
        op = assemble_hamiltonian(Channel(0.5, 0.5), P_MIT, g)
        assert op.hermiticity_defect(50) <= 1e-12

    def test_potential_blocks_entrywise(self):
        g = make_grid(-8.0, 64)
        ch = Channel(2.5, -1.5)
        op = assemble_hamiltonian(ch, P_MIT, g)
        dense = op.matrix.toarray()
        pp = potentials_sads(P_MIT)
        j = 20  # interior node: diagonal block is exactly the potential
        x = g.nodes[j]
        block = dense[4 * j : 4 * j + 4, 4 * j : 4 * j + 4]
        expected = ch.coupling * pp.a_ang(x) * ANGULAR - P_MIT.m * pp.b_mass(x) * MASS
        assert np.allclose(block, expected, atol=1e-14)

    def test_zero_override_equals_free_generator(self):
        g = make_grid(-10.0, 64)
        op = assemble_hamiltonian(
            Channel(0.5, 0.5), None, g, potentials_zero(), BoundaryCondition.MIT
        )
        assert (op.matrix != free_operator(g).matrix).nnz == 0

    def test_banded_node_major(self):
        g = make_grid(-10.0, 64)
        op = free_operator(g)
        coo = op.matrix.tocoo()
        assert np.max(np.abs(coo.row - coo.col)) <= 7

    def test_apply_matches_matvec(self):
        g = make_grid(-10.0, 64)
        op = assemble_hamiltonian(Channel(0.5, 0.5), P_MIT, g)
        rng = np.random.default_rng(2)
        v = rng.normal(size=(4, g.n)) + 1j * rng.normal(size=(4, g.n))
        direct = (op.matrix @ v.flatten(order="F")).reshape((4, g.n), order="F")
        assert np.allclose(op.apply(v), direct)


class TestConjugateOperator:
    def test_component_signs(self):
        g = make_grid(-5.0, 32)
        v = np.zeros((4, g.n), dtype=complex)
        v[0] = 1.0
        out = conjugate_apply(v, g)
        assert np.allclose(out[0], g.nodes)
        v = np.zeros((4, g.n), dtype=complex)
        v[1] = 1.0
        v[2] = 1.0
        out = conjugate_apply(v, g)
        assert np.allclose(out[1], -g.nodes)
        assert np.allclose(out[2], -g.nodes)

    def test_expectation_real(self):
        g = make_grid(-5.0, 64)
        rng = np.random.default_rng(9)
        for _ in range(5):
            v = rng.normal(size=(4, g.n)) + 1j * rng.normal(size=(4, g.n))
            val = g.inner(v, conjugate_apply(v, g))
            assert abs(val.imag) <= 1e-12 * abs(val.real)


class TestCommutator:
    def test_zero_potentials_give_identity(self):
        g = make_grid(-10.0, 64)
        op = free_operator(g)
        blocks = commutator_closed_form(op).blocks
        assert np.allclose(blocks, np.eye(4)[None, :, :], atol=1e-15)

    def test_self_adjoint(self):
        g = make_grid(-10.0, 128)
        op = assemble_hamiltonian(Channel(1.5, 0.5), P_MIT, g)
        assert commutator_closed_form(op).hermiticity_defect() <= 1e-14

    def test_deep_interior_near_identity(self):
        g = make_grid(-50.0, 512)
        op = assemble_hamiltonian(Channel(0.5, 0.5), P_MIT, g)
        blocks = commutator_closed_form(op).blocks
        j = int(np.argmin(np.abs(g.nodes + 40.0)))
        assert np.max(np.abs(blocks[j] - np.eye(4))) <= 1e-20

    def test_brute_force_second_order(self):
        errs = []
        for n in (256, 512, 1024):
            g = make_grid(-10.0, n)
            op = assemble_hamiltonian(Channel(1.5, 0.5), P_MIT, g)
            psi = gaussian_packet(g, -5.0, 0.5).values
            diff = commutator_closed_form(op).apply(psi) - commutator_brute_force(
                op, psi
            )
            errs.append(g.norm(diff))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.8)

    def test_brute_force_second_order_natural(self):
        errs = []
        for n in (256, 512, 1024):
            g = make_grid(-10.0, n)
            op = assemble_hamiltonian(Channel(0.5, 0.5), P_NAT, g)
            psi = gaussian_packet(g, -4.0, 0.4).values
            diff = commutator_closed_form(op).apply(psi) - commutator_brute_force(
                op, psi
            )
            errs.append(g.norm(diff))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.8)


class TestRepresentationIdentity:
    def test_residual_mit(self):
        g = make_grid(-10.0, 128)
        op = assemble_hamiltonian(Channel(1.5, 0.5), P_MIT, g)
        assert transform_consistency(op, n_fields=20) <= 1e-12

    def test_residual_natural(self):
        g = make_grid(-10.0, 128)
        op = assemble_hamiltonian(Channel(0.5, 0.5), P_NAT, g)
        assert transform_consistency(op, n_fields=20) <= 1e-12

    def test_residual_tabulated(self):
        g = make_grid(-6.0, 96)
        pp = potentials_tabulated(
            lambda x: np.exp(np.asarray(x)), lambda x: 1.0 / (1.0 + np.asarray(x) ** 2)
        )
        op = assemble_hamiltonian(Channel(2.5, 0.5), P_MIT, g, pp)
        assert transform_consistency(op, n_fields=10) <= 1e-12
