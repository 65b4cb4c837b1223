"""Unitary evolution against the closed-form comparison flow, plus
propagation-speed and boundary-trace behavior."""
import numpy as np
import pytest

from adsdirac.algebra import Channel
from adsdirac.channel import (
    ConfigurationError,
    assemble_hamiltonian,
    free_operator,
)
from adsdirac.dynamics import (
    BoundaryTrace,
    CayleyStepper,
    Direction,
    EvolutionConfig,
    boundary_trace,
    evolve,
    free_propagate,
)
from adsdirac.geometry import make_params
from adsdirac.grids import SpinorField, gaussian_packet, make_grid

P_MIT = make_params(1.0, 1.0, 0.25)
P_NAT = make_params(1.0, 1.0, 1.0)


def bump(y, center, width):
    return np.exp(-((y - center) ** 2) / (2.0 * width**2))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            EvolutionConfig(dt=-0.1, t_final=1.0)
        with pytest.raises(ConfigurationError):
            EvolutionConfig(dt=0.1, t_final=0.0)
        with pytest.raises(ConfigurationError):
            EvolutionConfig(dt=0.1, t_final=1.0, n_snapshots=0)

    def test_step_size_guard(self):
        g = make_grid(-10.0, 64)  # spacing 0.15625
        with pytest.raises(ConfigurationError):
            CayleyStepper(free_operator(g), dt=0.1)


class TestUnitarity:
    @pytest.mark.parametrize("params,ch", [(P_MIT, Channel(0.5, 0.5)), (P_NAT, Channel(1.5, -0.5))])
    def test_norm_preserved_T10(self, params, ch):
        g = make_grid(-10.0, 512)
        op = assemble_hamiltonian(ch, params, g)
        psi0 = gaussian_packet(g, -5.0, 0.6, components=(1.0, -0.5j, 0.25, 0.8))
        cfg = EvolutionConfig(dt=g.min_spacing / 2, t_final=10.0)
        traj = evolve(op, psi0, cfg)
        assert traj.norm_drift <= 1e-10

    def test_zero_field_stays_zero(self):
        g = make_grid(-10.0, 64)
        op = free_operator(g)
        psi0 = SpinorField(g, np.zeros((4, g.n), dtype=complex))
        traj = evolve(op, psi0, EvolutionConfig(dt=0.05, t_final=1.0))
        assert traj.final.norm() == 0.0

    def test_backward_inverts_forward(self):
        g = make_grid(-10.0, 256)
        op = assemble_hamiltonian(Channel(0.5, 0.5), P_MIT, g)
        psi0 = gaussian_packet(g, -5.0, 0.5)
        cfg = EvolutionConfig(dt=g.min_spacing / 2, t_final=2.0)
        there = evolve(op, psi0, cfg)
        back = evolve(op, there.final, cfg, Direction.BACKWARD)
        assert g.norm(back.final.values - psi0.values) <= 1e-9

    def test_grid_mismatch_rejected(self):
        op = free_operator(make_grid(-10.0, 64))
        psi0 = gaussian_packet(make_grid(-10.0, 128), -5.0, 0.5)
        with pytest.raises(ConfigurationError):
            evolve(op, psi0, EvolutionConfig(dt=0.01, t_final=1.0))

    def test_snapshot_layout(self):
        g = make_grid(-10.0, 64)
        op = free_operator(g)
        psi0 = gaussian_packet(g, -5.0, 0.5)
        traj = evolve(op, psi0, EvolutionConfig(dt=0.05, t_final=1.0, n_snapshots=5))
        assert traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(1.0)
        assert len(traj.fields) == len(traj.times) == 6


class TestFreeOracle:
    def test_worked_reflection_example(self):
        # (0, g, 0, 0) with g on (−3, −2), backward flow for t = 4:
        # everything lands in component 4 as g(−x−4), supported in (−2, −1).
        g = make_grid(-10.0, 2000)
        vals = np.zeros((4, g.n), dtype=complex)
        vals[1] = bump(g.nodes, -2.5, 0.08)
        psi = SpinorField(g, vals)
        out = free_propagate(psi, 4.0, Direction.BACKWARD)
        expected = bump(-g.nodes - 4.0, -2.5, 0.08)
        assert g.norm(np.vstack([out.values[:3], out.values[3] - expected])) <= 1e-10
        assert out.mass_in(-2.0, -1.0) == pytest.approx(out.norm() ** 2, rel=1e-6)

    def test_group_property(self):
        g = make_grid(-10.0, 2000)
        psi = gaussian_packet(g, -4.0, 0.4, components=(1.0, 0.5, -0.25j, 0.3))
        two_hops = free_propagate(
            free_propagate(psi, 1.7, Direction.FORWARD), 2.3, Direction.FORWARD
        )
        one_hop = free_propagate(psi, 4.0, Direction.FORWARD)
        assert g.norm(two_hops.values - one_hop.values) <= 1e-8

    def test_norm_preserved(self):
        g = make_grid(-10.0, 2000)
        psi = gaussian_packet(g, -4.0, 0.4, components=(1.0, 0.0, 0.5, 0.0))
        out = free_propagate(psi, 3.2, Direction.FORWARD)
        assert out.norm() == pytest.approx(1.0, abs=1e-6)

    def test_pair_masses_conserved(self):
        g = make_grid(-10.0, 2000)
        psi = gaussian_packet(g, -4.0, 0.4, components=(1.0, 0.5j, -0.2, 0.1))
        p13, p24 = psi.pair_masses()
        out = free_propagate(psi, 2.6, Direction.FORWARD)
        q13, q24 = out.pair_masses()
        assert q13 == pytest.approx(p13, abs=1e-8)
        assert q24 == pytest.approx(p24, abs=1e-8)

    def test_evolve_matches_oracle_second_order(self):
        errs = []
        for n in (512, 1024, 2048):
            g = make_grid(-8.0, n)
            op = free_operator(g)
            psi0 = gaussian_packet(g, -3.0, 0.5)
            traj = evolve(op, psi0, EvolutionConfig(dt=4.0 / n, t_final=5.0))
            exact = free_propagate(psi0, 5.0, Direction.FORWARD)
            errs.append(g.norm(traj.final.values - exact.values))
        orders = np.log2(np.asarray(errs[:-1]) / np.asarray(errs[1:]))
        assert errs[-1] <= 1e-3
        assert np.all(orders >= 1.8)

    def test_backward_evolve_matches_oracle(self):
        g = make_grid(-8.0, 1024)
        op = free_operator(g)
        psi0 = gaussian_packet(g, -3.0, 0.5, components=(0.0, 1.0, 0.0, 0.0))
        traj = evolve(op, psi0, EvolutionConfig(dt=4.0 / 1024, t_final=3.0), Direction.BACKWARD)
        exact = free_propagate(psi0, 3.0, Direction.BACKWARD)
        assert g.norm(traj.final.values - exact.values) <= 2e-3


class TestPropagationSpeed:
    def test_light_cone_containment(self):
        # support [a, b] = [−6.5, −5.5]; after t the mass outside the
        # fattened cone [a − 1.1t, b + 1.1t] stays ≤ 1e−6 of the total.
        g = make_grid(-16.0, 1024)
        op = assemble_hamiltonian(Channel(0.5, 0.5), P_MIT, g)
        psi0 = gaussian_packet(g, -6.0, 0.12, components=(1.0, 0.0, -1.0, 0.5))
        # truncate the tails so the support claim is honest
        vals = psi0.values.copy()
        vals[:, (g.nodes < -6.5) | (g.nodes > -5.5)] = 0.0
        psi0 = SpinorField(g, vals)
        t = 3.0
        traj = evolve(op, psi0, EvolutionConfig(dt=g.min_spacing / 2, t_final=t))
        lo, hi = -6.5 - 1.1 * t, min(0.0, -5.5 + 1.1 * t)
        inside = traj.final.mass_in(lo, hi)
        total = traj.final.norm() ** 2
        assert (total - inside) / total <= 1e-6


class TestBoundaryTrace:
    def test_kernel_field_zero_residual(self):
        g = make_grid(-5.0, 64)
        vals = np.zeros((4, g.n), dtype=complex)
        vals[0] = 1.0
        vals[2] = -1.0  # ψ₃ = −ψ₁ and ψ₂ = ψ₄ = 0: in ker(γ¹+i)
        tr = boundary_trace(SpinorField(g, vals))
        assert tr.mit_residual <= 1e-14

    def test_free_solution_wall_coupling(self):
        # right-moving bump arrives at the wall at t = 2.5: the trace obeys
        # φ₁(0) = −φ₃(0) mid-reflection.
        g = make_grid(-10.0, 4000)
        vals = np.zeros((4, g.n), dtype=complex)
        vals[0] = bump(g.nodes, -2.5, 0.2)
        out = free_propagate(SpinorField(g, vals), 2.5, Direction.FORWARD)
        tr = boundary_trace(out)
        assert abs(tr.values[0] + tr.values[2]) <= 1e-4
        assert abs(tr.values[0]) > 0.5  # the bump really is at the wall

    def test_interior_bump_traces_vanish(self):
        g = make_grid(-10.0, 512)
        psi = gaussian_packet(g, -5.0, 0.3, components=(1.0, 1.0, 1.0, 1.0))
        tr = boundary_trace(psi)
        assert np.max(np.abs(tr.values)) <= 1e-12
        assert tr.mit_residual <= 1e-10
        assert isinstance(tr, BoundaryTrace)
