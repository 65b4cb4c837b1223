"""Wave operators, velocity-cutoff diagnostics, and the asymptotic velocity.

Wave operators are estimated hybrid-fashion: the interacting factor is the
discrete unitary flow, while the comparison factor e^{±itH_c} is applied in
exact closed form (``free_factor="exact"``), so only one factor carries
discretization error.  Passing ``free_factor="discrete"`` replaces the
closed form by backward Cayley stepping under the assembled free generator;
since the backward Cayley step is the exact algebraic inverse of the
forward one, the zero-potential composition then collapses to the identity
at solver rounding — the trivial oracle for the whole pipeline.

Convergence of Ω_k φ = e^{+it_kH_c} e^{−it_kH} φ along a geometric schedule
is judged by the Cauchy increments ‖Ω_{k+1}φ − Ω_kφ‖: "converged" means the
last three increments decrease monotonically and the final one is at most
1e−2·‖φ‖ (a deliberately conservative engineering threshold — existence of
the limit carries no rate).

The conjugate observable 𝒜/t is pointwise multiplication by Γ¹x/t, so the
functional calculus J(𝒜/t) is pointwise evaluation of J at ±x/t per
component.  Cutoffs are C² quintic steps with explicit support metadata.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .algebra import Channel, VELOCITY
from .channel import ChannelOperator, ConfigurationError, free_operator
from .dynamics import Direction, EvolutionConfig, NumericError, evolve, free_propagate
from .grids import SpinorField

__all__ = [
    "ScatteringReport",
    "wave_operator_forward",
    "wave_operator_backward",
    "adjointness_residual",
    "CutoffSpec",
    "quintic_step",
    "minimal_velocity_cutoff",
    "maximal_velocity_cutoff",
    "constant_cutoff",
    "VelocityTrace",
    "velocity_trace",
    "VelocityReport",
    "velocity_report",
    "cone_mass_fraction",
    "AsymptoticVelocity",
    "asymptotic_velocity",
    "MultichannelReport",
    "multichannel_scatter",
    "channel_weights",
]

_CONVERGED_FRACTION = 1e-2  # final increment vs ‖φ‖; engineering choice
_ROUNDING_FLOOR = 1e-9  # below this (relative) the tail is solver noise


# ------------------------------------------------------------ wave operators

@dataclass
class ScatteringReport:
    """One wave-operator estimate along a geometric schedule."""

    channel: Channel
    times: np.ndarray
    increments: np.ndarray
    limit: SpinorField
    input_norm: float
    limit_norm: float
    converged: bool
    convergence_failure: bool
    adjoint_residual: Optional[float] = None

    @property
    def final_increment(self) -> float:
        return float(self.increments[-1])


def _verdict(increments: np.ndarray, input_norm: float) -> bool:
    # Converged: the last three increments decrease monotonically and the
    # final one is ≤ 1e−2·‖φ‖.  A tail already at the solver's rounding
    # floor counts as converged — monotonicity is meaningless in noise.
    tail = increments[-3:]
    monotone = bool(np.all(np.diff(tail) < 0.0)) if tail.size >= 2 else True
    at_floor = bool(np.max(tail) <= _ROUNDING_FLOOR * input_norm)
    small = bool(increments[-1] <= _CONVERGED_FRACTION * input_norm)
    return small and (monotone or at_floor)


def _check_schedule(schedule: Sequence[float]):
    t = np.asarray(schedule, dtype=float)
    if t.size < 3 or np.any(np.diff(t) <= 0) or np.any(t <= 0):
        raise ConfigurationError("schedule must be at least 3 increasing positive times")
    return t


def _free_backward(op: ChannelOperator, psi: SpinorField, t: float, free_factor: str):
    if free_factor == "exact":
        return free_propagate(psi, t, Direction.BACKWARD)
    h_c = free_operator(op.grid)
    cfg = EvolutionConfig(dt=op.grid.min_spacing / 2, t_final=t)
    return evolve(h_c, psi, cfg, Direction.BACKWARD).final


def _free_forward(op: ChannelOperator, psi: SpinorField, t: float, free_factor: str):
    if free_factor == "exact":
        return free_propagate(psi, t, Direction.FORWARD)
    h_c = free_operator(op.grid)
    cfg = EvolutionConfig(dt=op.grid.min_spacing / 2, t_final=t)
    return evolve(h_c, psi, cfg, Direction.FORWARD).final


def wave_operator_forward(
    phi: SpinorField,
    op: ChannelOperator,
    schedule: Sequence[float],
    free_factor: str = "exact",
) -> ScatteringReport:
    """Ω_k φ = e^{+it_kH_c} e^{−it_kH} φ along the schedule.

    The interacting evolution runs once with snapshots at the schedule
    times; each snapshot is pulled back by the free flow.
    """
    times = _check_schedule(schedule)
    cfg = EvolutionConfig(
        dt=op.grid.min_spacing / 2, t_final=float(times[-1]), snapshot_times=times
    )
    traj = evolve(op, phi, cfg)
    omegas = [
        _free_backward(op, f, t, free_factor)
        for t, f in zip(traj.times[1:], traj.fields[1:])
    ]
    increments = np.array(
        [
            op.grid.norm(b.values - a.values)
            for a, b in zip(omegas[:-1], omegas[1:])
        ]
    )
    nrm = phi.norm()
    converged = _verdict(increments, nrm)
    return ScatteringReport(
        channel=op.channel,
        times=np.asarray(traj.times[1:]),
        increments=increments,
        limit=omegas[-1],
        input_norm=nrm,
        limit_norm=omegas[-1].norm(),
        converged=converged,
        convergence_failure=not converged,
    )


def wave_operator_backward(
    psi: SpinorField,
    op: ChannelOperator,
    schedule: Sequence[float],
    free_factor: str = "exact",
) -> ScatteringReport:
    """W_k ψ = e^{+it_kH} e^{−it_kH_c} ψ along the schedule.

    Mirror of the forward operator: the free factor is exact, the
    interacting factor is the discrete backward flow (one run per t_k —
    the inputs differ, so nothing can be shared)."""
    times = _check_schedule(schedule)
    outs: List[SpinorField] = []
    for t in times:
        zeta = _free_forward(op, psi, float(t), free_factor)
        cfg = EvolutionConfig(dt=op.grid.min_spacing / 2, t_final=float(t))
        outs.append(evolve(op, zeta, cfg, Direction.BACKWARD).final)
    increments = np.array(
        [op.grid.norm(b.values - a.values) for a, b in zip(outs[:-1], outs[1:])]
    )
    nrm = psi.norm()
    converged = _verdict(increments, nrm)
    return ScatteringReport(
        channel=op.channel,
        times=times,
        increments=increments,
        limit=outs[-1],
        input_norm=nrm,
        limit_norm=outs[-1].norm(),
        converged=converged,
        convergence_failure=not converged,
    )


def adjointness_residual(
    forward: ScatteringReport,
    backward: ScatteringReport,
    phi: SpinorField,
    psi: SpinorField,
) -> float:
    """|⟨Ωφ, ψ⟩ − ⟨φ, Wψ⟩|, the finite-time adjoint-pairing defect."""
    lhs = forward.limit.inner(psi)
    rhs = phi.inner(backward.limit)
    return float(abs(lhs - rhs))


# ---------------------------------------------------------- velocity cutoffs

def quintic_step(t):
    """C² monotone step: 0 for t ≤ 0, 1 for t ≥ 1, 10t³ − 15t⁴ + 6t⁵ between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


@dataclass(frozen=True)
class CutoffSpec:
    """Named cutoff with support metadata (nonzero strictly inside)."""

    name: str
    fn: Callable
    support_lo: float
    support_hi: float


def minimal_velocity_cutoff(delta: float) -> CutoffSpec:
    """≡1 below 1−2δ, C²-decays to 0 across [1−2δ, 1−δ]; support ⊂ (−∞, 1−δ)."""
    if not (0 < delta < 0.5):
        raise ConfigurationError("need 0 < delta < 1/2")
    lo, hi = 1.0 - 2.0 * delta, 1.0 - delta

    def fn(v):
        return 1.0 - quintic_step((np.asarray(v, dtype=float) - lo) / (hi - lo))

    return CutoffSpec(name=f"minimal(delta={delta})", fn=fn, support_lo=-np.inf, support_hi=hi)


def maximal_velocity_cutoff(eps: float) -> CutoffSpec:
    """0 below 1+ε, C²-grows to 1 across [1+ε, 1+2ε]; support ⊂ (1+ε, ∞)."""
    if not (eps > 0):
        raise ConfigurationError("need eps > 0")
    lo, hi = 1.0 + eps, 1.0 + 2.0 * eps

    def fn(v):
        return quintic_step((np.asarray(v, dtype=float) - lo) / (hi - lo))

    return CutoffSpec(name=f"maximal(eps={eps})", fn=fn, support_lo=lo, support_hi=np.inf)


def constant_cutoff() -> CutoffSpec:
    return CutoffSpec(
        name="one",
        fn=lambda v: np.ones_like(np.asarray(v, dtype=float)),
        support_lo=-np.inf,
        support_hi=np.inf,
    )


def _cutoff_expectation(field: SpinorField, t: float, cutoff: CutoffSpec) -> float:
    """⟨ψ, J(𝒜/t)ψ⟩ — pointwise since 𝒜/t multiplies component k by Γ¹_kk·x/t."""
    signs = np.diag(VELOCITY)
    x = field.grid.nodes
    w = field.grid.weights
    total = 0.0
    for c in range(4):
        total += float(
            np.sum(w * cutoff.fn(signs[c] * x / t) * np.abs(field.values[c]) ** 2)
        )
    return total


def cone_mass_fraction(field: SpinorField, t: float, delta: float = 0.25) -> float:
    """Mass fraction with the velocity observable Γ¹x/t inside [1−δ, 1+δ]."""
    signs = np.diag(VELOCITY)
    x = field.grid.nodes
    w = field.grid.weights
    total, inside = 0.0, 0.0
    for c in range(4):
        dens = w * np.abs(field.values[c]) ** 2
        arg = signs[c] * x / t
        total += float(np.sum(dens))
        inside += float(np.sum(dens[(arg >= 1.0 - delta) & (arg <= 1.0 + delta)]))
    return inside / total if total > 0 else 0.0


@dataclass
class VelocityTrace:
    times: np.ndarray
    values: np.ndarray  # ⟨ψ(t), J(𝒜/t) ψ(t)⟩
    cone_fractions: np.ndarray  # sliding-window mass fractions, δ = 0.25
    cutoff: CutoffSpec
    norm_sq: float


def _fields_at_times(
    phi: SpinorField, times: np.ndarray, op: Optional[ChannelOperator]
) -> List[SpinorField]:
    if op is None:
        return [free_propagate(phi, float(t), Direction.FORWARD) for t in times]
    cfg = EvolutionConfig(
        dt=op.grid.min_spacing / 2, t_final=float(times[-1]), snapshot_times=times
    )
    traj = evolve(op, phi, cfg)
    # snapshot snapping keeps |t_snap − t| ≤ dt/2; pair by nearest
    out = []
    for t in times:
        k = int(np.argmin(np.abs(np.asarray(traj.times) - t)))
        out.append(traj.fields[k])
    return out


def velocity_trace(
    phi: SpinorField,
    times: Sequence[float],
    cutoff: CutoffSpec,
    op: Optional[ChannelOperator] = None,
) -> VelocityTrace:
    """Trace t ↦ ⟨ψ(t), J(𝒜/t)ψ(t)⟩ under the discrete flow of ``op``
    (or the exact free flow when ``op`` is None), plus the sliding-cone
    mass fractions."""
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ConfigurationError("times must be positive and increasing")
    fields = _fields_at_times(phi, times, op)
    values = np.array([_cutoff_expectation(f, float(t), cutoff) for t, f in zip(times, fields)])
    cones = np.array([cone_mass_fraction(f, float(t)) for t, f in zip(times, fields)])
    return VelocityTrace(
        times=times,
        values=values,
        cone_fractions=cones,
        cutoff=cutoff,
        norm_sq=phi.norm() ** 2,
    )


@dataclass
class VelocityReport:
    """Everything the velocity diagnostics measure, from one evolution."""

    times: np.ndarray
    minimal_values: np.ndarray
    maximal_values: np.ndarray
    unit_values: np.ndarray  # J ≡ 1 trace; equals ‖ψ(t)‖² identically
    cone_fractions: np.ndarray
    v_values: np.ndarray
    v_extrapolated: float
    minimal_cutoff: CutoffSpec
    maximal_cutoff: CutoffSpec
    cone_delta: float


def _mean_velocity(field: SpinorField, t: float) -> float:
    mass = field.norm() ** 2
    if mass < 1e-8:
        raise NumericError(
            "state mass vanished while tracing the velocity — content has "
            "left the grid; extend x_min past the largest trace time",
            {"t": t, "mass": mass, "x_min": field.grid.x_min},
        )
    signs = np.diag(VELOCITY)
    acc = 0.0
    for c in range(4):
        acc += float(
            np.sum(field.grid.weights * (signs[c] * field.grid.nodes / t) * np.abs(field.values[c]) ** 2)
        )
    return acc / mass


def velocity_report(
    phi: SpinorField,
    times: Sequence[float],
    op: Optional[ChannelOperator] = None,
    delta: float = 0.2,
    eps: float = 0.2,
    cone_delta: float = 0.25,
) -> VelocityReport:
    """Minimal/maximal cutoff traces, cone mass fractions, and the mean
    velocity with its Richardson limit — all from a single evolution."""
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ConfigurationError("times must be positive and increasing")
    nrm = phi.norm()
    if nrm == 0:
        raise ConfigurationError("cannot trace the zero field")
    phi = SpinorField(phi.grid, phi.values / nrm)
    j_min = minimal_velocity_cutoff(delta)
    j_max = maximal_velocity_cutoff(eps)
    j_one = constant_cutoff()
    fields = _fields_at_times(phi, times, op)
    ts = [float(t) for t in times]
    v_vals = np.array([_mean_velocity(f, t) for t, f in zip(ts, fields)])
    t1, t2 = times[-2], times[-1]
    v1, v2 = v_vals[-2], v_vals[-1]
    return VelocityReport(
        times=times,
        minimal_values=np.array([_cutoff_expectation(f, t, j_min) for t, f in zip(ts, fields)]),
        maximal_values=np.array([_cutoff_expectation(f, t, j_max) for t, f in zip(ts, fields)]),
        unit_values=np.array([_cutoff_expectation(f, t, j_one) for t, f in zip(ts, fields)]),
        cone_fractions=np.array([cone_mass_fraction(f, t, cone_delta) for t, f in zip(ts, fields)]),
        v_values=v_vals,
        v_extrapolated=float((v2 * t2 - v1 * t1) / (t2 - t1)),
        minimal_cutoff=j_min,
        maximal_cutoff=j_max,
        cone_delta=cone_delta,
    )


@dataclass
class AsymptoticVelocity:
    times: np.ndarray
    values: np.ndarray  # v(t) = ⟨ψ(t), (𝒜/t) ψ(t)⟩
    extrapolated: float  # 2-point Richardson in 1/t from the last two times


def asymptotic_velocity(
    phi: SpinorField,
    times: Sequence[float],
    op: Optional[ChannelOperator] = None,
) -> AsymptoticVelocity:
    """⟨𝒜/t⟩ along the flow and its Richardson limit (exact free flow when
    ``op`` is None).  The input is normalized internally, so v(t) is a mean
    velocity; the expected limit is 1."""
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ConfigurationError("times must be positive and increasing")
    nrm = phi.norm()
    if nrm == 0:
        raise ConfigurationError("cannot trace the zero field")
    phi = SpinorField(phi.grid, phi.values / nrm)
    fields = _fields_at_times(phi, times, op)
    vals = np.array([_mean_velocity(f, float(t)) for t, f in zip(times, fields)])
    t1, t2 = times[-2], times[-1]
    v1, v2 = vals[-2], vals[-1]
    extrapolated = float((v2 * t2 - v1 * t1) / (t2 - t1))
    return AsymptoticVelocity(times=times, values=vals, extrapolated=extrapolated)


# ------------------------------------------------------------- multichannel

def channel_weights(channels: Sequence[Channel]) -> np.ndarray:
    """Square-summable weights (s+1/2)^{−2} used for channel aggregation."""
    return np.array([ch.coupling ** (-2.0) for ch in channels])


@dataclass
class MultichannelReport:
    reports: List[ScatteringReport]
    weights: np.ndarray
    aggregate_increments: np.ndarray  # weighted root-sum-square per time gap
    converged: bool


def multichannel_scatter(
    phi: SpinorField,
    operators: Sequence[ChannelOperator],
    schedule: Sequence[float],
    weights: Optional[Sequence[float]] = None,
) -> MultichannelReport:
    """Independent per-channel wave operators with aggregated increments.

    Aggregate increment at each time gap: √(Σ_ch (w_ch·c_ch)²).  Any
    channel's convergence failure makes the aggregate fail."""
    if weights is None:
        weights = channel_weights([op.channel for op in operators])
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(operators),):
        raise ConfigurationError("one weight per channel required")
    reports = [wave_operator_forward(phi, op, schedule) for op in operators]
    stacked = np.stack([r.increments for r in reports])
    aggregate = np.sqrt(np.sum((weights[:, None] * stacked) ** 2, axis=0))
    return MultichannelReport(
        reports=reports,
        weights=weights,
        aggregate_increments=aggregate,
        converged=bool(all(r.converged for r in reports)),
    )
