"""Phase-space simulation of the joint sensor-oscillator state.

The density operator is stored as four phase-space functions over the
oscillator quadratures (mu, nu):

    rho = W_uu |up><up| + W_ud |up><down| + W_du |down><up| + W_dd |down><down|

The diagonal blocks are real; W_du is the conjugate of W_ud, so only one
off-diagonal array is kept.  During a drive pulse the blocks obey four
coupled equations: the drive mixes them locally (a 2x2 commutator at every
phase-space point, with the position-dependent sensor detuning appearing as
a local phase on the off-diagonal block), the position coupling advects the
diagonal blocks along the momentum axis at -+ g/2, and the thermal bath
contributes a drift-plus-diffusion term

    D[W] = [gamma/2 (d_mu mu + d_nu nu)
            + gamma/2 (nbar + 1/2) (d^2_mu + d^2_nu)] W.

The integrator Strang-splits these three pieces.  The local 2x2 step uses
the exact matrix exponential of the midpoint-averaged Hamiltonian (the
drive area over each substep is taken in closed form, so the total pulse
area is exact at any step size).  Advection is a spectral shift, exact for
states that stay clear of the grid edges; consecutive local substeps fuse
into a single 2x2 product, halving the pointwise work.  Diffusion is a
spectral multiplier (exact); the drift is integrated as the spectral
divergence of the flux (mu W, nu W), which conserves the discrete trace
identically.  Both splitting errors are second order in the step.

Free harmonic rotation is never integrated: protocol steps are much faster
than the trap period, and the quarter rotation between the two measurement
phases is the exact index remap W'(mu, nu) = W(-nu, mu) (new position = old
momentum), optionally preceded by the dissipator acting for the quarter
period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bayes import GridDistribution
from .pulses import PulseSpec

__all__ = [
    "BlockWigner",
    "StepPolicy",
    "GridTooSmallError",
    "SupportOffGridError",
    "make_axis",
    "init_thermal",
    "evolve_pulse",
    "free_evolve",
    "hard_pi_flip",
    "quarter_rotation",
    "readout_and_collapse",
    "reset_tls",
    "displace",
    "gs_fidelity",
    "position_marginal",
    "purity",
    "apply_dissipator",
]

TRACE_TOL = 1e-4
DEFAULT_POINTS = 1024
DEFAULT_MARGIN = 10.0


class GridTooSmallError(ValueError):
    """The phase-space grid cannot hold the requested state."""


class SupportOffGridError(ValueError):
    """An operation would move significant mass off the grid."""


@dataclass
class StepPolicy:
    """Step-size policy for pulse integration.

    ``steps_per_sigma`` substeps per envelope width inside the active drive
    window (center +- ``active_window`` envelope widths); the nearly
    drive-free wings are advanced in one exact step each.  The dissipator,
    when active, is applied every ``dissipation_stride`` substeps.
    """

    steps_per_sigma: int = 8
    active_window: float = 4.5
    dissipation_stride: int = 16
    drift_substep: float = 0.05   # max damping-rate * substep in the dissipator


@dataclass
class BlockWigner:
    """Joint sensor-oscillator state on a square phase-space grid.

    ``axis`` is shared by both quadratures; arrays are indexed
    ``[i_mu, i_nu]``.  ``up_down`` holds W_ud; W_du is its conjugate.
    """

    axis: np.ndarray
    up_up: np.ndarray
    down_down: np.ndarray
    up_down: np.ndarray
    coupling: float = 1.0
    damping: float = 0.0
    bath_occupation: float = 0.0

    @property
    def spacing(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def cell(self) -> float:
        return self.spacing**2

    def trace(self) -> float:
        return float((self.up_up.sum() + self.down_down.sum()) * self.cell)

    def spin_up_population(self) -> float:
        return float(self.up_up.sum() * self.cell)

    def coherence_norm(self) -> float:
        return float(np.abs(self.up_down).max())

    def copy(self) -> "BlockWigner":
        return BlockWigner(self.axis, self.up_up.copy(), self.down_down.copy(),
                           self.up_down.copy(), self.coupling, self.damping,
                           self.bath_occupation)

    def total(self) -> np.ndarray:
        """Spin-traced phase-space function."""
        return self.up_up + self.down_down

    def moments(self) -> dict[str, float]:
        w = self.total()
        tr = w.sum()
        mu = self.axis[:, None]
        nu = self.axis[None, :]
        m_mu = float((w * mu).sum() / tr)
        m_nu = float((w * nu).sum() / tr)
        v_mu = float((w * (mu - m_mu) ** 2).sum() / tr)
        v_nu = float((w * (nu - m_nu) ** 2).sum() / tr)
        return {"mean_mu": m_mu, "mean_nu": m_nu, "var_mu": v_mu, "var_nu": v_nu}


def make_axis(nbar: float, points: int = DEFAULT_POINTS,
              margin: float = DEFAULT_MARGIN) -> np.ndarray:
    """Symmetric grid axis covering 6 thermal widths plus a margin."""
    half = 6 * math.sqrt(nbar + 0.5) + margin
    return (np.arange(points) - points // 2) * (2 * half / points)


def init_thermal(nbar: float, axis: np.ndarray | None = None,
                 points: int = DEFAULT_POINTS, coupling: float = 1.0,
                 damping: float = 0.0, bath_occupation: float | None = None
                 ) -> BlockWigner:
    """Thermal oscillator (variance nbar + 1/2 per quadrature), sensor down."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    if axis is None:
        axis = make_axis(nbar, points)
    half_extent = float(-axis[0])
    if half_extent < 6 * math.sqrt(nbar + 0.5):
        raise GridTooSmallError(
            f"grid half-extent {half_extent:.1f} is below 6 thermal widths")
    var = nbar + 0.5
    mu = axis[:, None]
    nu = axis[None, :]
    dn = np.exp(-(mu**2 + nu**2) / (2 * var)) / (2 * math.pi * var)
    spacing = float(axis[1] - axis[0])
    dn /= dn.sum() * spacing**2
    zeros = np.zeros_like(dn)
    return BlockWigner(axis=np.asarray(axis, dtype=float), up_up=zeros.copy(),
                       down_down=dn, up_down=zeros.astype(complex),
                       coupling=coupling, damping=damping,
                       bath_occupation=nbar if bath_occupation is None
                       else bath_occupation)


# ---------------------------------------------------------------------------
# elementary steps
# ---------------------------------------------------------------------------

def _wavenumbers(axis: np.ndarray) -> np.ndarray:
    return 2 * math.pi * np.fft.rfftfreq(axis.size, float(axis[1] - axis[0]))


_TAPER_CACHE: dict[int, np.ndarray] = {}


def _edge_taper(n: int) -> np.ndarray:
    """Absorbing cos^2 taper over the outer cells, exactly 1 in the interior.

    Spectral translations are periodic, so mass that reaches a grid edge
    would otherwise wrap around to the opposite side; the taper absorbs it
    instead, which the trace guard then reports.
    """
    if n not in _TAPER_CACHE:
        width = max(4, n // 32)
        mask = np.ones(n)
        ramp = np.sin(np.linspace(0.0, math.pi / 2, width)) ** 2
        mask[:width] = ramp
        mask[-width:] = ramp[::-1]
        _TAPER_CACHE[n] = mask
    return _TAPER_CACHE[n]


def _absorb_edges(state: BlockWigner) -> BlockWigner:
    mask = _edge_taper(state.axis.size)
    window = mask[:, None] * mask[None, :]
    return replace(state, up_up=state.up_up * window,
                   down_down=state.down_down * window,
                   up_down=state.up_down * window)


def _shift_along_nu(arr: np.ndarray, shift: float, k: np.ndarray) -> np.ndarray:
    """Spectral translation arr(mu, nu) -> arr(mu, nu - shift)."""
    spec = np.fft.rfft(arr, axis=1)
    spec *= np.exp(-1j * k[None, :] * shift)
    return np.fft.irfft(spec, n=arr.shape[1], axis=1)


def _local_unitary(detuning: np.ndarray, drive_area: float, dt: float
                   ) -> tuple[np.ndarray, np.ndarray]:
    """exp(-i [detuning sz/2 + (area/dt) sx/2] dt) as (u11, u12) columns.

    u21 = u12 and u22 = conj(u11) because the Hamiltonian is real symmetric.
    """
    a = 0.5 * detuning * dt
    b = 0.5 * drive_area
    phi = np.sqrt(a**2 + b**2)
    cos = np.cos(phi)
    sinc = np.where(phi > 0, np.sin(phi) / np.where(phi > 0, phi, 1.0), 1.0)
    return cos - 1j * sinc * a, -1j * sinc * b + 0.0j


def _conjugate_blocks(up_up, down_down, up_down, m11, m12, m21, m22):
    """W -> M W M^dagger with a (possibly non-symmetric) 2x2 per mu column."""
    cc = np.conj(up_down)
    w11 = m11 * up_up + m12 * cc
    w12 = m11 * up_down + m12 * down_down
    w21 = m21 * up_up + m22 * cc
    w22 = m21 * up_down + m22 * down_down
    new_uu = (w11 * np.conj(m11) + w12 * np.conj(m12)).real
    new_ud = w11 * np.conj(m21) + w12 * np.conj(m22)
    new_dd = (w21 * np.conj(m21) + w22 * np.conj(m22)).real
    return new_uu, new_dd, new_ud


def _drift_rhs(w: np.ndarray, lam: float, axis: np.ndarray,
               k_mu: np.ndarray, k_nu: np.ndarray) -> np.ndarray:
    """lam * [d_mu(mu w) + d_nu(nu w)] with spectral flux derivatives."""
    mu = axis[:, None]
    nu = axis[None, :]
    flux_mu = np.fft.irfft(1j * k_mu[:, None] * np.fft.rfft(mu * w.real, axis=0),
                           n=axis.size, axis=0)
    flux_nu = np.fft.irfft(1j * k_nu[None, :] * np.fft.rfft(nu * w.real, axis=1),
                           n=axis.size, axis=1)
    out = lam * (flux_mu + flux_nu)
    if np.iscomplexobj(w):
        fi_mu = np.fft.irfft(1j * k_mu[:, None] * np.fft.rfft(mu * w.imag, axis=0),
                             n=axis.size, axis=0)
        fi_nu = np.fft.irfft(1j * k_nu[None, :] * np.fft.rfft(nu * w.imag, axis=1),
                             n=axis.size, axis=1)
        out = out + 1j * lam * (fi_mu + fi_nu)
    return out


def apply_dissipator(state: BlockWigner, duration: float,
                     drift_substep: float = 0.05) -> BlockWigner:
    """Apply the thermal drift-diffusion generator for ``duration``.

    Diffusion is exact (spectral multiplier); the friction drift integrates
    with a classical 4th-order step on the spectral flux divergence, with
    substeps capped at ``drift_substep / damping``.  No-op when the damping
    rate is zero.
    """
    gamma = state.damping
    if gamma == 0.0 or duration == 0.0:
        return state
    lam = gamma / 2.0
    diff = gamma / 2.0 * (state.bath_occupation + 0.5)
    axis = state.axis
    n = axis.size
    k = _wavenumbers(axis)
    k_full = 2 * math.pi * np.fft.fftfreq(n, state.spacing)
    # two substep limits: accuracy (lam * h small) and stability of the
    # explicit drift step, whose largest spectral rate is lam * x_max * k_max
    # = lam * pi * n / 2 (imaginary axis; keep |rate * h| <= 2)
    h_stab = 4.0 / (lam * math.pi * n)
    n_sub = max(1, int(math.ceil(lam * duration / drift_substep)),
                int(math.ceil(duration / h_stab)))
    h = duration / n_sub
    decay = np.exp(-diff * (k_full[:, None] ** 2 + k_full[None, :] ** 2) * h)

    def drift_step(w, hh):
        k1 = _drift_rhs(w, lam, axis, k, k)
        k2 = _drift_rhs(w + 0.5 * hh * k1, lam, axis, k, k)
        k3 = _drift_rhs(w + 0.5 * hh * k2, lam, axis, k, k)
        k4 = _drift_rhs(w + hh * k3, lam, axis, k, k)
        return w + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def diffuse(w):
        return np.fft.ifft2(np.fft.fft2(w) * decay)

    blocks = [state.up_up.astype(float), state.down_down.astype(float),
              state.up_down.astype(complex)]
    out = []
    for w in blocks:
        cur = w
        for _ in range(n_sub):
            cur = drift_step(cur, h / 2)
            d = diffuse(cur)
            cur = d.real if not np.iscomplexobj(w) else d
            cur = drift_step(cur, h / 2)
        out.append(cur)
    return replace(state, up_up=out[0], down_down=out[1], up_down=out[2])


def free_evolve(state: BlockWigner, duration: float,
                dissipation: bool = False) -> BlockWigner:
    """Drive-free evolution: branch advection (and the bath, if enabled).

    The up block advects toward -nu and the down block toward +nu at g/2;
    the off-diagonal block picks up its local position-dependent phase.
    """
    if duration == 0.0:
        return state
    g = state.coupling
    trace_in = state.trace()
    k = _wavenumbers(state.axis)
    new_uu = _shift_along_nu(state.up_up, -g * duration / 2, k)
    new_dd = _shift_along_nu(state.down_down, +g * duration / 2, k)
    new_ud = state.up_down
    if np.any(new_ud):
        phase = np.exp(-1j * g * state.axis * duration)[:, None]
        new_ud = new_ud * phase
    out = replace(state, up_up=new_uu, down_down=new_dd, up_down=new_ud)
    if dissipation:
        out = apply_dissipator(out, duration)
    out = _absorb_edges(out)
    drift = abs(out.trace() - trace_in)
    if drift > TRACE_TOL:
        raise SupportOffGridError(
            f"trace drifted by {drift:.2e} during free evolution; state "
            f"reached the grid edge")
    return out


def evolve_pulse(state: BlockWigner, pulse: PulseSpec,
                 policy: StepPolicy | None = None,
                 dissipation: bool = False) -> BlockWigner:
    """Propagate the joint state through one drive pulse.

    Strang splitting of the local sensor rotation, the momentum advection
    and (optionally) the bath.  Aborts if the trace drifts by more than
    1e-4, which indicates mass reaching the grid edge.
    """
    if pulse.kind == "hard":
        return hard_pi_flip(state)
    policy = policy or StepPolicy()
    g = state.coupling
    axis = state.axis
    k = _wavenumbers(axis)
    det = (g * (axis - pulse.center))[:, None]
    tau = pulse.duration
    trace_in = state.trace()

    uu = state.up_up.astype(float)
    dd = state.down_down.astype(float)
    ud = state.up_down.astype(complex)

    def advect(uu, dd, h):
        return (_shift_along_nu(uu, -g * h / 2, k),
                _shift_along_nu(dd, +g * h / 2, k))

    def local(uu, dd, ud, t0, t1):
        h = t1 - t0
        if h <= 0:
            return uu, dd, ud
        area = pulse.amplitude_area(t0, t1)
        u11, u12 = _local_unitary(det, area, h)
        return _conjugate_blocks(uu, dd, ud, u11, u12, u12, np.conj(u11))

    if pulse.kind == "gaussian":
        t_lo = max(0.0, tau / 2 - policy.active_window * pulse.envelope_sigma)
        t_hi = min(tau, tau / 2 + policy.active_window * pulse.envelope_sigma)
        dt = pulse.envelope_sigma / policy.steps_per_sigma
    else:
        t_lo, t_hi = 0.0, tau
        dt = tau / (policy.steps_per_sigma * 10)

    carryover = 0.0   # dissipation time waiting to be applied

    def dissipate_pending(uu, dd, ud, pending):
        st = replace(state, up_up=uu, down_down=dd, up_down=ud)
        st = apply_dissipator(st, pending, policy.drift_substep)
        return st.up_up, st.down_down, st.up_down

    # leading wing: drive negligible, one exact step
    if t_lo > 0:
        uu, dd, ud = local(uu, dd, ud, 0.0, t_lo)
        uu, dd = advect(uu, dd, t_lo)
        carryover += t_lo

    n_steps = max(1, int(math.ceil((t_hi - t_lo) / dt)))
    dt = (t_hi - t_lo) / n_steps
    t = t_lo
    uu, dd, ud = local(uu, dd, ud, t, t + dt / 2)
    for j in range(n_steps):
        uu, dd = advect(uu, dd, dt)
        carryover += dt
        if dissipation and ((j + 1) % policy.dissipation_stride == 0):
            uu, dd, ud = dissipate_pending(uu, dd, ud, carryover)
            carryover = 0.0
        if j < n_steps - 1:
            # fuse the trailing half of this step with the leading half of
            # the next one into a single 2x2 product
            ua, ub = _local_unitary(det, pulse.amplitude_area(t + dt / 2, t + dt),
                                    dt / 2)
            va, vb = _local_unitary(det,
                                    pulse.amplitude_area(t + dt, t + 3 * dt / 2),
                                    dt / 2)
            m11 = va * ua + vb * ub
            m12 = va * ub + vb * np.conj(ua)
            m21 = vb * ua + np.conj(va) * ub
            m22 = vb * ub + np.conj(va) * np.conj(ua)
            uu, dd, ud = _conjugate_blocks(uu, dd, ud, m11, m12, m21, m22)
            t += dt
        else:
            uu, dd, ud = local(uu, dd, ud, t + dt / 2, t + dt)
            t += dt

    # trailing wing
    if tau - t_hi > 0:
        uu, dd, ud = local(uu, dd, ud, t_hi, tau)
        uu, dd = advect(uu, dd, tau - t_hi)
        carryover += tau - t_hi
    if dissipation and carryover > 0:
        uu, dd, ud = dissipate_pending(uu, dd, ud, carryover)

    out = replace(state, up_up=uu, down_down=dd, up_down=ud)
    out = _absorb_edges(out)
    drift = abs(out.trace() - trace_in)
    if drift > TRACE_TOL:
        raise SupportOffGridError(
            f"trace drifted by {drift:.2e} during the pulse; state reached "
            f"the grid edge (extent {-axis[0]:.1f}, moments {out.moments()})")
    return out


def hard_pi_flip(state: BlockWigner) -> BlockWigner:
    """Instantaneous detuning-independent flip: conjugation by sigma_x."""
    return replace(state, up_up=state.down_down.copy(),
                   down_down=state.up_up.copy(),
                   up_down=np.conj(state.up_down))


def quarter_rotation(state: BlockWigner, heating: bool = False,
                     trap_frequency: float | None = None) -> BlockWigner:
    """Quarter turn of phase space: new position = old momentum.

    Implemented as the exact index remap W'(mu, nu) = W(-nu, mu) on the
    symmetric square grid (no interpolation).  Requires the sensor to be
    fully pumped to down with no coherence: the remap models free harmonic
    rotation between measurement phases, where sensor-oscillator coupling
    phases are not tracked.  With ``heating`` the bath acts for the quarter
    period pi / (2 w_trap) before the remap.
    """
    if state.spin_up_population() > 1e-9:
        raise ValueError("quarter rotation requires the sensor pumped to down")
    if state.coherence_norm() > 1e-9 * max(1.0, float(np.abs(state.down_down).max())):
        raise ValueError("quarter rotation requires vanishing sensor coherence")
    out = state
    if heating:
        if not trap_frequency or trap_frequency <= 0:
            raise ValueError("heating during rotation needs a trap frequency")
        out = apply_dissipator(out, math.pi / (2 * trap_frequency))
    neg = (-np.arange(out.axis.size)) % out.axis.size

    def remap(w):
        return np.ascontiguousarray(w[neg, :].T)

    return replace(out, up_up=remap(out.up_up), down_down=remap(out.down_down),
                   up_down=remap(out.up_down))


def readout_and_collapse(state: BlockWigner, fidelity: float,
                         rng: np.random.Generator) -> tuple[int, BlockWigner]:
    """Sample a sensor readout and condition the state on it.

    The detector reports the sensor state correctly with probability
    ``fidelity``; outcome 1 means "up reported".  The conditioned state
    keeps both diagonal blocks, reweighted by the outcome likelihoods, and
    loses all sensor coherence.
    """
    if not 0.5 <= fidelity <= 1.0:
        raise ValueError("fidelity must lie in [0.5, 1]")
    trace = state.trace()
    p_up = state.spin_up_population() / trace
    p_one = fidelity * p_up + (1 - fidelity) * (1 - p_up)
    observed = 1 if rng.random() < p_one else 0
    like_up = fidelity if observed == 1 else 1 - fidelity
    like_dn = 1 - fidelity if observed == 1 else fidelity
    p_obs = like_up * p_up + like_dn * (1 - p_up)
    norm = p_obs * trace
    new_uu = state.up_up * (like_up / norm)
    new_dd = state.down_down * (like_dn / norm)
    out = replace(state, up_up=new_uu, down_down=new_dd,
                  up_down=np.zeros_like(state.up_down))
    return observed, out


def reset_tls(state: BlockWigner) -> BlockWigner:
    """Optical pumping: merge all population into the down block."""
    return replace(state, up_up=np.zeros_like(state.up_up),
                   down_down=state.down_down + state.up_up,
                   up_down=np.zeros_like(state.up_down))


def displace(state: BlockWigner, d_mu: float, d_nu: float) -> BlockWigner:
    """Rigid phase-space displacement of all blocks by (d_mu, d_nu).

    Spectral translation: trace-exact and interpolation-free for smooth
    states.  Rejects displacements that would push the 6-sigma support of
    the state off the grid (spectral shifts wrap around).
    """
    if d_mu == 0.0 and d_nu == 0.0:
        return state
    mom = state.moments()
    extent = float(-state.axis[0])
    for mean, var, d in ((mom["mean_mu"], mom["var_mu"], d_mu),
                         (mom["mean_nu"], mom["var_nu"], d_nu)):
        edge = abs(mean + d) + 6 * math.sqrt(max(var, 0.0))
        if edge > extent:
            raise SupportOffGridError(
                f"displaced support reaches {edge:.1f}, grid extent {extent:.1f}")
    n = state.axis.size
    k = 2 * math.pi * np.fft.rfftfreq(n, state.spacing)

    def shift(w):
        is_c = np.iscomplexobj(w)
        if is_c:
            kf = 2 * math.pi * np.fft.fftfreq(n, state.spacing)
            spec = np.fft.fft2(w)
            spec *= np.exp(-1j * kf[:, None] * d_mu)
            spec *= np.exp(-1j * kf[None, :] * d_nu)
            return np.fft.ifft2(spec)
        spec = np.fft.rfft(w, axis=1) * np.exp(-1j * k[None, :] * d_nu)
        w2 = np.fft.irfft(spec, n=n, axis=1)
        spec = np.fft.rfft(w2, axis=0) * np.exp(-1j * k[:, None] * d_mu)
        return np.fft.irfft(spec, n=n, axis=0)

    return replace(state, up_up=shift(state.up_up),
                   down_down=shift(state.down_down),
                   up_down=shift(state.up_down))


def gs_fidelity(state: BlockWigner) -> float:
    """Ground-state overlap 2 * integral W(mu, nu) e^{-mu^2 - nu^2}.

    W is the spin-traced function; for a normalized state this equals the
    population of the oscillator ground state.
    """
    weight = np.exp(-state.axis**2)
    total = state.total()
    return float(2.0 * weight @ total @ weight * state.cell)


def position_marginal(state: BlockWigner,
                      z_grid: np.ndarray | None = None) -> GridDistribution:
    """Position density of the spin-traced state, optionally resampled."""
    dens = state.total().sum(axis=1) * state.spacing
    if z_grid is None:
        return GridDistribution(state.axis.copy(), dens)
    z_grid = np.asarray(z_grid, dtype=float)
    resampled = np.interp(z_grid, state.axis, dens, left=0.0, right=0.0)
    return GridDistribution(z_grid, resampled)


def purity(state: BlockWigner) -> float:
    """2 pi integral of the squared block norms (1 for a pure state)."""
    total = (np.sum(state.up_up**2) + np.sum(state.down_down**2)
             + 2 * np.sum(np.abs(state.up_down) ** 2))
    return float(2 * math.pi * total * state.cell)


SNAPSHOT_FORMAT = "magcool-wigner/1"


def save_snapshot(state: BlockWigner, path, kind: str = "npz") -> None:
    """Dump a state to disk.

    ``npz``: compact numpy archive with keys ``format``, ``axis``, ``up_up``,
    ``down_down``, ``up_down`` (complex) and the scalar metadata; numpy
    handles byte order internally, so the file is portable.  ``csv``: flat
    text with one row per phase-space point, columns (mu, nu, up_up,
    down_down, re_up_down, im_up_down).
    """
    if kind == "npz":
        np.savez_compressed(path, format=SNAPSHOT_FORMAT, axis=state.axis,
                            up_up=state.up_up, down_down=state.down_down,
                            up_down=state.up_down,
                            coupling=state.coupling, damping=state.damping,
                            bath_occupation=state.bath_occupation)
        return
    if kind == "csv":
        n = state.axis.size
        mu = np.repeat(state.axis, n)
        nu = np.tile(state.axis, n)
        table = np.column_stack([mu, nu, state.up_up.ravel(),
                                 state.down_down.ravel(),
                                 state.up_down.real.ravel(),
                                 state.up_down.imag.ravel()])
        np.savetxt(path, table, delimiter=",", fmt="%.17g",
                   header="mu,nu,up_up,down_down,re_up_down,im_up_down",
                   comments="")
        return
    raise ValueError(f"unknown snapshot kind {kind!r}")


def load_snapshot(path) -> BlockWigner:
    """Load a state saved by :func:`save_snapshot` in ``npz`` form."""
    with np.load(path) as data:
        if str(data["format"]) != SNAPSHOT_FORMAT:
            raise ValueError("unrecognized snapshot format")
        return BlockWigner(axis=data["axis"], up_up=data["up_up"],
                           down_down=data["down_down"],
                           up_down=data["up_down"],
                           coupling=float(data["coupling"]),
                           damping=float(data["damping"]),
                           bath_occupation=float(data["bath_occupation"]))
