"""Few-step distillation with a decomposed update direction.

The student update direction splits into two parts computed from gradient-
stopped score-model evaluations on renoised generator outputs:

  * distribution matching (DM): real conditional minus fake conditional
    prediction -- the theoretically grounded term, acting as a regularizer;
  * CFG augmentation (CA): (alpha - 1) times (conditional minus unconditional
    real prediction) -- the engine that bakes the guidance pattern into the
    student.

Both terms may share one renoising draw (coupled) or use independent noise
levels per schedule policy (decoupled). The generator descends a proxy loss
whose gradient at the output is exactly -2 * lambda * delta_total, and an
auxiliary fake model tracks the generator online (several updates per
generator step). All loops are single-threaded and deterministic given the
seeds; the generator phase and the fake/TTUR phase consume separate RNG
streams so that a purely observing fake model cannot perturb training.
"""

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .data import MixtureSpec, expected_sample_stats, sample_points_for_labels
from .flow import as_predictor, renoise
from .metrics import MetricRecord, batch_sample_stats
from .net import (NULL_LABEL, NetConfig, NetParams, init_params, net_backward,
                  net_forward, net_forward_cached)
from .optim import AdamState, adam_step, init_adam


class Mode(str, Enum):
    FULL_DMD = "FULL_DMD"
    CA_ONLY = "CA_ONLY"
    DM_ONLY = "DM_ONLY"
    THEORY_DMD = "THEORY_DMD"

    @property
    def uses_dm(self) -> bool:
        return self in (Mode.FULL_DMD, Mode.DM_ONLY, Mode.THEORY_DMD)

    @property
    def uses_ca(self) -> bool:
        return self in (Mode.FULL_DMD, Mode.CA_ONLY)


class SchedulePolicy(str, Enum):
    COUPLED_SHARED = "COUPLED_SHARED"
    DECOUPLED_FULL = "DECOUPLED_FULL"
    DECOUPLED_CONSTRAINED = "DECOUPLED_CONSTRAINED"
    DECOUPLED_HYBRID = "DECOUPLED_HYBRID"


class Regularizer(str, Enum):
    NONE = "NONE"
    MEANVAR_KL = "MEANVAR_KL"
    GAN = "GAN"


_DEFAULT_GRIDS = {1: (0.0,), 2: (0.0, 0.5), 4: (0.0, 0.25, 0.5, 0.75)}


class NonFiniteError(RuntimeError):
    """Raised when a training quantity stops being finite; carries context."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


@dataclass
class DistillConfig:
    alpha: float = 4.0
    lam: float = 1.0
    n_steps: int = 1
    step_grid: tuple | None = None
    ttur_ratio: int = 5
    mode: Mode = Mode.FULL_DMD
    regularizer: Regularizer = Regularizer.NONE
    normalizer_on: bool = True
    w_gan: float = 1e-2
    w_meanvar: float = 1.0
    batch: int = 256
    lr_gen: float = 1e-4
    lr_fake: float = 1e-4
    backward_sim_fresh_noise: bool = True
    meanvar_mu_target: float | None = None
    meanvar_var_target: float | None = None

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.regularizer = Regularizer(self.regularizer)

    @property
    def grid(self) -> tuple:
        if self.step_grid is not None:
            return tuple(self.step_grid)
        return _DEFAULT_GRIDS[self.n_steps]

    def validate(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.step_grid is None and self.n_steps not in _DEFAULT_GRIDS:
            raise ValueError("n_steps must be one of {1, 2, 4} (or give step_grid)")
        grid = self.grid
        if grid[0] != 0.0:
            raise ValueError("step grid must start at 0")
        if any(b <= a for a, b in zip(grid, grid[1:])) or grid[-1] >= 1.0:
            raise ValueError("step grid must be strictly increasing within [0, 1)")
        if self.ttur_ratio < 0 or self.batch <= 0:
            raise ValueError("ttur_ratio must be >= 0 and batch positive")
        if self.lr_gen <= 0 or self.lr_fake <= 0:
            raise ValueError("learning rates must be positive")
        if (self.meanvar_var_target is not None
                and self.meanvar_var_target <= 0):
            raise ValueError("meanvar_var_target must be > 0")


@dataclass
class ScheduleConfig:
    policy: SchedulePolicy = SchedulePolicy.COUPLED_SHARED
    tau_ca_range: tuple | None = None
    tau_dm_range: tuple | None = None

    def __post_init__(self):
        self.policy = SchedulePolicy(self.policy)
        for name in ("tau_ca_range", "tau_dm_range"):
            r = getattr(self, name)
            if r is None:
                continue
            lo, hi = float(r[0]), float(r[1])
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError(f"{name} must satisfy 0 <= lo < hi <= 1")
            setattr(self, name, (lo, hi))


@dataclass
class UpdateDirection:
    delta_dm: np.ndarray
    delta_ca: np.ndarray
    delta_total: np.ndarray


@dataclass
class RegularizerTargets:
    mu_target: float
    var_target: float

    def __post_init__(self):
        if self.var_target <= 0:
            raise ValueError("var_target must be > 0")


@dataclass
class DistillState:
    generator: NetParams
    gen_opt: AdamState
    fake: NetParams
    fake_opt: AdamState
    disc: NetParams | None
    disc_opt: AdamState | None
    iteration: int
    rng_gen: np.random.Generator
    rng_fake: np.random.Generator
    observer_mode: bool
    spec: MixtureSpec | None = None
    reg_targets: list = field(default_factory=list)


def init_distill_state(teacher: NetParams, config: DistillConfig,
                       spec: MixtureSpec | None, seed: int,
                       observer_mode: bool = False) -> DistillState:
    """Generator and fake model start as copies of the teacher."""
    config.validate()
    ss = np.random.SeedSequence(seed)
    s_gen, s_fake, s_disc = ss.spawn(3)
    disc = disc_opt = None
    if config.regularizer == Regularizer.GAN:
        if spec is None:
            raise ValueError("GAN regularizer needs a data spec for real batches")
        disc_cfg = NetConfig(dim=teacher.config.dim,
                             n_labels=teacher.config.n_labels,
                             n_hidden=3, out_dim=1)
        disc = init_params(disc_cfg, np.random.default_rng(s_disc))
        disc_opt = init_adam(disc, lr=config.lr_fake)
    reg_targets = []
    if spec is not None:
        if (config.meanvar_mu_target is not None
                and config.meanvar_var_target is not None):
            reg_targets = [RegularizerTargets(config.meanvar_mu_target,
                                              config.meanvar_var_target)
                           for _ in range(spec.label_count)]
        else:
            reg_targets = [RegularizerTargets(*expected_sample_stats(spec, lb))
                           for lb in range(spec.label_count)]
    generator = teacher.copy()
    fake = teacher.copy()
    return DistillState(
        generator=generator,
        gen_opt=init_adam(generator, lr=config.lr_gen),
        fake=fake,
        fake_opt=init_adam(fake, lr=config.lr_fake),
        disc=disc,
        disc_opt=disc_opt,
        iteration=0,
        rng_gen=np.random.default_rng(s_gen),
        rng_fake=np.random.default_rng(s_fake),
        observer_mode=observer_mode,
        spec=spec,
        reg_targets=reg_targets,
    )


def _draw_range(rng, lo, hi, size):
    if hi <= lo:
        raise ValueError(f"empty noise-level range [{lo}, {hi}]")
    return rng.uniform(lo, hi) if size is None else rng.uniform(lo, hi, size=size)


def sample_tau(schedule: ScheduleConfig, t: float, rng: np.random.Generator,
               size=None):
    """Draw the (tau_ca, tau_dm, shared_eps) triple for one generator step.

    Policy defaults: COUPLED_SHARED one shared U(0,1) draw; DECOUPLED_FULL two
    independent U(0,1); DECOUPLED_CONSTRAINED two independent U(t,1);
    DECOUPLED_HYBRID tau_ca ~ U(t,1) with tau_dm ~ U(0,1). Explicit range
    overrides replace the defaults. size vectorizes the draws.
    """
    policy = schedule.policy
    ca_o, dm_o = schedule.tau_ca_range, schedule.tau_dm_range
    if policy == SchedulePolicy.COUPLED_SHARED:
        lo, hi = ca_o or dm_o or (0.0, 1.0)
        tau = _draw_range(rng, lo, hi, size)
        return tau, tau, True
    if policy == SchedulePolicy.DECOUPLED_FULL:
        ca_lo, ca_hi = ca_o or (0.0, 1.0)
        dm_lo, dm_hi = dm_o or (0.0, 1.0)
    elif policy == SchedulePolicy.DECOUPLED_CONSTRAINED:
        ca_lo, ca_hi = ca_o or (t, 1.0)
        dm_lo, dm_hi = dm_o or (t, 1.0)
    elif policy == SchedulePolicy.DECOUPLED_HYBRID:
        ca_lo, ca_hi = ca_o or (t, 1.0)
        dm_lo, dm_hi = dm_o or (0.0, 1.0)
    else:  # pragma: no cover
        raise ValueError(f"unknown policy {policy}")
    tau_ca = _draw_range(rng, ca_lo, ca_hi, size)
    tau_dm = _draw_range(rng, dm_lo, dm_hi, size)
    return tau_ca, tau_dm, False


def delta_dm(real, fake, x_tau: np.ndarray, tau, cond) -> np.ndarray:
    """Real-conditional minus fake-conditional prediction (gradient-stopped)."""
    return as_predictor(real)(x_tau, tau, cond) - as_predictor(fake)(x_tau, tau, cond)


def delta_ca(real, x_tau: np.ndarray, tau, cond, alpha: float) -> np.ndarray:
    """(alpha - 1) * (conditional - unconditional real prediction)."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    predict = as_predictor(real)
    p_cond = predict(x_tau, tau, cond)
    if alpha == 1.0:
        return np.zeros_like(p_cond)
    p_uncond = predict(x_tau, tau, np.full(x_tau.shape[0], NULL_LABEL))
    return (alpha - 1.0) * (p_cond - p_uncond)


def _assemble_direction(real, fake, gen_out, cond, config,
                        x_ca, tau_ca, x_dm, tau_dm) -> UpdateDirection:
    mode = config.mode
    eff_alpha = 1.0 if mode == Mode.THEORY_DMD else config.alpha
    if mode.uses_dm:
        d_dm = delta_dm(real, fake, x_dm, tau_dm, cond)
    else:
        d_dm = np.zeros_like(gen_out)
    if mode.uses_ca:
        d_ca = delta_ca(real, x_ca, tau_ca, cond, eff_alpha)
    else:
        d_ca = np.zeros_like(gen_out)
    if config.normalizer_on:
        ref = as_predictor(real)(x_dm, tau_dm, cond)
        scale = 1.0 / (np.mean(np.abs(gen_out - ref), axis=1, keepdims=True) + 1e-8)
        d_dm = d_dm * scale
        d_ca = d_ca * scale
    return UpdateDirection(d_dm, d_ca, d_dm + d_ca)


def dmd_direction_coupled(real, fake, gen_out: np.ndarray, t: float, cond,
                          config: DistillConfig, rng: np.random.Generator,
                          schedule: ScheduleConfig | None = None):
    """One shared (tau, eps) draw for both terms. Returns (direction, tau, tau)."""
    if schedule is None:
        schedule = ScheduleConfig(SchedulePolicy.COUPLED_SHARED)
    if schedule.policy != SchedulePolicy.COUPLED_SHARED:
        raise ValueError("coupled direction requires the COUPLED_SHARED policy")
    tau, _, _ = sample_tau(schedule, t, rng)
    eps = rng.standard_normal(gen_out.shape)
    x_tau = renoise(gen_out, tau, eps)
    direction = _assemble_direction(real, fake, gen_out, cond, config,
                                    x_tau, tau, x_tau, tau)
    return direction, tau, tau


def dmd_direction_decoupled(real, fake, gen_out: np.ndarray, t: float, cond,
                            config: DistillConfig, schedule: ScheduleConfig,
                            rng: np.random.Generator):
    """Independent (tau, eps) per term as dictated by the schedule policy."""
    tau_ca, tau_dm, shared = sample_tau(schedule, t, rng)
    if shared:
        eps = rng.standard_normal(gen_out.shape)
        x_ca = renoise(gen_out, tau_ca, eps)
        x_dm = renoise(gen_out, tau_dm, eps)
    else:
        eps_ca = rng.standard_normal(gen_out.shape)
        x_ca = renoise(gen_out, tau_ca, eps_ca)
        eps_dm = rng.standard_normal(gen_out.shape)
        x_dm = renoise(gen_out, tau_dm, eps_dm)
    direction = _assemble_direction(real, fake, gen_out, cond, config,
                                    x_ca, tau_ca, x_dm, tau_dm)
    return direction, tau_ca, tau_dm


def proxy_loss_and_grad(gen_out: np.ndarray, delta_total: np.ndarray,
                        lam: float):
    """Loss ||G - stopgrad(G + lam * delta)||^2 evaluated at G, with its exact
    gradient w.r.t. G: -2 * lam * delta (the frozen target absorbs G)."""
    gen_out = np.asarray(gen_out)
    delta_total = np.asarray(delta_total)
    if gen_out.shape != delta_total.shape:
        raise ValueError("gen_out/delta shape mismatch")
    loss = float(lam * lam * np.sum(delta_total ** 2))
    return loss, (-2.0 * lam) * delta_total


def backward_simulate(gen, grid, k_target: int, cond, rng: np.random.Generator,
                      dim: int | None = None, fresh_noise: bool = True) -> np.ndarray:
    """Produce the generator input for step k_target by running the earlier
    steps with gradients stopped: predict clean, renoise to the next grid
    level (fresh noise by default, the chain's initial noise otherwise)."""
    grid = tuple(grid)
    if not 1 <= k_target <= len(grid):
        raise ValueError(f"k_target must be in [1, {len(grid)}]")
    if isinstance(gen, NetParams):
        dim = gen.config.dim
    elif dim is None:
        raise ValueError("dim is required for injected generators")
    cond = np.asarray(cond)
    n = cond.shape[0]
    predict = as_predictor(gen)
    z = rng.standard_normal((n, dim))
    z0 = z
    for j in range(k_target - 1):
        xhat = predict(z, grid[j], cond)
        eps = rng.standard_normal((n, dim)) if fresh_noise else z0
        z = renoise(xhat, grid[j + 1], eps)
    return z


def sample_generator(gen, grid, cond, rng: np.random.Generator,
                     dim: int | None = None, fresh_noise: bool = True) -> np.ndarray:
    """Few-step inference: backward-simulate to the last grid step, then take
    the final clean prediction."""
    grid = tuple(grid)
    z = backward_simulate(gen, grid, len(grid), cond, rng, dim=dim,
                          fresh_noise=fresh_noise)
    return as_predictor(gen)(z, grid[-1], np.asarray(cond))


def fake_model_update(state: DistillState, gen_samples: np.ndarray, cond,
                      rng: np.random.Generator) -> float:
    """One denoising-regression step of the fake model onto the generator's
    (gradient-stopped) samples; returns the loss before the step."""
    n = gen_samples.shape[0]
    tau = rng.uniform(0.0, 1.0)
    eps = rng.standard_normal(gen_samples.shape)
    x_tau = renoise(gen_samples, tau, eps)
    pred, cache = net_forward_cached(state.fake, x_tau, tau, cond)
    resid = pred - gen_samples
    loss = float(np.mean(np.sum(resid ** 2, axis=1)))
    grads = net_backward(state.fake, cache, (2.0 / n) * resid)
    adam_step(state.fake_opt, state.fake, grads)
    return loss


def meanvar_kl_loss(batch: np.ndarray, targets: RegularizerTargets):
    """Gaussian-moment KL penalty on per-sample mean/variance.

    loss = (1/B) sum_i 0.5 * ((var_i + (mu_i - mu_t)^2) / var_t
                              - 1 - log(var_i / var_t))
    Returns (loss, gradient w.r.t. the batch). Vanishing per-sample variance
    is clamped away from the log singularity with a warning.
    """
    batch = np.asarray(batch)
    if batch.ndim != 2 or batch.shape[1] < 2:
        raise ValueError("per-sample variance needs dim >= 2")
    if targets.var_target <= 0:
        raise ValueError("var_target must be > 0")
    n, d = batch.shape
    mu = batch.mean(axis=1)
    var = batch.var(axis=1)
    if np.any(var < 1e-12):
        warnings.warn("per-sample variance clamped at 1e-12 (log singularity)")
        var = np.maximum(var, 1e-12)
    vt, mt = targets.var_target, targets.mu_target
    terms = 0.5 * ((var + (mu - mt) ** 2) / vt - 1.0 - np.log(var / vt))
    loss = float(np.mean(terms))
    dmu = (mu - mt) / vt / n
    dvar = 0.5 * (1.0 / vt - 1.0 / var) / n
    grad = (dmu[:, None] + dvar[:, None] * 2.0 * (batch - mu[:, None])) / d
    return loss, grad


def _sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus(z):
    return np.logaddexp(0.0, z)


def _add_grads(a: NetParams, b: NetParams) -> NetParams:
    for (_, x), (_, y) in zip(a.slots(), b.slots()):
        x += y
    return a


def gan_losses(disc: NetParams, real_batch: np.ndarray, fake_batch: np.ndarray,
               cond):
    """Non-saturating GAN signals from a scalar-logit discriminator.

    Returns (disc_loss, disc_grads, gen_adv_grad, gen_adv_loss). The
    discriminator loss is mean BCE(real -> 1) + mean BCE(fake -> 0); the
    generator signal is the gradient of sum_i -log sigmoid(D(fake_i)) w.r.t.
    the fake batch (summed, so its per-sample scale matches the proxy term).
    """
    n_r, n_f = real_batch.shape[0], fake_batch.shape[0]
    logit_r, cache_r = net_forward_cached(disc, real_batch, 0.0, cond)
    logit_f, cache_f = net_forward_cached(disc, fake_batch, 0.0, cond)
    lr_, lf_ = logit_r[:, 0], logit_f[:, 0]
    disc_loss = float(np.mean(_softplus(-lr_)) + np.mean(_softplus(lf_)))
    up_r = ((_sigmoid(lr_) - 1.0) / n_r)[:, None]
    up_f = (_sigmoid(lf_) / n_f)[:, None]
    disc_grads = _add_grads(net_backward(disc, cache_r, up_r),
                            net_backward(disc, cache_f, up_f))
    gen_adv_loss = float(np.mean(_softplus(-lf_)))
    up_gen = (_sigmoid(lf_) - 1.0)[:, None]
    _, gen_grad = net_backward(disc, cache_f, up_gen, return_input_grad=True)
    return disc_loss, disc_grads, gen_grad, gen_adv_loss


def _runs_fake_updates(config: DistillConfig, observer_mode: bool) -> bool:
    return config.mode.uses_dm or observer_mode


def generator_update(state: DistillState, teacher, config: DistillConfig,
                     schedule: ScheduleConfig, direction_fn=None) -> MetricRecord:
    """One full training step: generator phase, then TTUR fake-model phase.

    The teacher and (during the generator phase) the fake model are never
    written to; only forward evaluations of them enter the direction. The
    returned record carries the update-level fields; the run loop fills the
    distribution-level fields from a separate evaluation cloud.
    direction_fn optionally replaces the built-in direction computation with
    an injected (gen_out, t, cond, rng) -> (UpdateDirection, tau_ca, tau_dm).
    """
    rng = state.rng_gen
    grid = config.grid
    n_labels = state.generator.config.n_labels
    k = int(rng.integers(1, len(grid) + 1))
    t = grid[k - 1]
    labels = rng.integers(0, n_labels, size=config.batch)
    z_t = backward_simulate(state.generator, grid, k, labels, rng,
                            fresh_noise=config.backward_sim_fresh_noise)
    gen_out, cache = net_forward_cached(state.generator, z_t, t, labels)

    if direction_fn is not None:
        direction, tau_ca, tau_dm = direction_fn(gen_out, t, labels, rng)
    elif schedule.policy == SchedulePolicy.COUPLED_SHARED:
        direction, tau_ca, tau_dm = dmd_direction_coupled(
            teacher, state.fake, gen_out, t, labels, config, rng, schedule)
    else:
        direction, tau_ca, tau_dm = dmd_direction_decoupled(
            teacher, state.fake, gen_out, t, labels, config, schedule, rng)

    if not np.isfinite(direction.delta_total).all():
        raise NonFiniteError("non-finite update direction", context={
            "iteration": state.iteration, "t": t, "tau_ca": float(tau_ca),
            "tau_dm": float(tau_dm),
            "max_abs_gen_out": float(np.max(np.abs(gen_out))),
        })

    loss_proxy, out_grad = proxy_loss_and_grad(gen_out, direction.delta_total,
                                               config.lam)
    loss_reg = 0.0
    if config.regularizer == Regularizer.MEANVAR_KL:
        total = 0.0
        reg_grad = np.zeros_like(gen_out)
        for label in range(n_labels):
            idx = np.nonzero(labels == label)[0]
            if idx.size == 0:
                continue
            loss_g, grad_g = meanvar_kl_loss(gen_out[idx], state.reg_targets[label])
            total += idx.size * loss_g
            reg_grad[idx] = idx.size * grad_g  # sum-form injection
        loss_reg = total / config.batch
        out_grad = out_grad + config.w_meanvar * reg_grad
    elif config.regularizer == Regularizer.GAN:
        real_pts = sample_points_for_labels(state.spec, labels, rng)
        disc_loss, disc_grads, gen_grad, gen_adv_loss = gan_losses(
            state.disc, real_pts, gen_out, labels)
        out_grad = out_grad + config.w_gan * gen_grad
        loss_reg = gen_adv_loss
        adam_step(state.disc_opt, state.disc, disc_grads)

    grads = net_backward(state.generator, cache, out_grad)
    adam_step(state.gen_opt, state.generator, grads)

    loss_fake = 0.0
    if _runs_fake_updates(config, state.observer_mode) and config.ttur_ratio > 0:
        gen_samples = net_forward(state.generator, z_t, t, labels)
        for _ in range(config.ttur_ratio):
            loss_fake = fake_model_update(state, gen_samples, labels,
                                          state.rng_fake)

    state.iteration += 1
    means, variances = batch_sample_stats(gen_out)
    return MetricRecord(
        iteration=state.iteration, sw2=None,
        mean_of_means=float(means.mean()), mean_of_vars=float(variances.mean()),
        mode_coverage=None, loss_proxy=loss_proxy, loss_fake=loss_fake,
        loss_reg=loss_reg, tau_ca=float(tau_ca), tau_dm=float(tau_dm),
        t=float(t),
    )


def observer_probe(state: DistillState, teacher, probe_points: np.ndarray,
                   taus, cond, artifact_dir=None,
                   rng: np.random.Generator | None = None):
    """Evaluate the DM term over probe points at each noise level.

    Returns one row (tau, mean L2 norm of delta_dm, mean <delta_dm, v>) per
    tau, where v is the known artifact direction (alignment is NaN-free only
    when v is given; otherwise that column is 0).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    probe_points = np.asarray(probe_points)
    rows = []
    for tau in taus:
        eps = rng.standard_normal(probe_points.shape)
        x_tau = renoise(probe_points, float(tau), eps)
        d = delta_dm(teacher, state.fake, x_tau, float(tau), cond)
        mag = float(np.mean(np.linalg.norm(d, axis=1)))
        align = 0.0
        if artifact_dir is not None:
            align = float(np.mean(d @ np.asarray(artifact_dir)))
        rows.append((float(tau), mag, align))
    return rows
