"""Adversarial and variety-loss training loops.

GAN mode alternates a discriminator update on real-vs-generated
trajectories with a generator update on the adversarial score of one
sample plus the variety loss over k samples.  nogan mode keeps only the
generator and its variety loss.
"""

from __future__ import annotations

import csv
import io
import time

from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .tensor import ContractError, Tape, no_grad
from .optim import Adam, clip_grad_norm, grad_norm
from .evaluate import eval_min_of_k
from .model import (ConfigError, build_discriminator, build_generator,
                    generator_forward, score_fake, score_real)

TRAIN_MODES = ("gan", "nogan")
LOG_FLOOR = 1e-7  # keeps both losses finite for scores numerically at 0 or 1


class TrainingError(RuntimeError):
    pass


class TrainingDiverged(TrainingError):
    """Loss left the finite range; message carries the gradient norms."""


@dataclass
class TrainConfig:
    batch_size: int = 48
    lr: float = 1e-3
    epochs: int = 200
    k: int = 20
    mode: str = "gan"
    d_steps: int = 1
    g_steps: int = 1
    seed: int = 0
    clip_norm: float = None

    def validate(self):
        if self.mode not in TRAIN_MODES:
            raise ConfigError(f"mode must be one of {TRAIN_MODES}, got {self.mode!r}")
        if self.batch_size < 1 or self.k < 1 or self.d_steps < 1 or self.g_steps < 1:
            raise ConfigError("batch_size, k, d_steps and g_steps must be >= 1")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr > 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.clip_norm is not None and not self.clip_norm > 0.0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")
        return self


# ---------------------------------------------------------------------------
# losses

def d_loss(real_scores, fake_scores):
    """Binary cross entropy pushing real scores to 1 and fake scores to 0."""
    log_r = T.log(T.clamp_min(real_scores, LOG_FLOOR))
    log_f = T.log(T.clamp_min(T.add_scalar(T.neg(fake_scores), 1.0), LOG_FLOOR))
    return T.add(T.neg(T.tmean(log_r)), T.neg(T.tmean(log_f)))


def g_adv_loss(fake_scores):
    """Non-saturating generator objective: push fake scores toward 1."""
    return T.neg(T.tmean(T.log(T.clamp_min(fake_scores, LOG_FLOOR))))


def variety_norms(truth, preds):
    """Per-agent L2 error of the best of the k samples, as an (N, 1) tensor.

    The argmin is taken outside the graph, so gradient reaches only each
    agent's best sample; the other samples receive exactly zero.
    """
    want = np.asarray(truth, dtype=float).reshape(preds.n_agents, -1)
    if want.shape[1] != 2 * preds.t_pred:
        raise ContractError(f"truth shape {want.shape} does not match "
                            f"t_pred={preds.t_pred}")
    diff = T.sub(preds.traj, T.constant(np.repeat(want, preds.k, axis=0)))
    sq = T.tsum(T.mul(diff, diff), axis=1, keepdims=True)
    best = sq.data.reshape(preds.n_agents, preds.k).argmin(axis=1)
    rows = np.arange(preds.n_agents) * preds.k + best
    return T.sqrt(T.take_rows(sq, rows))


def variety_loss(truth, preds):
    """Mean over agents of the min-of-k L2 trajectory error."""
    return T.tmean(variety_norms(truth, preds))


# ---------------------------------------------------------------------------
# logging

@dataclass
class StepRecord:
    step: int
    epoch: int
    d_loss: float
    g_adv: float
    variety: float
    grad_norm_g: float
    grad_norm_d: float
    seconds: float


@dataclass
class EpochRecord:
    epoch: int
    val_ade: float
    val_fde: float


@dataclass
class TrainLog:
    """Per-step loss records plus per-epoch validation scores.

    Everything except the wall-time column is bit-reproducible for a fixed
    (seed, data, config) on one machine.
    """

    steps: list = field(default_factory=list)
    epochs: list = field(default_factory=list)

    def steps_csv(self):
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["step", "epoch", "d_loss", "g_adv", "variety",
                    "grad_norm_g", "grad_norm_d", "seconds"])
        for r in self.steps:
            w.writerow([r.step, r.epoch, _cell(r.d_loss), _cell(r.g_adv),
                        _cell(r.variety), _cell(r.grad_norm_g),
                        _cell(r.grad_norm_d), _cell(r.seconds)])
        return out.getvalue()

    def epochs_csv(self):
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["epoch", "val_ade", "val_fde"])
        for r in self.epochs:
            w.writerow([r.epoch, repr(r.val_ade), repr(r.val_fde)])
        return out.getvalue()


def _cell(v):
    return "" if v is None else repr(v)


# ---------------------------------------------------------------------------
# single steps

def _nan_guard(value, gen, disc, context):
    if not np.isfinite(value):
        g = grad_norm(gen.parameters())
        d = grad_norm(disc.parameters()) if disc is not None else 0.0
        raise TrainingDiverged(f"{context} loss is {value}; grad norms: "
                               f"generator={g:.6e} discriminator={d:.6e}")


def _g_norm_and_step(gen, g_opt, config):
    if config.clip_norm is not None:
        norm = clip_grad_norm(gen.parameters(), config.clip_norm)
    else:
        norm = grad_norm(gen.parameters())
    g_opt.step()
    return norm


def train_step_gan(batch, gen, disc, g_opt, d_opt, config, rng, step=0, epoch=0):
    """One alternating GAN iteration over a batch of windows.

    The discriminator pass samples fakes without gradient so nothing leaks
    into the generator; the generator pass freezes discriminator parameters
    so their gradients stay exactly zero.
    """
    if not batch:
        raise ContractError("empty batch")
    t0 = time.perf_counter()

    d_val = d_norm = None
    for _ in range(config.d_steps):
        with Tape():
            real, fake = [], []
            for w in batch:
                with no_grad():
                    preds = generator_forward(gen, w, k=1, rng=rng)
                real.append(score_real(disc, w))
                fake.append(score_fake(disc, w, preds, sample=0))
            loss_d = d_loss(T.concat(real, axis=0), T.concat(fake, axis=0))
            T.backward(loss_d)
        d_val = float(loss_d.data)
        _nan_guard(d_val, gen, disc, "discriminator")
        if config.clip_norm is not None:
            d_norm = clip_grad_norm(disc.parameters(), config.clip_norm)
        else:
            d_norm = grad_norm(disc.parameters())
        d_opt.step()

    g_val = v_val = g_norm = None
    d_params = disc.parameters()
    for p in d_params:
        p.requires_grad = False
    try:
        for _ in range(config.g_steps):
            with Tape():
                scores, norms = [], []
                for w in batch:
                    preds = generator_forward(gen, w, k=config.k, rng=rng)
                    scores.append(score_fake(disc, w, preds, sample=0))
                    norms.append(variety_norms(w.future, preds))
                adv = g_adv_loss(T.concat(scores, axis=0))
                var = T.tmean(T.concat(norms, axis=0))
                loss_g = T.add(adv, var)
                T.backward(loss_g)
            g_val, v_val = float(adv.data), float(var.data)
            _nan_guard(float(loss_g.data), gen, disc, "generator")
            g_norm = _g_norm_and_step(gen, g_opt, config)
    finally:
        for p in d_params:
            p.requires_grad = True

    return StepRecord(step, epoch, d_val, g_val, v_val, g_norm, d_norm,
                      time.perf_counter() - t0)


def train_step_nogan(batch, gen, g_opt, config, rng, step=0, epoch=0):
    """One variety-loss-only update; the adversarial terms are absent."""
    if not batch:
        raise ContractError("empty batch")
    t0 = time.perf_counter()
    v_val = g_norm = None
    for _ in range(config.g_steps):
        with Tape():
            norms = []
            for w in batch:
                preds = generator_forward(gen, w, k=config.k, rng=rng)
                norms.append(variety_norms(w.future, preds))
            loss = T.tmean(T.concat(norms, axis=0))
            T.backward(loss)
        v_val = float(loss.data)
        _nan_guard(v_val, gen, None, "variety")
        g_norm = _g_norm_and_step(gen, g_opt, config)
    return StepRecord(step, epoch, None, None, v_val, g_norm, None,
                      time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# full loop

def snapshot_params(gen, disc=None, epoch=None, val_ade=None, val_fde=None):
    """Copy current parameter arrays, keyed like named_parameters()."""
    return {
        "epoch": epoch,
        "val_ade": val_ade,
        "val_fde": val_fde,
        "generator": {n: p.data.copy() for n, p in gen.named_parameters().items()},
        "discriminator": None if disc is None else
            {n: p.data.copy() for n, p in disc.named_parameters().items()},
    }


def restore_params(model, values):
    named = model.named_parameters()
    if set(named) != set(values):
        raise ContractError("parameter names do not match the snapshot")
    for name, p in named.items():
        arr = np.asarray(values[name], dtype=float)
        if arr.shape != p.data.shape:
            raise ContractError(f"snapshot shape {arr.shape} != parameter "
                                f"{name} shape {p.data.shape}")
        p.data = arr.copy()


def run_training(gen, disc, split, config, start_epoch=0):
    """Shuffled epoch loop with per-epoch min-of-k validation.

    Returns (best, log) where ``best`` is a parameter snapshot at the lowest
    validation ADE seen (the initial state when epochs=0 or there is no
    validation split).  Noise and shuffling streams are derived per epoch
    from (seed, epoch), so a run resumed at an epoch boundary sees the same
    stream as an uninterrupted run; optimizer state is not carried.
    """
    config.validate()
    if not split.train:
        raise ConfigError("training set is empty")
    if config.mode == "gan" and disc is None:
        raise ConfigError("gan mode needs a discriminator")

    g_opt = Adam(gen.parameters(), lr=config.lr)
    d_opt = Adam(disc.parameters(), lr=config.lr) \
        if config.mode == "gan" else None
    log = TrainLog()
    best = snapshot_params(gen, disc)
    step = 0
    for epoch in range(start_epoch, config.epochs):
        order = np.random.default_rng([config.seed, epoch, 1]) \
            .permutation(len(split.train))
        noise_rng = np.random.default_rng([config.seed, epoch, 0])
        for lo in range(0, len(order), config.batch_size):
            batch = [split.train[i] for i in order[lo:lo + config.batch_size]]
            if config.mode == "gan":
                rec = train_step_gan(batch, gen, disc, g_opt, d_opt,
                                     config, noise_rng, step, epoch)
            else:
                rec = train_step_nogan(batch, gen, g_opt, config,
                                       noise_rng, step, epoch)
            log.steps.append(rec)
            step += 1
        if split.val:
            r = eval_min_of_k(gen, split.val, k=config.k, seed=config.seed,
                              include_baseline=False)
            log.epochs.append(EpochRecord(epoch, r.ade, r.fde))
            if best["val_ade"] is None or r.ade < best["val_ade"]:
                best = snapshot_params(gen, disc, epoch, r.ade, r.fde)
    return best, log


# ---------------------------------------------------------------------------
# activation ablation harness

@dataclass
class AblationResult:
    activation: str
    log: TrainLog
    hidden_grad_fraction: float


def hidden_grad_fraction(hidden_tensors):
    """Fraction of nonzero entries across the given activation gradients."""
    total = nonzero = 0
    for h in hidden_tensors:
        if h.grad is None:
            raise ContractError("hidden tensor carries no gradient; "
                                "run backward first")
        total += h.grad.size
        nonzero += int(np.count_nonzero(h.grad))
    if total == 0:
        raise ContractError("no hidden activations to inspect")
    return nonzero / total


def discriminator_hidden_fraction(batch, gen, disc, rng):
    """Run one discriminator pass and measure gradient flow through the
    classifier's hidden nodes.  Inactive nodes contribute exact zeros."""
    disc.classifier.collect_hidden = True
    hiddens = []
    try:
        with Tape():
            real, fake = [], []
            for w in batch:
                with no_grad():
                    preds = generator_forward(gen, w, k=1, rng=rng)
                real.append(score_real(disc, w))
                hiddens.extend(disc.classifier.last_hidden)
                fake.append(score_fake(disc, w, preds, sample=0))
                hiddens.extend(disc.classifier.last_hidden)
            T.backward(d_loss(T.concat(real, axis=0), T.concat(fake, axis=0)))
    finally:
        disc.classifier.collect_hidden = False
    return hidden_grad_fraction(hiddens)


def run_activation_ablation(windows, model_config, train_config, steps=200):
    """Twin GAN runs differing only in the MLP activation.

    Both runs share seeds and data; afterwards the discriminator's live
    hidden-gradient fraction is measured on one extra scoring pass.  Returns
    one AblationResult per activation, relu first.
    """
    results = []
    for act in ("relu", "leaky_relu"):
        mcfg = replace(model_config, activation=act)
        gen = build_generator(mcfg, seed=train_config.seed)
        disc = build_discriminator(mcfg, seed=train_config.seed + 1)
        g_opt = Adam(gen.parameters(), lr=train_config.lr)
        d_opt = Adam(disc.parameters(), lr=train_config.lr)
        rng = np.random.default_rng(train_config.seed)
        log = TrainLog()
        for s in range(steps):
            log.steps.append(train_step_gan(windows, gen, disc, g_opt, d_opt,
                                            train_config, rng, step=s))
        frac = discriminator_hidden_fraction(
            windows, gen, disc, np.random.default_rng([train_config.seed, steps]))
        results.append(AblationResult(act, log, frac))
    return results
