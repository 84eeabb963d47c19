"""Seq2seq trajectory models: class-conditioned encoders, social pooling,
noise-driven decoder, and the discriminator that scores whole trajectories.

All sequence inputs are per-step displacements (first step zero); absolute
positions are rebuilt by summing displacements onto the last observed point.
One encoder is shared across all agent classes; class identity enters only
through the embeddings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import N_CLASSES
from .tensor import ContractError, Tensor

ENCODER_KINDS = ("lstm", "transformer")
MLP_ACTIVATIONS = ("relu", "leaky_relu")
TRANSFORMER_POOLS = ("last", "mean")


class ConfigError(ValueError):
    pass


class LabelsUnavailableError(RuntimeError):
    """Raised when class-embedding inspection is asked of a label-free model."""


class CheckpointError(ValueError):
    pass


@dataclass
class ModelConfig:
    embed_dim: int = 16
    class_embed_dim: int = 16
    hidden_dim: int = 32
    noise_dim: int = 8
    pool_dim: int = 32
    # coordinates are multiplied by this before any embedding so that
    # pixel-scale inputs do not saturate the recurrent gates at init
    input_scale: float = 0.02
    encoder: str = "lstm"
    use_labels: bool = True
    class_in_spatial: bool = True
    activation: str = "leaky_relu"
    leaky_slope: float = 0.2
    k_samples: int = 20
    transformer_heads: int = 4
    transformer_layers: int = 4
    transformer_ff_dim: int = 64
    transformer_pool: str = "last"
    gamma_mlp_hidden: tuple = (32,)
    pooling_mlp_hidden: tuple = (32,)
    decoder_init_mlp_hidden: tuple = (32,)
    classifier_mlp_hidden: tuple = (32,)

    def __post_init__(self):
        self.gamma_mlp_hidden = tuple(self.gamma_mlp_hidden)
        self.pooling_mlp_hidden = tuple(self.pooling_mlp_hidden)
        self.decoder_init_mlp_hidden = tuple(self.decoder_init_mlp_hidden)
        self.classifier_mlp_hidden = tuple(self.classifier_mlp_hidden)

    def validate(self):
        if self.encoder not in ENCODER_KINDS:
            raise ConfigError(f"encoder must be one of {ENCODER_KINDS}, got {self.encoder!r}")
        if self.activation not in MLP_ACTIVATIONS:
            raise ConfigError(f"activation must be one of {MLP_ACTIVATIONS}, "
                              f"got {self.activation!r}")
        if self.transformer_pool not in TRANSFORMER_POOLS:
            raise ConfigError(f"transformer_pool must be one of {TRANSFORMER_POOLS}")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigError(f"leaky_slope must lie in (0, 1), got {self.leaky_slope}")
        if not self.input_scale > 0.0:
            raise ConfigError(f"input_scale must be positive, got {self.input_scale}")
        if self.k_samples < 1:
            raise ConfigError(f"k_samples must be >= 1, got {self.k_samples}")
        dims = [self.embed_dim, self.class_embed_dim, self.hidden_dim,
                self.noise_dim, self.pool_dim, self.transformer_heads,
                self.transformer_layers, self.transformer_ff_dim]
        if any(d < 1 for d in dims):
            raise ConfigError("all model dimensions must be positive")
        if self.encoder == "transformer" and self.hidden_dim % self.transformer_heads:
            raise ConfigError(f"hidden_dim {self.hidden_dim} not divisible by "
                              f"{self.transformer_heads} attention heads")
        return self


# ---------------------------------------------------------------------------
# building blocks

def _uniform_init(rng, fan_in, shape):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, shape)


class Linear:
    def __init__(self, in_dim, out_dim, rng):
        self.W = Tensor(_uniform_init(rng, in_dim, (in_dim, out_dim)), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x):
        return T.add(T.matmul(x, self.W), self.b)

    def named_parameters(self, prefix):
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b}


class MLP:
    """Stack of Linears with the configured nonlinearity between them.

    ``last_hidden`` retains the pre-activation tensors of the most recent
    call when ``collect_hidden`` is set.  After a backward pass their
    gradients show which hidden nodes the nonlinearity let through: a node
    whose activation gates it off gets an exact zero there.
    """

    def __init__(self, dims, rng, activation="leaky_relu", slope=0.2):
        if len(dims) < 2:
            raise ConfigError(f"MLP needs at least input and output dims, got {dims}")
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.activation = activation
        self.slope = slope
        self.collect_hidden = False
        self.last_hidden = []

    def __call__(self, x):
        hidden = []
        for layer in self.layers[:-1]:
            pre = layer(x)
            hidden.append(pre)
            x = T.activation(pre, self.activation, self.slope)
        if self.collect_hidden:
            self.last_hidden = hidden
        return self.layers[-1](x)

    def named_parameters(self, prefix):
        out = {}
        for i, layer in enumerate(self.layers):
            out.update(layer.named_parameters(f"{prefix}.{i}"))
        return out


class LSTMCell:
    """Single LSTM cell, gate order (input, forget, cell, output).

    Forget-gate bias starts at 1 so early training does not erase state.
    """

    def __init__(self, input_dim, hidden_dim, rng):
        h = hidden_dim
        self.hidden_dim = h
        self.W_x = Tensor(_uniform_init(rng, input_dim, (input_dim, 4 * h)),
                          requires_grad=True)
        self.W_h = Tensor(_uniform_init(rng, h, (h, 4 * h)), requires_grad=True)
        bias = np.zeros(4 * h)
        bias[h:2 * h] = 1.0
        self.b = Tensor(bias, requires_grad=True)

    def step(self, x, h, c):
        hd = self.hidden_dim
        gates = T.add(T.add(T.matmul(x, self.W_x), T.matmul(h, self.W_h)), self.b)
        i = T.sigmoid(T.narrow(gates, 1, 0, hd))
        f = T.sigmoid(T.narrow(gates, 1, hd, hd))
        g = T.tanh(T.narrow(gates, 1, 2 * hd, hd))
        o = T.sigmoid(T.narrow(gates, 1, 3 * hd, hd))
        c_next = T.add(T.mul(f, c), T.mul(i, g))
        h_next = T.mul(o, T.tanh(c_next))
        return h_next, c_next

    def run(self, steps, rows):
        """Feed a list of (rows, input_dim) tensors; return the final hidden."""
        h = T.zeros((rows, self.hidden_dim))
        c = T.zeros((rows, self.hidden_dim))
        for x in steps:
            h, c = self.step(x, h, c)
        return h

    def named_parameters(self, prefix):
        return {f"{prefix}.W_x": self.W_x, f"{prefix}.W_h": self.W_h,
                f"{prefix}.b": self.b}


class LayerNorm:
    def __init__(self, dim, eps=1e-5):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x):
        mu = T.tmean(x, axis=1, keepdims=True)
        centered = T.sub(x, mu)
        var = T.tmean(T.mul(centered, centered), axis=1, keepdims=True)
        normed = T.mul(centered, T.powf(T.add_scalar(var, self.eps), -0.5))
        return T.add(T.mul(normed, self.gamma), self.beta)

    def named_parameters(self, prefix):
        return {f"{prefix}.gamma": self.gamma, f"{prefix}.beta": self.beta}


def sinusoidal_positions(length, dim):
    """Fixed sin/cos positional code, shape (length, dim)."""
    pos = np.arange(length)[:, None]
    idx = np.arange(dim)[None, :]
    angles = pos / np.power(10000.0, 2.0 * (idx // 2) / dim)
    pe = np.where(idx % 2 == 0, np.sin(angles), np.cos(angles))
    return pe


class MultiHeadAttention:
    def __init__(self, hidden_dim, heads, rng):
        if hidden_dim % heads:
            raise ConfigError(f"hidden_dim {hidden_dim} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = hidden_dim // heads
        self.Wq = Linear(hidden_dim, hidden_dim, rng)
        self.Wk = Linear(hidden_dim, hidden_dim, rng)
        self.Wv = Linear(hidden_dim, hidden_dim, rng)
        self.Wo = Linear(hidden_dim, hidden_dim, rng)

    def __call__(self, x, collect_attn=None):
        q, k, v = self.Wq(x), self.Wk(x), self.Wv(x)
        scale = 1.0 / np.sqrt(self.head_dim)
        outs = []
        for h in range(self.heads):
            lo = h * self.head_dim
            qh = T.narrow(q, 1, lo, self.head_dim)
            kh = T.narrow(k, 1, lo, self.head_dim)
            vh = T.narrow(v, 1, lo, self.head_dim)
            scores = T.mul_scalar(T.matmul(qh, T.transpose(kh)), scale)
            attn = T.softmax_rows(scores)
            if collect_attn is not None:
                collect_attn.append(attn.data.copy())
            outs.append(T.matmul(attn, vh))
        return self.Wo(T.concat(outs, axis=1))

    def named_parameters(self, prefix):
        out = {}
        for name, lin in (("q", self.Wq), ("k", self.Wk), ("v", self.Wv), ("o", self.Wo)):
            out.update(lin.named_parameters(f"{prefix}.{name}"))
        return out


class TransformerEncoder:
    """Post-norm transformer: (self-attention, residual, LN, FF, residual, LN)
    per layer, sinusoidal positions added to the input projection.
    """

    def __init__(self, in_dim, config, rng):
        cfg = config
        self.config = cfg
        self.in_proj = Linear(in_dim, cfg.hidden_dim, rng)
        self.layers = []
        for _ in range(cfg.transformer_layers):
            self.layers.append({
                "mha": MultiHeadAttention(cfg.hidden_dim, cfg.transformer_heads, rng),
                "ln1": LayerNorm(cfg.hidden_dim),
                "ff1": Linear(cfg.hidden_dim, cfg.transformer_ff_dim, rng),
                "ff2": Linear(cfg.transformer_ff_dim, cfg.hidden_dim, rng),
                "ln2": LayerNorm(cfg.hidden_dim),
            })

    def encode(self, seq, collect_attn=None):
        """(T, in_dim) sequence to a (1, hidden_dim) summary."""
        length = seq.shape[0]
        x = T.add(self.in_proj(seq),
                  T.constant(sinusoidal_positions(length, self.config.hidden_dim)))
        for layer in self.layers:
            x = layer["ln1"](T.add(x, layer["mha"](x, collect_attn)))
            ff = layer["ff2"](T.activation(layer["ff1"](x), self.config.activation,
                                           self.config.leaky_slope))
            x = layer["ln2"](T.add(x, ff))
        if self.config.transformer_pool == "mean":
            return T.tmean(x, axis=0, keepdims=True)
        return T.narrow(x, 0, length - 1, 1)

    def named_parameters(self, prefix):
        out = self.in_proj.named_parameters(f"{prefix}.in_proj")
        for i, layer in enumerate(self.layers):
            for name, comp in layer.items():
                out.update(comp.named_parameters(f"{prefix}.{i}.{name}"))
        return out


# ---------------------------------------------------------------------------
# sequence encoder shared by generator and discriminator

class SequenceEncoder:
    """Embeds (displacement, class) steps and summarizes them to one hidden
    state per agent.  The recurrent/attention weights are shared across all
    classes; class identity enters only through the embeddings.
    """

    def __init__(self, config, rng):
        self.config = config
        spatial_in = 2 + (N_CLASSES if config.use_labels and config.class_in_spatial else 0)
        self.spatial = Linear(spatial_in, config.embed_dim, rng)
        self.class_embed = Linear(N_CLASSES, config.class_embed_dim, rng) \
            if config.use_labels else None
        e_dim = config.embed_dim + (config.class_embed_dim if config.use_labels else 0)
        self.e_dim = e_dim
        if config.encoder == "lstm":
            self.lstm = LSTMCell(e_dim, config.hidden_dim, rng)
            self.transformer = None
        else:
            self.lstm = None
            self.transformer = TransformerEncoder(e_dim, config, rng)

    def embed_step(self, xy, onehots):
        """One time step: (R, 2) displacements + (R, 6) one-hots -> (R, e_dim)."""
        cfg = self.config
        xy = T.mul_scalar(xy, cfg.input_scale)
        if cfg.use_labels and cfg.class_in_spatial:
            spatial_in = T.concat([xy, onehots], axis=1)
        else:
            spatial_in = xy
        s = self.spatial(spatial_in)
        if not cfg.use_labels:
            return s
        return T.concat([s, self.class_embed(onehots)], axis=1)

    def encode(self, xy_steps, onehots, collect_attn=None):
        """List of (R, 2) step tensors -> (R, hidden_dim) summaries."""
        rows = xy_steps[0].shape[0]
        if self.lstm is not None:
            class_vec = self.class_embed(onehots) if self.config.use_labels else None
            steps = []
            for xy in xy_steps:
                xy = T.mul_scalar(xy, self.config.input_scale)
                if self.config.use_labels and self.config.class_in_spatial:
                    s = self.spatial(T.concat([xy, onehots], axis=1))
                else:
                    s = self.spatial(xy)
                steps.append(T.concat([s, class_vec], axis=1) if class_vec is not None else s)
            return self.lstm.run(steps, rows)
        # transformer attends over time, so each agent is encoded separately
        outs = []
        for r in range(rows):
            seq = T.concat([T.narrow(xy, 0, r, 1) for xy in xy_steps], axis=0)
            oh = T.take_rows(onehots, [r] * len(xy_steps))
            e = self.embed_step(seq, oh)
            outs.append(self.transformer.encode(e, collect_attn))
        return T.concat(outs, axis=0)

    def named_parameters(self, prefix):
        out = self.spatial.named_parameters(f"{prefix}.spatial")
        if self.class_embed is not None:
            out.update(self.class_embed.named_parameters(f"{prefix}.class_embed"))
        if self.lstm is not None:
            out.update(self.lstm.named_parameters(f"{prefix}.lstm"))
        else:
            out.update(self.transformer.named_parameters(f"{prefix}.transformer"))
        return out


class PoolingModule:
    """Permutation-invariant social context: embed relative positions of the
    other agents, join with their hidden states, and take an elementwise max.
    Single-agent scenes pool to a zero vector.
    """

    def __init__(self, config, rng):
        self.config = config
        self.pos_embed = Linear(2, config.embed_dim, rng)
        dims = (config.embed_dim + config.hidden_dim,) + config.pooling_mlp_hidden \
            + (config.pool_dim,)
        self.mlp = MLP(dims, rng, config.activation, config.leaky_slope)

    def __call__(self, hidden, positions):
        n = hidden.shape[0]
        if n == 1:
            return T.zeros((1, self.config.pool_dim))
        positions = np.asarray(positions, dtype=float)
        rel, j_idx = [], []
        for i in range(n):
            for j in range(n):
                if j != i:
                    rel.append(positions[j] - positions[i])
                    j_idx.append(j)
        rel_emb = self.pos_embed(T.constant(np.asarray(rel) * self.config.input_scale))
        feats = self.mlp(T.concat([rel_emb, T.take_rows(hidden, j_idx)], axis=1))
        return T.blockwise_max(feats, n - 1)

    def named_parameters(self, prefix):
        out = self.pos_embed.named_parameters(f"{prefix}.pos_embed")
        out.update(self.mlp.named_parameters(f"{prefix}.mlp"))
        return out


class Decoder:
    """Autoregressive displacement decoder.  The initial hidden state mixes
    the encoder summary, pooled context, and the noise sample; each predicted
    displacement is fed back as the next input.  No teacher forcing.
    """

    def __init__(self, config, rng):
        self.config = config
        init_dims = (config.hidden_dim + config.pool_dim + config.noise_dim,) \
            + config.decoder_init_mlp_hidden + (config.hidden_dim,)
        self.init_mlp = MLP(init_dims, rng, config.activation, config.leaky_slope)
        self.embed = Linear(2, config.embed_dim, rng)
        self.cell = LSTMCell(config.embed_dim, config.hidden_dim, rng)
        gamma_dims = (config.hidden_dim,) + config.gamma_mlp_hidden + (2,)
        self.gamma = MLP(gamma_dims, rng, config.activation, config.leaky_slope)

    def decode(self, hidden, pooled, noise, last_pos, last_disp, t_pred):
        """Roll the decoder forward ``t_pred`` steps.

        Returns (trajectory, disp_steps, pos_steps): trajectory is
        (rows, 2*t_pred) absolute positions; disp/pos_steps are the per-step
        (rows, 2) tensors.
        """
        rows = hidden.shape[0]
        h = self.init_mlp(T.concat([hidden, pooled, noise], axis=1))
        c = T.zeros((rows, self.config.hidden_dim))
        x_in = T.constant(np.asarray(last_disp, dtype=float))
        pos = T.constant(np.asarray(last_pos, dtype=float))
        disp_steps, pos_steps = [], []
        for _ in range(t_pred):
            scaled = T.mul_scalar(x_in, self.config.input_scale)
            h, c = self.cell.step(self.embed(scaled), h, c)
            # gamma works in the scaled coordinate system; displacements
            # leave the decoder in data units
            disp = T.mul_scalar(self.gamma(h), 1.0 / self.config.input_scale)
            pos = T.add(pos, disp)
            disp_steps.append(disp)
            pos_steps.append(pos)
            x_in = disp
        return T.concat(pos_steps, axis=1), disp_steps, pos_steps

    def named_parameters(self, prefix):
        out = self.init_mlp.named_parameters(f"{prefix}.init_mlp")
        out.update(self.embed.named_parameters(f"{prefix}.embed"))
        out.update(self.cell.named_parameters(f"{prefix}.cell"))
        out.update(self.gamma.named_parameters(f"{prefix}.gamma"))
        return out


# ---------------------------------------------------------------------------
# generator and discriminator

class Generator:
    def __init__(self, config, rng):
        config.validate()
        self.config = config
        self.encoder = SequenceEncoder(config, rng)
        self.pooling = PoolingModule(config, rng)
        self.decoder = Decoder(config, rng)

    def named_parameters(self):
        out = self.encoder.named_parameters("encoder")
        out.update(self.pooling.named_parameters("pooling"))
        out.update(self.decoder.named_parameters("decoder"))
        return out

    def parameters(self):
        return list(self.named_parameters().values())


class Discriminator:
    """Encodes a whole (observed + future) trajectory with its own encoder
    and classifies it real/fake through an MLP and sigmoid.
    """

    def __init__(self, config, rng):
        config.validate()
        self.config = config
        self.encoder = SequenceEncoder(config, rng)
        dims = (config.hidden_dim,) + config.classifier_mlp_hidden + (1,)
        self.classifier = MLP(dims, rng, config.activation, config.leaky_slope)

    def score_steps(self, disp_steps, onehots, expected_len=None):
        if expected_len is not None and len(disp_steps) != expected_len:
            raise ContractError(f"discriminator expected {expected_len} steps, "
                                f"got {len(disp_steps)}")
        hidden = self.encoder.encode(disp_steps, onehots)
        return T.sigmoid(self.classifier(hidden))

    def named_parameters(self):
        out = self.encoder.named_parameters("encoder")
        out.update(self.classifier.named_parameters("classifier"))
        return out

    def parameters(self):
        return list(self.named_parameters().values())


def build_generator(config, seed):
    return Generator(config, np.random.default_rng(seed))


def build_discriminator(config, seed):
    return Discriminator(config, np.random.default_rng(seed))


def observed_displacements(window):
    """(N, t_obs, 2) displacement inputs, zero at the first step."""
    d = np.zeros_like(window.observed)
    d[:, 1:] = np.diff(window.observed, axis=1)
    return d


def full_displacements(window):
    """Displacements over the whole 20-step trajectory, zero first."""
    pts = window.points()
    d = np.zeros_like(pts)
    d[:, 1:] = np.diff(pts, axis=1)
    return d


@dataclass
class PredictionSet:
    """k sampled future trajectories per agent plus the noise that made them.

    ``traj`` holds absolute positions as a (n_agents*k, 2*t_pred) tensor with
    rows grouped agent-major: row i*k + j is sample j of agent i.
    """

    n_agents: int
    k: int
    t_pred: int
    noise: np.ndarray  # (n_agents, k, noise_dim)
    traj: Tensor
    disp_steps: list = field(default_factory=list)

    def trajectories(self):
        """(n_agents, k, t_pred, 2) predicted absolute positions."""
        return self.traj.data.reshape(self.n_agents, self.k, self.t_pred, 2)


def draw_noise(rng, n_agents, k, noise_dim):
    """Sample-major draws so the first samples coincide across different k."""
    samples = [rng.standard_normal((n_agents, noise_dim)) for _ in range(k)]
    return np.stack(samples, axis=1)


def generator_forward(gen, window, k=None, rng=None, z=None, t_pred=None):
    """Encode a window once, pool once, decode k noise samples per agent.

    ``z`` overrides the noise with a given (n_agents, k, noise_dim) array;
    otherwise ``rng`` supplies it.
    """
    cfg = gen.config
    k = cfg.k_samples if k is None else k
    if k < 1:
        raise ContractError(f"need k >= 1 samples, got {k}")
    n = window.n_agents
    t_pred = window.t_pred if t_pred is None else t_pred
    if z is None:
        if rng is None:
            raise ContractError("generator_forward needs either rng or z")
        z = draw_noise(rng, n, k, cfg.noise_dim)
    z = np.asarray(z, dtype=float)
    if z.shape != (n, k, cfg.noise_dim):
        raise ContractError(f"noise shape {z.shape} != {(n, k, cfg.noise_dim)}")

    obs_disp = observed_displacements(window)
    steps = [T.constant(obs_disp[:, t]) for t in range(window.t_obs)]
    onehots = T.constant(window.onehots())
    hidden = gen.encoder.encode(steps, onehots)
    pooled = gen.pooling(hidden, window.observed[:, -1])

    idx = np.repeat(np.arange(n), k)
    traj, disp_steps, _ = gen.decoder.decode(
        T.take_rows(hidden, idx), T.take_rows(pooled, idx),
        T.constant(z.reshape(n * k, cfg.noise_dim)),
        window.observed[idx, -1],
        window.observed[idx, -1] - window.observed[idx, -2],
        t_pred)
    return PredictionSet(n, k, t_pred, z, traj, disp_steps)


def score_real(disc, window):
    """Discriminator scores for the window's true trajectories, (N, 1) in (0,1)."""
    d = full_displacements(window)
    steps = [T.constant(d[:, t]) for t in range(d.shape[1])]
    return disc.score_steps(steps, T.constant(window.onehots()),
                            expected_len=window.t_obs + window.t_pred)


def score_fake(disc, window, preds, sample=0):
    """Scores for one generated sample per agent, gradients flowing to the
    generator through the predicted displacements.
    """
    if not 0 <= sample < preds.k:
        raise ContractError(f"sample {sample} out of range for k={preds.k}")
    n = window.n_agents
    rows = [i * preds.k + sample for i in range(n)]
    obs_disp = observed_displacements(window)
    steps = [T.constant(obs_disp[:, t]) for t in range(window.t_obs)]
    steps += [T.take_rows(d, rows) for d in preds.disp_steps]
    return disc.score_steps(steps, T.constant(window.onehots()),
                            expected_len=window.t_obs + preds.t_pred)


def class_embedding_matrix(gen):
    """Embedding of each class one-hot, rows in canonical class order."""
    enc = gen.encoder
    if enc.class_embed is None:
        raise LabelsUnavailableError("model was built without class labels")
    with T.no_grad():
        return enc.class_embed(T.constant(np.eye(N_CLASSES))).data.copy()


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def _params_payload(named):
    return {name: {"shape": list(p.data.shape), "values": p.data.reshape(-1).tolist()}
            for name, p in sorted(named.items())}


def save_checkpoint(path, gen, disc=None, config_dict=None, meta=None):
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": config_dict or {},
        "meta": meta or {},
        "generator": _params_payload(gen.named_parameters()),
        "discriminator": _params_payload(disc.named_parameters()) if disc else None,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint_payload(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {version!r}; "
                              f"this build reads version {CHECKPOINT_VERSION}")
    return payload


def _load_params(named, stored, version):
    missing = sorted(set(named) ^ set(stored))
    if missing:
        raise CheckpointError(f"checkpoint (version {version}) parameter names do not "
                              f"match the model: {missing[:6]}")
    for name, p in named.items():
        rec = stored[name]
        shape = tuple(rec["shape"])
        if shape != p.data.shape:
            raise CheckpointError(f"checkpoint (version {version}) shape {shape} for "
                                  f"{name!r} does not match model shape {p.data.shape}")
        p.data = np.asarray(rec["values"], dtype=float).reshape(shape)


def load_models(payload, gen, disc=None):
    """Assign checkpoint values into freshly built models (shape-checked)."""
    version = payload["format_version"]
    _load_params(gen.named_parameters(), payload["generator"], version)
    if disc is not None:
        if payload.get("discriminator") is None:
            raise CheckpointError("checkpoint holds no discriminator parameters")
        _load_params(disc.named_parameters(), payload["discriminator"], version)
