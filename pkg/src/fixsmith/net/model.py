"""The conditional sequence model: encoder, recognition network, decoder.

Architecture: token embedding shared across the three networks, multi-layer
LSTM stacks, dot-product attention from the decoder over encoder states, and
a recognition network that maps (fix, code vector) to a diagonal Gaussian
over the latent space.  The latent sample and the code vector are
concatenated and projected to the initial LSTM state of every decoder layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tape as T
from .tape import ShapeError, Tensor

# The vocabulary layout pins the special tokens to fixed ids (see lang.Vocabulary).
PAD_ID = 0
EOS_ID = 1
SOS_ID = 2


@dataclass
class ModelConfig:
    vocab_size: int
    embed_dim: int = 50
    hidden_dim: int = 64
    n_layers: int = 2
    latent_dim: int = 32
    dropout: float = 0.2
    max_decode_len: int = 32

    def __post_init__(self) -> None:
        for name in ("vocab_size", "embed_dim", "hidden_dim", "n_layers",
                     "latent_dim", "max_decode_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def _shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes, in the canonical (checkpoint) order."""
    V, E, H, L, Z = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim,
                     cfg.n_layers, cfg.latent_dim)
    out: list[tuple[str, tuple[int, ...]]] = [("embed", (V, E))]
    for stack in ("enc", "rec"):
        for layer in range(L):
            in_dim = E if layer == 0 else H
            out.append((f"{stack}.l{layer}.W", (in_dim + H, 4 * H)))
            out.append((f"{stack}.l{layer}.b", (4 * H,)))
    out.append(("rec.mu.W", (2 * H, Z)))
    out.append(("rec.mu.b", (Z,)))
    out.append(("rec.logvar.W", (2 * H, Z)))
    out.append(("rec.logvar.b", (Z,)))
    for layer in range(L):
        out.append((f"dec.init.l{layer}.W", (H + Z, 2 * H)))
        out.append((f"dec.init.l{layer}.b", (2 * H,)))
    for layer in range(L):
        in_dim = E if layer == 0 else H
        out.append((f"dec.l{layer}.W", (in_dim + H, 4 * H)))
        out.append((f"dec.l{layer}.b", (4 * H,)))
    out.append(("dec.comb.W", (2 * H, H)))
    out.append(("dec.comb.b", (H,)))
    out.append(("dec.out.W", (H, V)))
    out.append(("dec.out.b", (V,)))
    return out


def parameter_count(cfg: ModelConfig) -> int:
    """Total scalar parameters; a pure function of the config."""
    return sum(int(np.prod(shape)) for _, shape in _shapes(cfg))


class ModelParameters:
    """Named parameter Tensors (theta and phi) with a stable ordering."""

    def __init__(self, cfg: ModelConfig, arrays: dict[str, np.ndarray]):
        self.cfg = cfg
        expected = _shapes(cfg)
        if [n for n, _ in expected] != list(arrays.keys()):
            raise ShapeError("parameter names do not match the config layout")
        for name, shape in expected:
            if arrays[name].shape != shape:
                raise ShapeError(f"{name}: expected {shape}, got {arrays[name].shape}")
            if not np.all(np.isfinite(arrays[name])):
                raise ValueError(f"{name}: non-finite entries")
        self._tensors = {name: Tensor(arrays[name]) for name, _ in expected}

    @classmethod
    def init(cls, cfg: ModelConfig, rng: np.random.Generator) -> "ModelParameters":
        """Xavier-uniform matrices, zero biases, LSTM forget-gate bias 1."""
        arrays: dict[str, np.ndarray] = {}
        for name, shape in _shapes(cfg):
            if name.endswith(".b"):
                b = np.zeros(shape)
                if ".l" in name and not name.startswith("dec.init"):
                    H = cfg.hidden_dim
                    b[H:2 * H] = 1.0
                arrays[name] = b
            else:
                fan_in, fan_out = (shape[0], shape[1]) if len(shape) == 2 else (shape[0], 1)
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                arrays[name] = rng.uniform(-limit, limit, size=shape)
        return cls(cfg, arrays)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    @property
    def names(self) -> list[str]:
        return list(self._tensors.keys())

    @property
    def n_params(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._tensors.items()}

    def grads(self) -> dict[str, np.ndarray]:
        """Gradient per parameter; zeros where the loss did not touch it."""
        return {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for name, t in self._tensors.items()}

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.cfg, {n: t.data.copy() for n, t in self._tensors.items()})


@dataclass
class CodeVector:
    """Encoder summary v plus the per-token states attention looks at."""

    v: Tensor           # (1, hidden_dim)
    context: Tensor     # (input_len, hidden_dim)


@dataclass
class LatentGaussian:
    mu: Tensor          # (1, latent_dim)
    log_var: Tensor     # (1, latent_dim)

    def sample(self, eps: np.ndarray) -> Tensor:
        """Reparameterized draw mu + sigma * eps; eps == 0 returns mu exactly."""
        if not np.any(eps):
            return self.mu
        sigma = T.exp(self.log_var * 0.5)
        return self.mu + sigma * np.asarray(eps, dtype=np.float64).reshape(self.mu.shape)


@dataclass
class DistributionSeq:
    """Per-step decoder output: probability rows, their logits, attention."""

    probs: list[Tensor] = field(default_factory=list)      # each (B, vocab)
    logits: list[Tensor] = field(default_factory=list)
    attention: list[Tensor] = field(default_factory=list)  # each (B, input_len)
    tokens: list[int] = field(default_factory=list)        # free-run emissions

    def __len__(self) -> int:
        return len(self.probs)


def _check_ids(ids: np.ndarray, vocab_size: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise ShapeError(f"token id outside vocabulary of size {vocab_size}")
    return ids


def _run_stack(params: ModelParameters, cfg: ModelConfig, stack: str,
               emb: Tensor, train: bool, rng: np.random.Generator | None) -> Tensor:
    """Run an LSTM stack over a (L, in_dim) sequence; returns (L, hidden) states."""
    H = cfg.hidden_dim
    seq_len = emb.data.shape[0]
    inputs = emb
    for layer in range(cfg.n_layers):
        W = params[f"{stack}.l{layer}.W"]
        b = params[f"{stack}.l{layer}.b"]
        h = Tensor(np.zeros((1, H)))
        c = Tensor(np.zeros((1, H)))
        outputs = []
        for t in range(seq_len):
            x_t = inputs[t:t + 1]
            a = T.concat([x_t, h], axis=1) @ W + b
            h, c = T.lstm_cell(a, c, H)
            outputs.append(h)
        inputs = T.concat(outputs, axis=0) if len(outputs) > 1 else outputs[0]
        if train and layer + 1 < cfg.n_layers:
            inputs = T.dropout(inputs, cfg.dropout, rng)
    return inputs


def encode_program(params: ModelParameters, cfg: ModelConfig, token_ids,
                   train: bool = False,
                   rng: np.random.Generator | None = None) -> CodeVector:
    """Encode the conditioning program into a code vector plus attention context.

    An empty token sequence is encoded as a single PAD token so the context
    is never empty.
    """
    ids = _check_ids(token_ids, cfg.vocab_size)
    if ids.size == 0:
        ids = np.array([PAD_ID], dtype=np.int64)
    emb = T.gather_rows(params["embed"], ids)
    context = _run_stack(params, cfg, "enc", emb, train, rng)
    v = context[len(ids) - 1:len(ids)]
    return CodeVector(v=v, context=context)


def recognize(params: ModelParameters, cfg: ModelConfig, v: CodeVector, y_ids,
              train: bool = True,
              rng: np.random.Generator | None = None) -> LatentGaussian:
    """Approximate posterior over z from the fix sequence and the code vector."""
    ids = _check_ids(y_ids, cfg.vocab_size)
    if ids.size == 0:
        ids = np.array([EOS_ID], dtype=np.int64)
    emb = T.gather_rows(params["embed"], ids)
    states = _run_stack(params, cfg, "rec", emb, train, rng)
    r = states[len(ids) - 1:len(ids)]
    joint = T.concat([r, v.v], axis=1)
    mu = joint @ params["rec.mu.W"] + params["rec.mu.b"]
    log_var = joint @ params["rec.logvar.W"] + params["rec.logvar.b"]
    return LatentGaussian(mu=mu, log_var=log_var)


@dataclass
class DecoderState:
    h: list[Tensor]  # per layer, (B, hidden)
    c: list[Tensor]


def decoder_start(params: ModelParameters, cfg: ModelConfig,
                  v_rows: Tensor, z_rows: Tensor) -> DecoderState:
    """Initial decoder state from [v; z] rows; supports batched rows."""
    H = cfg.hidden_dim
    s = T.concat([v_rows, z_rows], axis=1)
    hs, cs = [], []
    for layer in range(cfg.n_layers):
        hc = T.tanh(s @ params[f"dec.init.l{layer}.W"] + params[f"dec.init.l{layer}.b"])
        hs.append(hc[:, :H])
        cs.append(hc[:, H:])
    return DecoderState(h=hs, c=cs)


def decoder_step(params: ModelParameters, cfg: ModelConfig, state: DecoderState,
                 prev_ids, context: Tensor, train: bool = False,
                 rng: np.random.Generator | None = None
                 ) -> tuple[Tensor, Tensor, Tensor, DecoderState]:
    """One decode step; returns (probs, logits, attention, new state)."""
    ids = _check_ids(prev_ids, cfg.vocab_size)
    H = cfg.hidden_dim
    x = T.gather_rows(params["embed"], ids)
    new_h, new_c = [], []
    inp = x
    for layer in range(cfg.n_layers):
        W = params[f"dec.l{layer}.W"]
        b = params[f"dec.l{layer}.b"]
        a = T.concat([inp, state.h[layer]], axis=1) @ W + b
        h, c = T.lstm_cell(a, state.c[layer], H)
        new_h.append(h)
        new_c.append(c)
        inp = h
        if train and layer + 1 < cfg.n_layers:
            inp = T.dropout(inp, cfg.dropout, rng)
    top = new_h[-1]
    scores = top @ T.transpose(context)
    attn = T.softmax(scores, axis=-1)
    ctx = attn @ context
    comb = T.tanh(T.concat([top, ctx], axis=1) @ params["dec.comb.W"] + params["dec.comb.b"])
    logits = comb @ params["dec.out.W"] + params["dec.out.b"]
    probs = T.softmax(logits, axis=-1)
    return probs, logits, attn, DecoderState(h=new_h, c=new_c)


def decode(params: ModelParameters, cfg: ModelConfig, v: CodeVector, z,
           teacher=None, train: bool = False,
           rng: np.random.Generator | None = None,
           max_len: int | None = None) -> DistributionSeq:
    """Decode conditioned on (v, z): teacher-forced when a target is given,
    otherwise greedy free-running until _eos_ or the length cap."""
    if isinstance(z, Tensor):
        z_row = z
    else:
        z_row = Tensor(np.asarray(z, dtype=np.float64).reshape(1, -1))
    if z_row.data.shape[1] != cfg.latent_dim:
        raise ShapeError(f"z must have {cfg.latent_dim} entries")
    state = decoder_start(params, cfg, v.v, z_row)
    out = DistributionSeq()
    if teacher is not None:
        teacher = _check_ids(teacher, cfg.vocab_size)
        prev = SOS_ID
        for t in range(len(teacher)):
            probs, logits, attn, state = decoder_step(
                params, cfg, state, np.array([prev]), v.context, train, rng)
            out.probs.append(probs)
            out.logits.append(logits)
            out.attention.append(attn)
            prev = int(teacher[t])
        return out
    limit = max_len if max_len is not None else cfg.max_decode_len
    prev = SOS_ID
    for _ in range(limit):
        probs, logits, attn, state = decoder_step(
            params, cfg, state, np.array([prev]), v.context, train, rng)
        out.probs.append(probs)
        out.logits.append(logits)
        out.attention.append(attn)
        tok = int(np.argmax(probs.data[0]))
        out.tokens.append(tok)
        if tok == EOS_ID:
            break
        prev = tok
    return out
