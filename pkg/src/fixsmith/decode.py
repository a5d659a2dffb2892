"""Candidate generation: Gumbel categorical sampling and beam search.

Both samplers draw latent vectors from the standard-normal prior, free-run
the decoder, and parse each emitted sequence into a CandidateFix.  Emissions
are forced to terminate with _eos_ at the length cap so every raw sequence
ends with the terminator.  Draws use per-candidate RNG streams spawned from
the caller's generator, so results replay regardless of batching or thread
schedule.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lang import DEFAULT_VOCAB, Vocabulary
from .net.model import (EOS_ID, PAD_ID, SOS_ID, CodeVector, ModelConfig,
                        ModelParameters, decoder_start, decoder_step)
from .net.tape import Tensor
from .net import tape as T
from .objective import NLL_FLOOR, ConfigError


class DecodeMode(Enum):
    GUMBEL = "gumbel"
    BEAM = "beam"


@dataclass(frozen=True)
class CandidateFix:
    """One emitted fix: raw token ids (always _eos_-terminated), the parsed
    line number and corrected-line tokens, and the sum of emitted log-probs.

    line_no is None both for the explicit no-fix emission (raw == [_eos_])
    and for malformed emissions without a leading LINE_k token; the repair
    oracle skips those but they still count against the sample budget.
    """

    raw: tuple[int, ...]
    line_no: int | None
    tokens: tuple[int, ...]
    score: float

    @property
    def is_no_fix(self) -> bool:
        return self.raw == (EOS_ID,)

    @classmethod
    def from_raw(cls, raw: tuple[int, ...], score: float,
                 vocab: Vocabulary = DEFAULT_VOCAB) -> "CandidateFix":
        if not raw or raw[-1] != EOS_ID:
            raise ValueError("raw candidate sequence must end with _eos_")
        if raw == (EOS_ID,):
            return cls(raw, None, (), score)
        line_no = vocab.line_no_of(raw[0])
        if line_no is None:
            return cls(raw, None, (), score)
        return cls(raw, line_no, tuple(raw[1:-1]), score)


@dataclass
class DecodePlan:
    mode: DecodeMode = DecodeMode.GUMBEL
    temperature: float = 1.0
    beam_width: int = 5
    n_z: int = 20
    T_infer: int = 100

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.T_infer < 1 or self.beam_width < 1 or self.n_z < 1:
            raise ConfigError("T_infer, beam_width and n_z must be >= 1")
        if self.mode is DecodeMode.BEAM and self.beam_width * self.n_z < self.T_infer:
            raise ConfigError("beam_width * n_z must cover T_infer candidates")


def gumbel_sample_step(logits, temperature: float, rng: np.random.Generator) -> int:
    """Sample a token id as argmax(logits / temperature + Gumbel noise).

    At temperature 1 this is exact categorical sampling from
    softmax(logits) by the Gumbel-max identity; as temperature -> 0 it
    degenerates to the plain argmax.
    """
    values = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    values = values.reshape(-1)
    noise = rng.gumbel(0.0, 1.0, size=values.shape)
    return int(np.argmax(values / temperature + noise))


def _log_probs(probs: Tensor) -> np.ndarray:
    return np.log(np.maximum(probs.data, NLL_FLOOR))


def sample_candidates(params: ModelParameters, cfg: ModelConfig, v: CodeVector,
                      plan: DecodePlan, rng: np.random.Generator,
                      vocab: Vocabulary = DEFAULT_VOCAB) -> list[CandidateFix]:
    """T_infer independent draws: z from the prior, per-step Gumbel sampling.

    Candidates are returned in draw order.  Stream i feeds draw i only, so a
    replay with the same root generator reproduces the list exactly.
    """
    if plan.mode is not DecodeMode.GUMBEL:
        raise ConfigError("sample_candidates requires a Gumbel-mode plan")
    B = plan.T_infer
    streams = rng.spawn(B)
    z = np.stack([s.standard_normal(cfg.latent_dim) for s in streams])
    v_rows = Tensor(np.repeat(v.v.data, B, axis=0))
    state = decoder_start(params, cfg, v_rows, Tensor(z))
    prev = np.full(B, SOS_ID, dtype=np.int64)
    alive = np.ones(B, dtype=bool)
    raws: list[list[int]] = [[] for _ in range(B)]
    scores = np.zeros(B)
    for step in range(cfg.max_decode_len):
        probs, logits, _, state = decoder_step(params, cfg, state, prev, v.context)
        logp = _log_probs(probs)
        force_eos = step == cfg.max_decode_len - 1
        nxt = np.full(B, PAD_ID, dtype=np.int64)
        for i in range(B):
            if not alive[i]:
                continue
            tok = EOS_ID if force_eos else gumbel_sample_step(
                logits.data[i], plan.temperature, streams[i])
            raws[i].append(tok)
            scores[i] += logp[i, tok]
            if tok == EOS_ID:
                alive[i] = False
            else:
                nxt[i] = tok
        prev = nxt
        if not alive.any():
            break
    return [CandidateFix.from_raw(tuple(raws[i]), float(scores[i]), vocab)
            for i in range(B)]


def _reorder(state_rows: list[Tensor], idx: np.ndarray) -> list[Tensor]:
    return [T.gather_rows(rows, idx) for rows in state_rows]


def _beam_single(params: ModelParameters, cfg: ModelConfig, v: CodeVector,
                 z: np.ndarray, width: int) -> list[tuple[tuple[int, ...], float, float]]:
    """Beam search for one latent draw.

    Alive beams always share their emitted length, so pruning by cumulative
    log-probability is equivalent to pruning by the normalized score; the
    per-z pool is then ranked length-normalized and truncated to the width.
    Returns (raw sequence, summed log-prob, normalized score) triples.
    """
    from .net.model import DecoderState

    v_rows = Tensor(v.v.data)
    state = decoder_start(params, cfg, v_rows, Tensor(z.reshape(1, -1)))
    prefixes: list[tuple[int, ...]] = [()]
    cums = np.zeros(1)
    prev = np.array([SOS_ID], dtype=np.int64)
    finished: list[tuple[tuple[int, ...], float, float]] = []
    for step in range(cfg.max_decode_len):
        probs, _, _, state = decoder_step(params, cfg, state, prev, v.context)
        logp = _log_probs(probs)
        new_len = step + 1
        if step == cfg.max_decode_len - 1:
            for i, prefix in enumerate(prefixes):
                total = cums[i] + logp[i, EOS_ID]
                finished.append((prefix + (EOS_ID,), float(total), float(total) / new_len))
            break
        flat = (cums[:, None] + logp).ravel()
        order = np.argsort(-flat, kind="stable")[:width]
        keep_rows, keep_prefixes, keep_cums, keep_prev = [], [], [], []
        for flat_idx in order:
            beam_idx, tok = divmod(int(flat_idx), cfg.vocab_size)
            total = float(flat[flat_idx])
            if tok == EOS_ID:
                finished.append((prefixes[beam_idx] + (EOS_ID,), total, total / new_len))
            else:
                keep_rows.append(beam_idx)
                keep_prefixes.append(prefixes[beam_idx] + (tok,))
                keep_cums.append(total)
                keep_prev.append(tok)
        if not keep_rows:
            break
        idx = np.asarray(keep_rows)
        state = DecoderState(h=_reorder(state.h, idx), c=_reorder(state.c, idx))
        prefixes = keep_prefixes
        cums = np.asarray(keep_cums)
        prev = np.asarray(keep_prev, dtype=np.int64)
    finished.sort(key=lambda item: -item[2])  # stable: ties keep finish order
    return finished[:width]


def beam_candidates(params: ModelParameters, cfg: ModelConfig, v: CodeVector,
                    plan: DecodePlan, rng: np.random.Generator,
                    vocab: Vocabulary = DEFAULT_VOCAB) -> list[CandidateFix]:
    """Merged beam pools over n_z prior draws: deduplicated by raw sequence,
    sorted by summed log-probability descending, truncated to T_infer."""
    if plan.mode is not DecodeMode.BEAM:
        raise ConfigError("beam_candidates requires a Beam-mode plan")
    streams = rng.spawn(plan.n_z)
    pool: list[tuple[tuple[int, ...], float]] = []
    for stream in streams:
        z = stream.standard_normal(cfg.latent_dim)
        pool.extend((raw, score) for raw, score, _ in
                    _beam_single(params, cfg, v, z, plan.beam_width))
    pool.sort(key=lambda item: -item[1])  # stable: ties keep z order
    seen: set[tuple[int, ...]] = set()
    out: list[CandidateFix] = []
    for raw, score in pool:
        if raw in seen:
            continue
        seen.add(raw)
        out.append(CandidateFix.from_raw(raw, score, vocab))
        if len(out) == plan.T_infer:
            break
    return out
