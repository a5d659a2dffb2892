"""Neural machinery: tape-based reverse-mode autodiff and the seq2seq CVAE."""

from .tape import GraphError, ShapeError, Tape, Tensor, active_tape
from .model import (CodeVector, DistributionSeq, LatentGaussian, ModelConfig,
                    ModelParameters, DecoderState, decode, decoder_start,
                    decoder_step, encode_program, parameter_count, recognize)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "GraphError", "ShapeError", "Tape", "Tensor", "active_tape",
    "CodeVector", "DistributionSeq", "LatentGaussian", "ModelConfig",
    "ModelParameters", "DecoderState", "decode", "decoder_start",
    "decoder_step", "encode_program", "parameter_count", "recognize",
    "load_checkpoint", "save_checkpoint",
]
