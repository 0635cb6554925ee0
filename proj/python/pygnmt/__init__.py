# Copyright 2026 The gnmt-desk Authors
# SPDX-License-Identifier: Apache-2.0

"""Python access to the gnmt translation library."""

from ._core import *  # noqa: F401,F403
from ._core import (
    BOS_ID,
    EOS_ID,
    NUM_RESERVED,
    PAD_ID,
    ConfigError,
    DecodeError,
    Error,
    FormatError,
    Model,
    ModelConfig,
    QuantizedModel,
    ScoreParams,
    ShapeError,
    TrainConfig,
    TrainingError,
    UsageError,
    WordpieceVocab,
)

__version__ = "0.1.0"
