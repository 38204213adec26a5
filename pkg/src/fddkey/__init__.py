"""Dual-band channel simulation and learned-mapping secret key generation.

The package covers the full desk-scale pipeline: geometric multipath channel
synthesis on two frequency-duplex bands, realized feature extraction and
min-max normalization, a from-scratch feedforward mapping network, guard-band
Gaussian quantization with index reconciliation, key-quality metrics, a
randomness test suite for 128-bit blocks, and a session/sweep harness.
"""
from __future__ import annotations

from fddkey.channel import (BandConfig, Environment, generate_channel_records,
                            rectangular_grid)
from fddkey.features import (Dataset, MinMaxNormalizer, fit_normalizers,
                             mix_datasets, normalize_dataset, realized_dataset,
                             split_dataset)
from fddkey.harness import (ModelBundle, SessionConfig, SessionResult,
                            SweepResult, min_snr_for_ker, run_session,
                            run_sweep)
from fddkey.mapping import BandMappingNetwork
from fddkey.metrics import ker, kgr, nmse, nvd
from fddkey.quantizer import (QuantConfig, align_keys, default_guard_factor,
                              quantize)
from fddkey.randomness import TestReport, blockify, run_suite

__version__ = "0.1.0"

__all__ = [
    "BandConfig",
    "BandMappingNetwork",
    "Dataset",
    "Environment",
    "MinMaxNormalizer",
    "ModelBundle",
    "QuantConfig",
    "SessionConfig",
    "SessionResult",
    "SweepResult",
    "TestReport",
    "align_keys",
    "blockify",
    "default_guard_factor",
    "fit_normalizers",
    "generate_channel_records",
    "ker",
    "kgr",
    "min_snr_for_ker",
    "mix_datasets",
    "nmse",
    "normalize_dataset",
    "nvd",
    "quantize",
    "realized_dataset",
    "rectangular_grid",
    "run_session",
    "run_suite",
    "run_sweep",
    "split_dataset",
]
