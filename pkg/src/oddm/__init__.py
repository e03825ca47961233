"""Orthogonal delay-Doppler division multiplexing simulation."""

from .channel import DdChannel, DdPath, NoiseSpec, apply, eva_jakes, random_channel, read_channel_csv, write_channel_csv
from .ddmatrix import DdChannelMatrix, build, phase_term
from .detector import DetectionResult, MpConfig, map_bruteforce, mmse_detect, mp_detect
from .modem import (
    DdFrame,
    Waveform,
    demodulate,
    digital_sequence,
    modulate,
    modulate_filtered,
    otfs_demodulate,
    otfs_digital_sequence,
    otfs_modulate,
)
from .params import GridParams, QamConstellation, SimConfig, derive, read_config, write_config
from .pulse import PulseTrain, ProtoPulse, ambiguity, build_train, design_srrc, orthogonality_audit

__version__ = "0.1.0"

__all__ = [
    "DdChannel", "DdPath", "NoiseSpec", "apply", "eva_jakes", "random_channel",
    "read_channel_csv", "write_channel_csv",
    "DdChannelMatrix", "build", "phase_term",
    "DetectionResult", "MpConfig", "map_bruteforce", "mmse_detect", "mp_detect",
    "DdFrame", "Waveform", "demodulate", "digital_sequence", "modulate", "modulate_filtered",
    "otfs_demodulate", "otfs_digital_sequence", "otfs_modulate",
    "GridParams", "QamConstellation", "SimConfig", "derive", "read_config", "write_config",
    "PulseTrain", "ProtoPulse", "ambiguity", "build_train", "design_srrc", "orthogonality_audit",
]
