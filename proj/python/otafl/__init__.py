"""Over-the-air federated learning link-level simulator."""

from ._otafl import (
    ConfigError,
    DimensionError,
    Scenario,
    aggregate_ota,
    codec_round_trip,
    digital_slots,
    digital_slots_raw,
    draw_offsets,
    energy_gain,
    gold_sequence,
    ofdm_demodulate,
    ofdm_modulate,
    ota_slots,
    run_scenario,
    slot_plan,
    spectrum_gain,
    sync_sweep,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "Scenario",
    "aggregate_ota",
    "codec_round_trip",
    "digital_slots",
    "digital_slots_raw",
    "draw_offsets",
    "energy_gain",
    "gold_sequence",
    "ofdm_demodulate",
    "ofdm_modulate",
    "ota_slots",
    "run_scenario",
    "slot_plan",
    "spectrum_gain",
    "sync_sweep",
]
