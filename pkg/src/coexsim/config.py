"""Simulator configuration via environment variables."""

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Numerology
    subcarriers: int = 256          # M, DFT size of both users
    cp_ratio: float = 0.125         # cp_len = M * cp_ratio for CP-OFDM
    overlap_factor: int = 4         # K, PHYDYAS prototype length K*M
    sigma_d2: float = 1.0           # symbol variance of every user

    # Monte Carlo
    trials: int = 2000
    seed: int = 0
    measure_symbols: int = 16       # steady-state victim symbols per trial
    min_confident_trials: int = 1000
    trials_per_chunk: int = 64

    # Tables
    l_max: int = 20
    tail_fit_span: int = 10         # entries used by the tail extrapolation fit

    # PSD estimation
    psd_symbols: int = 2000
    psd_overlap: float = 0.5
    psd_trials: int = 4
    psd_segment_symbols: int = 16    # Welch segment = 4*K*M samples for K = 4

    # Coexistence
    guard_ceiling: int = 4096
    bisection_iterations: int = 60

    # Concurrency
    max_workers: int = 8

    # Logging
    log_level: str = "INFO"

    model_config = {"env_prefix": "COEXSIM_", "env_file": ".env", "env_file_encoding": "utf-8"}


settings = Settings()
