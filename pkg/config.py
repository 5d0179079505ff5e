from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    # Storage
    db_path: str = "~/.toric_decoder/runs.db"
    output_dir: str = "runs"

    # Sampling
    default_seed: int = 0
    eval_chunk_size: int = Field(default=4096, ge=1)  # samples per seeded stream

    # Execution (workers=1 keeps everything serial and bit-reproducible)
    workers: int = Field(default=1, ge=1)
    torch_threads: int = Field(default=1, ge=1)

    # Truncated maximum-likelihood decoding refuses enumerations above this size
    mld_budget: int = Field(default=2_000_000, ge=1)

    # Flip tables for every translation are cached up to this lattice size
    equivariance_cache_max_lattice: int = Field(default=9, ge=2)

    log_level: str = "INFO"


settings = Settings()
