from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="ANTIJAM_"
    )
    environment: str = "development"
    log_dir: str = "logs"

    # Experiment overrides
    seed: int | None = None
    threads: int = 1
