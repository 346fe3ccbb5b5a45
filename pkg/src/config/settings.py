"""Typed runtime settings for the command-line front-end."""
from dataclasses import dataclass
import os
from dotenv import load_dotenv


@dataclass(frozen=True)
class Settings:
    # Output
    output_dir: str = "data/output"
    output_format: str = "both"

    # Runtime
    threads: int = 1
    log_level: str = "INFO"

    @staticmethod
    def load() -> "Settings":
        load_dotenv()
        return Settings(
            output_dir=os.getenv("OUTPUT_DIR", "data/output"),
            output_format=os.getenv("OUTPUT_FORMAT", "both"),
            threads=max(1, int(os.getenv("THREADS", "1"))),
            log_level=os.getenv("LOG_LEVEL", "INFO"),
        )
