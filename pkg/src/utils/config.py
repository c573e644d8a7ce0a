from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional
import os
import logging
from datetime import datetime
import logging.config


def setup_logging(level: Optional[str] = None, log_dir: Optional[str] = None):
    """Set up logging configuration for the entire application"""
    level = (level or settings.LOG_LEVEL).upper()
    log_dir = log_dir if log_dir is not None else settings.LOG_DIR

    handlers = {
        'console': {
            'level': level,
            'class': 'logging.StreamHandler',
            'formatter': 'standard',
            'stream': 'ext://sys.stderr',
        },
    }
    if log_dir:
        # Ensure logs directory exists
        if not os.path.exists(log_dir):
            os.makedirs(log_dir)
        handlers['file'] = {
            'level': level,
            'class': 'logging.FileHandler',
            'filename': f"{log_dir}/app_{datetime.now().strftime('%Y%m%d')}.log",
            'formatter': 'standard'
        }

    logging_config = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'standard': {
                'format': '%(asctime)s - %(levelname)s - %(message)s'
            },
        },
        'handlers': handlers,
        'loggers': {
            '': {  # Root logger
                'handlers': list(handlers),
                'level': level,
                'propagate': True
            }
        }
    }

    logging.config.dictConfig(logging_config)


class Settings(BaseSettings):
    """Application-level settings, read from HQR_* environment variables or .env."""

    model_config = SettingsConfigDict(
        env_prefix="HQR_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )

    PROJECT_NAME: str = "hq-restore"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_DIR: Optional[str] = None  # no file log unless set

    # Verification
    VERIFY_DEFAULT_SEED: int = 1


# Initialize the settings
settings = Settings()
