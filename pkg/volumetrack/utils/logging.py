import logging.config

from volumetrack.config import Settings, get_settings


def configure_logging(settings: Settings | None = None) -> None:
    settings = settings or get_settings()
    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {"generic": {"format": settings.LOG_FORMAT, "datefmt": "%H:%M:%S"}},
            "handlers": {
                "console": {
                    "class": "logging.StreamHandler",
                    "stream": "ext://sys.stderr",
                    "formatter": "generic",
                }
            },
            "loggers": {
                "volumetrack": {"level": settings.LOG_LEVEL, "handlers": ["console"], "propagate": False},
                "uvicorn": {"level": "INFO"},
            },
            "root": {"level": "WARNING", "handlers": ["console"]},
        }
    )
