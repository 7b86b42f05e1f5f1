"""
Django settings for the spinlab backend.

spinlab has no web surface: Django provides configuration, the ORM that
stores run manifests, and the management-command runner behind every
campaign subcommand. Numerical knobs live under the SPINLAB_ prefix and can
be overridden from the environment or a project-level .env file.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

SETTINGS_FILE = Path(__file__).resolve()
PROJECT_ROOT = SETTINGS_FILE.parent.parent.parent  # spinlab -> backend -> project_root
load_dotenv(PROJECT_ROOT / ".env", override=False)

# backend/
BASE_DIR = Path(__file__).resolve().parent.parent

LOG_JSON = os.getenv("LOG_JSON", "1") == "1"
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "dev-unsafe")
DEBUG = os.getenv("DJANGO_DEBUG", "0") == "1"
ALLOWED_HOSTS: list[str] = []

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    # project apps
    "lattice",
    "hilbert",
    "hamiltonians",
    "spectral",
    "symmetry",
    "ssep",
    "dynamics",
    "perturbation",
    "droplets",
    "runs.apps.RunsConfig",
]

# Run manifests only; a local sqlite file is enough.
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.getenv("SQLITE_PATH", str(BASE_DIR / "spinlab.sqlite3")),
    }
}

LANGUAGE_CODE = "en-us"
TIME_ZONE = os.getenv("TIME_ZONE", "UTC")
USE_I18N = False
USE_TZ = True
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# --- Celery: campaigns can be queued on a worker; local runs execute eagerly ---
CELERY_BROKER_URL = os.getenv("CELERY_BROKER_URL", "redis://127.0.0.1:6379/0")
CELERY_RESULT_BACKEND = os.getenv("CELERY_RESULT_BACKEND", "redis://127.0.0.1:6379/1")
CELERY_TIMEZONE = TIME_ZONE

# --- Logging ---
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "json": {"()": "spinlab.logging.JsonFormatter"},
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "json" if LOG_JSON else "plain",
        },
    },
    "root": {"handlers": ["console"], "level": LOG_LEVEL},
}

# --- Numerical defaults ---
SPINLAB_DENSE_CUTOFF = int(os.getenv("SPINLAB_DENSE_CUTOFF", "4096"))
SPINLAB_DEGENERACY_TOL = float(os.getenv("SPINLAB_DEGENERACY_TOL", "1e-8"))
SPINLAB_HERMITIAN_TOL = float(os.getenv("SPINLAB_HERMITIAN_TOL", "1e-12"))
SPINLAB_ZERO_TOL = float(os.getenv("SPINLAB_ZERO_TOL", "1e-15"))
SPINLAB_LANCZOS_MAXITER = int(os.getenv("SPINLAB_LANCZOS_MAXITER", "2000"))
SPINLAB_LANCZOS_TOL = float(os.getenv("SPINLAB_LANCZOS_TOL", "1e-10"))
SPINLAB_SCAN_CUTOFF = int(os.getenv("SPINLAB_SCAN_CUTOFF", str(2**22)))
SPINLAB_SECTOR_CUTOFF = int(os.getenv("SPINLAB_SECTOR_CUTOFF", str(2**20)))
SPINLAB_THREADS = int(os.getenv("SPINLAB_THREADS", "1"))
SPINLAB_OUTPUT_DIR = Path(os.getenv("SPINLAB_OUTPUT_DIR", str(BASE_DIR / "runs_out")))

# ------------------------------------------------------------------------------
# Single-file environment profile
# ------------------------------------------------------------------------------
SPINLAB_ENV = (os.getenv("SPINLAB_ENV") or "local").lower()

if SPINLAB_ENV == "local":
    DEBUG = True
    # no broker needed on a workstation
    CELERY_TASK_ALWAYS_EAGER = os.getenv("CELERY_TASK_ALWAYS_EAGER", "1") == "1"
elif SPINLAB_ENV in {"worker", "production"}:
    DEBUG = False
    CELERY_TASK_ALWAYS_EAGER = os.getenv("CELERY_TASK_ALWAYS_EAGER", "0") == "1"
else:
    raise RuntimeError(f"Unknown SPINLAB_ENV={SPINLAB_ENV!r}")
