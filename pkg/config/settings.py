"""
Django settings for the deformation bench project.

The project has no web surface: it is a single app (`core`) whose services are
driven through management commands. Settings here only carry solver defaults
and logging.
"""

from pathlib import Path

from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='deformation-bench-dev-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS: list[str] = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    # Local
    'core',
]

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

USE_TZ = True


# ── Solver defaults ────────────────────────────────────────────────────────────

DEFORMATION_K_MAX = config('DEFORMATION_K_MAX', default=3, cast=int)
DEFORMATION_T_CAP = config('DEFORMATION_T_CAP', default=2, cast=int)
DEFORMATION_T_NEG = config('DEFORMATION_T_NEG', default=1, cast=int)
DEFORMATION_SEED = config('DEFORMATION_SEED', default=0, cast=int)
DEFORMATION_EXTENSION_ESCALATION = config('DEFORMATION_EXTENSION_ESCALATION', default=4, cast=int)

FIXTURE_DIR = BASE_DIR / 'core' / 'fixtures'


# ── Logging ────────────────────────────────────────────────────────────────────

DEFORMATION_LOG_LEVEL = config('DEFORMATION_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'core': {
            'handlers': ['console'],
            'level': DEFORMATION_LOG_LEVEL,
            'propagate': False,
        },
    },
}
