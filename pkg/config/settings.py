"""
Django settings for the electrode imputation project.

The project has no web surface and no database: Django provides settings,
logging configuration, the management-command surface and the test runner.

Values that vary per machine are read from the environment (or a .env file)
through python-decouple.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='neural-imputation-offline-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'neural_imputation',
]

# Pure computation; nothing is persisted through the ORM.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Experiment configuration

# Parent directory of every run directory
IMPUTATION_RUN_ROOT = config('IMPUTATION_RUN_ROOT', default=str(BASE_DIR / 'runs'), cast=Path)

# Global seed used when --seed is not given
IMPUTATION_DEFAULT_SEED = config('IMPUTATION_DEFAULT_SEED', default=0, cast=int)

# Enables the training-based acceptance tests (minutes of CPU time)
IMPUTATION_SLOW_TESTS = config('IMPUTATION_SLOW_TESTS', default=False, cast=bool)

# Worker count for random forest fitting; 1 keeps runs byte-reproducible
IMPUTATION_FOREST_JOBS = config('IMPUTATION_FOREST_JOBS', default=1, cast=int)

IMPUTATION_LOG_LEVEL = config('IMPUTATION_LOG_LEVEL', default='INFO')


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'standard',
        },
    },
    'loggers': {
        'neural_imputation': {
            'handlers': ['console'],
            'level': IMPUTATION_LOG_LEVEL,
            'propagate': False,
        },
    },
}
