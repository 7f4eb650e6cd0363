import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'insecure-dev-key-change-me')

DEBUG = os.environ.get('DEBUG', 'False').lower() in ('true', '1', 'yes')

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'cdn',
]

# No models: the app keeps its state in JSON and CSV files
DATABASES = {}

LANGUAGE_CODE = 'en-gb'
TIME_ZONE = 'Europe/London'
USE_I18N = False
USE_TZ = True

# --- App-specific settings ---

CDN = {
    # Worker cap for experiment trials
    'THREADS': max(1, int(os.environ.get('CDN_THREADS', '1'))),
    'EXPERIMENT_RANGES': os.environ.get(
        'CDN_EXPERIMENT_RANGES', str(BASE_DIR / 'cdn' / 'data' / 'experiments.yaml'),
    ),
}

# Logging: send cdn app progress to stdout
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
        },
    },
    'loggers': {
        'cdn': {
            'handlers': ['console'],
            'level': os.environ.get('CDN_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
