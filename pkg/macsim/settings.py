"""
Django settings for the macsim project.

Only the parts of Django the project needs are switched on: the ORM (for the run registry),
management commands and the test runner. There are no URLs, templates or middleware.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.0/ref/settings/
"""

import os

# Build paths inside the project like this: os.path.join(BASE_DIR, ...)
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

try:
    from .local_settings import *  # noqa: F401,F403
except ImportError:
    pass

# SECURITY WARNING: nothing is served, but Django still insists on a key.
SECRET_KEY = globals().get('LOCAL_SECRET_KEY', 'macsim-insecure-development-key')

DEBUG = globals().get('LOCAL_DEBUG', False)

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    # local apps
    'records',
    'comparison',
    'estimation',
    'simulator',
    'linker',
    'assessment',
    'synthgen',
]

MIDDLEWARE = []

# Database
# The run registry (`assessment.models`) is the only thing stored here.
# https://docs.djangoproject.com/en/4.0/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': globals().get('LOCAL_DB_PATH', os.path.join(BASE_DIR, 'macsim.sqlite3')),
    },
}

DEFAULT_AUTO_FIELD = 'django.db.models.AutoField'

# Internationalization
LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# MaCSim customization settings
# ```````````````````````````````
MACSIM_DEFAULT_CUTOFF = 0.0

MACSIM_DEFAULT_SAMPLES = 1000  # S

MACSIM_DEFAULT_THINNING = 1000  # d

MACSIM_DEFAULT_SEED = 20201

MACSIM_DEFAULT_JOBS = 1

MACSIM_ID_FIELD = 'RECID'

MACSIM_MISSING_TOKEN = ''  # empty CSV field

MACSIM_LOG_LEVEL = globals().get('LOCAL_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': MACSIM_LOG_LEVEL,
            'propagate': False,
        } for app in INSTALLED_APPS
    },
}

# MACSIM_* overrides from local settings win over the defaults above
try:
    from .local_settings import *  # noqa: F401,F403
except ImportError:
    pass
