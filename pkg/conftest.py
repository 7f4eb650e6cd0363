"""Root conftest: pin numerical settings for the whole test run."""

import django.conf


def pytest_configure(config):
    """Run experiments single-threaded so CSV output is reproducible in tests."""
    settings = django.conf.settings
    if hasattr(settings, 'CDN'):
        settings.CDN['THREADS'] = 1
