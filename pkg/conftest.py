"""Pytest wiring for the Django test suite.

Mirrors what ``python manage.py test`` does: configure settings, set up the
test environment and create the test database before collection, and tear
them down afterwards.
"""
import os

import django


def pytest_configure(config):
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'tomo_ebm.settings')
    django.setup()

    from django.test.utils import setup_databases, setup_test_environment

    setup_test_environment()
    config._django_db_state = setup_databases(verbosity=0, interactive=False)


def pytest_unconfigure(config):
    from django.test.utils import teardown_databases, teardown_test_environment

    state = getattr(config, '_django_db_state', None)
    if state is not None:
        teardown_databases(state, verbosity=0)
    teardown_test_environment()
