"""Shared fixtures.

Every behavioral test runs against each available queue core; the
compiled core drops out automatically on builds without the extension.
"""

import pytest

from pqelim import PriorityQueue, QueueConfig, available_cores, make_core


@pytest.fixture(params=available_cores())
def core_name(request):
    return request.param


@pytest.fixture
def bare_core(core_name):
    """Factory for a core without a serving thread.  Only protocol
    steps that need no server (or tests that drive scan_once by hand)
    may touch it."""

    def build(**kwargs):
        return make_core(QueueConfig(**kwargs), core=core_name)

    return build


@pytest.fixture
def started_queue(core_name):
    """Factory for a running PriorityQueue; everything it builds is
    stopped at teardown."""
    queues = []

    def build(**kwargs):
        q = PriorityQueue(QueueConfig(**kwargs), core=core_name)
        q.start()
        queues.append(q)
        return q

    yield build
    for q in queues:
        if q._server is not None:
            q.stop()
