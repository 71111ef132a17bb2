"""Python front end to the gal engine.

JSON crosses the boundary as text; these wrappers decode it.
"""

import json
import os

from . import _gal
from ._gal import (
    BackendError,
    ConfigError,
    DomainError,
    GalError,
    PersistenceError,
    ProtocolError,
    StateError,
    ValidationError,
    entropy,
    openness,
    phi,
    rank_top_k,
    should_stop,
)

__all__ = [
    "Run",
    "default_config",
    "load_config",
    "compare",
    "entropy",
    "openness",
    "phi",
    "rank_top_k",
    "should_stop",
    "GalError",
    "ConfigError",
    "ValidationError",
    "StateError",
    "PersistenceError",
    "BackendError",
    "ProtocolError",
    "DomainError",
]


def default_config():
    return json.loads(_gal.default_config())


def load_config(path):
    return json.loads(_gal.load_config(os.fspath(path)))


def _dump(config):
    return json.dumps(config)


def compare(config, strategies=("random", "uncertainty", "uncertainty+balance"), seeds=10, out_dir="gal-compare"):
    """Returns the comparison table as CSV text."""
    return _gal.compare(_dump(config), list(strategies), int(seeds), os.fspath(out_dir))


class Run:
    """One run directory. Use Run.start or Run.resume."""

    def __init__(self, engine):
        self._engine = engine

    @classmethod
    def start(cls, config, run_dir=None):
        config = dict(config)
        if run_dir is not None:
            config["run_dir"] = os.fspath(run_dir)
        return cls(_gal.Engine.init_run(_dump(config)))

    @classmethod
    def resume(cls, run_dir):
        return cls(_gal.Engine.resume(os.fspath(run_dir)))

    @property
    def status(self):
        return self._engine.status

    @property
    def current_round(self):
        return self._engine.current_round

    @property
    def run_dir(self):
        return self._engine.run_dir

    def run_round(self):
        self._engine.run_round()

    def run_until_pause(self):
        self._engine.run_until_pause()
        return self.status

    def submit_decision(self, pairs):
        self._engine.submit_decision([(int(a), str(s)) for a, s in pairs])

    def state_hash(self):
        return self._engine.state_hash()

    def summary(self):
        return json.loads(self._engine.summary_json())

    def candidates(self):
        return json.loads(self._engine.candidates_json())

    def references(self):
        return json.loads(self._engine.references_json())

    def rounds(self):
        return json.loads(self._engine.rounds_json())

    def export(self, kind, out_dir=None):
        self._engine.export(kind, None if out_dir is None else os.fspath(out_dir))

    def close(self):
        """Releases the run directory lock."""
        self._engine = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
