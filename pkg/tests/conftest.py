from dataclasses import dataclass
from fractions import Fraction

import pytest

from bilapcert.pipeline import RunConfig, certify_dimension, load_profiles, solve_w


def small_config(out, **kw) -> RunConfig:
    """A 450-interval grid that certifies N = 13 in a few seconds (needs a looser eps)."""
    base = dict(dims=(13,), out=out, intervals=450, subdiv=12, overrides={"eps": Fraction(1, 10**5)})
    base.update(kw)
    return RunConfig(**base)


@dataclass
class Run:
    cfg: RunConfig
    cert: object
    w: object
    psi: object
    samples: object


class RunCache:
    """Full default-grid pipeline runs, computed once per session and shared."""

    def __init__(self, root):
        self.root = root
        self._runs = {}

    def get(self, N: int, fine: bool = False, **kw):
        key = (N, fine, tuple(sorted(kw.items())))
        if key not in self._runs:
            out = self.root / f"{'fine' if fine else 'coarse'}_{N}_{len(self._runs)}"
            out.mkdir()
            cfg = RunConfig(dims=(N,), out=out, fine=fine, **kw)
            samples = solve_w(N, cfg)
            cert = certify_dimension(N, cfg)
            w, psi = load_profiles(N, cfg)
            self._runs[key] = Run(cfg, cert, w, psi, samples)
        return self._runs[key]


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    return RunCache(tmp_path_factory.mktemp("runs"))


@pytest.fixture(scope="session")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    cfg = small_config(out)
    cert = certify_dimension(13, cfg)
    w, psi = load_profiles(13, cfg)
    return cfg, cert, w, psi
