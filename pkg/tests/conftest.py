"""Shared fixtures: contexts and full case runs are expensive, so they are
built once per session and reused by module and acceptance tests."""

import numpy as np
import pytest

from onfsim import pipeline

C = 299792458.0


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("dispersion_cache"))


def _config(model, **overrides):
    base = dict(model=model, a_nm=[200.0], separations=[2.0],
                solver={"T_fs": 1000.0})
    base.update(overrides)
    return pipeline.RunConfig(**base)


@pytest.fixture(scope="session")
def config_const():
    return _config("constant")


@pytest.fixture(scope="session")
def config_dl():
    return _config("drude_lorentz")


@pytest.fixture(scope="session")
def ctx_const_200(config_const, cache_dir):
    return pipeline.build_context(config_const, 200.0, cache_dir)


@pytest.fixture(scope="session")
def ctx_dl_200(config_dl, cache_dir):
    return pipeline.build_context(config_dl, 200.0, cache_dir)


@pytest.fixture(scope="session")
def ctx_const_150(config_const, cache_dir):
    return pipeline.build_context(config_const, 150.0, cache_dir)


@pytest.fixture(scope="session")
def ctx_dl_150(config_dl, cache_dir):
    return pipeline.build_context(config_dl, 150.0, cache_dir)


class CaseStore:
    """Lazy per-session store of full pipeline case runs."""

    def __init__(self):
        self._cases = {}
        self._contexts = {}

    def context(self, key, builder):
        if key not in self._contexts:
            self._contexts[key] = builder()
        return self._contexts[key]

    def case(self, ctx, n_sep):
        key = (ctx.model.kind, round(ctx.a / 1e-9), n_sep)
        if key not in self._cases:
            self._cases[key] = pipeline.run_case(ctx, ctx.separation(n_sep))
        return self._cases[key]


@pytest.fixture(scope="session")
def cases():
    return CaseStore()
