from __future__ import annotations

import pytest

from scratchplot.gateway import LMGateway, ModelRoles
from scratchplot.scripted import ScriptedBackend, ScriptedModel


@pytest.fixture
def simple_model() -> ScriptedModel:
    return ScriptedModel(
        rules={
            ("The",): {"cat": 0.7, "dog": 0.3},
            ("The", "cat"): {"sat.": 0.5, "ran.": 0.5},
        },
        default={"a": 0.25, "b": 0.25, "c": 0.25, "d": 0.25},
        nsp_pairs={("a", "b"): 0.9},
        nsp_default=0.5,
    )


@pytest.fixture
def gateway(simple_model) -> LMGateway:
    backend = ScriptedBackend({"*": simple_model})
    return LMGateway(backend, roles=ModelRoles("m", "m", "m"))


def make_gateway(model: ScriptedModel, **models: ScriptedModel) -> LMGateway:
    """Gateway over one scripted model (plus optional extra model ids)."""
    backend = ScriptedBackend({"*": model, **models})
    return LMGateway(backend, roles=ModelRoles("m", "m", "m"))
