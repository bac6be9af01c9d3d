"""Pipeline configuration: backend selection, model roles, template and
stopword overrides, and per-kind generation parameters.

Resolution order for the config file: ``--config`` flag, then the
SCRATCHPLOT_CONFIG environment variable, then built-in defaults; the
HTTP backend URL falls back to SCRATCHPLOT_LM_URL.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .decoding import GenerationParams
from .errors import ConfigurationError
from .gateway import LMGateway, ModelRoles
from .http_backend import HttpBackend
from .plan import PlotElementKind
from .postprocess import load_stopwords
from .scripted import ScriptedBackend
from .templates import TemplateRegistry

CONFIG_ENV_VAR = "SCRATCHPLOT_CONFIG"
URL_ENV_VAR = "SCRATCHPLOT_LM_URL"

# Per-kind generation hyperparameters (num, min_len, max_len).
DEFAULT_PARAMS: dict[PlotElementKind, tuple[int, int, int]] = {
    PlotElementKind.LOCATION: (20, 1, 5),
    PlotElementKind.CAST_MALE: (10, 1, 5),
    PlotElementKind.CAST_FEMALE: (10, 1, 5),
    PlotElementKind.GENRE: (20, 1, 5),
    PlotElementKind.THEME: (10, 5, 25),
    PlotElementKind.STORY_BODY: (30, 1, 100),
    PlotElementKind.STORY_ENDING: (10, 10, 50),
}

DEFAULT_TOP_K = 30
DEFAULT_BLOCK_NGRAM = 3
DEFAULT_STORY_TOKEN_LIMIT = 150
DEFAULT_BARE_PROMPT = "Task: Write a plot summary.\nPlot summary:"

_PARAM_KEYS = {
    "location": PlotElementKind.LOCATION,
    "cast_male": PlotElementKind.CAST_MALE,
    "cast_female": PlotElementKind.CAST_FEMALE,
    "cast": None,  # shorthand applying to both cast kinds
    "genre": PlotElementKind.GENRE,
    "theme": PlotElementKind.THEME,
    "story_body": PlotElementKind.STORY_BODY,
    "story_ending": PlotElementKind.STORY_ENDING,
}


@dataclass
class PipelineConfig:
    backend_type: str = "http"
    backend_url: str | None = None
    scripted_path: str | None = None
    roles: ModelRoles = field(default_factory=ModelRoles)
    templates_path: str | None = None
    stopwords_path: str | None = None
    top_k: int = DEFAULT_TOP_K
    block_ngram: int = DEFAULT_BLOCK_NGRAM
    debias_every_step: bool = True
    story_token_limit: int = DEFAULT_STORY_TOKEN_LIMIT
    bare_story_prompt: str = DEFAULT_BARE_PROMPT
    params_overrides: dict[PlotElementKind, dict] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "PipelineConfig":
        if path is None:
            path = os.environ.get(CONFIG_ENV_VAR) or None
        config = cls()
        if path is None:
            return config
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        base_dir = Path(path).parent

        backend = raw.get("backend", {})
        config.backend_type = backend.get("type", config.backend_type)
        config.backend_url = backend.get("url", config.backend_url)
        if backend.get("path"):
            config.scripted_path = str(_resolve(base_dir, backend["path"]))

        models = raw.get("models", {})
        config.roles = ModelRoles(
            generation=models.get("generation", config.roles.generation),
            scoring=models.get("scoring", config.roles.scoring),
            nsp=models.get("nsp", config.roles.nsp),
        )
        if raw.get("templates"):
            config.templates_path = str(_resolve(base_dir, raw["templates"]))
        if raw.get("stopwords"):
            config.stopwords_path = str(_resolve(base_dir, raw["stopwords"]))

        decoding = raw.get("decoding", {})
        config.top_k = int(decoding.get("top_k", config.top_k))
        config.block_ngram = int(decoding.get("block_ngram", config.block_ngram))
        config.debias_every_step = bool(
            decoding.get("debias_every_step", config.debias_every_step)
        )
        config.story_token_limit = int(
            raw.get("story_token_limit", config.story_token_limit)
        )
        config.bare_story_prompt = raw.get("bare_story_prompt", config.bare_story_prompt)

        for key, override in raw.get("params", {}).items():
            if key not in _PARAM_KEYS:
                raise ConfigurationError(f"unknown params key {key!r}")
            kinds = (
                [PlotElementKind.CAST_MALE, PlotElementKind.CAST_FEMALE]
                if key == "cast"
                else [_PARAM_KEYS[key]]
            )
            for kind in kinds:
                config.params_overrides.setdefault(kind, {}).update(override)
        return config

    def params_for(self, kind: PlotElementKind, **overrides) -> GenerationParams:
        num, min_len, max_len = DEFAULT_PARAMS[kind]
        merged = {"num": num, "min_len": min_len, "max_len": max_len}
        merged.update(self.params_overrides.get(kind, {}))
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return GenerationParams(
            num=int(merged["num"]),
            min_len=int(merged["min_len"]),
            max_len=int(merged["max_len"]),
            top_k=int(merged.get("top_k", self.top_k)),
            block_ngram=int(merged.get("block_ngram", self.block_ngram)),
        )

    def build_gateway(self) -> LMGateway:
        if self.backend_type == "scripted":
            if not self.scripted_path:
                raise ConfigurationError("scripted backend needs backend.path")
            backend = ScriptedBackend.from_file(self.scripted_path)
        elif self.backend_type == "http":
            url = self.backend_url or os.environ.get(URL_ENV_VAR)
            if not url:
                raise ConfigurationError(
                    f"http backend needs backend.url or {URL_ENV_VAR}"
                )
            backend = HttpBackend(url)
        else:
            raise ConfigurationError(f"unknown backend type {self.backend_type!r}")
        return LMGateway(backend, roles=self.roles)

    def build_registry(self) -> TemplateRegistry:
        if self.templates_path:
            return TemplateRegistry.from_file(self.templates_path)
        return TemplateRegistry.default()

    def build_stopwords(self) -> frozenset[str]:
        return load_stopwords(self.stopwords_path)


def _resolve(base_dir: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base_dir / path
