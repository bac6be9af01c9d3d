"""Plan-first story generation with pluggable language-model backends."""

from .decoding import (
    DebiasGroup,
    GenerationParams,
    StopRule,
    apply_top_k,
    block_repeat_ngrams,
    sample_continuation,
    self_debias_step,
    truncate_to_last_sentence,
)
from .gateway import LMGateway, ModelRoles, ScoredContinuation, TokenDistribution
from .metrics import bleu, corpus_distinct_n, distinct_n, metrics_report, self_bleu
from .pipeline import (
    ElementPool,
    StoryCandidate,
    StoryResult,
    generate_element_pool,
    generate_story,
    sample_content_plan,
)
from .plan import ContentPlan, PlotElement, PlotElementKind
from .postprocess import (
    PostprocessContext,
    Rule,
    default_rule_matrix,
    postprocess,
    strip_trailing_punct,
    violates_missing_plot_elements,
    violates_person_pronouns,
    violates_prompt_repeat,
)
from .ranking import (
    ClozeItem,
    EndingScore,
    cloze_evaluate,
    conditional_ppl,
    load_cloze_file,
    rank_pairs,
)
from .scripted import ScriptedBackend, ScriptedModel
from .templates import TaskDescription, TemplateRegistry, render

__version__ = "0.1.0"

__all__ = [
    "ClozeItem",
    "ContentPlan",
    "DebiasGroup",
    "ElementPool",
    "EndingScore",
    "GenerationParams",
    "LMGateway",
    "ModelRoles",
    "PlotElement",
    "PlotElementKind",
    "PostprocessContext",
    "Rule",
    "ScoredContinuation",
    "ScriptedBackend",
    "ScriptedModel",
    "StopRule",
    "StoryCandidate",
    "StoryResult",
    "TaskDescription",
    "TemplateRegistry",
    "TokenDistribution",
    "apply_top_k",
    "bleu",
    "block_repeat_ngrams",
    "cloze_evaluate",
    "conditional_ppl",
    "corpus_distinct_n",
    "default_rule_matrix",
    "distinct_n",
    "generate_element_pool",
    "generate_story",
    "load_cloze_file",
    "metrics_report",
    "postprocess",
    "rank_pairs",
    "render",
    "sample_content_plan",
    "sample_continuation",
    "self_bleu",
    "self_debias_step",
    "strip_trailing_punct",
    "truncate_to_last_sentence",
    "violates_missing_plot_elements",
    "violates_person_pronouns",
    "violates_prompt_repeat",
]
