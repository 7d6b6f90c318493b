"""Pydantic request/response models for the pipeline service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SnippetModel(BaseModel):
    text: str
    group: int = 0


class SpecialModel(BaseModel):
    tag: str
    text: str


class SenseModel(BaseModel):
    ordinal: int
    definition: str
    snippets: list[SnippetModel] = Field(default_factory=list)
    special: list[SpecialModel] = Field(default_factory=list)


class EntryModel(BaseModel):
    lemma: str
    senses: list[SenseModel]


class IssueModel(BaseModel):
    line: int
    message: str
    lemma: Optional[str] = None


class PolicyModel(BaseModel):
    kind: Literal["exact-token", "stem-prefix", "external-lemmatizer"] = "stem-prefix"
    min_stem_length: int = 4
    case_sensitive: bool = False


class ParseRequest(BaseModel):
    text: Optional[str] = None
    entries: Optional[list[EntryModel]] = None
    strict: bool = False
    multisense_only: bool = False
    restrict_lemmas: Optional[list[str]] = None


class ParseResponse(BaseModel):
    entries: list[EntryModel]
    issues: list[IssueModel]


class ExpandSettingsModel(BaseModel):
    backend: Literal["http", "template"] = "template"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    api_key_env: str = "OPENAI_API_KEY"
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 1.0
    max_tokens: int = 256
    n_generations: int = 10
    prompt_template: str = "Razširi {} v polno poved"
    retries: int = 3
    max_workers: int = 1


class ExpandRequest(BaseModel):
    entries: list[EntryModel]
    mode: Literal["core-only", "core+special"] = "core-only"
    settings: ExpandSettingsModel = Field(default_factory=ExpandSettingsModel)
    policy: PolicyModel = Field(default_factory=PolicyModel)
    cache_path: Optional[str] = None


class GenerationModel(BaseModel):
    lemma: str
    sense: int
    snippet_index: int
    generation_index: int
    text: str
    status: Optional[str] = None


class ExpandResponse(BaseModel):
    generations: list[GenerationModel]
    kept: int
    dedup_normalization: str = "nfc-casefold-collapsed"


class ExampleModel(BaseModel):
    """Matches the WSD JSONL record schema field for field."""

    id: str
    lemma: str
    sentence: str
    target_start: int
    target_end: int
    sense_id: str
    inventory: str
    source: str


class InventoryModel(BaseModel):
    inventory_id: str
    senses: dict[str, list[str]]


class ForgeWsdRequest(BaseModel):
    generations: list[GenerationModel]
    inventory_id: str = "sskj"
    policy: PolicyModel = Field(default_factory=PolicyModel)
    source: str = "generated"
    cap: Optional[int] = None


class ForgeWsdResponse(BaseModel):
    examples: list[ExampleModel]
    inventory: InventoryModel


class ForgeConfigModel(BaseModel):
    partners_per_anchor: int = 12
    max_pairs_per_sense: int = 100
    max_examples_per_sense: int = 6
    seed: int = 0


class PairModel(BaseModel):
    """Matches the WiC JSONL record schema field for field."""

    id: str
    lemma: str
    s1: str
    s1_start: int
    s1_end: int
    s2: str
    s2_start: int
    s2_end: int
    label: int
    provenance: dict = Field(default_factory=dict)


class ForgeWicRequest(BaseModel):
    examples: list[ExampleModel]
    config: ForgeConfigModel = Field(default_factory=ForgeConfigModel)
    dataset_id: str = "wic"


class ForgeWicResponse(BaseModel):
    pairs: list[PairModel]
    stats: dict


class MergeDatasetModel(BaseModel):
    id: str
    pairs: list[PairModel]


class MergeRequest(BaseModel):
    datasets: list[MergeDatasetModel]


class MergeResponse(BaseModel):
    pairs: list[PairModel]


class ImportRequest(BaseModel):
    records: list[dict]
    inventory_id: str
    policy: PolicyModel = Field(default_factory=PolicyModel)


class RejectedModel(BaseModel):
    record: dict
    reason: str


class ImportResponse(BaseModel):
    examples: list[ExampleModel]
    inventory: InventoryModel
    rejected: list[RejectedModel]


class SplitRequest(BaseModel):
    split_type: Literal["pure-oov", "partial-oov", "non-oov"]
    sskj: list[PairModel]
    elexis: list[PairModel]
    seed: int = 0
    validation_fraction: Optional[float] = None
    validation_seed: Optional[int] = None
    lemma_disjoint_validation: bool = False


class ManifestModel(BaseModel):
    type: str
    seed: int
    train: list[str]
    validation: list[str]
    test: list[str]
    lemmas: dict[str, list[str]]


class ScorerModel(BaseModel):
    kind: Literal["oracle", "random", "overlap", "remote"] = "overlap"
    url: Optional[str] = None
    seed: int = 0
    batch_size: int = 100
    gold: Optional[dict[str, str]] = None


class ThresholdModel(BaseModel):
    multiplier: float = 1.2
    validation_mean: Optional[float] = None


class CalibrationModel(BaseModel):
    validation_pairs: list[PairModel]
    c_grid: Optional[list[float]] = None
    wsi_targets: Optional[list[ExampleModel]] = None
    wsi_support: Optional[list[ExampleModel]] = None


class ResolveRequest(BaseModel):
    mode: Literal["wsd", "wsi"] = "wsd"
    targets: list[ExampleModel]
    support: list[ExampleModel]
    scorer: ScorerModel = Field(default_factory=ScorerModel)
    aggregation: Literal["max", "mean"] = "max"
    threshold: Optional[ThresholdModel] = None
    calibration: Optional[CalibrationModel] = None


class ResolutionModel(BaseModel):
    id: str
    predicted: str
    scores: dict[str, float]
    threshold: Optional[float] = None
    aggregation: str = "max"


class ResolveResponse(BaseModel):
    resolutions: list[ResolutionModel]
    threshold: Optional[ThresholdModel] = None
    skipped: list[str] = Field(default_factory=list)


class WicEvalPayload(BaseModel):
    pairs: list[PairModel]
    predictions: Optional[dict[str, int]] = None
    scorer: Optional[ScorerModel] = None
    decision_threshold: float = 0.5


class WsdEvalPayload(BaseModel):
    resolutions: list[ResolutionModel]
    gold: list[ExampleModel]
    train: list[ExampleModel]


class WsiEvalPayload(BaseModel):
    resolutions: list[ResolutionModel]
    gold: list[ExampleModel]
    inventory: InventoryModel


class EvalRequest(BaseModel):
    task: Literal["wic", "wsd", "wsi"]
    split_type: str = ""
    dataset_desc: str = ""
    config_digest: str = ""
    wic: Optional[WicEvalPayload] = None
    wsd: Optional[WsdEvalPayload] = None
    wsi: Optional[WsiEvalPayload] = None


class ReportModel(BaseModel):
    task: str
    split_type: str = ""
    dataset_desc: str = ""
    accuracy: float
    baseline: float
    n: int
    per_lemma: dict[str, dict] = Field(default_factory=dict)
    config_digest: str = ""


class RenderRequest(BaseModel):
    reports: list[ReportModel]


class RenderResponse(BaseModel):
    table: str
    csv: str
