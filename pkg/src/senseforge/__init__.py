"""senseforge: dictionary-driven WiC dataset forging and WiC-based WSD/WSI."""

from .dictionary import (
    DictionaryEntry,
    DictionaryParseError,
    Sense,
    UsageSnippet,
    extract_snippets,
    filter_multisense,
    parse_dictionary,
    restrict_to_lemmas,
    serialize_dictionary,
)
from .expansion import (
    ExpansionCache,
    ExpansionRequest,
    GeneratedSentence,
    LemmaMatchPolicy,
    build_prompt,
    expand_snippet,
    filter_candidates,
    lemma_present,
    locate_target,
)
from .forge import (
    ForgeConfig,
    SenseExample,
    SenseInventory,
    WicPair,
    build_wic_pairs,
    build_wsd_dataset,
    cap_examples_per_sense,
    import_external_wsd,
    merge_wic,
)
from .resolver import (
    NEW_SENSE,
    Resolution,
    ScorerBackend,
    ThresholdConfig,
    calibrate_threshold,
    oracle_scorer,
    overlap_scorer,
    random_scorer,
    remote_scorer,
    resolve_wsd,
    resolve_wsi,
)
from .splits import (
    SplitManifest,
    holdout_validation,
    split_non_oov,
    split_partial_oov,
    split_pure_oov,
)
from .evaluate import EvalReport, eval_wic, eval_wsd, eval_wsi, render_report
from .util import SenseforgeError

__version__ = "0.1.0"
