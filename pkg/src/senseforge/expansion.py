"""Expand dictionary usage snippets into full sentences via an LLM backend.

Generation goes through a content-addressed on-disk cache so that pipelines
are replayable offline: each (model, prompt, temperature, generation index)
is one cache record, and a fully cached request makes zero network calls.
Generated sentences are then filtered with two rules: the target lemma must
be present in the sentence, and duplicates within a lemma+sense group are
dropped.
"""

from __future__ import annotations

import json
import logging
import math
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import httpx

from .dictionary import UsageSnippet
from .util import SenseforgeError, dedup_key, nfc, normalize_text, sha256_hex

logger = logging.getLogger(__name__)

DEFAULT_PROMPT_TEMPLATE = "Razširi {} v polno poved"

KEPT = "kept"
DROPPED_LEMMA_MISSING = "dropped_lemma_missing"
DROPPED_DUPLICATE = "dropped_duplicate"
DROPPED_EMPTY = "dropped_empty"
STATUSES = (KEPT, DROPPED_LEMMA_MISSING, DROPPED_DUPLICATE, DROPPED_EMPTY)

TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class BackendError(SenseforgeError):
    """A backend call failed or returned a malformed response."""


@dataclass
class LemmaMatchPolicy:
    """How to decide whether a lemma occurs in a sentence.

    "exact-token" requires a token equal to the lemma. "stem-prefix" (the
    default; suitable for inflected languages) requires a token starting with
    the first max(min_stem_length, ceil(0.7 * len(lemma))) characters of the
    lemma. "external-lemmatizer" consults ``lemmatizer`` (token -> lemma) and
    falls back to stem-prefix with a warning when none is configured.
    """

    kind: str = "stem-prefix"
    min_stem_length: int = 4
    case_sensitive: bool = False
    lemmatizer: Optional[Callable[[str], str]] = None

    def __post_init__(self):
        if self.kind not in ("exact-token", "stem-prefix", "external-lemmatizer"):
            raise ValueError(f"unknown match policy kind: {self.kind!r}")
        if self.min_stem_length < 1:
            raise ValueError("min_stem_length must be positive")


@dataclass
class ExpansionRequest:
    snippet: UsageSnippet
    prompt: str
    n_generations: int = 10
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 1.0
    max_tokens: int = 256

    def __post_init__(self):
        if self.n_generations < 1:
            raise ValueError("n_generations must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.snippet.text not in self.prompt:
            raise ValueError("prompt must contain the snippet text verbatim")


@dataclass(frozen=True)
class GeneratedSentence:
    """One LLM generation; ``source_snippet`` is (lemma, sense ordinal, snippet index)."""

    text: str
    source_snippet: tuple[str, int, int]
    generation_index: int
    status: Optional[str] = None


def build_prompt(snippet: UsageSnippet, template: str = DEFAULT_PROMPT_TEMPLATE) -> str:
    """Fill the prompt template; "{}" marks where the snippet text goes."""
    if not snippet.text:
        raise ValueError("snippet text is empty")
    if "{}" not in template:
        raise ValueError(f"prompt template has no {{}} placeholder: {template!r}")
    return template.replace("{}", snippet.text)


def _fold(text: str, policy: LemmaMatchPolicy) -> str:
    return text if policy.case_sensitive else text.casefold()


def _stem(lemma: str, policy: LemmaMatchPolicy) -> str:
    folded = _fold(lemma, policy)
    return folded[: max(policy.min_stem_length, math.ceil(0.7 * len(folded)))]


def _token_matches(token: str, lemma: str, policy: LemmaMatchPolicy) -> bool:
    if policy.kind == "exact-token":
        return _fold(token, policy) == _fold(lemma, policy)
    if policy.kind == "external-lemmatizer":
        if policy.lemmatizer is not None:
            return _fold(policy.lemmatizer(token), policy) == _fold(lemma, policy)
        logger.warning("external lemmatizer unavailable; falling back to stem-prefix")
        return _fold(token, policy).startswith(_stem(lemma, policy))
    return _fold(token, policy).startswith(_stem(lemma, policy))


def lemma_present(sentence: str, lemma: str, policy: LemmaMatchPolicy) -> bool:
    """True when some token of the sentence matches the lemma under the policy."""
    return any(_token_matches(tok, lemma, policy) for tok in TOKEN_RE.findall(sentence))


def locate_target(sentence: str, lemma: str, policy: LemmaMatchPolicy) -> tuple[int, int]:
    """Character span (start, end) of the first token matching the lemma.

    Offsets count Unicode scalar values over the NFC sentence; raises
    ValueError when no token matches.
    """
    for m in TOKEN_RE.finditer(sentence):
        if _token_matches(m.group(0), lemma, policy):
            return m.start(), m.end()
    raise ValueError(f"lemma {lemma!r} not found in sentence {sentence!r}")


class ExpansionCache:
    """Append-only JSONL cache of generations.

    One record per (model, prompt, temperature, index):
    {"key": sha256, "model", "prompt", "temperature", "index", "text"}.
    Writes are appended and flushed one record at a time; a missing or None
    path keeps the cache purely in memory.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for no, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._records[rec["key"]] = rec["text"]
                except (KeyError, TypeError, ValueError):
                    logger.warning("skipping corrupt cache line %d in %s", no, self.path)

    @staticmethod
    def cache_key(model: str, prompt: str, temperature: float, index: int) -> str:
        payload = json.dumps([model, prompt, float(temperature), index], ensure_ascii=False)
        return sha256_hex(payload.encode("utf-8"))

    def get(self, model: str, prompt: str, temperature: float, index: int) -> Optional[str]:
        return self._records.get(self.cache_key(model, prompt, temperature, index))

    def put(self, model: str, prompt: str, temperature: float, index: int, text: str) -> None:
        key = self.cache_key(model, prompt, temperature, index)
        with self._lock:
            self._records[key] = text
            if self.path is not None:
                record = {
                    "key": key,
                    "model": model,
                    "prompt": prompt,
                    "temperature": float(temperature),
                    "index": index,
                    "text": text,
                }
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")
                    fh.flush()

    def __len__(self) -> int:
        return len(self._records)


class CompletionBackend:
    """Interface for single-sample completion backends."""

    def complete(self, prompt: str, model: str, temperature: float, max_tokens: int, index: int) -> str:
        raise NotImplementedError


class HttpChatBackend(CompletionBackend):
    """Client for a chat-completions-compatible HTTP endpoint.

    Sends one user message per call; the gen index is ignored (real sampling
    is stochastic), it only disambiguates cache records.
    """

    def __init__(self, endpoint: str, api_key: Optional[str] = None, timeout: float = 60.0,
                 client: Optional[httpx.Client] = None):
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)
        self.endpoint = endpoint

    def complete(self, prompt, model, temperature, max_tokens, index):
        payload = {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        try:
            resp = self._client.post(self.endpoint, json=payload)
            resp.raise_for_status()
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise BackendError(f"backend request failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc
        if not isinstance(text, str):
            raise BackendError("backend returned non-string content")
        return text


class TemplateBackend(CompletionBackend):
    """Deterministic offline pseudo-LLM for demos and tests.

    Produces a distinct full sentence per generation index that embeds the
    original snippet (and therefore the lemma).
    """

    def __init__(self, template: str = DEFAULT_PROMPT_TEMPLATE):
        head, _, tail = template.partition("{}")
        self._head, self._tail = head, tail

    def complete(self, prompt, model, temperature, max_tokens, index):
        snippet = prompt
        if self._head and snippet.startswith(self._head):
            snippet = snippet[len(self._head):]
        if self._tail and snippet.endswith(self._tail):
            snippet = snippet[: len(snippet) - len(self._tail)]
        openers = ["Vsi vedo, da", "Pravijo, da", "Znano je, da", "Mislim, da", "Res je, da"]
        return f"{openers[index % len(openers)]} {snippet} že {index + 1} let."


def expand_snippet(
    request: ExpansionRequest,
    backend: CompletionBackend,
    cache: ExpansionCache,
    *,
    retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> list[GeneratedSentence]:
    """Produce n_generations sentences, reading/writing the cache per index.

    Transient backend failures are retried with exponential backoff; after the
    retry budget is exhausted the generation becomes an empty, dropped_empty
    record so the pipeline can continue.
    """
    snippet = request.snippet
    source = (snippet.lemma_ref, snippet.sense_ref[1], snippet.index)
    results: list[GeneratedSentence] = []
    for i in range(request.n_generations):
        text = cache.get(request.model_id, request.prompt, request.temperature, i)
        if text is None:
            text = _call_with_retries(request, backend, i, retries, backoff, sleep)
            if text is None:
                results.append(GeneratedSentence("", source, i, status=DROPPED_EMPTY))
                continue
            cache.put(request.model_id, request.prompt, request.temperature, i, text)
        results.append(GeneratedSentence(normalize_text(nfc(text)), source, i))
    return results


def _call_with_retries(request, backend, index, retries, backoff, sleep):
    for attempt in range(retries + 1):
        try:
            return backend.complete(
                request.prompt, request.model_id, request.temperature, request.max_tokens, index
            )
        except (BackendError, httpx.HTTPError) as exc:
            if attempt == retries:
                logger.warning(
                    "generation %d for %r failed after %d attempts: %s",
                    index, request.snippet.text, attempt + 1, exc,
                )
                return None
            sleep(backoff * (2 ** attempt))


def filter_candidates(
    candidates: Sequence[GeneratedSentence],
    lemma: str,
    policy: LemmaMatchPolicy,
) -> list[GeneratedSentence]:
    """Assign a status to every candidate, preserving order.

    First pass: empty sentences become dropped_empty and sentences missing the
    lemma become dropped_lemma_missing. Second pass: a sentence whose dedup key
    (case-folded, whitespace-collapsed NFC text) was already kept earlier in
    the same lemma+sense group becomes dropped_duplicate. Everything else is
    kept. Statuses are recomputed from scratch, so the pass is idempotent.
    """
    out: list[GeneratedSentence] = []
    seen: dict[tuple[str, int], set[str]] = {}
    for cand in candidates:
        if not cand.text.strip():
            out.append(replace(cand, status=DROPPED_EMPTY))
            continue
        if not lemma_present(cand.text, lemma, policy):
            out.append(replace(cand, status=DROPPED_LEMMA_MISSING))
            continue
        group = cand.source_snippet[:2]
        key = dedup_key(cand.text)
        kept_keys = seen.setdefault(group, set())
        if key in kept_keys:
            out.append(replace(cand, status=DROPPED_DUPLICATE))
        else:
            kept_keys.add(key)
            out.append(replace(cand, status=KEPT))
    return out


@dataclass
class ExpansionSettings:
    """Knobs for a whole expansion run (one value set per pipeline stage)."""

    model_id: str = "gpt-3.5-turbo"
    temperature: float = 1.0
    max_tokens: int = 256
    n_generations: int = 10
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    retries: int = 3
    backoff: float = 0.5


def expand_corpus(
    snippets: Iterable[UsageSnippet],
    settings: ExpansionSettings,
    backend: CompletionBackend,
    cache: ExpansionCache,
    policy: LemmaMatchPolicy,
    *,
    max_workers: int = 1,
    sleep: Callable[[float], None] = time.sleep,
) -> list[GeneratedSentence]:
    """Expand and filter snippets; output is grouped by (lemma, sense).

    Results are materialized in deterministic (snippet, generation index)
    order regardless of completion order when running with multiple workers.
    """
    snippets = list(snippets)
    requests = [
        ExpansionRequest(
            sn,
            build_prompt(sn, settings.prompt_template),
            settings.n_generations,
            settings.model_id,
            settings.temperature,
            settings.max_tokens,
        )
        for sn in snippets
    ]

    def run(req: ExpansionRequest) -> list[GeneratedSentence]:
        return expand_snippet(req, backend, cache, retries=settings.retries,
                              backoff=settings.backoff, sleep=sleep)

    if max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            per_snippet = list(pool.map(run, requests))
    else:
        per_snippet = [run(req) for req in requests]

    # Filter per lemma+sense group, in first-appearance order of the groups.
    by_group: dict[tuple[str, int], list[GeneratedSentence]] = {}
    for sn, gens in zip(snippets, per_snippet):
        by_group.setdefault((sn.lemma_ref, sn.sense_ref[1]), []).extend(gens)
    out: list[GeneratedSentence] = []
    for (lemma, _), gens in by_group.items():
        gens.sort(key=lambda g: (g.source_snippet[2], g.generation_index))
        out.extend(filter_candidates(gens, lemma, policy))
    return out
