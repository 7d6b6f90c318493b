"""Parser and serializer for the SSKJ-lite plain-text dictionary format.

Grammar (UTF-8 text):

    dictionary   ::= entry (blank-line entry)*
    entry        ::= lemma-line sense-block+
    sense-block  ::= sense-line special-line*
    sense-line   ::= ordinal ". " definition ":" [" " snippets]
    snippets     ::= group ("; " group)*
    group        ::= snippet (" / " snippet)*        # related snippets, shared group id
    special-line ::= ("* " | "** ") item ("; " item)*
    item         ::= [category ". "] text            # untagged items inherit the previous tag

Sense lines and special lines start at column 0; any other non-blank line is a
continuation of the previous logical line and is joined with a single space.
Ordinals must run 1..n in order. All parsed text is NFC-normalized with
whitespace collapsed.

A structured alternative is supported as JSON Lines, one entry per line:
{"lemma": ..., "senses": [{"ordinal", "definition",
"snippets": [{"text", "group"}], "special": [{"tag", "text"}]}]}.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .util import SenseforgeError, normalize_text

SENSE_LINE = re.compile(r"^(\d+)\. (.*)$")
SPECIAL_LINE = re.compile(r"^\*{1,2} (.*)$")
SPECIAL_ITEM = re.compile(r"^([^\s.]+)\. +(.*)$")


class DictionaryParseError(SenseforgeError):
    """Raised in strict mode when the input violates the grammar."""

    def __init__(self, issues):
        self.issues = list(issues)
        first = self.issues[0] if self.issues else None
        super().__init__(f"{len(self.issues)} parse error(s); first: {first}")


@dataclass(frozen=True)
class UsageSnippet:
    """One short usage example attached to a sense.

    ``group_id`` ties together related snippets that were separated by "/"
    inside one ";"-group; ``index`` is the snippet's position within its sense.
    """

    text: str
    lemma_ref: str
    sense_ref: tuple[str, int]
    group_id: int
    index: int


@dataclass(frozen=True)
class SpecialExample:
    tag: str
    text: str


@dataclass
class Sense:
    ordinal: int
    definition: str
    snippets: list[UsageSnippet] = field(default_factory=list)
    special_examples: list[SpecialExample] = field(default_factory=list)


@dataclass
class DictionaryEntry:
    lemma: str
    senses: list[Sense] = field(default_factory=list)


@dataclass(frozen=True)
class ParseIssue:
    line: int
    message: str
    lemma: Optional[str] = None

    def __str__(self) -> str:
        where = f" (entry {self.lemma!r})" if self.lemma else ""
        return f"line {self.line}: {self.message}{where}"


@dataclass
class ParseResult:
    entries: list[DictionaryEntry]
    issues: list[ParseIssue]


def _split_blocks(lines: list[str]):
    """Yield (start_line_number, block_lines) for blank-line separated blocks."""
    block: list[tuple[int, str]] = []
    for no, line in enumerate(lines, start=1):
        if line.strip():
            block.append((no, line))
        elif block:
            yield block[0][0], block
            block = []
    if block:
        yield block[0][0], block


def _logical_lines(numbered: list[tuple[int, str]]):
    """Fold continuation lines into the preceding sense/special line."""
    logical: list[tuple[int, str]] = []
    for no, line in numbered:
        if SENSE_LINE.match(line) or SPECIAL_LINE.match(line) or not logical:
            logical.append((no, line))
        else:
            prev_no, prev = logical[-1]
            logical[-1] = (prev_no, prev + " " + line.strip())
    return logical


def _parse_snippets(part: str, lemma: str, ordinal: int) -> list[UsageSnippet]:
    snippets: list[UsageSnippet] = []
    group_id = 0
    for group in part.split(";"):
        texts = [normalize_text(t) for t in group.split("/")]
        texts = [t for t in texts if t]
        if not texts:
            continue
        for text in texts:
            snippets.append(
                UsageSnippet(text, lemma, (lemma, ordinal), group_id, len(snippets))
            )
        group_id += 1
    return snippets


def _parse_special_items(content: str, line_no: int, lemma: str):
    items: list[SpecialExample] = []
    issues: list[ParseIssue] = []
    last_tag: Optional[str] = None
    for raw in content.split(";"):
        raw = normalize_text(raw)
        if not raw:
            continue
        m = SPECIAL_ITEM.match(raw)
        if m:
            last_tag = m.group(1)
            items.append(SpecialExample(last_tag, normalize_text(m.group(2))))
        elif last_tag is not None:
            items.append(SpecialExample(last_tag, raw))
        else:
            issues.append(
                ParseIssue(line_no, f"special example without category tag: {raw!r}", lemma)
            )
    return items, issues


def _parse_entry(start_line: int, numbered: list[tuple[int, str]]):
    lemma_no, lemma_raw = numbered[0]
    if SENSE_LINE.match(lemma_raw) or SPECIAL_LINE.match(lemma_raw):
        return None, [ParseIssue(lemma_no, "entry starts without a lemma line")]
    lemma = normalize_text(lemma_raw)
    if not lemma:
        return None, [ParseIssue(lemma_no, "empty lemma")]

    issues: list[ParseIssue] = []
    senses: list[Sense] = []
    for no, line in _logical_lines(numbered[1:]):
        sense_m = SENSE_LINE.match(line)
        special_m = SPECIAL_LINE.match(line)
        if sense_m:
            ordinal = int(sense_m.group(1))
            rest = sense_m.group(2)
            colon = rest.find(":")
            if colon < 0:
                issues.append(ParseIssue(no, "sense definition without colon", lemma))
                continue
            definition = normalize_text(rest[:colon])
            if not definition:
                issues.append(ParseIssue(no, "empty sense definition", lemma))
                continue
            senses.append(
                Sense(ordinal, definition, _parse_snippets(rest[colon + 1 :], lemma, ordinal))
            )
        elif special_m:
            if not senses:
                issues.append(ParseIssue(no, "special section before first sense", lemma))
                continue
            items, item_issues = _parse_special_items(special_m.group(1), no, lemma)
            issues.extend(item_issues)
            senses[-1].special_examples.extend(items)
        else:
            issues.append(ParseIssue(no, "expected a numbered sense line", lemma))

    if not senses and not issues:
        issues.append(ParseIssue(start_line, "entry without senses (missing sense number)", lemma))
    elif [s.ordinal for s in senses] != list(range(1, len(senses) + 1)):
        issues.append(
            ParseIssue(start_line, "sense ordinals are not contiguous 1..n", lemma)
        )

    if issues:
        return None, issues
    return DictionaryEntry(lemma, senses), []


def parse_dictionary(text: str, strict: bool = False) -> ParseResult:
    """Parse SSKJ-lite text into entries.

    In lenient mode (default) malformed entries are skipped and reported as
    issues; in strict mode any issue raises DictionaryParseError.
    """
    entries: list[DictionaryEntry] = []
    issues: list[ParseIssue] = []
    for start, block in _split_blocks(text.split("\n")):
        entry, entry_issues = _parse_entry(start, block)
        issues.extend(entry_issues)
        if entry is not None:
            entries.append(entry)
    if strict and issues:
        raise DictionaryParseError(issues)
    return ParseResult(entries, issues)


def validate_entry(entry: DictionaryEntry) -> None:
    """Check the structural invariants the canonical grammar relies on."""
    if not entry.lemma or entry.lemma != normalize_text(entry.lemma):
        raise ValueError(f"bad lemma: {entry.lemma!r}")
    if SENSE_LINE.match(entry.lemma) or SPECIAL_LINE.match(entry.lemma):
        raise ValueError(f"lemma looks like a sense/special line: {entry.lemma!r}")
    ordinals = [s.ordinal for s in entry.senses]
    if ordinals != list(range(1, len(entry.senses) + 1)):
        raise ValueError(f"non-contiguous sense ordinals for {entry.lemma!r}: {ordinals}")
    for sense in entry.senses:
        if not sense.definition or ":" in sense.definition:
            raise ValueError(f"bad definition in {entry.lemma!r}: {sense.definition!r}")
        if sense.definition != normalize_text(sense.definition):
            raise ValueError(f"definition not normalized: {sense.definition!r}")
        for i, sn in enumerate(sense.snippets):
            if not sn.text or sn.text != normalize_text(sn.text):
                raise ValueError(f"bad snippet text: {sn.text!r}")
            if any(c in sn.text for c in ";/\n"):
                raise ValueError(f"snippet text collides with separators: {sn.text!r}")
            if sn.index != i or sn.sense_ref != (entry.lemma, sense.ordinal):
                raise ValueError(f"snippet bookkeeping broken: {sn!r}")
        groups = [sn.group_id for sn in sense.snippets]
        if groups and (groups != sorted(groups) or groups[0] != 0):
            raise ValueError(f"group ids not ascending from 0: {groups}")
        for sp in sense.special_examples:
            if not SPECIAL_ITEM.match(f"{sp.tag}. {sp.text}") or ";" in sp.text:
                raise ValueError(f"bad special example: {sp!r}")
            if sp.text != normalize_text(sp.text):
                raise ValueError(f"special text not normalized: {sp.text!r}")


def serialize_dictionary(entries: Iterable[DictionaryEntry]) -> str:
    """Render entries back to canonical SSKJ-lite text.

    parse_dictionary(serialize_dictionary(E)) is structurally equal to E for
    any E satisfying validate_entry.
    """
    blocks = []
    for entry in entries:
        validate_entry(entry)
        lines = [entry.lemma]
        for sense in entry.senses:
            groups: dict[int, list[str]] = {}
            for sn in sense.snippets:
                groups.setdefault(sn.group_id, []).append(sn.text)
            rendered = "; ".join(" / ".join(g) for _, g in sorted(groups.items()))
            lines.append(f"{sense.ordinal}. {sense.definition}:" + (f" {rendered}" if rendered else ""))
            if sense.special_examples:
                lines.append("* " + "; ".join(f"{sp.tag}. {sp.text}" for sp in sense.special_examples))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def extract_snippets(entries: Iterable[DictionaryEntry], mode: str = "core-only") -> list[UsageSnippet]:
    """Collect usage snippets across entries.

    mode "core-only" returns only the numbered-sense snippets; "core+special"
    additionally lifts special-example texts into snippets (their category tag
    is dropped, group and index numbering continue after the core snippets).
    """
    if mode not in ("core-only", "core+special"):
        raise ValueError(f"unknown extraction mode: {mode!r}")
    out: list[UsageSnippet] = []
    for entry in entries:
        for sense in entry.senses:
            out.extend(sense.snippets)
            if mode == "core+special":
                next_group = max((sn.group_id for sn in sense.snippets), default=-1) + 1
                base = len(sense.snippets)
                for j, sp in enumerate(sense.special_examples):
                    out.append(
                        UsageSnippet(
                            sp.text,
                            entry.lemma,
                            (entry.lemma, sense.ordinal),
                            next_group + j,
                            base + j,
                        )
                    )
    return out


def filter_multisense(entries: Iterable[DictionaryEntry]) -> list[DictionaryEntry]:
    """Keep only entries with at least two senses, preserving order."""
    return [e for e in entries if len(e.senses) >= 2]


def restrict_to_lemmas(entries: Iterable[DictionaryEntry], allowlist) -> list[DictionaryEntry]:
    """Keep only entries whose lemma is in the allowlist, preserving order."""
    allowed = set(allowlist)
    return [e for e in entries if e.lemma in allowed]


# --- structured (JSON Lines) alternative ---

def entry_to_dict(entry: DictionaryEntry) -> dict:
    return {
        "lemma": entry.lemma,
        "senses": [
            {
                "ordinal": s.ordinal,
                "definition": s.definition,
                "snippets": [{"text": sn.text, "group": sn.group_id} for sn in s.snippets],
                "special": [{"tag": sp.tag, "text": sp.text} for sp in s.special_examples],
            }
            for s in entry.senses
        ],
    }


def entry_from_dict(obj: dict) -> DictionaryEntry:
    lemma = normalize_text(str(obj["lemma"]))
    senses = []
    for s in obj["senses"]:
        ordinal = int(s["ordinal"])
        snippets = []
        for sn in s.get("snippets", []):
            snippets.append(
                UsageSnippet(
                    normalize_text(str(sn["text"])),
                    lemma,
                    (lemma, ordinal),
                    int(sn["group"]),
                    len(snippets),
                )
            )
        special = [
            SpecialExample(normalize_text(str(sp["tag"])), normalize_text(str(sp["text"])))
            for sp in s.get("special", [])
        ]
        senses.append(Sense(ordinal, normalize_text(str(s["definition"])), snippets, special))
    entry = DictionaryEntry(lemma, senses)
    validate_entry(entry)
    return entry


def entries_to_jsonl(entries: Iterable[DictionaryEntry]) -> str:
    return "".join(json.dumps(entry_to_dict(e), ensure_ascii=False) + "\n" for e in entries)


def entries_from_jsonl(text: str, strict: bool = False) -> ParseResult:
    entries: list[DictionaryEntry] = []
    issues: list[ParseIssue] = []
    for no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if "_meta" in obj:
                continue
            entries.append(entry_from_dict(obj))
        except (KeyError, TypeError, ValueError) as exc:
            issues.append(ParseIssue(no, f"bad entry record: {exc}"))
    if strict and issues:
        raise DictionaryParseError(issues)
    return ParseResult(entries, issues)
