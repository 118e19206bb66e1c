"""Two-stage tag cleaning: rule-based format unification, then iterative
model-driven synonym grouping until every tag sits in exactly one group.

The grouping loop is conservative by construction: a tag never moves once
assigned (first assignment wins), the ungrouped set can only shrink, and on
stall or iteration exhaustion every leftover becomes its own singleton group
so downstream analytics always see a total partition.
"""

from __future__ import annotations

import ast
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .domain import GarmentTagRecord
from .gateway import Backend, ModelRequest, request_digest
from .textnorm import EmptyAfterNormalization, unify_format

__all__ = [
    "EmptyAfterNormalization",
    "GroupingIterationLog",
    "GroupingProposal",
    "NoDictionaryFound",
    "PartitionViolation",
    "SynonymDictionary",
    "SynonymGroup",
    "TagCorpus",
    "build_corpus",
    "build_group_prompt",
    "canonicalize",
    "iterate_grouping",
    "merge_grouping",
    "parse_group_response",
    "unify_format",
]

logger = logging.getLogger(__name__)

MAX_GROUPING_ITERATIONS = 5

GROUP_PROMPT = (
    "You are an assistant to help group tagging corpus, specifically for the "
    "corpus describing {aspect} for {category}. You are required to group "
    "similar words together and output a dictionary that map each word to the "
    "group? The corpus contains words as follows {tags}. {candidates}Make sure "
    "only words with almost the same meaning be grouped, NOT those describing "
    "the same aspect at a larger scale. Here is an example: 'draped': "
    "['draped', 'draping', 'draped front', 'draped neckline', 'draped panel', "
    "'draped shoulders', 'draped overlay', 'draped look']. Only output the "
    "word groups as a dictionary, DO NOT output other descriptive or "
    "explanatory text!!"
)

CANDIDATE_SENTENCE = (
    "Candidate word groups include {groups}. Check whether each word can be "
    "grouped into an existing group. If not, you can create new groups. "
)


class NoDictionaryFound(Exception):
    """The grouping response contains no parseable dictionary literal."""


class PartitionViolation(Exception):
    """Internal consistency failure while merging a grouping proposal."""


@dataclass(frozen=True)
class TagCorpus:
    """All unified tags observed for one (category, aspect), with counts."""

    category: str
    aspect: str
    counts: Mapping[str, int]

    def total(self) -> int:
        return sum(self.counts.values())

    def tags_by_count(self) -> list[str]:
        return [t for t, _ in sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))]

    def __bool__(self) -> bool:
        return bool(self.counts)


@dataclass(frozen=True)
class SynonymGroup:
    canonical: str
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.canonical not in self.members:
            raise PartitionViolation(
                f"canonical {self.canonical!r} missing from its own members"
            )


@dataclass(frozen=True)
class GroupingIterationLog:
    iteration: int
    prompt_digest: str
    newly_grouped: int
    remaining: int


@dataclass(frozen=True)
class SynonymDictionary:
    """Partition of one (category, aspect) corpus into synonym groups."""

    category: str
    aspect: str
    groups: tuple[SynonymGroup, ...] = ()
    ungrouped: frozenset[str] = frozenset()

    @classmethod
    def empty(cls, corpus: TagCorpus) -> "SynonymDictionary":
        return cls(
            category=corpus.category,
            aspect=corpus.aspect,
            ungrouped=frozenset(corpus.counts),
        )

    def member_index(self) -> dict[str, str]:
        return {m: g.canonical for g in self.groups for m in g.members}

    def lookup(self, tag: str) -> str | None:
        return self.member_index().get(tag)

    def validate(self, corpus: TagCorpus | None = None) -> None:
        """Disjointness of groups, and exact coverage when a corpus is given."""
        seen: dict[str, str] = {}
        for group in self.groups:
            for member in group.members:
                if member in seen:
                    raise PartitionViolation(
                        f"tag {member!r} in groups {seen[member]!r} and "
                        f"{group.canonical!r}"
                    )
                seen[member] = group.canonical
        overlap = self.ungrouped & set(seen)
        if overlap:
            raise PartitionViolation(f"tags both grouped and ungrouped: {sorted(overlap)}")
        if corpus is not None:
            missing = set(corpus.counts) - set(seen) - self.ungrouped
            if missing:
                raise PartitionViolation(f"corpus tags not covered: {sorted(missing)}")

    def to_json_dict(self, log: Iterable[GroupingIterationLog] = ()) -> dict:
        return {
            "category": self.category,
            "aspect": self.aspect,
            "groups": {g.canonical: sorted(g.members) for g in self.groups},
            "ungrouped": sorted(self.ungrouped),
            "log": [
                {
                    "iteration": entry.iteration,
                    "prompt_digest": entry.prompt_digest,
                    "newly_grouped": entry.newly_grouped,
                    "remaining": entry.remaining,
                }
                for entry in log
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "SynonymDictionary":
        groups = tuple(
            SynonymGroup(canonical=c, members=tuple(sorted(members)))
            for c, members in sorted(data["groups"].items())
        )
        return cls(
            category=data["category"],
            aspect=data["aspect"],
            groups=groups,
            ungrouped=frozenset(data.get("ungrouped", ())),
        )

    def save(self, path: str | Path, log: Iterable[GroupingIterationLog] = ()) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(log), indent=2, sort_keys=True) + "\n", "utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "SynonymDictionary":
        return cls.from_json_dict(json.loads(Path(path).read_text("utf-8")))


def build_corpus(
    records: Iterable[GarmentTagRecord],
) -> dict[tuple[str, str], TagCorpus]:
    """Aggregate unified tag occurrence counts per (category, aspect) scope."""
    counters: dict[tuple[str, str], Counter] = {}
    for record in records:
        for aspect, tags in record.aspects.items():
            scope = (record.category, aspect)
            counter = counters.setdefault(scope, Counter())
            for tag in tags:
                try:
                    counter[unify_format(tag)] += 1
                except EmptyAfterNormalization:
                    logger.warning("dropping tag %r (empty after normalization)", tag)
    return {
        scope: TagCorpus(category=scope[0], aspect=scope[1], counts=dict(counter))
        for scope, counter in counters.items()
        if counter
    }


def _render_groups(dictionary: SynonymDictionary) -> str:
    parts = []
    for group in dictionary.groups:
        members = ", ".join(f"'{m}'" for m in sorted(group.members))
        parts.append(f"'{group.canonical}': [{members}]")
    return "{" + ", ".join(parts) + "}"


def build_group_prompt(
    corpus: TagCorpus, existing: SynonymDictionary | None = None
) -> str:
    """First iteration lists the whole corpus; later iterations list only the
    ungrouped tags plus the candidate groups accumulated so far."""
    if not corpus:
        raise ValueError("cannot build a grouping prompt for an empty corpus")
    if existing is not None and existing.groups:
        tags = [t for t in corpus.tags_by_count() if t in existing.ungrouped]
        candidates = CANDIDATE_SENTENCE.format(groups=_render_groups(existing))
    else:
        tags = corpus.tags_by_count()
        candidates = ""
    if not tags:
        raise ValueError("no ungrouped tags left; grouping prompt not needed")
    return GROUP_PROMPT.format(
        aspect=corpus.aspect,
        category=corpus.category,
        tags=", ".join(tags),
        candidates=candidates,
    )


@dataclass
class GroupingProposal:
    mapping: dict[str, str]
    warnings: list[str] = field(default_factory=list)


def _extract_dict_literal(raw: str):
    text = raw.strip()
    # Prefer the contents of a code fence when one wraps the dictionary.
    if "```" in text:
        chunks = text.split("```")
        for chunk in chunks[1:]:
            if "{" in chunk:
                text = chunk
                if text.startswith(("json", "python")):
                    text = text.split("\n", 1)[-1]
                break
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end == -1 or end <= start:
        raise NoDictionaryFound("no dictionary literal in response")
    candidate = text[start : end + 1]
    for loader in (ast.literal_eval, json.loads):
        try:
            value = loader(candidate)
        except (ValueError, SyntaxError):
            continue
        if isinstance(value, dict):
            return value
    raise NoDictionaryFound("response braces do not parse as a dictionary")


def parse_group_response(raw: str, corpus: TagCorpus) -> GroupingProposal:
    """Extract the proposed tag -> group-key mapping from a model response.

    Tolerates code fences and prose around the dictionary. Mappings that name
    tags absent from the corpus are dropped with warnings; the group key
    itself may be a new word (it becomes the canonical representative).
    """
    if not raw:
        raise NoDictionaryFound("empty response")
    parsed = _extract_dict_literal(raw)
    mapping: dict[str, str] = {}
    warnings: list[str] = []

    def assign(member: str, group_key: str) -> None:
        if member not in corpus.counts:
            warnings.append(f"tag {member!r} not in corpus; mapping dropped")
            return
        if member in mapping and mapping[member] != group_key:
            warnings.append(
                f"tag {member!r} proposed for both {mapping[member]!r} and "
                f"{group_key!r}; first kept"
            )
            return
        mapping[member] = group_key

    for key, value in parsed.items():
        try:
            group_key = unify_format(str(key))
        except EmptyAfterNormalization:
            warnings.append(f"group key {key!r} empty after normalization")
            continue
        if isinstance(value, (list, tuple, set)):
            members = list(value)
            if group_key in corpus.counts:
                assign(group_key, group_key)
            for member in members:
                try:
                    assign(unify_format(str(member)), group_key)
                except EmptyAfterNormalization:
                    warnings.append(f"member {member!r} empty after normalization")
        elif isinstance(value, str):
            # Inverted form: {'draping': 'draped'} maps a word to its group.
            try:
                target = unify_format(value)
            except EmptyAfterNormalization:
                warnings.append(f"group name {value!r} empty after normalization")
                continue
            assign(group_key, target)
        else:
            warnings.append(f"unsupported group value for {key!r}: {value!r}")
    return GroupingProposal(mapping=mapping, warnings=warnings)


def merge_grouping(
    dictionary: SynonymDictionary, proposal: Mapping[str, str]
) -> tuple[SynonymDictionary, list[str]]:
    """Fold a proposal into the dictionary. Tags already grouped never move;
    unknown group keys create new groups with the key as canonical member."""
    groups: dict[str, set[str]] = {
        g.canonical: set(g.members) for g in dictionary.groups
    }
    membership = {m: c for c, members in groups.items() for m in members}
    ungrouped = set(dictionary.ungrouped)
    warnings: list[str] = []

    for tag, key in proposal.items():
        target = membership.get(key, key)
        if tag in membership:
            if membership[tag] != target:
                warnings.append(
                    f"tag {tag!r} already in group {membership[tag]!r}; "
                    f"proposal to move it to {target!r} ignored"
                )
            continue
        if target in groups:
            groups[target].add(tag)
        else:
            groups[target] = {target, tag}
            membership[target] = target
            ungrouped.discard(target)
        membership[tag] = target
        ungrouped.discard(tag)

    merged = SynonymDictionary(
        category=dictionary.category,
        aspect=dictionary.aspect,
        groups=tuple(
            SynonymGroup(canonical=c, members=tuple(sorted(members)))
            for c, members in sorted(groups.items())
        ),
        ungrouped=frozenset(ungrouped),
    )
    merged.validate()
    return merged, warnings


def _singleton_remainder(dictionary: SynonymDictionary) -> SynonymDictionary:
    if not dictionary.ungrouped:
        return dictionary
    singletons = tuple(
        SynonymGroup(canonical=t, members=(t,)) for t in sorted(dictionary.ungrouped)
    )
    return SynonymDictionary(
        category=dictionary.category,
        aspect=dictionary.aspect,
        groups=tuple(sorted(dictionary.groups + singletons, key=lambda g: g.canonical)),
        ungrouped=frozenset(),
    )


def iterate_grouping(
    corpus: TagCorpus,
    backend: Backend,
    max_iters: int = MAX_GROUPING_ITERATIONS,
    *,
    model_hint: str = "grouping",
) -> tuple[SynonymDictionary, list[GroupingIterationLog]]:
    """Run the grouping loop to a fixpoint and return a total partition.

    Stops when everything is grouped, an iteration makes zero progress, or
    ``max_iters`` is reached; leftovers become singleton groups either way.
    Parse failures consume an iteration and continue.
    """
    if not corpus:
        raise ValueError("cannot group an empty corpus")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    dictionary = SynonymDictionary.empty(corpus)
    log: list[GroupingIterationLog] = []
    for iteration in range(1, max_iters + 1):
        if not dictionary.ungrouped:
            break
        prompt = build_group_prompt(corpus, dictionary if dictionary.groups else None)
        request = ModelRequest(
            role_instructions="",
            user_text=prompt,
            model_hint=model_hint,
        )
        digest = request_digest(request)
        response = backend.complete(request)
        before = len(dictionary.ungrouped)
        if response.refused:
            log.append(GroupingIterationLog(iteration, digest, 0, before))
            continue
        try:
            proposal = parse_group_response(response.text, corpus)
        except NoDictionaryFound:
            log.append(GroupingIterationLog(iteration, digest, 0, before))
            continue
        for warning in proposal.warnings:
            logger.debug("grouping warning (%s/%s): %s", corpus.category, corpus.aspect, warning)
        dictionary, merge_warnings = merge_grouping(dictionary, proposal.mapping)
        for warning in merge_warnings:
            logger.debug("merge warning (%s/%s): %s", corpus.category, corpus.aspect, warning)
        newly = before - len(dictionary.ungrouped)
        log.append(GroupingIterationLog(iteration, digest, newly, len(dictionary.ungrouped)))
        if newly == 0:
            break
    dictionary = _singleton_remainder(dictionary)
    dictionary.validate(corpus)
    return dictionary, log


def canonicalize(tag: str, dictionary: SynonymDictionary) -> str:
    """Map a raw tag to its group canonical; unseen tags map to themselves."""
    unified = unify_format(tag)
    canonical = dictionary.lookup(unified)
    if canonical is None:
        logger.warning(
            "tag %r outside the %s/%s corpus; treated as implicit singleton",
            unified,
            dictionary.category,
            dictionary.aspect,
        )
        return unified
    return canonical
