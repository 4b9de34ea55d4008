"""Hierarchical book summarization.

Each chunk is summarized independently, then adjacent summaries are merged
pairwise, level by level, until one summary remains. An odd summary at a
level is carried unmerged into the next level. The full merge tree, every
prompt, and per-node token usage are retained so any node can be audited.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

from .corpus import BookDocument, Chunk, chunk_text
from .gateway import Backend, Completion, Gateway, PromptRequest
from .tokenizers import Tokenizer, WhitespaceTokenizer
from .util import now

DEFAULT_CHUNK_TEMPLATE = """Summarize the following excerpt from a book. Cover the key events, \
characters, settings, and motivations in plain prose, in chronological order. \
Keep the summary under {word_budget} words.

Excerpt:
{chunk}

Summary:"""

DEFAULT_MERGE_TEMPLATE = """Below are two consecutive summaries covering adjacent parts of the same \
book, along with optional context summarizing what happened earlier. Merge the two summaries into one \
coherent summary in chronological order, preserving key events, characters, and motivations. \
Keep the merged summary under {word_budget} words.

Context:
{context}

Summary 1:
{left}

Summary 2:
{right}

Merged summary:"""

# Completions that decline the merge instead of producing a summary.
REFUSAL_MARKERS = (
    "i apologize",
    "i'm sorry",
    "i am sorry",
    "not possible to merge",
    "do not appear to be related",
    "cannot merge",
)

DEFAULT_CONTEXT_BUDGET = 2000
DEFAULT_WORD_BUDGET = 600  # keeps summaries comfortably under ~800 tokens


class EmptySummary(Exception):
    """The backend produced a blank summary for a chunk."""


class MergeRefused(Exception):
    """The backend declined to merge; the raw answer is preserved."""

    def __init__(self, raw_text: str, node_id: str = ""):
        super().__init__(f"merge declined at {node_id or 'unknown node'}")
        self.raw_text = raw_text
        self.node_id = node_id
        self.partial_tree: MergeTree | None = None


@dataclass
class MergeNode:
    id: str
    text: str
    kind: str  # "chunk_summary" | "merged"
    level: int
    children: tuple[str, ...] = ()
    prompt: str = ""
    input_tokens: int = 0
    output_tokens: int = 0
    cost: float = 0.0

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "kind": self.kind,
            "level": self.level,
            "children": list(self.children),
            "prompt": self.prompt,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "cost": self.cost,
        }


@dataclass
class MergeTree:
    leaves: list[str]
    nodes: dict[str, MergeNode]
    root_id: str | None = None

    @property
    def merge_count(self) -> int:
        return sum(1 for n in self.nodes.values() if n.kind == "merged")

    @property
    def depth(self) -> int:
        """Number of levels, counting leaves as level 0."""
        if not self.nodes:
            return 0
        return max(n.level for n in self.nodes.values()) + 1

    def total_cost(self) -> float:
        return sum(n.cost for n in self.nodes.values())

    def to_json(self) -> dict:
        return {
            "leaves": self.leaves,
            "root_id": self.root_id,
            "nodes": {nid: n.to_json() for nid, n in sorted(self.nodes.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "MergeTree":
        nodes = {
            nid: MergeNode(
                id=raw["id"],
                text=raw["text"],
                kind=raw["kind"],
                level=raw["level"],
                children=tuple(raw["children"]),
                prompt=raw.get("prompt", ""),
                input_tokens=raw.get("input_tokens", 0),
                output_tokens=raw.get("output_tokens", 0),
                cost=raw.get("cost", 0.0),
            )
            for nid, raw in data["nodes"].items()
        }
        return cls(leaves=list(data["leaves"]), nodes=nodes, root_id=data.get("root_id"))


@dataclass
class SummaryRecord:
    book_id: str
    model_name: str
    final_text: str
    tree: MergeTree
    chunk_size: int
    created_at: float
    final_token_count: int

    def to_json(self) -> dict:
        return {
            "book_id": self.book_id,
            "model_name": self.model_name,
            "final_text": self.final_text,
            "chunk_size": self.chunk_size,
            "created_at": self.created_at,
            "final_token_count": self.final_token_count,
            "tree": self.tree.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SummaryRecord":
        return cls(
            book_id=data["book_id"],
            model_name=data["model_name"],
            final_text=data["final_text"],
            tree=MergeTree.from_json(data["tree"]),
            chunk_size=data["chunk_size"],
            created_at=data["created_at"],
            final_token_count=data["final_token_count"],
        )


@dataclass
class SummarizerConfig:
    chunk_size: int
    backend: Backend
    chunk_template: str = DEFAULT_CHUNK_TEMPLATE
    merge_template: str = DEFAULT_MERGE_TEMPLATE
    context_budget: int = DEFAULT_CONTEXT_BUDGET
    word_budget: int = DEFAULT_WORD_BUDGET
    max_output_tokens: int = 900
    parallelism: int = 1
    tokenizer: Tokenizer = field(default_factory=WhitespaceTokenizer)
    refusal_markers: tuple[str, ...] = REFUSAL_MARKERS


def _looks_refused(text: str, markers: tuple[str, ...]) -> bool:
    head = text.lower()[:400]
    return any(marker in head for marker in markers)


def summarize_chunk(
    chunk: Chunk,
    backend: Backend,
    gateway: Gateway,
    template: str = DEFAULT_CHUNK_TEMPLATE,
    word_budget: int = DEFAULT_WORD_BUDGET,
    max_output_tokens: int = 900,
) -> Completion:
    if not chunk.text.strip():
        raise EmptySummary(f"chunk {chunk.index} is empty")
    prompt = template.format(chunk=chunk.text, word_budget=word_budget)
    completion = gateway.complete(PromptRequest(user=prompt, max_output_tokens=max_output_tokens), backend)
    if not completion.text.strip():
        raise EmptySummary(f"blank summary for chunk {chunk.index}")
    return Completion(
        text=completion.text.strip(),
        input_tokens=completion.input_tokens,
        output_tokens=completion.output_tokens,
        cost=completion.cost,
        backend=completion.backend,
    )


def merge_pair(
    left: str,
    right: str,
    context: str,
    backend: Backend,
    gateway: Gateway,
    template: str = DEFAULT_MERGE_TEMPLATE,
    word_budget: int = DEFAULT_WORD_BUDGET,
    max_output_tokens: int = 900,
    refusal_markers: tuple[str, ...] = REFUSAL_MARKERS,
    node_id: str = "",
) -> Completion:
    prompt = template.format(left=left, right=right, context=context, word_budget=word_budget)
    completion = gateway.complete(PromptRequest(user=prompt, max_output_tokens=max_output_tokens), backend)
    text = completion.text.strip()
    if _looks_refused(text, refusal_markers):
        raise MergeRefused(completion.text, node_id)
    return Completion(
        text=text,
        input_tokens=completion.input_tokens,
        output_tokens=completion.output_tokens,
        cost=completion.cost,
        backend=completion.backend,
    )


def merge_summaries(leaf_texts: list[str], config: SummarizerConfig, gateway: Gateway) -> MergeTree:
    """Build the merge tree over pre-computed leaf summaries.

    Pairs are strictly adjacent, processed left to right; an odd element is
    carried unmerged to the next level. The context given to each merge is
    the concatenation of merges already completed at the same level,
    truncated from the oldest end to the configured token budget.
    """
    if not leaf_texts:
        raise ValueError("no summaries to merge")
    tree = MergeTree(leaves=[], nodes={})
    current: list[MergeNode] = []
    for i, text in enumerate(leaf_texts):
        node = MergeNode(id=f"s{i}", text=text, kind="chunk_summary", level=0)
        tree.nodes[node.id] = node
        tree.leaves.append(node.id)
        current.append(node)

    level = 0
    while len(current) > 1:
        level += 1
        nxt: list[MergeNode] = []
        completed_texts: list[str] = []
        pair_index = 0
        for j in range(0, len(current) - 1, 2):
            left, right = current[j], current[j + 1]
            context = "\n\n".join(completed_texts)
            if context:
                context = config.tokenizer.truncate_head(context, config.context_budget)
            node_id = f"m{level}-{pair_index}"
            try:
                completion = merge_pair(
                    left.text,
                    right.text,
                    context,
                    config.backend,
                    gateway,
                    template=config.merge_template,
                    word_budget=config.word_budget,
                    max_output_tokens=config.max_output_tokens,
                    refusal_markers=config.refusal_markers,
                    node_id=node_id,
                )
            except MergeRefused as refused:
                refused.partial_tree = tree
                raise
            node = MergeNode(
                id=node_id,
                text=completion.text,
                kind="merged",
                level=level,
                children=(left.id, right.id),
                prompt=config.merge_template.format(
                    left=left.text, right=right.text, context=context, word_budget=config.word_budget
                ),
                input_tokens=completion.input_tokens,
                output_tokens=completion.output_tokens,
                cost=completion.cost,
            )
            tree.nodes[node.id] = node
            completed_texts.append(node.text)
            nxt.append(node)
            pair_index += 1
        if len(current) % 2 == 1:
            nxt.append(current[-1])  # carried unmerged
        current = nxt

    tree.root_id = current[0].id
    return tree


def hierarchical_summarize(doc: BookDocument, config: SummarizerConfig, gateway: Gateway) -> SummaryRecord:
    """Chunk, summarize each chunk, then merge pairwise until one root
    summary remains. Chunk summaries may run in parallel; merge order is
    deterministic regardless."""
    chunks = chunk_text(doc, config.chunk_size, config.tokenizer)

    def _leaf(chunk: Chunk) -> Completion:
        return summarize_chunk(
            chunk,
            config.backend,
            gateway,
            template=config.chunk_template,
            word_budget=config.word_budget,
            max_output_tokens=config.max_output_tokens,
        )

    workers = max(1, min(config.parallelism, config.backend.config.max_parallel))
    if workers == 1 or len(chunks) == 1:
        leaf_completions = [_leaf(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            leaf_completions = list(pool.map(_leaf, chunks))

    tree = merge_summaries([c.text for c in leaf_completions], config, gateway)
    for i, completion in enumerate(leaf_completions):
        node = tree.nodes[f"s{i}"]
        node.prompt = config.chunk_template.format(chunk=chunks[i].text, word_budget=config.word_budget)
        node.input_tokens = completion.input_tokens
        node.output_tokens = completion.output_tokens
        node.cost = completion.cost

    final_text = tree.nodes[tree.root_id].text
    return SummaryRecord(
        book_id=doc.id,
        model_name=config.backend.config.name,
        final_text=final_text,
        tree=tree,
        chunk_size=config.chunk_size,
        created_at=now(),
        final_token_count=config.tokenizer.count(final_text),
    )
