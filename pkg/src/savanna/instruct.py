"""Instruction dataset construction, chat rendering and sample packing.

Conversations are built as alternating user/assistant turns; rendering
produces token ids with a response-only loss mask (1 exactly on assistant
message bodies).  Tokenization is pluggable via :class:`TokenizerPort`;
tests and demos use the byte and whitespace toy tokenizers.
"""

from __future__ import annotations

import json
import random
import string
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol

from .corpus import ParallelPair

CATEGORIES = (
    "translation",
    "question_answering",
    "summarization_correction",
    "creative",
    "cultural_explanation",
)

DEFECTS = ("factuality", "glitching", "other")


@dataclass
class Turn:
    role: str  # "user" | "assistant"
    text: str


@dataclass
class InstructionExample:
    category: str
    turns: list[Turn]
    langs_involved: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category: {self.category!r}")
        validate_alternation(self.turns)


def validate_alternation(turns: list[Turn]) -> None:
    if not turns:
        raise ValueError("conversation must have at least one turn")
    for i, turn in enumerate(turns):
        expected = "user" if i % 2 == 0 else "assistant"
        if turn.role != expected:
            raise ValueError(f"turn {i} must have role {expected!r}, got {turn.role!r}")
        if not turn.text:
            raise ValueError(f"turn {i} has empty text")
    if turns[-1].role != "assistant":
        raise ValueError("conversation must end with an assistant turn")


@dataclass
class PreferencePair:
    prompt: str
    chosen: str
    rejected: str
    defect: str = "other"

    def __post_init__(self) -> None:
        if self.defect not in DEFECTS:
            raise ValueError(f"unknown defect: {self.defect!r}")
        if not self.prompt or not self.chosen or not self.rejected:
            raise ValueError("prompt, chosen and rejected must be non-empty")
        if self.chosen == self.rejected:
            raise ValueError("chosen and rejected must differ")


@dataclass
class ChatExample:
    token_ids: list[int]
    loss_mask: list[int]
    boundaries: list[tuple[int, int, int]]  # (turn index, start, end)

    def __post_init__(self) -> None:
        if len(self.token_ids) != len(self.loss_mask):
            raise ValueError("token_ids and loss_mask must have equal length")


@dataclass
class PackedSequence:
    token_ids: list[int]
    segment_spans: list[tuple[str, int, int]]  # (doc id, start, end) in sequence
    attention_segments: list[int]  # per-token segment id


# --- Tokenizers --------------------------------------------------------------


class TokenizerPort(Protocol):
    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: list[int]) -> str: ...


class ByteTokenizer:
    """UTF-8 byte-level tokenizer; exact round trip for any text."""

    def encode(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def decode(self, ids: list[int]) -> str:
        return bytes(ids).decode("utf-8")


class WhitespaceTokenizer:
    """Word-level tokenizer with a dynamically grown vocabulary.

    Round-trips text whose tokens are separated by single spaces.
    """

    def __init__(self) -> None:
        self._token_to_id: dict[str, int] = {}
        self._id_to_token: list[str] = []

    def encode(self, text: str) -> list[int]:
        ids = []
        for token in text.split():
            if token not in self._token_to_id:
                self._token_to_id[token] = len(self._id_to_token)
                self._id_to_token.append(token)
            ids.append(self._token_to_id[token])
        return ids

    def decode(self, ids: list[int]) -> str:
        return " ".join(self._id_to_token[i] for i in ids)


class VocabFileTokenizer:
    """Word-level tokenizer backed by an explicit ``{token: id}`` JSON file."""

    def __init__(self, vocab: dict[str, int]):
        self._token_to_id = dict(vocab)
        self._id_to_token = {i: t for t, i in vocab.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "VocabFileTokenizer":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def encode(self, text: str) -> list[int]:
        ids = []
        for token in text.split():
            if token not in self._token_to_id:
                raise ValueError(f"token not in vocabulary: {token!r}")
            ids.append(self._token_to_id[token])
        return ids

    def decode(self, ids: list[int]) -> str:
        return " ".join(self._id_to_token[i] for i in ids)


# --- Chat template and rendering ---------------------------------------------


@dataclass
class ChatTemplate:
    """Control strings delimiting each role's message.

    All four delimiters must be declared (empty strings are allowed, as in
    the zero-overhead toy template used in tests).
    """

    user_prefix: str
    user_suffix: str
    assistant_prefix: str
    assistant_suffix: str

    @classmethod
    def from_file(cls, path: str | Path) -> "ChatTemplate":
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        missing = [k for k in ("user_prefix", "user_suffix", "assistant_prefix", "assistant_suffix")
                   if k not in data]
        if missing:
            raise ValueError(f"chat template missing role delimiters: {missing}")
        return cls(**{k: data[k] for k in
                      ("user_prefix", "user_suffix", "assistant_prefix", "assistant_suffix")})


def render_chat(example: InstructionExample, tokenizer: TokenizerPort,
                template: ChatTemplate) -> ChatExample:
    """Tokenize a conversation with a response-only loss mask.

    The mask is 1 exactly on assistant message bodies; user text, role
    headers and template control tokens are 0.  Each piece is tokenized in
    isolation, so decoding the masked-in positions reconstructs the
    concatenated assistant bodies.
    """
    for name in ("user_prefix", "user_suffix", "assistant_prefix", "assistant_suffix"):
        if getattr(template, name) is None:
            raise ValueError(f"chat template missing role delimiter: {name}")
    token_ids: list[int] = []
    loss_mask: list[int] = []
    boundaries: list[tuple[int, int, int]] = []
    for turn_index, turn in enumerate(example.turns):
        if turn.role == "assistant":
            prefix, suffix, body_mask = template.assistant_prefix, template.assistant_suffix, 1
        else:
            prefix, suffix, body_mask = template.user_prefix, template.user_suffix, 0
        for piece, mask_value in ((prefix, 0), (turn.text, body_mask), (suffix, 0)):
            if not piece:
                continue
            ids = tokenizer.encode(piece)
            if mask_value == 1:
                boundaries.append((turn_index, len(token_ids), len(token_ids) + len(ids)))
            token_ids.extend(ids)
            loss_mask.extend([mask_value] * len(ids))
    return ChatExample(token_ids=token_ids, loss_mask=loss_mask, boundaries=boundaries)


# --- Translation instructions and ASR noise ----------------------------------


_LANGUAGE_NAMES: dict[str, str] | None = None


def language_name(code: str) -> str:
    global _LANGUAGE_NAMES
    if _LANGUAGE_NAMES is None:
        _LANGUAGE_NAMES = json.loads(
            resources.files("savanna.data").joinpath("languages.json").read_text()
        )
    return _LANGUAGE_NAMES.get(code, code)


TRANSLATION_PROMPT = (
    "Translate the following text from {src} to {tgt}. "
    "Reply with only the translation.\n\n{text}"
)


def asr_noise(text: str, rate: float, rng: random.Random) -> str:
    """Simulate ASR-style corruption: per-character substitution, deletion
    and insertion at the given rate, plus punctuation drop."""
    letters = [ch for ch in text if ch.isalpha()] or list(string.ascii_lowercase)
    out = []
    for ch in text:
        if unicodedata.category(ch).startswith("P"):
            continue
        r = rng.random()
        if r < rate:
            op = rng.random()
            if op < 1 / 3:
                continue  # deletion
            if op < 2 / 3:
                out.append(rng.choice(letters))  # substitution
            else:
                out.append(ch)
                out.append(rng.choice(letters))  # insertion
        else:
            out.append(ch)
    return "".join(out)


def make_translation_instruction(pair: ParallelPair, noisy: bool = False,
                                 rng_seed: int = 0, noise_rate: float = 0.1,
                                 ) -> InstructionExample:
    """Render a parallel pair as a one-turn translation instruction.

    With ``noisy=True`` the source text is perturbed by the ASR noise model,
    deterministically for a fixed seed.
    """
    source_text = pair.src_text
    if noisy:
        source_text = asr_noise(source_text, noise_rate, random.Random(rng_seed))
    user = TRANSLATION_PROMPT.format(
        src=language_name(pair.src_lang), tgt=language_name(pair.tgt_lang), text=source_text
    )
    return InstructionExample(
        category="translation",
        turns=[Turn("user", user), Turn("assistant", pair.tgt_text)],
        langs_involved={pair.src_lang, pair.tgt_lang},
    )


def concat_conversations(examples: list[InstructionExample], rng_seed: int = 0,
                         max_turns: int = 16) -> InstructionExample:
    """Concatenate conversations in seeded random order.

    Turns of each input stay contiguous and internally ordered; examples
    that would exceed ``max_turns`` are skipped (the first sampled example
    is always included).
    """
    if not examples:
        raise ValueError("need at least one example")
    for ex in examples:
        validate_alternation(ex.turns)
    order = list(range(len(examples)))
    random.Random(rng_seed).shuffle(order)
    turns: list[Turn] = []
    langs: set[str] = set()
    category = None
    for idx in order:
        ex = examples[idx]
        if turns and len(turns) + len(ex.turns) > max_turns:
            continue
        if category is None:
            category = ex.category
        turns.extend(ex.turns)
        langs.update(ex.langs_involved)
    return InstructionExample(category=category, turns=turns, langs_involved=langs)


# --- Sample packing -----------------------------------------------------------


def pack(token_streams: list[tuple[str, list[int]]], max_len: int = 512) -> list[PackedSequence]:
    """First-fit sample packing into sequences of at most ``max_len`` tokens.

    Documents longer than ``max_len`` are split into consecutive chunks.
    Every input token appears exactly once; each sequence carries per-token
    segment ids so a consumer can block cross-document attention.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    chunks: list[tuple[str, list[int]]] = []
    for doc_id, ids in token_streams:
        if not ids:
            raise ValueError(f"document {doc_id!r} is empty after tokenization")
        for start in range(0, len(ids), max_len):
            chunks.append((doc_id, ids[start : start + max_len]))

    sequences: list[PackedSequence] = []
    for doc_id, chunk in chunks:
        placed = False
        for seq in sequences:
            if len(seq.token_ids) + len(chunk) <= max_len:
                start = len(seq.token_ids)
                seq.token_ids.extend(chunk)
                seq.segment_spans.append((doc_id, start, start + len(chunk)))
                seq.attention_segments.extend([len(seq.segment_spans) - 1] * len(chunk))
                placed = True
                break
        if not placed:
            sequences.append(
                PackedSequence(
                    token_ids=list(chunk),
                    segment_spans=[(doc_id, 0, len(chunk))],
                    attention_segments=[0] * len(chunk),
                )
            )
    return sequences


def batch_spec(tokens_per_batch: int = 32768, max_len: int = 512) -> int:
    """Sequences per batch for a fixed token budget (e.g. 32768/512 = 64)."""
    q, r = divmod(tokens_per_batch, max_len)
    if r != 0:
        raise ValueError("tokens_per_batch must be divisible by max_len")
    return q


PACKED_FORMAT_VERSION = 1


def write_packed_jsonl(sequences: Iterable[PackedSequence], path: str | Path,
                       max_len: int = 512) -> int:
    """Write packed sequences as JSONL; the first line is a version header."""
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"version": PACKED_FORMAT_VERSION, "max_len": max_len}) + "\n")
        for seq in sequences:
            f.write(json.dumps({
                "token_ids": seq.token_ids,
                "segment_spans": [list(s) for s in seq.segment_spans],
                "attention_segments": seq.attention_segments,
            }) + "\n")
            n += 1
    return n


def read_packed_jsonl(path: str | Path) -> tuple[list[PackedSequence], int]:
    with open(path, encoding="utf-8") as f:
        header = json.loads(f.readline())
        if header.get("version") != PACKED_FORMAT_VERSION:
            raise ValueError(f"unsupported packed format version: {header.get('version')}")
        sequences = []
        for line in f:
            if line.strip():
                obj = json.loads(line)
                sequences.append(PackedSequence(
                    token_ids=obj["token_ids"],
                    segment_spans=[tuple(s) for s in obj["segment_spans"]],
                    attention_segments=obj["attention_segments"],
                ))
    return sequences, header["max_len"]


# --- Synthetic preference pairs ------------------------------------------------


def synth_factuality_pair(prompt: str, chosen: str, wrong_fact: tuple[str, str]) -> PreferencePair:
    """Rejected response substitutes a factual span (old, new) in the chosen one."""
    old, new = wrong_fact
    if old not in chosen:
        raise ValueError(f"fact {old!r} not present in chosen response")
    rejected = chosen.replace(old, new)
    return PreferencePair(prompt=prompt, chosen=chosen, rejected=rejected, defect="factuality")


def synth_glitch_pair(prompt: str, chosen: str, phrase: str = "wammanga ",
                      repeats: int = 8) -> PreferencePair:
    """Rejected response degenerates into a repetition loop.

    The repeated phrase is padded to at least 8 characters and repeated at
    least 5 times, matching the loop pathology of glitching outputs.
    """
    if len(phrase) < 8:
        phrase = (phrase + " ") * (8 // max(len(phrase), 1) + 1)
    repeats = max(repeats, 5)
    rejected = chosen.split(".")[0] + ". " + phrase * repeats
    return PreferencePair(prompt=prompt, chosen=chosen, rejected=rejected, defect="glitching")


def has_repetition_loop(text: str, min_len: int = 8, min_count: int = 5) -> bool:
    """True if some substring of length >= min_len occurs >= min_count times."""
    if len(text) < min_len * min_count:
        return False
    counts: dict[str, int] = {}
    for i in range(len(text) - min_len + 1):
        window = text[i : i + min_len]
        counts[window] = counts.get(window, 0) + 1
        if counts[window] >= min_count:
            return True
    return False


# --- Dataset assembly and JSONL I/O --------------------------------------------


def category_counts(examples: Iterable[InstructionExample]) -> dict[str, int]:
    counts = {c: 0 for c in CATEGORIES}
    for ex in examples:
        counts[ex.category] += 1
    return counts


def build_instruction_dataset(pairs: list[ParallelPair],
                              conversational: list[InstructionExample],
                              n_translation: int = 2347,
                              n_conversational: int = 726,
                              noisy_fraction: float = 0.2,
                              rng_seed: int = 0,
                              ) -> tuple[list[InstructionExample], dict[str, int]]:
    """Mix translation instructions with conversational examples.

    Counts are capped by the available inputs; a configurable fraction of
    translation tasks simulates noisy (ASR-like) source text.  Returns the
    examples and per-category counts.
    """
    rng = random.Random(rng_seed)
    examples: list[InstructionExample] = []
    for i, pair in enumerate(pairs[:n_translation]):
        noisy = rng.random() < noisy_fraction
        examples.append(make_translation_instruction(pair, noisy=noisy, rng_seed=rng_seed + i))
    examples.extend(conversational[:n_conversational])
    return examples, category_counts(examples)


def write_instructions_jsonl(examples: Iterable[InstructionExample], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps({
                "category": ex.category,
                "turns": [{"role": t.role, "text": t.text} for t in ex.turns],
                "langs_involved": sorted(ex.langs_involved),
            }, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_instructions_jsonl(path: str | Path) -> list[InstructionExample]:
    examples = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                obj = json.loads(line)
                examples.append(InstructionExample(
                    category=obj["category"],
                    turns=[Turn(t["role"], t["text"]) for t in obj["turns"]],
                    langs_involved=set(obj.get("langs_involved", [])),
                ))
    return examples


def write_preferences_jsonl(pairs: Iterable[PreferencePair], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(json.dumps(pair.__dict__, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_preferences_jsonl(path: str | Path) -> list[PreferencePair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                pairs.append(PreferencePair(**json.loads(line)))
    return pairs
