#!/usr/bin/env python3
"""
SSC Corpus
Text ingestion, the shared background-knowledge vocabulary and fixed-length batching.

Alice, Bob and Eve all use the same Vocabulary: it is public knowledge.
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
import torch

from ssc_errors import ConfigurationError, ContractViolationError, EmptyCorpusError

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
START_TOKEN = "<start>"
END_TOKEN = "<end>"
UNK_TOKEN = "<unk>"
SPECIAL_TOKENS = (PAD_TOKEN, START_TOKEN, END_TOKEN, UNK_TOKEN)

PAD_ID, START_ID, END_ID, UNK_ID = range(4)

_PUNCTUATION = re.compile(r"[^\w\s]|_")


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation and collapse whitespace."""
    return " ".join(_PUNCTUATION.sub("", text.lower()).split())


def tokenize(text: str) -> List[str]:
    return normalize_text(text).split()


class Vocabulary:
    """Token/id maps with the four specials at ids 0-3."""

    def __init__(self, tokens: Sequence[str]):
        """Build a vocabulary.

        Args:
            tokens: Ordinary tokens in id order (specials are prepended)
        """
        ordinary = [token for token in tokens if token not in SPECIAL_TOKENS]
        self.id_to_token: List[str] = list(SPECIAL_TOKENS) + ordinary
        self.token_to_id: Dict[str, int] = {token: idx for idx, token in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ConfigurationError("Vocabulary tokens must be unique")

    pad_id = PAD_ID
    start_id = START_ID
    end_id = END_ID
    unk_id = UNK_ID

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def save(self, path: str):
        """Write "token<TAB>id" lines, specials first."""
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{token}\t{idx}" for idx, token in enumerate(self.id_to_token)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"Vocabulary saved ({self.size} tokens): {path}")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        pairs = []
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                token, idx = line.rsplit("\t", 1)
                pairs.append((int(idx), token))
            except ValueError:
                raise ConfigurationError(f"Malformed vocabulary line {line_no} in {path}: {line!r}")

        pairs.sort()
        if [idx for idx, _ in pairs] != list(range(len(pairs))):
            raise ConfigurationError(f"Vocabulary ids in {path} are not contiguous from 0")
        if tuple(token for _, token in pairs[:4]) != SPECIAL_TOKENS:
            raise ConfigurationError(f"Vocabulary {path} does not start with {SPECIAL_TOKENS}")
        return cls([token for _, token in pairs[4:]])


@dataclass(frozen=True)
class TokenSequence:
    """One sentence as padded vocabulary ids; length counts non-pad slots."""

    ids: Tuple[int, ...]
    length: int

    def __post_init__(self):
        if self.length > len(self.ids):
            raise ContractViolationError(f"length {self.length} exceeds slot count {len(self.ids)}")
        if any(idx != PAD_ID for idx in self.ids[self.length:]):
            raise ContractViolationError("positions past length must hold the pad id")

    @property
    def max_len(self) -> int:
        return len(self.ids)


class SentenceBatch:
    """B sentences stacked as a [B, L] integer tensor."""

    def __init__(self, ids: torch.Tensor):
        if ids.dim() != 2 or ids.shape[0] == 0:
            raise ContractViolationError(f"SentenceBatch needs a non-empty [B, L] tensor, got {tuple(ids.shape)}")
        self.ids = ids.long()

    @property
    def B(self) -> int:
        return self.ids.shape[0]

    @property
    def L(self) -> int:
        return self.ids.shape[1]

    def pad_mask(self) -> torch.Tensor:
        """True where the slot holds padding."""
        return self.ids.eq(PAD_ID)

    def lengths(self) -> torch.Tensor:
        return (~self.pad_mask()).sum(dim=1)

    def targets(self) -> torch.Tensor:
        """Next-token targets: the batch shifted left by one, pad-filled."""
        pad_column = torch.full((self.B, 1), PAD_ID, dtype=self.ids.dtype, device=self.ids.device)
        return torch.cat([self.ids[:, 1:], pad_column], dim=1)


def stack_batch(sequences: Sequence[TokenSequence]) -> SentenceBatch:
    if not sequences:
        raise ContractViolationError("Cannot stack an empty list of sequences")
    return SentenceBatch(torch.tensor([seq.ids for seq in sequences], dtype=torch.long))


def load_corpus(path: str, min_len: int, max_len: int) -> List[str]:
    """Read one sentence per line and keep those with min_len..max_len words.

    Args:
        path: UTF-8 text file
        min_len: Minimum word count (inclusive)
        max_len: Maximum word count (inclusive)

    Returns:
        Normalized sentences in file order
    """
    corpus_path = Path(path)
    if not corpus_path.is_file():
        raise FileNotFoundError(f"Corpus file not found: {path}")

    kept = []
    total = 0
    with open(corpus_path, "r", encoding="utf-8") as f:
        for line in f:
            sentence = normalize_text(line)
            if not sentence:
                continue
            total += 1
            if min_len <= len(sentence.split()) <= max_len:
                kept.append(sentence)

    if not kept:
        raise EmptyCorpusError(f"empty corpus: no sentence of {min_len}-{max_len} words in {path}")

    logger.info(f"Loaded {len(kept)}/{total} sentences from {path}")
    return kept


def build_vocab(sentences: Sequence[str], max_vocab: int) -> Vocabulary:
    """Keep the max_vocab - 4 most frequent tokens; ties break lexicographically."""
    if max_vocab < 5:
        raise ConfigurationError(f"max_vocab must be at least 5, got {max_vocab}")
    if not sentences:
        raise EmptyCorpusError("Cannot build a vocabulary from an empty sentence list")

    counts = Counter()
    for sentence in sentences:
        counts.update(tokenize(sentence))
    for special in SPECIAL_TOKENS:
        counts.pop(special, None)

    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    vocab = Vocabulary([token for token, _ in ranked[: max_vocab - len(SPECIAL_TOKENS)]])
    logger.debug(f"Vocabulary built: {vocab.size} ids from {len(counts)} distinct tokens")
    return vocab


def encode_sentence(text: str, vocab: Vocabulary, L: int) -> TokenSequence:
    """[start, words..., end, pad...]; words past L - 2 are truncated."""
    if L < 3:
        raise ConfigurationError(f"L must be at least 3, got {L}")
    words = tokenize(text)[: L - 2]
    ids = [START_ID] + [vocab.lookup(word) for word in words] + [END_ID]
    length = len(ids)
    ids.extend([PAD_ID] * (L - length))
    return TokenSequence(ids=tuple(ids), length=length)


def decode_tokens(ids: Sequence[int], vocab: Vocabulary) -> List[str]:
    """Plain words of a decoded id row: start/pad dropped, stops at the first end."""
    words = []
    for idx in ids:
        idx = int(idx)
        if idx == END_ID:
            break
        if idx in (PAD_ID, START_ID):
            continue
        words.append(vocab.id_to_token[idx] if 0 <= idx < vocab.size else UNK_TOKEN)
    return words


def decode_sentence(ids: Sequence[int], vocab: Vocabulary) -> str:
    return " ".join(decode_tokens(ids, vocab))


def encode_dataset(sentences: Sequence[str], vocab: Vocabulary, L: int) -> List[TokenSequence]:
    return [encode_sentence(sentence, vocab, L) for sentence in sentences]


def batch_iterator(dataset: Sequence[TokenSequence], B: int, seed: int) -> Iterator[SentenceBatch]:
    """Yield shuffled [B, L] batches; the final partial batch is dropped.

    Args:
        dataset: Encoded sentences
        B: Batch size
        seed: Shuffle seed (same seed, same order)
    """
    if B <= 0:
        raise ConfigurationError(f"Batch size must be positive, got {B}")
    if len(dataset) < B:
        raise EmptyCorpusError(f"Dataset of {len(dataset)} sentences is smaller than batch size {B}")

    generator = torch.Generator().manual_seed(int(seed))
    order = torch.randperm(len(dataset), generator=generator).tolist()
    for start in range(0, len(order) - B + 1, B):
        yield stack_batch([dataset[i] for i in order[start : start + B]])


def split_corpus(sentences: Sequence[str], test_size: int, seed: int) -> Tuple[List[str], List[str]]:
    """Seeded train/test split over distinct sentences.

    Returns:
        Tuple of (train, test); no test sentence appears in train
    """
    unique = list(dict.fromkeys(sentences))
    if test_size < 0 or test_size >= len(unique):
        raise ConfigurationError(f"test_size {test_size} must be in [0, {len(unique)})")
    order = np.random.default_rng(seed).permutation(len(unique))
    test = [unique[i] for i in order[:test_size]]
    train = [unique[i] for i in order[test_size:]]
    return train, test


# Desk-scale grammar standing in for Europarl: 44 words, 5-12 words per sentence.
_DETERMINERS = ["the", "a", "every"]
_ADJECTIVES = ["big", "small", "old", "young", "happy", "quiet", "red", "clever"]
_NOUNS = [
    "cat", "dog", "farmer", "child", "teacher", "bird", "king",
    "woman", "doctor", "river", "house", "garden", "market", "forest",
]
_VERBS = ["sees", "likes", "finds", "follows", "helps", "watches", "visits", "paints", "calls", "meets"]
_PREPOSITIONS = ["near", "behind", "with", "inside"]
_ADVERBS = ["today", "quickly", "slowly", "again", "often"]


def _noun_phrase(rng: np.random.Generator) -> List[str]:
    words = [str(rng.choice(_DETERMINERS))]
    if rng.random() < 0.5:
        words.append(str(rng.choice(_ADJECTIVES)))
    words.append(str(rng.choice(_NOUNS)))
    return words


def generate_synthetic_corpus(n: int, seed: int, min_len: int = 4, max_len: int = 12) -> List[str]:
    """Generate n distinct grammar sentences deterministically from seed."""
    rng = np.random.default_rng(seed)
    seen = {}
    attempts = 0
    while len(seen) < n:
        attempts += 1
        if attempts > 50 * n:
            raise EmptyCorpusError(f"Grammar cannot produce {n} distinct sentences of {min_len}-{max_len} words")
        words = _noun_phrase(rng) + [str(rng.choice(_VERBS))] + _noun_phrase(rng)
        if rng.random() < 0.4:
            words += [str(rng.choice(_PREPOSITIONS))] + _noun_phrase(rng)
        if rng.random() < 0.3:
            words.append(str(rng.choice(_ADVERBS)))
        if min_len <= len(words) <= max_len:
            seen.setdefault(" ".join(words), None)
    return list(seen)
