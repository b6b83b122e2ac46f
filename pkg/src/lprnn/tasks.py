"""Temporal-order sequence classification tasks and the training stream.

Sequences over an 8-symbol alphabet: a start marker, an end marker, four
distractors, and two significant markers whose identities (in positional
order) encode the class label. The "subsequence" variant replaces each
single-step marker with one of five fixed length-5 distractor subsequences
per marker value and stretches the boundary markers to 5 steps.

The stream batcher concatenates sequences back-to-back per lane and cuts
fixed-length chunks without regard to sequence boundaries, so lanes are
temporally contiguous but never aligned.
"""

from dataclasses import dataclass

import numpy as np

from .seeding import as_seed_sequence

START, END = 0, 1
DISTRACTORS = (2, 3, 4, 5)
MARKERS = (6, 7)  # value 0, value 1
ALPHABET_SIZE = 8
SYMBOL_CHARS = "^$abcdXY"


@dataclass
class TaskSpec:
    variant: str = "two_marker"   # two_marker | three_marker | subsequence
    length_range: tuple = (100, 110)
    regions: tuple = ((10, 20), (50, 60))
    subseq_len: int = 5
    boundary_len: int = 5

    @property
    def n_markers(self) -> int:
        return len(self.regions)

    @property
    def n_classes(self) -> int:
        return 2 ** self.n_markers

    def validate(self) -> None:
        if self.variant not in ("two_marker", "three_marker", "subsequence"):
            raise ValueError(f"unknown task variant {self.variant!r}")
        lo, hi = self.length_range
        if not (2 < lo <= hi):
            raise ValueError(f"bad length range {self.length_range}")
        last = 0
        for rlo, rhi in self.regions:
            if rlo <= last or rhi < rlo or rhi >= lo - 1:
                raise ValueError(f"marker regions must be ordered, disjoint and "
                                 f"inside every sequence: {self.regions}")
            last = rhi


def make_task_spec(variant: str) -> TaskSpec:
    if variant == "three_marker":
        return TaskSpec(variant=variant, regions=((10, 20), (33, 43), (66, 76)))
    return TaskSpec(variant=variant)


@dataclass
class SymbolSequence:
    ids: np.ndarray       # (T,) symbol ids
    label: int
    mask: np.ndarray      # (T,) bool, true only at the final symbol
    marker_positions: tuple = ()   # start index of each significant marker

    def __len__(self):
        return len(self.ids)


@dataclass
class SubsequenceLexicon:
    """Five distractor subsequences per marker value, disjoint across values."""

    seqs: np.ndarray      # (2, 5, length) distractor ids

    def validate(self) -> None:
        rows = {tuple(s) for v in self.seqs for s in v}
        if len(rows) != self.seqs.shape[0] * self.seqs.shape[1]:
            raise ValueError("lexicon subsequences must be pairwise distinct")


def make_lexicon(rng: np.random.Generator, per_marker: int = 5, length: int = 5) -> SubsequenceLexicon:
    if len(DISTRACTORS) ** length < 2 * per_marker:
        raise ValueError("subsequence length too small to draw distinct entries")
    chosen = []
    seen = set()
    while len(chosen) < 2 * per_marker:
        cand = tuple(rng.choice(DISTRACTORS, size=length))
        if cand not in seen:
            seen.add(cand)
            chosen.append(cand)
    seqs = np.array(chosen, dtype=np.int64).reshape(2, per_marker, length)
    return SubsequenceLexicon(seqs)


def _base_sequence(spec: TaskSpec, rng: np.random.Generator):
    lo, hi = spec.length_range
    n = int(rng.integers(lo, hi + 1))
    ids = rng.choice(DISTRACTORS, size=n).astype(np.int64)
    ids[0] = START
    ids[-1] = END
    values = []
    positions = []
    for rlo, rhi in spec.regions:
        pos = int(rng.integers(rlo, rhi + 1))
        val = int(rng.integers(0, 2))
        ids[pos] = MARKERS[val]
        positions.append(pos)
        values.append(val)
    label = 0
    for val in values:  # first marker is the most significant bit
        label = label * 2 + val
    return ids, label, positions, values


def generate(spec: TaskSpec, rng: np.random.Generator,
             lexicon: SubsequenceLexicon | None = None) -> SymbolSequence:
    """One labeled sequence; the training signal exists only at its end."""
    spec.validate()
    if spec.variant != "subsequence":
        ids, label, positions, _ = _base_sequence(spec, rng)
        out_positions = tuple(positions)
    else:
        if lexicon is None:
            raise ValueError("subsequence variant needs a lexicon")
        base_ids, label, positions, values = _base_sequence(spec, rng)
        parts = []
        out_positions = []
        pos_to_value = dict(zip(positions, values))
        offset = 0
        for i, sym in enumerate(base_ids):
            if i in pos_to_value:
                row = int(rng.integers(0, lexicon.seqs.shape[1]))
                parts.append(lexicon.seqs[pos_to_value[i], row])
                out_positions.append(offset)
            elif sym in (START, END):
                parts.append(np.full(spec.boundary_len, sym, dtype=np.int64))
            else:
                parts.append(np.array([sym], dtype=np.int64))
            offset += len(parts[-1])
        ids = np.concatenate(parts)
        out_positions = tuple(out_positions)
    mask = np.zeros(len(ids), dtype=bool)
    mask[-1] = True
    return SymbolSequence(ids, label, mask, out_positions)


# ---------------------------------------------------------------------------
# streaming
# ---------------------------------------------------------------------------

@dataclass
class StreamChunk:
    symbols: np.ndarray   # (batch, chunk_len) symbol ids
    labels: np.ndarray    # (batch, chunk_len) label of the owning sequence
    mask: np.ndarray      # (batch, chunk_len) true at sequence-final steps
    index: int            # running chunk counter; lanes continue across chunks


class _Lane:
    def __init__(self, spec, rng, lexicon):
        self.spec = spec
        self.rng = rng
        self.lexicon = lexicon
        self.ids = np.empty(0, dtype=np.int64)
        self.labels = np.empty(0, dtype=np.int64)
        self.mask = np.empty(0, dtype=bool)

    def take(self, n: int):
        while len(self.ids) < n:
            seq = generate(self.spec, self.rng, self.lexicon)
            self.ids = np.concatenate([self.ids, seq.ids])
            self.labels = np.concatenate([self.labels, np.full(len(seq), seq.label, dtype=np.int64)])
            self.mask = np.concatenate([self.mask, seq.mask])
        out = self.ids[:n], self.labels[:n], self.mask[:n]
        self.ids, self.labels, self.mask = self.ids[n:], self.labels[n:], self.mask[n:]
        return out


def stream(spec: TaskSpec, batch: int, chunk_len: int, seed,
           lexicon: SubsequenceLexicon | None = None):
    """Endless iterator of temporally-contiguous, non-aligned chunks.

    All randomness derives from `seed`: one child seed builds the lexicon
    (subsequence variant), then one per lane in lane order.
    """
    root = as_seed_sequence(seed)
    children = root.spawn(batch + 1)
    if spec.variant == "subsequence" and lexicon is None:
        lexicon = make_lexicon(np.random.default_rng(children[0]))
    lanes = [_Lane(spec, np.random.default_rng(children[1 + i]), lexicon)
             for i in range(batch)]
    index = 0
    while True:
        symbols = np.empty((batch, chunk_len), dtype=np.int64)
        labels = np.empty((batch, chunk_len), dtype=np.int64)
        mask = np.empty((batch, chunk_len), dtype=bool)
        for i, lane in enumerate(lanes):
            symbols[i], labels[i], mask[i] = lane.take(chunk_len)
        yield StreamChunk(symbols, labels, mask, index)
        index += 1


# ---------------------------------------------------------------------------
# fixture dumps: one sequence per line, symbols as characters, label appended
# ---------------------------------------------------------------------------

def sequence_to_text(seq: SymbolSequence) -> str:
    return "".join(SYMBOL_CHARS[i] for i in seq.ids) + f" {seq.label}"


def text_to_sequence(line: str) -> SymbolSequence:
    text, label = line.rsplit(" ", 1)
    ids = np.array([SYMBOL_CHARS.index(ch) for ch in text], dtype=np.int64)
    mask = np.zeros(len(ids), dtype=bool)
    mask[-1] = True
    return SymbolSequence(ids, int(label), mask)


def dump_fixtures(path, spec: TaskSpec, count: int, seed: int) -> None:
    root = np.random.SeedSequence(seed)
    lex_rng, gen_rng = (np.random.default_rng(s) for s in root.spawn(2))
    lexicon = make_lexicon(lex_rng) if spec.variant == "subsequence" else None
    with open(path, "w") as f:
        for _ in range(count):
            f.write(sequence_to_text(generate(spec, gen_rng, lexicon)) + "\n")
