"""Corpus tokenization, slot sampling, and the bundled sample generator."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9']+|[.,!?;:()\"]")


def tokenize(text: str) -> list[str]:
    """Lowercased word/punctuation tokens; punctuation marks stand alone."""
    return _TOKEN_RE.findall(text.lower())


def load_corpus(path: str | Path) -> list[str]:
    return tokenize(Path(path).read_text(encoding="utf-8"))


def sample_slots(n_tokens: int, count: int, max_radius: int, seed: int) -> list[int]:
    """Uniform sample of slot positions whose largest radius stays in bounds.

    Positions within ``max_radius`` of either end are excluded so every
    grid cell sees a full window.
    """
    lo = max_radius
    hi = n_tokens - max_radius
    valid = hi - lo
    if valid <= 0:
        raise ValueError(f"corpus too short for radius {max_radius}")
    if count > valid:
        raise ValueError(f"cannot sample {count} slots from {valid} valid positions")
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.choice(valid, size=count, replace=False)
    return sorted(int(p) + lo for p in picks)


# ---------------------------------------------------------------------------
# Bundled sample corpus
# ---------------------------------------------------------------------------

# Themed word banks. Every non-anchor token in a sentence is drawn from
# a small bank with a theme-rotated geometric bias, so (i) both context
# sides around any slot carry redundant evidence about the same graded
# preferences, and (ii) almost no position is fully determined by its
# neighbors. Locked route pairs add hard cross-slot collocations on top.
# The coherence-destroying controls remove exactly this joint structure
# while preserving one-sided statistics.

_SHARED_BANKS = {
    "det": ["the", "that"],
    "conn": ["then", "soon", "later"],
    "pron": ["he", "she", "they"],
    "prep": ["near", "beside", "past", "behind"],
    "vehicle": ["ferry", "barge", "wagon", "cart"],
    "motion": ["ran", "sailed", "rolled", "crept"],
    "time_prep": ["before", "after"],
    "time_noun": ["noon", "dark", "dawn"],
    "manner": ["slowly", "carefully", "quietly"],
    "kept": ["kept", "stored", "left"],
    "amount": ["some", "more", "fewer"],
}

_THEMES = {
    "sea": dict(
        subj_adj=["old", "weathered", "retired", "patient"],
        subj_noun=["sailor", "pilot", "keeper", "mate"],
        verb=["watched", "rigged", "charted", "moored"],
        obj_adj=["harbor", "copper", "wooden", "iron"],
        obj_noun=["wall", "bell", "tower", "chart"],
        place_noun=["estuary", "lighthouse", "breakwater", "quay"],
        item=["ropes", "nets", "charts", "flags"],
        pairs=[("harbor", "island"), ("jetty", "sandbar")],
    ),
    "farm": dict(
        subj_adj=["young", "careful", "sunburnt", "early"],
        subj_noun=["botanist", "gardener", "plowman", "shepherd"],
        verb=["planted", "weighed", "gathered", "pruned"],
        obj_adj=["cedar", "garden", "seed", "hay"],
        obj_noun=["boxes", "gate", "drills", "cart"],
        place_noun=["orchard", "granary", "meadow", "paddock"],
        item=["barley", "seeds", "apples", "wool"],
        pairs=[("orchard", "granary"), ("meadow", "sheepfold")],
    ),
    "workshop": dict(
        subj_adj=["quiet", "exacting", "nimble", "stooped"],
        subj_noun=["engineer", "glassblower", "clockmaker", "smith"],
        verb=["repaired", "measured", "polished", "assembled"],
        obj_adj=["copper", "brass", "oak", "small"],
        obj_noun=["lamp", "gauge", "bench", "lathe"],
        place_noun=["workshop", "forge", "skylight", "annex"],
        item=["gears", "springs", "tools", "panes"],
        pairs=[("quarry", "kiln"), ("furnace", "bellows")],
    ),
    "market": dict(
        subj_adj=["busy", "shrewd", "cheerful", "tired"],
        subj_noun=["trader", "baker", "clerk", "porter"],
        verb=["counted", "sold", "recorded", "stacked"],
        obj_adj=["paper", "weighing", "stall", "coin"],
        obj_noun=["charts", "scales", "awning", "box"],
        place_noun=["square", "warehouse", "stalls", "cellar"],
        item=["loaves", "candles", "ribbons", "baskets"],
        pairs=[("market", "warehouse"), ("cellar", "counter")],
    ),
}

# Sentence shapes: bank keys are drawn per token; literal strings are
# anchors (kept fixed so locked pairs have stable frames).
_SHAPES = [
    ["det", "subj_adj", "subj_noun", "verb", "det", "obj_adj", "obj_noun",
     "prep", "det", "place_noun", "."],
    ["det", "vehicle", "motion", "from", "det", "@pair", "to", "det", "@partner",
     "time_prep", "time_noun", "."],
    ["conn", "pron", "kept", "item", "prep", "det", "obj_noun", "manner", "."],
    ["det", "subj_adj", "subj_noun", "verb", "amount", "item", "prep", "det",
     "place_noun", "."],
]


def make_sample_corpus(seed: int = 0, n_paragraphs: int = 200) -> str:
    """Deterministic English-like sample text with coherent local structure.

    Each paragraph commits to one theme; every banked token is drawn with
    a theme-rotated geometric bias (the same theme prefers the same bank
    entries everywhere), so prefix and suffix evidence about any slot is
    topically redundant without being deterministic. Route sentences add
    hard locked collocations (a place is always paired with its partner).
    Suffix-swap and local-shuffle destroy this joint structure while
    preserving one-sided statistics.
    """
    names = sorted(_THEMES)
    rng = np.random.Generator(np.random.PCG64(seed))

    def draw(theme: str, key: str) -> str:
        src = theme if rng.random() < 0.75 else names[rng.integers(len(names))]
        bank = _SHARED_BANKS.get(key) or _THEMES[src][key]
        n = len(bank)
        shift = names.index(src) % n
        weights = np.array([2.0 ** (-((i - shift) % n)) for i in range(n)])
        return bank[rng.choice(n, p=weights / weights.sum())]

    paragraphs = []
    for _ in range(n_paragraphs):
        theme = names[rng.integers(len(names))]
        sentences = []
        for _ in range(2):
            shape = _SHAPES[rng.integers(len(_SHAPES))]
            pair = _THEMES[theme]["pairs"][rng.integers(len(_THEMES[theme]["pairs"]))]
            words = []
            for key in shape:
                if key == "@pair":
                    words.append(pair[0])
                elif key == "@partner":
                    words.append(pair[1])
                elif key in (".",) or key in ("from", "to"):
                    words.append(key)
                else:
                    words.append(draw(theme, key))
            sentences.append(" ".join(words[:-1]) + words[-1])
        paragraphs.append(" ".join(sentences))
    return "\n".join(paragraphs) + "\n"
