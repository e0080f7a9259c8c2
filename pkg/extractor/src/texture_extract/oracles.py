"""Two-sided belief oracles: count-based infilling and HF fill-mask.

An oracle answers one question: given a truncated left context and a
truncated right context around a blank, what is the distribution over
fillers? The counts oracle is fit once on a corpus and then frozen; it
combines positional naive-Bayes evidence from each side with a shrunk
trigram interaction term, so genuinely coherent two-sided contexts score
differently from stitched-together ones. The HF oracle wraps any
transformers fill-mask checkpoint (the masked-LM route) when one is
available locally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import tokenize


class ExtractionError(RuntimeError):
    """Raised when an oracle cannot be constructed or queried."""


@dataclass(frozen=True)
class QueryResult:
    """Distribution over the oracle's vocabulary for one blank."""

    vocab: tuple[str, ...]
    probs: np.ndarray

    def top_k(self, k: int) -> list[tuple[str, float]]:
        order = sorted(range(len(self.vocab)), key=lambda i: (-self.probs[i], self.vocab[i]))
        return [(self.vocab[i], float(self.probs[i])) for i in order[:k]]

    def prob_of(self, state: str) -> float:
        idx = self.vocab.index(state) if state in self.vocab else -1
        return float(self.probs[idx]) if idx >= 0 else 0.0


class CountsOracle:
    """Frozen count-based bidirectional infilling model.

    One-sided evidence composes log-linearly: unigram prior plus
    per-distance conditional neighbor probabilities with 1/d decay
    (add-alpha smoothed). When both sides are visible, the model
    additionally trusts *direct* skip-gram joint estimates of the filler
    given (left neighbor at dl, right neighbor at dr), folded in by
    Jelinek-Mercer interpolation with attestation-dependent weights:

        P(w | ctx) = lam * ML(w | a_dl, b_dr) + (1 - lam) * P_backoff(w),
        lam = c(a_dl, b_dr) / (c(a_dl, b_dr) + gamma * distinct(a_dl, b_dr)),

    a Witten-Bell-style weight: pairs seen often with few distinct
    fillers are trusted, while frequent but uninformative pairs (many
    distinct fillers) stay close to the backoff.

    Contexts whose neighbor pairs were actually seen together therefore
    follow the empirical joint conditional, while stitched-together
    contexts (suffix-swap, local-shuffle) back off to the one-sided
    product. That attestation gap is exactly the two-sided coherence the
    certificates measure.
    """

    # joint estimates folded in coarse-to-fine; the (1,1) pair wins last
    INTERACTION_PAIRS = ((2, 2), (2, 1), (1, 2), (1, 1))

    def __init__(self, tokens: list[str], max_distance: int = 8, alpha: float = 0.1,
                 gamma: float = 1.0):
        if len(tokens) < 3:
            raise ExtractionError("corpus too small to fit the counts oracle")
        self.max_distance = max_distance
        self.alpha = alpha
        self.gamma = gamma
        self.vocab = tuple(sorted(set(tokens)))
        self.index = {w: i for i, w in enumerate(self.vocab)}
        v = len(self.vocab)
        ids = np.array([self.index[t] for t in tokens], dtype=np.int64)

        self.unigram = np.bincount(ids, minlength=v).astype(np.float64)
        # left_counts[d][a, w]: token a observed at distance d left of w;
        # right_counts[d][b, w]: token b at distance d right of w
        self.left_counts = {}
        self.right_counts = {}
        for d in range(1, max_distance + 1):
            left = np.zeros((v, v))
            np.add.at(left, (ids[:-d], ids[d:]), 1.0)
            self.left_counts[d] = left
            self.right_counts[d] = left.T.copy()
        # joint[(dl, dr, a, b)] -> sparse filler counts {w: n}
        self.joint: dict[tuple[int, int, int, int], dict[int, float]] = {}
        n = len(ids)
        for dl, dr in self.INTERACTION_PAIRS:
            for i in range(dl, n - dr):
                key = (dl, dr, int(ids[i - dl]), int(ids[i + dr]))
                bucket = self.joint.setdefault(key, {})
                w = int(ids[i])
                bucket[w] = bucket.get(w, 0.0) + 1.0

        self._log_prior = np.log((self.unigram + alpha) / (self.unigram.sum() + alpha * v))

    def _log_cond(self, table: np.ndarray, neighbor: int) -> np.ndarray:
        # log P(neighbor | w) with add-alpha smoothing, as a vector over w
        v = len(self.vocab)
        return np.log((table[neighbor, :] + self.alpha) / (self.unigram + self.alpha * v))

    def _backoff(self, left: list[str], right: list[str]) -> np.ndarray:
        logits = self._log_prior.copy()
        for d in range(1, min(len(left), self.max_distance) + 1):
            a = self.index.get(left[-d])
            if a is not None:
                logits += (1.0 / d) * self._log_cond(self.left_counts[d], a)
        for d in range(1, min(len(right), self.max_distance) + 1):
            b = self.index.get(right[d - 1])
            if b is not None:
                logits += (1.0 / d) * self._log_cond(self.right_counts[d], b)
        probs = np.exp(logits - logits.max())
        return probs / probs.sum()

    def query(self, left: list[str], right: list[str]) -> QueryResult:
        probs = self._backoff(left, right)
        for dl, dr in self.INTERACTION_PAIRS:
            if len(left) < dl or len(right) < dr:
                continue
            a = self.index.get(left[-dl])
            b = self.index.get(right[dr - 1])
            if a is None or b is None:
                continue
            bucket = self.joint.get((dl, dr, a, b))
            if not bucket:
                continue
            total = sum(bucket.values())
            lam = total / (total + self.gamma * len(bucket))
            ml = np.zeros(len(self.vocab))
            for w, count in bucket.items():
                ml[w] = count / total
            probs = lam * ml + (1.0 - lam) * probs
        probs = probs / probs.sum()
        return QueryResult(self.vocab, probs)

    def embeddings(self, states: list[str], dim: int = 32) -> dict[str, np.ndarray]:
        """Static co-occurrence embeddings for cost construction.

        Coordinates are smoothed log co-occurrence rates with the most
        frequent corpus words within distance 2; deterministic given the
        corpus.
        """
        v = len(self.vocab)
        context = np.argsort(-self.unigram, kind="stable")[: min(dim, v)]
        win = self.left_counts[1] + self.right_counts[1]
        if self.max_distance >= 2:
            win = win + 0.5 * (self.left_counts[2] + self.right_counts[2])
        out = {}
        for s in states:
            idx = self.index.get(s)
            if idx is None:
                continue
            row = win[context, idx]
            out[s] = np.log((row + self.alpha) / (self.unigram[idx] + self.alpha * v))
        return out

    def pseudoperplexity_note(self) -> str:
        return f"counts oracle: |V|={len(self.vocab)}, max_distance={self.max_distance}"


class HFMaskedOracle:
    """Fill-mask oracle over a locally available transformers checkpoint.

    Corpus tokens must come from the same tokenizer (see
    ``tokenize_with_model``); the blank is a single mask token between
    the truncated contexts, and embeddings are rows of the model's
    static input-embedding matrix.
    """

    def __init__(self, model_name: str):
        try:
            import torch
            from transformers import AutoModelForMaskedLM, AutoTokenizer
        except ImportError as exc:
            raise ExtractionError(f"transformers/torch unavailable: {exc}") from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name)
            self.model = AutoModelForMaskedLM.from_pretrained(model_name)
        except OSError as exc:
            raise ExtractionError(f"cannot load model {model_name!r}: {exc}") from exc
        self.model.eval()
        self._torch = torch
        self.vocab = tuple(
            self.tokenizer.convert_ids_to_tokens(range(self.tokenizer.vocab_size))
        )

    def tokenize_corpus(self, text: str) -> list[str]:
        return self.tokenizer.tokenize(text)

    def query(self, left: list[str], right: list[str]) -> QueryResult:
        torch = self._torch
        ids = (
            [self.tokenizer.cls_token_id]
            + self.tokenizer.convert_tokens_to_ids(left)
            + [self.tokenizer.mask_token_id]
            + self.tokenizer.convert_tokens_to_ids(right)
            + [self.tokenizer.sep_token_id]
        )
        mask_pos = 1 + len(left)
        with torch.no_grad():
            logits = self.model(torch.tensor([ids])).logits[0, mask_pos]
            probs = torch.softmax(logits, dim=-1)[: len(self.vocab)].numpy()
        probs = probs / probs.sum()
        return QueryResult(self.vocab, probs)

    def embeddings(self, states: list[str], dim: int | None = None) -> dict[str, np.ndarray]:
        table = self.model.get_input_embeddings().weight.detach().numpy()
        out = {}
        for s in states:
            idx = self.tokenizer.convert_tokens_to_ids(s)
            if idx is not None and idx >= 0:
                out[s] = np.array(table[idx], dtype=np.float64)
        return out


def build_oracle(model_id: str, corpus_tokens: list[str]):
    """Resolve a model identifier to an oracle.

    ``counts`` fits the count model on the job corpus itself;
    ``counts:<path>`` fits on another text file; ``hf:<name-or-path>``
    (or a bare name) loads a transformers fill-mask checkpoint.
    """
    if model_id == "counts":
        return CountsOracle(corpus_tokens)
    if model_id.startswith("counts:"):
        from pathlib import Path

        text = Path(model_id.split(":", 1)[1]).read_text(encoding="utf-8")
        return CountsOracle(tokenize(text))
    name = model_id.split(":", 1)[1] if model_id.startswith("hf:") else model_id
    return HFMaskedOracle(name)
