"""Belief-field extraction from frozen infilling models."""

__version__ = "0.1.0"

from .corpus import load_corpus, make_sample_corpus, sample_slots, tokenize
from .extract import CONDITIONS, DEFAULT_GRID, ExtractionJob, extract, run_job
from .oracles import CountsOracle, HFMaskedOracle, ExtractionError, build_oracle
from .transforms import derive_slot_seed, pair_slots, shuffle_window
