"""Shared fixtures for the extractor tests."""

from __future__ import annotations

import pytest

from texture_extract import make_sample_corpus


@pytest.fixture(scope="session")
def sample_corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "sample.txt"
    path.write_text(make_sample_corpus(), encoding="utf-8")
    return path
