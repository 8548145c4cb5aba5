"""Python bindings for the secure-coding challenge platform core."""

from ._core import (
    Error,
    agenda_block_at,
    assess,
    default_agenda,
    hellinger,
    load_bundle,
    parse_survey_csv,
    survey_report,
    tri_bin,
    validate_bundles,
)

__all__ = [
    "Error",
    "agenda_block_at",
    "assess",
    "default_agenda",
    "hellinger",
    "load_bundle",
    "parse_survey_csv",
    "survey_report",
    "tri_bin",
    "validate_bundles",
]
