"""Exception hierarchy. Each family maps onto one CLI exit code."""

from __future__ import annotations


class PQDAFError(Exception):
    exit_code = 1
    code = "error"


class ValidationError(PQDAFError, ValueError):
    exit_code = 2
    code = "validation"


class ManifestFormatError(ValidationError):
    code = "manifest_format"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ManifestVersionError(ValidationError):
    code = "manifest_version"


class ExternalServiceError(PQDAFError):
    exit_code = 3
    code = "external_service"


class ScorerTransportError(ExternalServiceError):
    code = "scorer_transport"


class ExtractorUnavailableError(ExternalServiceError):
    code = "extractor_unavailable"


class MalformedKeypointsError(ExternalServiceError):
    code = "malformed_keypoints"


class ShortfallError(PQDAFError):
    """A class holds fewer samples than a subset or mix asked for."""

    exit_code = 4
    code = "shortfall"

    def __init__(self, category, available: int, required: int, what: str = "samples"):
        self.category = category
        self.available = available
        self.required = required
        super().__init__(
            f"class {category} has {available} {what}, needs {required} "
            f"(shortfall {required - available})"
        )


class ScoreParseError(PQDAFError, ValueError):
    """Scorer reply held no usable score. ``reason`` is 'no_numeral' or 'out_of_range'."""

    code = "score_parse"

    def __init__(self, reason: str, response: str):
        self.reason = reason
        self.response = response
        super().__init__(f"{reason}: {response!r}")


class UnparseableScoreError(ValidationError):
    """Raised by the filter under the 'error' policy; carries the offending record."""

    code = "unparseable_score"

    def __init__(self, record):
        self.record = record
        super().__init__(
            f"sample {record.sample_id}: unparseable scorer response {record.raw_response!r}"
        )
