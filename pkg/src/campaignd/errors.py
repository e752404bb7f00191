"""Domain errors and their stable wire identities.

Every error the HTTP layer can surface carries a machine-readable ``code``
(SCREAMING_SNAKE, stable across releases) and the HTTP status it maps to.
The full closed set is documented in :mod:`campaignd.api`.
"""
from __future__ import annotations


class CampaignError(Exception):
    """Base class for all domain errors exposed through the API."""

    code = "INTERNAL"
    http_status = 422

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# --- geometry -------------------------------------------------------------

class FewerThanThreeVertices(CampaignError):
    code = "FEWER_THAN_THREE_VERTICES"


class SelfIntersecting(CampaignError):
    code = "SELF_INTERSECTING"


class DuplicateConsecutiveVertex(CampaignError):
    code = "DUPLICATE_CONSECUTIVE_VERTEX"


class CoordinateOutOfRange(CampaignError):
    code = "COORDINATE_OUT_OF_RANGE"


class MalformedGeoJson(CampaignError):
    code = "MALFORMED_GEOJSON"


# --- campaign lifecycle ----------------------------------------------------

class EmptyRequiredField(CampaignError):
    code = "EMPTY_REQUIRED_FIELD"


class InvalidDateRange(CampaignError):
    code = "INVALID_DATE_RANGE"


class InvalidQuota(CampaignError):
    code = "INVALID_QUOTA"


class InvalidWindow(CampaignError):
    code = "INVALID_WINDOW"


class InvalidPriority(CampaignError):
    code = "INVALID_PRIORITY"


class UnknownCampaign(CampaignError):
    code = "UNKNOWN_CAMPAIGN"
    http_status = 404


class UnknownRegion(CampaignError):
    code = "UNKNOWN_REGION"
    http_status = 404


class DuplicatePluginId(CampaignError):
    code = "DUPLICATE_PLUGIN_ID"
    http_status = 409


class ChecksumMismatch(CampaignError):
    code = "CHECKSUM_MISMATCH"


class MissingSensorPlugin(CampaignError):
    code = "MISSING_SENSOR_PLUGIN"


class NoRegions(CampaignError):
    code = "NO_REGIONS"
    http_status = 409


class IllegalTransition(CampaignError):
    code = "ILLEGAL_TRANSITION"
    http_status = 409


class CampaignCompleted(CampaignError):
    code = "CAMPAIGN_COMPLETED"
    http_status = 409


# --- ingestion / volunteers -------------------------------------------------

class CampaignNotRunning(CampaignError):
    code = "CAMPAIGN_NOT_RUNNING"


class VolunteerPoweredOff(CampaignError):
    code = "VOLUNTEER_POWERED_OFF"


class SensorNotEnabled(CampaignError):
    code = "SENSOR_NOT_ENABLED"


class VolunteerNotJoined(CampaignError):
    code = "VOLUNTEER_NOT_JOINED"


class FutureTimestamp(CampaignError):
    code = "FUTURE_TIMESTAMP"


class InvalidCoordinates(CampaignError):
    code = "INVALID_COORDINATES"


class ValueTooLarge(CampaignError):
    code = "VALUE_TOO_LARGE"


class InvalidPseudonym(CampaignError):
    code = "INVALID_PSEUDONYM"


class UnknownVolunteer(CampaignError):
    code = "UNKNOWN_VOLUNTEER"
    http_status = 404


class UnknownFormat(CampaignError):
    code = "UNKNOWN_FORMAT"
    http_status = 400


# --- reporting ---------------------------------------------------------------

class EmptyCampaignExtent(CampaignError):
    code = "EMPTY_CAMPAIGN_EXTENT"
    http_status = 409


# --- request plumbing --------------------------------------------------------

class MalformedRequest(CampaignError):
    code = "MALFORMED_REQUEST"
    http_status = 400


# --- service startup (not HTTP errors) ---------------------------------------

class CorruptLog(Exception):
    """Event log failed replay; the service refuses to start."""

    def __init__(self, last_valid_seq: int, detail: str):
        self.last_valid_seq = last_valid_seq
        self.detail = detail
        super().__init__(f"corrupt event log after seq {last_valid_seq}: {detail}")


class BindFailure(Exception):
    """The requested listen address could not be bound."""


# --- simulator --------------------------------------------------------------

class ScenarioInvalid(Exception):
    """Scenario file failed validation; locations are JSON pointers."""

    def __init__(self, pointer: str, detail: str):
        self.pointer = pointer
        self.detail = detail
        super().__init__(f"{pointer}: {detail}")


class ServiceUnreachable(Exception):
    """The simulation target did not answer."""
