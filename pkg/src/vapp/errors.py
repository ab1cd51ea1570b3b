"""Exception types raised across the toolkit."""


class VappError(Exception):
    """Base class for all toolkit errors."""


# evidence ingest
class NotFound(VappError):
    pass


class UnsupportedArchive(VappError):
    pass


class Unreadable(VappError):
    pass


class SourceClosed(VappError):
    pass


# app locator / registry
class AmbiguousContainer(VappError):
    pass


class UnknownApp(VappError):
    pass


# format readers
class FormatError(VappError):
    """A reader rejected its input bytes."""


class NotSqlite(FormatError):
    pass


class Corrupt(FormatError):
    """Structural violation in a SQLite image.

    ``partial`` holds whatever tables could be decoded before the fault.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NotPlist(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class NotJson(FormatError):
    pass


class NotGzip(FormatError):
    pass


class NotPrefsXml(FormatError):
    pass


class NotBase64(FormatError):
    pass


# event model
class Unparseable(VappError):
    pass


class ImplausibleYear(VappError):
    pass


# SAR import
class UnknownManufacturer(VappError):
    pass


class MalformedManifest(VappError):
    pass


class NoTimestampColumn(VappError):
    pass
