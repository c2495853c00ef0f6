"""Exception hierarchy shared by every subsystem.

Each error name is part of the public contract: callers (and the HTTP
layer) dispatch on the class, never on the message text.
"""


class ConveneError(Exception):
    """Base class for all domain errors."""


# -- naming / registration ---------------------------------------------------

class DuplicateName(ConveneError):
    pass


class DuplicateEmail(ConveneError):
    pass


class InvalidName(ConveneError):
    pass


class UnknownUser(ConveneError):
    pass


# -- groups and membership ---------------------------------------------------

class UnknownGroup(ConveneError):
    pass


class AlreadyMember(ConveneError):
    pass


class NotAMember(ConveneError):
    pass


class SelfLink(ConveneError):
    pass


# -- areas, items, comments --------------------------------------------------

class UnknownArea(ConveneError):
    pass


class UnknownItem(ConveneError):
    pass


class UnknownComment(ConveneError):
    pass


class AccessDenied(ConveneError):
    pass


class InvalidSpec(ConveneError):
    pass


class DanglingTarget(ConveneError):
    pass


class NoReference(ConveneError):
    pass


# -- documents and anchors ---------------------------------------------------

class UnknownDocument(ConveneError):
    pass


class OversizeUpload(ConveneError):
    pass


class InvalidEncoding(ConveneError):
    pass


class NotPlainText(ConveneError):
    pass


class OffsetOutOfRange(ConveneError):
    pass


class InvalidAnchor(ConveneError):
    pass


class AnchorRevisionMismatch(ConveneError):
    pass


# -- polls and decisions -----------------------------------------------------

class UnknownPoll(ConveneError):
    pass


class PollClosed(ConveneError):
    pass


class DeadlinePassed(ConveneError):
    pass


class NotEligible(ConveneError):
    pass


class ContentMismatch(ConveneError):
    pass


class AlreadyClosed(ConveneError):
    pass


class NotAuthorized(ConveneError):
    pass


# -- email gateway -----------------------------------------------------------

class UnknownTarget(ConveneError):
    pass


class UnknownSender(ConveneError):
    pass


class BadToken(ConveneError):
    pass


class Duplicate(ConveneError):
    pass


class NoTextPart(ConveneError):
    pass


class MalformedArchive(ConveneError):
    pass


# -- sessions, export, feedback ----------------------------------------------

class BadCredentials(ConveneError):
    pass


class RateLimited(ConveneError):
    pass


class Unauthenticated(ConveneError):
    pass


class UnsupportedVersion(ConveneError):
    pass


class IntegrityViolation(ConveneError):
    """Raised on import when a bundle breaks an invariant.

    The message names the first failing invariant.
    """


class InvalidRating(ConveneError):
    pass
