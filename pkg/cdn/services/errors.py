"""
Error types for CDN construction, inference, sampling and learning.

Every error is a ValueError so callers that only care about bad input can
catch it the same way the rest of the codebase catches ValueError.
Validators collect Violation records instead of stopping at the first
problem; raise_for_violations converts a list into an exception.
"""


class CdnError(ValueError):
    """Base class for all CDN errors."""


class DegenerateSample(CdnError):
    pass


class OutOfUnitInterval(CdnError):
    pass


class InvalidMask(CdnError):
    pass


class ParamOutOfDomain(CdnError):
    pass


class UnsupportedArity(CdnError):
    pass


class UnknownVariable(CdnError):
    pass


class EmptyScope(CdnError):
    pass


class DuplicateScopeEntry(CdnError):
    pass


class OrphanVariable(CdnError):
    pass


class EmptyModel(CdnError):
    pass


class ScheduleViolation(CdnError):
    pass


class NoBracket(CdnError):
    pass


class MaxIterations(CdnError):
    pass


class OutOfSupport(CdnError):
    pass


class InvalidSpec(CdnError):
    pass


class FamilyPreservationViolation(CdnError):
    pass


class RunningIntersectionViolation(CdnError):
    pass


class TopologyViolation(CdnError):
    pass


class DidNotConverge(CdnError):
    """Optimizer hit its iteration cap; the partial result is kept on .report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class Violation:
    """One failed structural check, with the offending item as witness."""

    def __init__(self, kind, message, witness=None):
        self.kind = kind
        self.message = message
        self.witness = witness

    def __str__(self):
        text = f'✗ {self.kind.__name__}: {self.message}'
        if self.witness is not None:
            text += f'\n  Witness: {self.witness!r}'
        return text

    def __repr__(self):
        return f'Violation({self.kind.__name__}, {self.message!r})'


def raise_for_violations(violations):
    """Raise the first violation's error type, listing every message."""
    if not violations:
        return
    messages = '; '.join(v.message for v in violations)
    raise violations[0].kind(messages)
