"""Exception types raised by dseq."""


class DseqError(Exception):
    """Base class for all dseq errors."""


class ValueOverflow(DseqError, OverflowError):
    """An exact-integer computation would leave the int64 range."""


class WindowTooLarge(DseqError, MemoryError):
    """A requested window exceeds the configured cell cap."""


class UnknownCatalogEntry(DseqError, KeyError):
    pass


class UnknownInclusion(DseqError, KeyError):
    pass


class InvalidExponent(DseqError, ValueError):
    pass


class IndexOutOfDomain(DseqError, ValueError):
    pass


class SpecError(DseqError, ValueError):
    """Malformed JSON description of a sequence, matrix or config."""
