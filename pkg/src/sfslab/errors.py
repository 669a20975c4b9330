"""Exception hierarchy shared across the laboratory.

Every error raised intentionally by this package derives from
:class:`SfsLabError`, so callers can catch laboratory failures without
masking programming errors.
"""

from __future__ import annotations


class SfsLabError(Exception):
    """Base class for all errors raised by sfslab."""


class WidthError(SfsLabError):
    """A bit string or register has the wrong width."""


class LayoutError(SfsLabError):
    """A register layout is malformed or a segment lookup failed."""


class StateError(SfsLabError):
    """A sparse state violates its invariants (duplicate branches, bad sign)."""


class UnsupportedStateError(SfsLabError):
    """An operation was asked of a state outside the simulable class."""


class StateFormatError(SfsLabError):
    """A serialized sparse state is malformed or has a bad version."""


class CircuitError(SfsLabError):
    """A circuit is structurally invalid (topology, arity, wire density)."""


class CircuitParseError(CircuitError):
    """Circuit text could not be parsed; message includes the line number."""


class DegarbleError(SfsLabError):
    """No garbled-table row decrypted cleanly (mismatched encodings)."""


class FrameError(SfsLabError):
    """A wire frame is malformed or carries an unknown type tag."""


class ProtocolOrderError(SfsLabError):
    """Message alternation between the two parties broke down."""


class ChannelError(SfsLabError):
    """The underlying channel failed (connection loss, short read)."""


class OracleAccessError(SfsLabError):
    """A test-only harness oracle was requested outside harness mode."""


class ConfigError(SfsLabError):
    """A configuration file or flag set is invalid."""
