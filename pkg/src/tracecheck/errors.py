"""Exception types shared across the toolkit."""


class TracecheckError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TracecheckError):
    """Malformed input text; carries a 1-based line and column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", col {column}" if column is not None else "")
        super().__init__(message + where)


class UnexpectedHeader(ParseError):
    """A trace header line appeared after the first step."""


class SchemaError(TracecheckError):
    """A record is missing a mandatory field."""


class DuplicateSeq(TracecheckError):
    """Two records share the same seq value."""


class UnknownField(TracecheckError):
    """A named field is not part of the record schema."""


class TypecheckError(TracecheckError):
    """An expression does not fit its expected domain."""


class UnboundSymbol(TracecheckError):
    """An expression references an undeclared name."""


class DuplicateInit(TracecheckError):
    """A machine variable is initialised more than once (or not at all)."""


class EmptyChoice(TracecheckError):
    """An init choose-set evaluated to the empty set."""


class UnknownOp(TracecheckError):
    """A trace event names an operation the machine does not declare."""


class ArityMismatch(TracecheckError):
    """Event argument count differs from the operation's parameter count."""


class DomainError(TracecheckError):
    """A concrete value lies outside its declared domain."""


class MachineNameMismatch(TracecheckError):
    """Trace header names a different machine than the one loaded."""


class CapExceeded(TracecheckError):
    """A bounded search ran past its configured resource cap."""

    def __init__(self, message, partial_count=None):
        self.partial_count = partial_count
        super().__init__(message)


class UnknownAtom(TracecheckError):
    """A formula atom resolves to neither a proposition nor a trace variable."""


class UnboundVariable(TracecheckError):
    """A state-trace block lacks a variable the formula needs."""

    def __init__(self, name, block_index):
        self.name = name
        self.block_index = block_index
        super().__init__(f"variable {name!r} unbound in block {block_index}")


class EmptyPropList(TracecheckError):
    """trace_to_formula needs at least one proposition."""


class UnmatchedValue(TracecheckError):
    """A (field, value) pair has no correspondence rule under policy=error."""

    def __init__(self, field, value, seq):
        self.field = field
        self.value = value
        self.seq = seq
        super().__init__(f"no rule for {field}={value} (record seq {seq})")


class DuplicateLhs(TracecheckError):
    """Two correspondence rules share the same left-hand side."""


class ConfigError(TracecheckError):
    """A simulator configuration is inconsistent."""
