"""Exception hierarchy shared by the model, solver and I/O layers."""


class ZikaControlError(Exception):
    """Base class for all package errors."""


class NonpositivePopulation(ZikaControlError, ValueError):
    """Total women population N <= 0 where a right-hand side divides by N."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"{message} (node {node})")
        self.node = node


class NonfiniteInput(ZikaControlError, ValueError):
    """A state, costate, control or parameter is NaN or infinite."""


class NonfiniteState(ZikaControlError, ArithmeticError):
    """Integration produced a non-finite or out-of-tolerance value."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"{message} (node {node})")
        self.node = node


class ConfigParseError(ZikaControlError, ValueError):
    """Config file could not be parsed (carries line and/or field)."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class ValidationError(ZikaControlError, ValueError):
    """A named field violates its constraint."""

    def __init__(self, field, constraint, value=None):
        msg = f"{field} = {value!r} violates constraint {constraint}"
        super().__init__(msg)
        self.field = field
        self.constraint = constraint
        self.value = value


class ScenarioError(ZikaControlError):
    """Solver failure labelled with the scenario that raised it."""

    def __init__(self, label, cause):
        super().__init__(f"scenario {label!r}: {cause}")
        self.label = label
        self.cause = cause
