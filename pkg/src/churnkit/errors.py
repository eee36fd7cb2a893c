"""Exception hierarchy. Each family maps to one CLI exit code."""


class ChurnkitError(Exception):
    exit_code = 1


class ConfigError(ChurnkitError, ValueError):
    """Bad configuration, unknown model name, or invalid arguments."""

    exit_code = 1


class DataError(ChurnkitError, ValueError):
    """Problems with input files or tables: schema, arity, parse failures."""

    exit_code = 2


class SchemaError(DataError):
    pass


class ConversionError(DataError):
    def __init__(self, column, row, cell):
        self.column = column
        self.row = row
        self.cell = cell
        super().__init__(f"cannot convert cell {cell!r} in column {column!r} (row {row})")


class DimensionError(DataError):
    def __init__(self, expected, got, what="features"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} mismatch: model expects {expected}, data has {got}")


class NumericError(ChurnkitError, ArithmeticError):
    """Divergence or non-finite values during fitting."""

    exit_code = 3


class UnsupportedModelError(ChurnkitError, TypeError):
    exit_code = 1
