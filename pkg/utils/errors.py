"""
Error hierarchy shared by the library, the CLI and the HTTP service.

Every error carries a snake_case `code` (used in HTTP error payloads), an HTTP
`status_code` and a CLI `exit_code`.
"""
from typing import Optional


class KnotdetError(Exception):
    code = "knotdet_error"
    status_code = 400
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_detail(self) -> dict:
        return {"error": self.code, "message": self.message}


class InvalidInputError(KnotdetError, ValueError):
    code = "invalid_input"
    status_code = 422
    exit_code = 1


class SchemaError(KnotdetError):
    """A JSON document that does not parse against the annotation schema."""

    code = "schema_error"
    status_code = 422
    exit_code = 1

    def __init__(self, path: str, line: Optional[int], field: Optional[str], reason: str):
        where = f"{path}, line {line if line is not None else '?'}"
        if field:
            where += f", field '{field}'"
        super().__init__(f"{where}: {reason}")
        self.path = path
        self.line = line
        self.field = field


class ImageIOError(KnotdetError, OSError):
    code = "image_io"
    status_code = 400
    exit_code = 2

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


class NumericalError(KnotdetError):
    code = "numerical_error"
    status_code = 422
    exit_code = 3


class DivergenceError(NumericalError):
    code = "divergence"

    def __init__(self, metric: str, iteration: int, loss: float):
        super().__init__(
            f"Fit with metric '{metric}' diverged at iteration {iteration} (loss={loss:.6g})."
        )
        self.metric = metric
        self.iteration = iteration
        self.loss = loss
