"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not chain through the network."""


class LabelError(ValueError):
    """A label is outside the valid range of its task."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class NonFiniteError(FloatingPointError):
    """A loss or update produced NaN/Inf.

    Carries whatever context was available where it was raised; the trainer
    fills in epoch and batch before re-raising.
    """

    def __init__(self, message, task=None, epoch=None, batch=None):
        self.detail = message
        self.task = task
        self.epoch = epoch
        self.batch = batch
        super().__init__(self._format())

    def _format(self):
        ctx = []
        if self.epoch is not None:
            ctx.append(f"epoch {self.epoch}")
        if self.batch is not None:
            ctx.append(f"batch {self.batch}")
        if self.task is not None:
            ctx.append(f"task {self.task}")
        return f"{self.detail} ({', '.join(ctx)})" if ctx else self.detail

    def with_context(self, epoch=None, batch=None):
        return NonFiniteError(
            self.detail,
            task=self.task,
            epoch=self.epoch if epoch is None else epoch,
            batch=self.batch if batch is None else batch,
        )


class DataFormatError(ValueError):
    """Malformed dataset file."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ModelFormatError(ValueError):
    """Model file is missing its version header or is otherwise corrupt."""


class ConfigError(ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
