"""Exception types shared across the package."""


class HscNegfError(Exception):
    """Base class for package errors."""


class ConfigError(HscNegfError, ValueError):
    """Invalid device, partition or run configuration."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ShapeMismatch(HscNegfError, ValueError):
    """Operand shapes violate an operation's contract."""


class NumericalError(HscNegfError, ArithmeticError):
    """Base class for failures of the numerical kernels."""


class SingularBlock(NumericalError):
    """A block to be inverted has a pivot below the singularity threshold.

    ``pivot`` is the offending pivot index inside the block; ``cluster``,
    ``level`` and ``layer`` are filled in by the solvers when known.
    """

    def __init__(self, pivot, magnitude=None, cluster=None, level=None, layer=None):
        self.pivot = pivot
        self.magnitude = magnitude
        self.cluster = cluster
        self.level = level
        self.layer = layer
        where = []
        if cluster is not None:
            where.append(f"cluster {cluster}")
        if level is not None:
            where.append(f"level {level}")
        if layer is not None:
            where.append(f"layer {layer}")
        msg = f"singular block: pivot {pivot}"
        if magnitude is not None:
            msg += f" (|u|={magnitude:.3e})"
        if where:
            msg += " at " + ", ".join(where)
        super().__init__(msg)

    def located(self, **where):
        merged = dict(cluster=self.cluster, level=self.level, layer=self.layer)
        merged.update(where)
        return SingularBlock(self.pivot, self.magnitude, **merged)


class ConvergenceError(NumericalError):
    """An iterative procedure did not reach its tolerance."""


class NonSkewHermitianInput(NumericalError, ValueError):
    """A lesser self-energy block is not skew-Hermitian."""


class ResidualTooLarge(NumericalError):
    """A quantity expected to be (numerically) real or imaginary is not."""


class PartitionViolation(HscNegfError, ValueError):
    """Nonzero coupling between clusters that are not ancestor-related."""

    def __init__(self, edges):
        self.edges = list(edges)
        head = ", ".join(f"({i}, {j})" for i, j in self.edges[:5])
        more = "" if len(self.edges) <= 5 else f" and {len(self.edges) - 5} more"
        super().__init__(f"coupling between unrelated clusters on edges {head}{more}")
