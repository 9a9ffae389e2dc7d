class MagTVError(Exception):
    def __init__(self, message):
        super().__init__(message)


class DomainError(MagTVError):
    """An atom lies outside the source region or off the nodes of a space."""


class DimensionError(MagTVError):
    pass


class KernelSingularityError(MagTVError):
    pass


class ConfigurationError(MagTVError):
    pass


class InputError(MagTVError):
    pass


class PreconditionError(MagTVError):
    pass


class OracleSizeError(MagTVError):
    pass


class SchemaError(MagTVError):

    def __init__(self, message, path=None, line=None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class SolverError(MagTVError):
    pass
