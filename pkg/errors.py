# errors.py


class NetworkError(Exception):
    """Domain error carrying a stable machine-readable code."""

    def __init__(self, code, message="", details=None):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message or code
        self.details = details or {}

    def to_dict(self):
        return {"code": self.code, "message": self.message, "details": self.details}


class TopologyError(NetworkError):
    pass


class OpticalError(NetworkError):
    pass


class ServiceError(NetworkError):
    pass


class PlacementError(NetworkError):
    pass


class WorkloadError(NetworkError):
    pass


class StateError(NetworkError):
    pass
