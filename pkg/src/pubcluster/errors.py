"""Error hierarchy with stable machine-readable codes.

Every error carries a ``code`` string that is used verbatim in the API
error envelope ``{code, message, details}`` and printed by the CLI.
"""

from __future__ import annotations


class ClusterError(Exception):
    """Base class; ``code`` is the stable wire identifier."""

    code = "InternalError"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def envelope(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


def _error(code: str, doc: str = "") -> type:
    cls = type(code, (ClusterError,), {"code": code, "__doc__": doc or code})
    return cls


# configuration / registry
MalformedInput = _error("MalformedInput", "Input is not well-formed JSON.")
DuplicateNodeId = _error("DuplicateNodeId")
ControllerOverCapacity = _error("ControllerOverCapacity", "A controller may bind at most 45 nodes.")
InvalidParameter = _error("InvalidParameter", "Numeric parameter out of range.")
UnknownNode = _error("UnknownNode")
IllegalTransition = _error("IllegalTransition")
RefusedBusy = _error("RefusedBusy", "Powering off a Loaded node requires forced.")

# allocator
LengthMismatch = _error("LengthMismatch")
UnknownRequestId = _error("UnknownRequestId")
InvalidParams = _error("InvalidParams")
InstanceTooLarge = _error("InstanceTooLarge")

# admission / blocks / jobs
LimitNodes = _error("LimitNodes")
LimitDuration = _error("LimitDuration")
LimitConcurrentBlocks = _error("LimitConcurrentBlocks")
InvalidRequest = _error("InvalidRequest")
StalePlan = _error("StalePlan")
UnknownPlan = _error("UnknownPlan")
NotOwner = _error("NotOwner")
BlockNotActive = _error("BlockNotActive")
WidthExceedsBlock = _error("WidthExceedsBlock")
UnknownBlock = _error("UnknownBlock")
UnknownJob = _error("UnknownJob")

# control plane
Unauthorized = _error("Unauthorized")
StorageFailure = _error("StorageFailure")
CorruptLog = _error("CorruptLog")
