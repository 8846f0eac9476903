"""Exception hierarchy shared by the simulator, the circuit blocks and the CLI."""


class OamSimError(Exception):
    """Base class for every error raised by oamsim."""


class EllOutOfRange(OamSimError, ValueError):
    """A winding number left the configured [-L_MAX, L_MAX] window."""


class NotNormalized(OamSimError, ValueError):
    pass


class PhotonNumberMismatch(OamSimError, ValueError):
    pass


class NotSeparable(OamSimError, ValueError):
    """Photons on the discarded paths are entangled with the rest of the state."""


class OrderViolation(OamSimError):
    """Channels were merged, multiplexed or demultiplexed out of the required order."""


class InputNotDualRail(OamSimError, ValueError):
    pass


class EllOutOfDeclaredRange(OamSimError, ValueError):
    pass


class CarrierCheckFailed(OamSimError):
    """The spent carrier photon was not found in the ell=0 mode after demultiplexing."""


class SchemaError(OamSimError, ValueError):
    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class UnknownElement(SchemaError):
    pass


class UndeclaredPath(SchemaError):
    def __init__(self, path, field=None):
        self.path = path
        super().__init__(f"path {path!r} is not declared", field)


class VersionMismatch(SchemaError):
    pass


class NoOracleForCircuit(OamSimError):
    pass
