import enum

from typing import Any, ClassVar


@enum.unique
class PenningErrorCode(enum.IntEnum):
    UNDEFINED = -1
    # Configuration
    CONFIG_INVALID = -101
    CONFIG_UNSUPPORTED_LATTICE = -102
    CONFIG_BAD_OVERRIDE_INDEX = -103
    # Single-site model
    MODEL_INSTABILITY = -201
    # Equilibrium
    EQUILIBRIUM_COINCIDENT_IONS = -301
    EQUILIBRIUM_NON_CONVERGENCE = -302
    EQUILIBRIUM_COLLAPSE = -303
    # Normal modes
    MODES_UNSTABLE_SYSTEM = -401
    MODES_PAIRING_FAILURE = -402
    MODES_DEGENERATE_NORMALIZATION = -403
    MODES_SINGULAR_BASIS = -404
    MODES_AMBIGUOUS_CLASSIFICATION = -405
    MODES_INVARIANCE_VIOLATED = -406
    # Time-domain integration
    INTEGRATION_STEP_TOO_LARGE = -501
    INTEGRATION_UNSTABLE = -502
    # Drives and analysis
    DRIVE_RESONANT = -601
    ANALYSIS_INSUFFICIENT_PAIRS = -602
    # Output artifacts
    OUTPUT_MANIFEST_MISMATCH = -701


PENNING_ERROR_MESSAGES = {
    PenningErrorCode.UNDEFINED: "Unspecified simulation error",
    PenningErrorCode.CONFIG_INVALID: "Invalid configuration: {}",
    PenningErrorCode.CONFIG_UNSUPPORTED_LATTICE: "Lattice kind <{}> is not supported",
    PenningErrorCode.CONFIG_BAD_OVERRIDE_INDEX: "Site override index <{}> is out of range",
    PenningErrorCode.MODEL_INSTABILITY: "Single-site motion is unstable: {}",
    PenningErrorCode.EQUILIBRIUM_COINCIDENT_IONS: "Ions <{}> occupy the same position",
    PenningErrorCode.EQUILIBRIUM_NON_CONVERGENCE: "Equilibrium solver did not converge: {}",
    PenningErrorCode.EQUILIBRIUM_COLLAPSE: "Ion crystal collapsed: {}",
    PenningErrorCode.MODES_UNSTABLE_SYSTEM: "System is dynamically unstable, complex frequencies found: {}",
    PenningErrorCode.MODES_PAIRING_FAILURE: "Eigenvalues could not be paired into +/- couples: {}",
    PenningErrorCode.MODES_DEGENERATE_NORMALIZATION: "Mode <{}> sits at the stability boundary and cannot be normalized",
    PenningErrorCode.MODES_SINGULAR_BASIS: "Mode basis is singular: {}",
    PenningErrorCode.MODES_AMBIGUOUS_CLASSIFICATION: "Mode classification is ambiguous, counts (axial, cyclotron, magnetron) = {}",
    PenningErrorCode.MODES_INVARIANCE_VIOLATED: "Invariance theorem residual above threshold: {}",
    PenningErrorCode.INTEGRATION_STEP_TOO_LARGE: "Integration step is too large: {}",
    PenningErrorCode.INTEGRATION_UNSTABLE: "Integration became unstable: {}",
    PenningErrorCode.DRIVE_RESONANT: "Drive is resonant with modes <{}>",
    PenningErrorCode.ANALYSIS_INSUFFICIENT_PAIRS: "Not enough distinct separations for a range fit: {}",
    PenningErrorCode.OUTPUT_MANIFEST_MISMATCH: "Output checksums do not match the manifest: {}",
}


class PenningError(Exception):
    default_code: ClassVar[PenningErrorCode] = PenningErrorCode.UNDEFINED

    def __init__(
        self,
        code: PenningErrorCode | None = None,
        ext_message: str | None = None,
        data: Any | None = None,
    ) -> None:
        self.code = code if code is not None else self.default_code
        self.data = data

        mes = PENNING_ERROR_MESSAGES.get(self.code, self.code.name)
        if ext_message is not None:
            self.message = mes.format(ext_message)
        else:
            self.message = mes.replace(": {}", "").replace(" <{}>", "")

        super().__init__(self.code, self.message, data)

    def __str__(self) -> str:
        return self.message


class ConfigError(PenningError):
    default_code = PenningErrorCode.CONFIG_INVALID


class UnsupportedLattice(PenningError):
    default_code = PenningErrorCode.CONFIG_UNSUPPORTED_LATTICE


class BadOverrideIndex(PenningError):
    default_code = PenningErrorCode.CONFIG_BAD_OVERRIDE_INDEX


class InstabilityError(PenningError):
    default_code = PenningErrorCode.MODEL_INSTABILITY


class CoincidentIons(PenningError):
    default_code = PenningErrorCode.EQUILIBRIUM_COINCIDENT_IONS


class NonConvergence(PenningError):
    default_code = PenningErrorCode.EQUILIBRIUM_NON_CONVERGENCE


class CollapseDetected(PenningError):
    default_code = PenningErrorCode.EQUILIBRIUM_COLLAPSE


class UnstableSystem(PenningError):
    default_code = PenningErrorCode.MODES_UNSTABLE_SYSTEM


class PairingFailure(PenningError):
    default_code = PenningErrorCode.MODES_PAIRING_FAILURE


class DegenerateNormalization(PenningError):
    default_code = PenningErrorCode.MODES_DEGENERATE_NORMALIZATION


class SingularBasis(PenningError):
    default_code = PenningErrorCode.MODES_SINGULAR_BASIS


class InvarianceViolation(PenningError):
    default_code = PenningErrorCode.MODES_INVARIANCE_VIOLATED


class StepSizeTooLarge(PenningError):
    default_code = PenningErrorCode.INTEGRATION_STEP_TOO_LARGE


class UnstableIntegration(PenningError):
    default_code = PenningErrorCode.INTEGRATION_UNSTABLE


class ResonantDrive(PenningError):
    default_code = PenningErrorCode.DRIVE_RESONANT


class InsufficientPairs(PenningError):
    default_code = PenningErrorCode.ANALYSIS_INSUFFICIENT_PAIRS


class ManifestMismatch(PenningError):
    default_code = PenningErrorCode.OUTPUT_MANIFEST_MISMATCH
