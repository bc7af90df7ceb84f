__all__ = (
    "VoicefairError",
    "ManifestError",
    "SplitError",
    "TrialError",
    "AcousticError",
    "ScoringError",
    "MetricsError",
    "SynthError",
    "ReportError",
    "ConfigError",
    "StageDependencyError",
)


class VoicefairError(ValueError):
    """
    Base of every error raised by the toolkit.

    The rendered message is prefixed with the module the error originates from so any
    diagnostic tells where the violated precondition lives.
    """

    module = "voicefair"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class ManifestError(VoicefairError):
    module = "manifest"


class SplitError(VoicefairError):
    module = "splits"


class TrialError(VoicefairError):
    module = "trials"


class AcousticError(VoicefairError):
    module = "acoustic"


class ScoringError(VoicefairError):
    module = "scoring"


class MetricsError(VoicefairError):
    module = "metrics"


class SynthError(VoicefairError):
    module = "synth"


class ReportError(VoicefairError):
    module = "report"


class ConfigError(VoicefairError):
    module = "cli"


class StageDependencyError(ConfigError):
    """
    A pipeline stage was invoked before the stage producing its inputs.
    """
