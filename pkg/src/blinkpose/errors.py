"""Exception hierarchy shared across the toolkit.

Two broad families matter for the CLI exit codes: InputError covers anything
wrong with user-supplied files, parameters or schemas (exit 2), PipelineError
covers contract failures while processing otherwise valid inputs (exit 3).
"""


class BlinkposeError(Exception):
    """Base for all toolkit errors."""


class InputError(BlinkposeError):
    """Invalid input: bad file, bad parameter, schema violation."""


class ManifestError(InputError):
    """Frame-sequence manifest missing, malformed or inconsistent."""


class SchemaError(InputError):
    """Keypoint document violates its schema; message names the field path."""


class PipelineError(BlinkposeError):
    """A processing stage could not uphold its contract."""


class DemuxError(PipelineError):
    """Phase recovery or on/off frame selection failed."""


class DetectionError(PipelineError):
    """LED detection or track association failed."""


class EvalError(PipelineError):
    """Series comparison failed (e.g. nothing to compare)."""
