"""Exception types shared across the package, with CLI exit-code mapping."""


class DecodeError(Exception):
    """An image or cube file exists but cannot be decoded in the expected format."""


class CheckpointError(Exception):
    """A checkpoint container is missing, corrupt, or incompatible with the run."""


class TrainingDiverged(Exception):
    """A loss term became non-finite; the message names the offending term."""


# Exit codes used by the CLI. Usage errors exit with 2 (argparse default).
EXIT_INPUT = 3       # missing files, undecodable rasters/cubes
EXIT_DATA = 4        # shape/channel/value/config violations
EXIT_CHECKPOINT = 5  # checkpoint container problems
EXIT_TRAINING = 6    # non-finite loss aborted a training stage
EXIT_UNEXPECTED = 1
