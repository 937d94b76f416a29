"""Exception hierarchy shared by all innerspeech modules."""


class InnerspeechError(Exception):
    """Base class for every error raised by this package."""


# --- core / file format ---

class MalformedHeader(InnerspeechError):
    pass


class ShapeMismatch(InnerspeechError):
    pass


class NonFiniteSample(InnerspeechError):
    pass


class EmptySelection(InnerspeechError):
    pass


class IntervalTooShort(InnerspeechError):
    pass


class IoFailure(InnerspeechError):
    pass


# --- dsp ---

class InvalidBandEdges(InnerspeechError):
    pass


class SignalTooShort(InnerspeechError):
    pass


class InvalidFrequency(InnerspeechError):
    pass


class UpsamplingUnsupported(InnerspeechError):
    pass


class WindowTooLong(InnerspeechError):
    pass


class SegmentTooLong(InnerspeechError):
    pass


class ZeroTotalPower(InnerspeechError):
    pass


class BandOutOfRange(InnerspeechError):
    pass


# --- features ---

class DegenerateData(InnerspeechError):
    pass


class DimensionMismatch(InnerspeechError):
    pass


class AllZeroGains(InnerspeechError):
    pass


class PcaProvenance(InnerspeechError):
    pass


# --- models ---

class SingleClassData(InnerspeechError):
    pass


class NonFiniteFeature(InnerspeechError):
    pass


class UntrainedModel(InnerspeechError):
    pass


class KindMismatch(InnerspeechError):
    pass


class NonFiniteLoss(InnerspeechError):
    pass


# --- eval ---

class TooFewSamples(InnerspeechError):
    pass


class LengthMismatch(InnerspeechError):
    pass


class LeakageError(InnerspeechError):
    pass


# --- synth ---

class NyquistViolation(InnerspeechError):
    pass


# --- cli / config ---

class ConfigInvalid(InnerspeechError):
    pass
