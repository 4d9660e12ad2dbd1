"""
This module defines custom exceptions for the diverse-supervision toolkit.

Every exception derives from `DiverseSupervisionError` so the command-line layer can turn
any domain failure into a clean exit. Each area of the toolkit has its own base class.

Classes:
    - DiverseSupervisionError: Root of every toolkit error.
    - CoreError: Base class for dense-grid type and numeric helper errors.
    - InvalidDimsError: Raised when image dimensions are not positive.
    - InvalidClassConfigError: Raised when the class count or ignore value is unusable.
    - CorruptFeatureMapError: Raised when a feature map or score vector holds non-finite values.
    - BoxMaskError: Base class for box-to-mask pipeline errors.
    - InvalidBoxError: Raised when a bounding box is outside the image or has a bad class.
    - InvalidStrengthMapError: Raised when a boundary-strength map is negative or non-finite.
    - InvalidMaskConfigError: Raised when alpha or the threshold list is invalid.
    - InvalidThresholdError: Raised when a strength cutoff is outside (0, 1).
    - StrategyNotFoundError: Raised when an unknown pseudo-label strategy is requested.
    - UnimplementedBaselineError: Raised for the GrabCut and MCG baselines.
    - LossError: Base class for loss branch errors.
    - LabelShapeError: Raised when a label's dims do not match the feature map.
    - LabelTypeError: Raised when a branch receives a label of the wrong kind.
    - LabelRangeError: Raised when a pixel label is outside {0..C} and not the ignore value.
    - InvalidSoftLabelError: Raised when a soft label breaks its invariants.
    - InvalidImageLabelError: Raised when a presence vector is malformed.
    - BranchNotFoundError: Raised when an unknown loss branch is requested.
    - NetworkError: Base class for toy network errors.
    - InvalidArchitectureError: Raised when an architecture descriptor is inconsistent.
    - ImageTooSmallError: Raised when an input image is smaller than 8x8.
    - CacheMismatchError: Raised when a forward cache does not belong to the parameters.
    - NonFiniteGradientError: Raised when an optimizer step meets a non-finite gradient.
    - TrainingError: Base class for split and training loop errors.
    - InvalidRatioError: Raised when a "p:b:i" ratio cannot be parsed.
    - TooFewSamplesError: Raised when a dataset is too small for the requested ratio.
    - MissingLabelArtifactError: Raised when a drawn sample lacks its branch's label.
    - NonFiniteLossError: Raised when a training step produces a non-finite loss.
    - InvalidTrainConfigError: Raised when a training configuration is invalid.
    - UnknownVariantError: Raised when an ablation variant name is not recognized.
    - SynthDataError: Base class for synthetic scene generator errors.
    - InvalidSceneSpecError: Raised when a scene specification is out of range.
    - MetricsError: Base class for evaluation errors.
    - EmptyConfusionMatrixError: Raised when metrics are requested on an empty matrix.
    - EmptyValidationSetError: Raised when evaluation has no validation samples.
    - DimensionMismatchError: Raised when prediction and ground truth differ in shape.
    - StorageError: Base class for file format errors.
    - RasterFormatError: Raised when a PPM/PGM raster is malformed.
    - RasterIOError: Raised when a raster cannot be read or written.
    - SoftLabelFormatError: Raised when a soft-label container is malformed.
    - CheckpointFormatError: Raised when a checkpoint file is malformed.
    - CheckpointVersionError: Raised when a checkpoint has an unsupported version.
    - CheckpointArchitectureError: Raised when checkpoint tensors do not match the architecture.
    - ManifestError: Raised when a dataset manifest is invalid.
    - ExperimentError: Base class for ablation harness errors.
    - AblationFailedError: Raised when one or more ablation sub-runs failed.
    - NagiosError: Base exception for all Nagios-related errors.
    - InvalidNagiosStateError: Raised when an invalid Nagios state is encountered.
    - AblationReportError: Raised when an ablation report cannot be evaluated.
"""


class DiverseSupervisionError(Exception):
    """
    Root class for every error raised by the toolkit.
    """


# ---- Core-related Exceptions ----

class CoreError(DiverseSupervisionError):
    """
    Base class for dense-grid type and numeric helper errors.
    """


class InvalidDimsError(CoreError):
    """
    Raised when image dimensions are not positive.
    """


class InvalidClassConfigError(CoreError):
    """
    Raised when the class count or ignore value is unusable.
    """


class CorruptFeatureMapError(CoreError):
    """
    Raised when a feature map or score vector holds non-finite values.
    """


# ---- Boxmask-related Exceptions ----

class BoxMaskError(DiverseSupervisionError):
    """
    Base class for box-to-mask pipeline errors.
    """


class InvalidBoxError(BoxMaskError):
    """
    Raised when a bounding box is outside the image or has a bad class.
    """


class InvalidStrengthMapError(BoxMaskError):
    """
    Raised when a boundary-strength map is negative or non-finite.
    """


class InvalidMaskConfigError(BoxMaskError):
    """
    Raised when alpha or the threshold list is invalid.
    """


class InvalidThresholdError(BoxMaskError):
    """
    Raised when a strength cutoff is outside (0, 1).
    """


class StrategyNotFoundError(BoxMaskError):
    """
    Raised when an unknown pseudo-label strategy is requested.
    """


class UnimplementedBaselineError(BoxMaskError):
    """
    Raised for the GrabCut and MCG baselines, which rely on external algorithms.
    """


# ---- Loss-related Exceptions ----

class LossError(DiverseSupervisionError):
    """
    Base class for loss branch errors.
    """


class LabelShapeError(LossError):
    """
    Raised when a label's dims do not match the feature map.
    """


class LabelTypeError(LossError):
    """
    Raised when a branch receives a label of the wrong kind.
    """


class LabelRangeError(LossError):
    """
    Raised when a pixel label is outside {0..C} and not the ignore value.
    """


class InvalidSoftLabelError(LossError):
    """
    Raised when a soft label breaks its invariants (e.g. an empty class set on a
    pixel that is not uncertain).
    """


class InvalidImageLabelError(LossError):
    """
    Raised when a presence vector is malformed.
    """


class BranchNotFoundError(LossError):
    """
    Raised when an unknown loss branch is requested.
    """


# ---- Network-related Exceptions ----

class NetworkError(DiverseSupervisionError):
    """
    Base class for toy network errors.
    """


class InvalidArchitectureError(NetworkError):
    """
    Raised when an architecture descriptor is inconsistent.
    """


class ImageTooSmallError(NetworkError):
    """
    Raised when an input image is smaller than 8x8.
    """


class CacheMismatchError(NetworkError):
    """
    Raised when a forward cache does not belong to the parameters.
    """


class NonFiniteGradientError(NetworkError):
    """
    Raised when an optimizer step meets a non-finite gradient.
    """


# ---- Training-related Exceptions ----

class TrainingError(DiverseSupervisionError):
    """
    Base class for split and training loop errors.
    """


class InvalidRatioError(TrainingError):
    """
    Raised when a "p:b:i" ratio cannot be parsed.
    """


class TooFewSamplesError(TrainingError):
    """
    Raised when a dataset is too small for the requested ratio.
    """


class MissingLabelArtifactError(TrainingError):
    """
    Raised when a drawn sample lacks the label its branch needs.
    """


class NonFiniteLossError(TrainingError):
    """
    Raised when a training step produces a non-finite loss.
    """


class InvalidTrainConfigError(TrainingError):
    """
    Raised when a training configuration is invalid.
    """


class UnknownVariantError(TrainingError):
    """
    Raised when an ablation variant name is not recognized.
    """


# ---- Synthetic data Exceptions ----

class SynthDataError(DiverseSupervisionError):
    """
    Base class for synthetic scene generator errors.
    """


class InvalidSceneSpecError(SynthDataError):
    """
    Raised when a scene specification is out of range.
    """


# ---- Metrics-related Exceptions ----

class MetricsError(DiverseSupervisionError):
    """
    Base class for evaluation errors.
    """


class EmptyConfusionMatrixError(MetricsError):
    """
    Raised when metrics are requested on an empty matrix.
    """


class EmptyValidationSetError(MetricsError):
    """
    Raised when evaluation has no validation samples.
    """


class DimensionMismatchError(MetricsError):
    """
    Raised when prediction and ground truth differ in shape.
    """


# ---- Storage-related Exceptions ----

class StorageError(DiverseSupervisionError):
    """
    Base class for file format errors.
    """


class RasterFormatError(StorageError):
    """
    Raised when a PPM/PGM raster is malformed.
    """


class RasterIOError(StorageError):
    """
    Raised when a raster cannot be read or written.
    """


class SoftLabelFormatError(StorageError):
    """
    Raised when a soft-label container is malformed.
    """


class CheckpointFormatError(StorageError):
    """
    Raised when a checkpoint file is malformed.
    """


class CheckpointVersionError(CheckpointFormatError):
    """
    Raised when a checkpoint has an unsupported format version.
    """


class CheckpointArchitectureError(CheckpointFormatError):
    """
    Raised when checkpoint tensors do not match the architecture descriptor.
    """


class ManifestError(StorageError):
    """
    Raised when a dataset manifest is invalid.
    """


# ---- Experiment-related Exceptions ----

class ExperimentError(DiverseSupervisionError):
    """
    Base class for ablation harness errors.
    """


class AblationFailedError(ExperimentError):
    """
    Raised when one or more ablation sub-runs failed.
    """


# ---- Nagios-related Exceptions ----

class NagiosError(DiverseSupervisionError):
    """
    Base exception for all Nagios-related errors.
    """


class InvalidNagiosStateError(NagiosError):
    """
    Raised when an invalid Nagios state is encountered while evaluating a claim.
    """


class AblationReportError(NagiosError):
    """
    Raised when an ablation report cannot be read or lacks the required sections.
    """
