"""Bird species classification from field audio.

Pipeline: WAV decode -> amplitude normalization -> mono mixdown -> MFCC
features -> dense neural network -> per-window detections and reports.
"""

__version__ = "0.1.0"

from birdsong.audio_io import AudioClip, RawAudio, decode_wav, load_clip
from birdsong.mfcc import FeatureConfig
from birdsong.nn import ModelConfig, Network, build_network, load_model, save_model
from birdsong.pipeline import PipelineConfig, classify_recording, generate_fixtures
from birdsong.train_eval import TrainingConfig, train

__all__ = [
    "AudioClip",
    "RawAudio",
    "decode_wav",
    "load_clip",
    "FeatureConfig",
    "ModelConfig",
    "Network",
    "build_network",
    "load_model",
    "save_model",
    "PipelineConfig",
    "classify_recording",
    "generate_fixtures",
    "TrainingConfig",
    "train",
    "__version__",
]
