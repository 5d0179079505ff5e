from network.model import NetworkSpec, PooledDecoder, ToricDecoderNet, build_decoder_network
from network.training import TrainConfig, TrainResult, train

__all__ = [
    "NetworkSpec",
    "PooledDecoder",
    "ToricDecoderNet",
    "build_decoder_network",
    "TrainConfig",
    "TrainResult",
    "train",
]
