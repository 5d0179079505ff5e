from decoders.base import BatchDecode, ConstantDecoder, DecodeResult, Decoder, DecoderCompatibilityError
from decoders.factory import get_decoder

__all__ = [
    "BatchDecode",
    "ConstantDecoder",
    "DecodeResult",
    "Decoder",
    "DecoderCompatibilityError",
    "get_decoder",
]
