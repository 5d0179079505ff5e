from pathlib import Path

from decoders.base import ConstantDecoder, Decoder
from qec.code import ToricCode

DECODER_NAMES = ("neural", "mld", "mld-exhaustive", "constant")


def get_decoder(
    name: str,
    code: ToricCode,
    p: float | None = None,
    checkpoint: str | Path | None = None,
    w_max: int | None = None,
) -> Decoder:
    kind = name.lower()

    if kind == "neural":
        from decoders.neural import NeuralDecoder
        from network.checkpoint import load_checkpoint
        if checkpoint is None:
            raise ValueError("the neural decoder needs a checkpoint (--checkpoint)")
        model, _ = load_checkpoint(checkpoint, code)
        return NeuralDecoder(model)

    if kind in ("mld", "mld-exhaustive"):
        from decoders.mld import DEFAULT_W_MAX, MLDDecoder, exhaustive_decoder
        if p is None:
            raise ValueError(f"the {kind} decoder needs the physical error rate")
        if kind == "mld-exhaustive":
            return exhaustive_decoder(code, p)
        return MLDDecoder(code, p, w_max if w_max is not None else DEFAULT_W_MAX)

    if kind == "constant":
        return ConstantDecoder(code)

    raise ValueError(f"Unknown decoder: {name!r} (choose from {', '.join(DECODER_NAMES)})")
