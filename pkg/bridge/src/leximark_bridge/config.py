from __future__ import annotations

from dataclasses import dataclass

#: Model id that selects the built-in deterministic tiny-weights backend.
STUB_MODEL_ID = "stub"


class BridgeConfigError(ValueError):
    pass


@dataclass
class BridgeConfig:
    lm_model_id: str = STUB_MODEL_ID
    embed_model_id: str = STUB_MODEL_ID
    lexsub_model_id: str = STUB_MODEL_ID
    device: str = "cpu"
    max_length: int = 512
    port: int = 8100

    def __post_init__(self) -> None:
        if self.max_length < 16:
            raise BridgeConfigError(
                f"max_length must be >= 16, got {self.max_length}"
            )
        if not (0 < self.port < 65536):
            raise BridgeConfigError(f"port {self.port} out of range")
