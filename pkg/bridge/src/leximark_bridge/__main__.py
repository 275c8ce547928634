import argparse

import uvicorn

from .app import create_app
from .config import BridgeConfig


def main() -> None:
    parser = argparse.ArgumentParser(prog="leximark-bridge")
    parser.add_argument("--lm", default="stub", help="causal LM id, or 'stub'")
    parser.add_argument("--embed-model", default="stub")
    parser.add_argument("--lexsub-model", default="stub")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-length", type=int, default=512)
    parser.add_argument("--port", type=int, default=8100)
    args = parser.parse_args()

    config = BridgeConfig(
        lm_model_id=args.lm,
        embed_model_id=args.embed_model,
        lexsub_model_id=args.lexsub_model,
        device=args.device,
        max_length=args.max_length,
        port=args.port,
    )
    uvicorn.run(create_app(config), host="0.0.0.0", port=config.port)


if __name__ == "__main__":
    main()
