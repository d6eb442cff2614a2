"""Runtime Manager service entry point."""
from __future__ import annotations

import logging

import click
import uvicorn

from .api import create_app
from .config import load_config


@click.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Service configuration JSON file.")
@click.option("--listen", default=None, help="Override the listen address (host:port).")
def main(config_path: str | None, listen: str | None) -> None:
    """Run the Runtime Manager REST service."""
    config = load_config(config_path)
    if listen is not None:
        config.listen = listen
    logging.basicConfig(
        level=getattr(logging, config.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
    )
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level=config.log_level)


if __name__ == "__main__":
    main()
