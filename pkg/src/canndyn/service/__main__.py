"""Run the service: python -m canndyn.service [--host H] [--port P]."""

import argparse

import uvicorn


def main() -> None:
    parser = argparse.ArgumentParser(prog="canndyn.service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    uvicorn.run("canndyn.service:app", host=args.host, port=args.port)


if __name__ == "__main__":
    main()
