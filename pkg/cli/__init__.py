"""Командная строка sealkit."""

from cli.app import build_parser, main

__all__ = ["build_parser", "main"]
