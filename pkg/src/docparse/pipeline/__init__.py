"""Concurrent load / layout / recognition executor and its building blocks."""
