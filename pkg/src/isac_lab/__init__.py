"""Waveform, channel and radar simulation toolkit for integrated sensing and communications."""

__version__ = "0.1.0"
