"""Design and verification of global-laser multiqubit Rydberg gate pulses."""

__version__ = "0.1.0"
