"""specbridge: compile problem-space neural network specifications to
training losses, exact verifier queries and proof-assistant interfaces."""

__version__ = "0.1.0"
