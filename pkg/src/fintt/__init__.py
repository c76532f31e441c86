"""fintt: a nucleus for user-definable finitary dependent type theories,
checked and certified in contexted and context-free presentations."""

__version__ = "0.1.0"
