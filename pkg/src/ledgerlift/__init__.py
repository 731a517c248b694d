"""ledgerlift: hierarchical fiscal PDF tables to validated CSV."""

__version__ = "0.1.0"
