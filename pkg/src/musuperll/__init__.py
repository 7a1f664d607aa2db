"""A proof kernel for circular linear logic with fixed points and
parametrised exponentials: formulas, signatures, circular proofs,
thread validity, multicut reduction and the translation into μLL∞."""

__version__ = "0.1.0"
