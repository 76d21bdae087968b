"""Exact motivic integration calculus with a p-adic counting oracle.

Subpackage map:

- ring_a: the coefficient ring (rational functions in L, positivity, theta_q)
- formula: three-sorted terms and formulas, parser and printer
- cells: integer tower cells, triangularization and set algebra
- presburger: constructible functions over Z-cells and fiberwise summation
- qplus: semiring of residue-ring definable classes
- padic: Galois rings, exact p-adic elements, counting and specialization
- cplus: combined constructible motivic functions
- vfint: valued-field cell decomposition and integration
- zeta: rational zeta series, counting side and interpolation check
- cli: command-line front end
"""

__version__ = "0.1.0"
