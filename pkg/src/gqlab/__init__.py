"""gqlab: geometric quantization workbench for explicit 2D symplectic models.

Computes sheaf-cohomological and Bohr-Sommerfeld quantizations from
line-bundle local data (transition functions and connection potentials on a
trivialization cover) and verifies symplectomorphism-invariance
constructively, including the complementary-cover construction and its
topological obstruction.
"""

__version__ = "0.1.0"
