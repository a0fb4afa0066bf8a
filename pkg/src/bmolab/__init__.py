"""bmolab: exact dyadic covering-lemma constructions, product-BMO estimators,
discrete analytic wavelets, Hankel/commutator matrices, and paraproduct sums,
with a CLI harness for seeded experiments."""

__version__ = "0.1.0"
