"""Mobilité des revenus : modèle GBM avec réinitialisations stochastiques."""
